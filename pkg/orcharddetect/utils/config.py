# coding=utf-8
u"""Configuration options of the orchard pipeline."""
# Copyright (c) 2019-2020, Orchard Detection Toolkit Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#   http://www.apache.org/licenses/LICENSE-2.0
#
#   Unless required by applicable law or agreed to in writing, software
#   distributed under the License is distributed on an "AS IS" BASIS,
#   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
#   See the License for the specific language governing permissions and
#   limitations under the License.

"""
.. module:: config
    :synopsis: oslo.config options and the immutable run configuration.

Every option lives in a group, can be set in the ``--config-file`` and
overridden on the command line (``--crop-margin 0.2``). The command line
wins.
"""

from dataclasses import dataclass
import os

from oslo_config import cfg
from oslo_config import types
from oslo_log import log as logging

from orcharddetect import constants
from orcharddetect import exceptions as od_exc

LOG = logging.getLogger(__name__)

COMMANDS = ('tag', 'crop', 'anchors', 'eval', 'augment', 'split', 'yield')

DEFAULT_OPTS = [
    cfg.IntOpt('seed', default=0,
               help='Seed of every random choice (k-means, splits).'),
]

PATH_OPTS = [
    cfg.StrOpt('pmatrix', help='Pix4D pmatrix.txt of the survey.'),
    cfg.StrOpt('offset', help='Pix4D offset.xyz of the survey.'),
    cfg.StrOpt('dtm', help='ESRI ASCII grid of bare ground elevation.'),
    cfg.StrOpt('dsm', help='ESRI ASCII grid of canopy surface elevation.'),
    cfg.StrOpt('rows', help='Orchard rows CSV with RTK row end points.'),
    cfg.StrOpt('images-dir', help='Directory of the raw survey images.'),
    cfg.StrOpt('annotations-dir',
               help='Directory of PASCAL VOC annotation files.'),
    cfg.StrOpt('detections', help='Detections CSV of a trained detector.'),
    cfg.StrOpt('manifest', help='Crop manifest CSV written by crop.'),
    cfg.StrOpt('output-dir', default='.',
               help='Directory receiving every output file.'),
]

CAMERA_OPTS = [
    cfg.IntOpt('image-width', default=constants.RAW_IMAGE_WIDTH, min=1,
               help='Raw image width in pixels.'),
    cfg.IntOpt('image-height', default=constants.RAW_IMAGE_HEIGHT, min=1,
               help='Raw image height in pixels.'),
]

CROP_OPTS = [
    cfg.FloatOpt('margin', default=constants.CROP_MARGIN, min=0.0,
                 help='Fractional margin added around every tree crop.'),
    cfg.BoolOpt('render-tags', default=False,
                help='tag also draws tree identifiers onto image copies.'),
]

ANCHOR_OPTS = [
    cfg.FloatOpt('base-size', default=constants.ANCHOR_BASE_SIZE,
                 help='Anchor base size in pixels.'),
    cfg.ListOpt('scales', item_type=types.Float(),
                default=list(constants.ANCHOR_SCALES),
                help='Grid anchor scales.'),
    cfg.ListOpt('aspect-ratios', item_type=types.Float(),
                default=list(constants.ANCHOR_ASPECT_RATIOS),
                help='Grid anchor aspect ratios (h / w).'),
    cfg.IntOpt('height-stride', default=constants.ANCHOR_STRIDE, min=1),
    cfg.IntOpt('width-stride', default=constants.ANCHOR_STRIDE, min=1),
    cfg.IntOpt('feature-stride', default=constants.FEATURE_STRIDE, min=1),
    cfg.IntOpt('resize-min-dimension',
               default=constants.RESIZE_MIN_DIMENSION, min=1),
    cfg.IntOpt('resize-max-dimension',
               default=constants.RESIZE_MAX_DIMENSION, min=1),
    cfg.IntOpt('k-max', default=constants.KMEANS_K_MAX, min=1,
               help='Largest k of the WSS table.'),
    cfg.IntOpt('k', min=1,
               help='When set, anchors also writes anchors.conf for this k.'),
    cfg.StrOpt('metric', default=constants.METRIC_IOU,
               choices=constants.KMEANS_METRICS,
               help='Distance of the emitted k-means anchor spec.'),
    cfg.IntOpt('restarts', default=constants.KMEANS_RESTARTS, min=1),
    cfg.IntOpt('max-iter', default=constants.KMEANS_MAX_ITER, min=1),
    cfg.FloatOpt('nms-iou-threshold', default=constants.PROPOSAL_NMS_IOU),
    cfg.IntOpt('max-box-proposals', default=constants.MAX_BOX_PROPOSALS),
    cfg.FloatOpt('momentum', default=constants.MOMENTUM_GAMMA),
    cfg.FloatOpt('learning-rate', default=constants.LEARNING_RATE),
    cfg.FloatOpt('rpn-lambda', default=constants.RPN_LAMBDA),
    cfg.IntOpt('rpn-batch-size', default=constants.RPN_BATCH_SIZE),
]

EVALUATION_OPTS = [
    cfg.FloatOpt('iou-threshold', default=constants.EVAL_IOU,
                 min=0.0, max=1.0),
    cfg.StrOpt('ap-method', default=constants.AP_ALL_POINT,
               choices=constants.AP_METHODS),
    cfg.ListOpt('class-labels', default=list(constants.CLASS_LABELS)),
    cfg.ListOpt('calibration-weights', item_type=types.Float(),
                default=list(constants.CALIBRATION_WEIGHTS),
                help='Weight of each class label; must sum to 1.'),
    cfg.IntOpt('max-detections', default=constants.AR_MAX_DETECTIONS,
               min=1, help='Detections per image and class used for AR.'),
]

AUGMENT_OPTS = [
    cfg.ListOpt('ops', default=[constants.AUGMENT_MIRROR],
                help='Augmentations such as mirror_h or rotate:30.'),
    cfg.FloatOpt('min-visible-fraction',
                 default=constants.MIN_VISIBLE_FRACTION, min=0.0, max=1.0),
]

SPLIT_OPTS = [
    cfg.FloatOpt('fraction', default=constants.SPLIT_FRACTION,
                 min=0.0, max=1.0, help='Training share of each split.'),
    cfg.BoolOpt('validation', default=True,
                help='Split the training set again into a validation set.'),
]

YIELD_OPTS = [
    cfg.FloatOpt('confidence-threshold', default=0.5, min=0.0, max=1.0,
                 help='Detections below this confidence are not counted.'),
]

GROUPED_OPTS = (('paths', PATH_OPTS),
                ('camera', CAMERA_OPTS),
                ('crop', CROP_OPTS),
                ('anchors', ANCHOR_OPTS),
                ('evaluation', EVALUATION_OPTS),
                ('augment', AUGMENT_OPTS),
                ('split', SPLIT_OPTS),
                ('yield', YIELD_OPTS))

REQUIRED_PATHS = {
    'tag': ('pmatrix', 'offset', 'dtm', 'dsm', 'rows'),
    'crop': ('pmatrix', 'offset', 'dtm', 'dsm', 'rows', 'images_dir'),
    'anchors': ('annotations_dir',),
    'eval': ('annotations_dir', 'detections'),
    'augment': ('annotations_dir',),
    'split': ('annotations_dir',),
    'yield': ('dtm', 'dsm', 'rows', 'detections', 'manifest'),
}


def add_command_parsers(subparsers):
    for name in COMMANDS:
        subparsers.add_parser(name)


command_opt = cfg.SubCommandOpt('command', title='Commands',
                                handler=add_command_parsers,
                                help='Pipeline step to run.')


def register_opts(conf):
    conf.register_cli_opts(DEFAULT_OPTS)
    for group, opts in GROUPED_OPTS:
        conf.register_cli_opts(opts, group=group)
    conf.register_cli_opt(command_opt)


def list_opts():
    """Options for oslo-config-generator."""
    return [(None, DEFAULT_OPTS)] + [(g, o) for g, o in GROUPED_OPTS]


@dataclass(frozen=True)
class PipelineConfig(object):
    """Snapshot of the options one command runs with."""

    command: str
    seed: int
    paths: dict
    image_size: tuple
    crop_margin: float
    render_tags: bool
    anchors: dict
    evaluation: dict
    augment_ops: tuple
    min_visible_fraction: float
    split_fraction: float
    split_validation: bool
    confidence_threshold: float

    @classmethod
    def from_conf(cls, conf, command=None):
        """Build and validate a config from parsed options.

        :raises: ConfigPathMissing, WeightSum, DomainError
        """
        command = command or conf.command.name
        if command not in COMMANDS:
            raise od_exc.DomainError(reason="unknown command '%s'" % command)
        paths = {opt.dest: conf.paths[opt.dest] for opt in PATH_OPTS}
        anchors = {opt.dest: conf.anchors[opt.dest] for opt in ANCHOR_OPTS}
        evaluation = {opt.dest: conf.evaluation[opt.dest]
                      for opt in EVALUATION_OPTS}
        config = cls(
            command=command,
            seed=conf.seed,
            paths=paths,
            image_size=(conf.camera.image_width, conf.camera.image_height),
            crop_margin=conf.crop.margin,
            render_tags=conf.crop.render_tags,
            anchors=anchors,
            evaluation=evaluation,
            augment_ops=tuple(conf.augment.ops),
            min_visible_fraction=conf.augment.min_visible_fraction,
            split_fraction=conf.split.fraction,
            split_validation=conf.split.validation,
            confidence_threshold=conf['yield'].confidence_threshold)
        config.validate()
        return config

    def validate(self):
        for option in REQUIRED_PATHS[self.command]:
            path = self.paths.get(option)
            if not path or not os.path.exists(path):
                raise od_exc.ConfigPathMissing(
                    option=option.replace('_', '-'), path=path)
        weights = self.evaluation['calibration_weights']
        labels = self.evaluation['class_labels']
        if len(weights) != len(labels):
            raise od_exc.DomainError(
                reason="%d calibration weights for %d class labels" %
                       (len(weights), len(labels)))
        if abs(sum(weights) - 1.0) > constants.WEIGHT_SUM_TOLERANCE:
            raise od_exc.WeightSum(weights=tuple(weights))

    def path(self, option):
        return self.paths[option]

    def output(self, *parts):
        return os.path.join(self.paths['output_dir'], *parts)
