# coding=utf-8
u"""Batch commands of the orchard pipeline."""
# Copyright (c) 2019-2020, Orchard Detection Toolkit Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#    http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
#

"""
.. module:: pipeline_library
    :synopsis: File-level implementation of every pipeline command.

Each command takes a validated ``PipelineConfig`` and writes into
``[paths] output_dir``:

* ``tag`` -- ``tags/<image>.csv`` with the visible tree bases of every
  image, plus ``tags/<image>_tagged.png`` with ``--crop-render-tags``.
* ``crop`` -- ``manifest.csv``, ``missing.txt`` and ``crops/<tree>.png``.
* ``anchors`` -- ``box_dims.csv``, ``wss.csv``, ``elbow.csv``,
  ``anchor_fit.csv`` and, when ``[anchors] k`` is set, ``anchors.conf``.
* ``eval`` -- ``metrics.csv``.
* ``augment`` -- ``augmented/<image>_<op>.xml`` and ``augment_log.csv``.
* ``split`` -- ``train.txt``, ``test.txt`` and ``val.txt``.
* ``yield`` -- ``yield.csv``, the per-tree fruit counts joined to the
  tree map.

Reruns with the same configuration produce byte-identical files.
"""

from collections import Counter
from collections import defaultdict
from dataclasses import dataclass
import io
import math
import os

import numpy as np
from oslo_log import log as logging
from oslo_utils import fileutils
import pandas as pd
from PIL import Image
from PIL import ImageDraw

from orcharddetect import constants
from orcharddetect.detection import anchors
from orcharddetect.detection import augmentation
from orcharddetect.detection import evaluation
from orcharddetect import exceptions as od_exc
from orcharddetect.preprocess import crop_planner
from orcharddetect.preprocess import ingest
from orcharddetect.preprocess import projection
from orcharddetect.preprocess import terrain
from orcharddetect.utils import fileio

LOG = logging.getLogger(__name__)

TAG_RADIUS = 12
YIELD_COLUMNS = ('tree_id', 'row', 'col', 'x', 'y', 'base_z', 'height',
                 'image')


@dataclass(eq=False)
class Project(object):
    """Cameras and tree map of one survey."""

    cameras: list
    trees: list
    rows: list

    @property
    def row_spacing(self):
        return {row.row_index: row.spacing for row in self.rows}


def _csv(frame, **kwargs):
    return frame.to_csv(index=False, lineterminator='\n', **kwargs)


def _stem(name):
    return os.path.splitext(os.path.basename(name))[0]


def _read(config, option):
    path = config.path(option)
    return fileio.read_text(path, option.replace('_', '-')), path


def load_tree_map(config):
    """Rows, DTM and DSM of the configuration turned into TreeRecords."""
    text, source = _read(config, 'rows')
    rows = ingest.parse_rows_csv(text, source)
    text, source = _read(config, 'dtm')
    dtm = ingest.parse_ascii_grid(text, source)
    text, source = _read(config, 'dsm')
    dsm = ingest.parse_ascii_grid(text, source)
    return rows, terrain.build_tree_records(rows, dtm, dsm)


def load_project(config):
    """Parse the survey files into matrix cameras and the tree map.

    :returns: Project
    """
    text, source = _read(config, 'pmatrix')
    poses = ingest.parse_pmatrix(text, source)
    text, source = _read(config, 'offset')
    offset = ingest.parse_offset(text, source).as_array()
    rows, trees = load_tree_map(config)
    width, height = config.image_size
    cameras = [projection.MatrixCamera(name=pose.image_name,
                                       pmatrix=pose.pmatrix,
                                       image_width=width,
                                       image_height=height, offset=offset)
               for pose in poses]
    LOG.info("Loaded %d cameras and %d trees" % (len(cameras), len(trees)))
    return Project(cameras=cameras, trees=trees, rows=rows)


def load_annotations(directory, class_labels=constants.CLASS_LABELS):
    """Every ``*.xml`` VOC document of a directory, in file name order."""
    if not os.path.isdir(directory):
        raise od_exc.ConfigPathMissing(option='annotations-dir',
                                       path=directory)
    documents = []
    for name in sorted(os.listdir(directory)):
        if not name.lower().endswith('.xml'):
            continue
        path = os.path.join(directory, name)
        documents.append(ingest.parse_voc_document(
            fileio.read_text(path), source=path, image_name=_stem(name),
            class_labels=class_labels))
    LOG.info("Loaded %d annotation files from %s" %
             (len(documents), directory))
    return documents


def open_image(path):
    """Load an image fully, mapping every failure to ImageUnreadable."""
    try:
        image = Image.open(path)
        image.load()
    except OSError as exc:
        raise od_exc.ImageUnreadable(path=path, reason=exc)
    return image


def png_bytes(image):
    buffer = io.BytesIO()
    image.save(buffer, format='PNG')
    return buffer.getvalue()


def render_tags(image, sightings):
    """Copy of the image with every sighted tree marked and named."""
    tagged = image.convert('RGB')
    draw = ImageDraw.Draw(tagged)
    for sighting in sightings:
        u, v = sighting.base_px
        draw.ellipse((u - TAG_RADIUS, v - TAG_RADIUS, u + TAG_RADIUS,
                      v + TAG_RADIUS), outline=(255, 0, 0), width=3)
        draw.text((u + TAG_RADIUS, v - 2 * TAG_RADIUS), sighting.tree_id,
                  fill=(255, 255, 0))
    return tagged


def tag_images(config):
    """Write the tree bases visible in every image.

    :returns: dict of image name -> list of TreeSighting
    """
    project = load_project(config)
    tag_dir = config.output('tags')
    fileutils.ensure_tree(tag_dir)
    tagged = {}
    for camera in sorted(project.cameras, key=lambda c: c.name):
        sightings = crop_planner.visible_trees(camera, project.trees)
        tagged[camera.name] = sightings
        fileio.write_atomic(os.path.join(tag_dir, _stem(camera.name) +
                                         '.csv'),
                            crop_planner.tag_table(sightings))
        if config.render_tags:
            image = open_image(os.path.join(config.path('images_dir'),
                                            camera.name))
            fileio.write_atomic(
                os.path.join(tag_dir, _stem(camera.name) + '_tagged.png'),
                png_bytes(render_tags(image, sightings)))
    LOG.info("Tagged %d images" % len(tagged))
    return tagged


def crop_images(config):
    """Assign every tree to one image, write the manifest and the crops.

    :returns: CropManifest
    """
    project = load_project(config)
    manifest = crop_planner.plan_survey(project.cameras, project.trees,
                                        project.row_spacing,
                                        config.crop_margin)
    fileio.write_atomic(config.output('manifest.csv'),
                        crop_planner.format_manifest(manifest))
    fileio.write_atomic(config.output('missing.txt'),
                        crop_planner.format_missing(manifest))

    crop_dir = config.output('crops')
    fileutils.ensure_tree(crop_dir)
    by_image = defaultdict(list)
    for crop in manifest.crops:
        by_image[crop.image_name].append(crop)
    for image_name in sorted(by_image):
        image = open_image(os.path.join(config.path('images_dir'),
                                        image_name))
        if image.size != tuple(config.image_size):
            LOG.warning("%s is %dx%d, configured size is %dx%d" %
                        ((image_name,) + image.size +
                         tuple(config.image_size)))
        for crop in by_image[image_name]:
            box = (crop.xmin, crop.ymin, crop.xmax, crop.ymax)
            fileio.write_atomic(os.path.join(crop_dir,
                                             crop.tree_id + '.png'),
                                png_bytes(image.crop(box)))
    LOG.info("Wrote %d crops from %d images" %
             (len(manifest.crops), len(by_image)))
    return manifest


def resized_box_dims(documents, config):
    """Box (w, h) of every annotation in resized-image space."""
    opts = config.anchors
    dims = []
    for document in documents:
        width, height = config.image_size
        if document.width and document.height:
            width, height = document.width, document.height
        scale = anchors.resize_scale(width, height,
                                     opts['resize_min_dimension'],
                                     opts['resize_max_dimension'])
        dims.extend((box.width * scale, box.height * scale)
                    for box in document.boxes)
    return np.array(dims, dtype=float).reshape(-1, 2)


def baseline_spec(config):
    opts = config.anchors
    return anchors.AnchorSpec(base_size=opts['base_size'],
                              scales=tuple(opts['scales']),
                              aspect_ratios=tuple(opts['aspect_ratios']),
                              height_stride=opts['height_stride'],
                              width_stride=opts['width_stride'])


def design_anchors(config):
    """WSS tables for both metrics and, on request, a k-means spec.

    :returns: dict with ``curves``, ``elbows`` and ``spec`` (or None)
    :raises: InsufficientBoxes
    """
    opts = config.anchors
    documents = load_annotations(config.path('annotations_dir'),
                                 config.evaluation['class_labels'])
    dims = resized_box_dims(documents, config)
    if len(dims) == 0:
        raise od_exc.InsufficientBoxes(k=1, count=0)
    k_max = opts['k_max']
    if k_max > len(dims):
        LOG.warning("k_max %d exceeds the %d boxes; clamped" %
                    (k_max, len(dims)))
        k_max = len(dims)

    curves = {}
    for metric in constants.KMEANS_METRICS:
        curves[metric] = anchors.wss_curve(dims, k_max, metric, config.seed,
                                           opts['restarts'],
                                           opts['max_iter'])
    elbows = {metric: anchors.suggest_elbow(curve)
              for metric, curve in curves.items()}
    for metric, k in sorted(elbows.items()):
        LOG.info("Suggested elbow for %s distance: k=%s" % (metric, k))

    fileio.write_atomic(config.output('box_dims.csv'),
                        anchors.format_box_dims(dims))
    fileio.write_atomic(config.output('wss.csv'), anchors.format_wss_table(
        curves[constants.METRIC_EUCLIDEAN], curves[constants.METRIC_IOU]))
    fileio.write_atomic(config.output('elbow.csv'), _csv(pd.DataFrame(
        [(metric, '' if k is None else k)
         for metric, k in sorted(elbows.items())],
        columns=['metric', 'k'])))

    baseline = baseline_spec(config)
    fit = [('baseline', anchors.mean_best_iou(dims, baseline)),
           ('faster_rcnn', anchors.mean_best_iou(
               dims, anchors.preset('faster_rcnn')))]
    spec = None
    if opts['k']:
        result = anchors.kmeans_boxes(dims, opts['k'], opts['metric'],
                                      config.seed, opts['restarts'],
                                      opts['max_iter'])
        spec = anchors.centroids_to_anchor_spec(
            result.centroids, opts['base_size'], baseline)
        fileio.write_atomic(config.output('anchors.conf'),
                            anchors.format_anchor_spec(spec))
        fit.append(('kmeans_%s_k%d' % (opts['metric'], opts['k']),
                    anchors.mean_best_iou(dims, spec)))
    fileio.write_atomic(config.output('anchor_fit.csv'), _csv(
        pd.DataFrame(fit, columns=['design', 'mean_best_iou']),
        float_format='%.6f'))
    return {'curves': curves, 'elbows': elbows, 'spec': spec}


def load_detections(config):
    text, source = _read(config, 'detections')
    return evaluation.parse_detections_csv(
        text, source, config.evaluation['class_labels'])


def evaluate(config):
    """Score a detections CSV against the annotation directory.

    :returns: EvaluationReport
    """
    opts = config.evaluation
    documents = load_annotations(config.path('annotations_dir'),
                                 opts['class_labels'])
    gts = [box for document in documents for box in document.boxes]
    report = evaluation.evaluate_dataset(
        load_detections(config), gts, opts['class_labels'],
        opts['calibration_weights'], opts['iou_threshold'],
        opts['ap_method'], opts['max_detections'])
    fileio.write_atomic(config.output('metrics.csv'),
                        evaluation.format_report(report))
    return report


def augment_annotations(config):
    """Write one transformed annotation per document and op.

    :returns: list of log records
    """
    specs = [augmentation.parse_augment_spec(text)
             for text in config.augment_ops]
    documents = load_annotations(config.path('annotations_dir'),
                                 config.evaluation['class_labels'])
    out_dir = config.output('augmented')
    fileutils.ensure_tree(out_dir)
    records = []
    for document in documents:
        for spec in specs:
            augmented, record = augmentation.augment_document(
                document, spec, config.min_visible_fraction)
            fileio.write_atomic(
                os.path.join(out_dir, _stem(augmented.image_name) + '.xml'),
                ingest.render_voc_document(augmented))
            records.append(record)
    fileio.write_atomic(config.output('augment_log.csv'),
                        augmentation.format_augment_log(records))
    LOG.info("Wrote %d augmented annotations" % len(records))
    return records


def _cut(names, fraction):
    count = int(math.floor(fraction * len(names) + 1e-9))
    return names[:count], names[count:]


def split_annotations(config):
    """Seeded, unstratified train/test and train/validation partition.

    :returns: dict of split name -> sorted annotation stems
    """
    directory = config.path('annotations_dir')
    names = sorted(_stem(n) for n in os.listdir(directory)
                   if n.lower().endswith('.xml'))
    rng = np.random.default_rng(config.seed)
    shuffled = [names[i] for i in rng.permutation(len(names))]
    train, test = _cut(shuffled, config.split_fraction)
    splits = {'train': train, 'test': test}
    if config.split_validation:
        splits['train'], splits['val'] = _cut(train, config.split_fraction)
    for name, members in splits.items():
        fileio.write_atomic(config.output(name + '.txt'),
                            ''.join('%s\n' % m for m in sorted(members)))
    LOG.info("Split %d annotations: %s" %
             (len(names), ', '.join('%s=%d' % (k, len(v))
                                    for k, v in sorted(splits.items()))))
    return {name: sorted(members) for name, members in splits.items()}


def yield_map(config):
    """Per-tree fruit counts of the crop detections, on the tree map.

    Detections are matched to trees by the crop file name. Trees without
    a crop keep empty counts.

    :returns: pandas DataFrame of the written yield.csv
    """
    labels = list(config.evaluation['class_labels'])
    _, trees = load_tree_map(config)
    text, source = _read(config, 'manifest')
    image_of = {crop.tree_id: crop.image_name
                for crop in crop_planner.parse_manifest(text, source)}
    known = {tree.tree_id for tree in trees}
    counts = defaultdict(Counter)
    unknown = 0
    for det in load_detections(config):
        tree_id = _stem(det.image_name)
        if tree_id not in known:
            unknown += 1
            continue
        if det.confidence >= config.confidence_threshold:
            counts[tree_id][det.class_label] += 1
    if unknown:
        LOG.warning("%d detections belong to no known tree" % unknown)

    records = []
    for tree in trees:
        record = [tree.tree_id, tree.row, tree.col, float(tree.base[0]),
                  float(tree.base[1]), float(tree.base[2]), tree.height,
                  image_of.get(tree.tree_id, '')]
        if tree.tree_id in image_of:
            found = [counts[tree.tree_id][label] for label in labels]
            record.extend(found + [sum(found)])
        else:
            record.extend([None] * (len(labels) + 1))
        records.append(record)
    count_columns = labels + ['total']
    frame = pd.DataFrame(records,
                         columns=list(YIELD_COLUMNS) + count_columns)
    for column in count_columns:
        frame[column] = frame[column].astype('Int64')
    fileio.write_atomic(config.output('yield.csv'),
                        _csv(frame, float_format='%.3f'))
    LOG.info("Yield map of %d trees, %d cropped" %
             (len(trees), len(image_of)))
    return frame
