# coding=utf-8
u"""Box geometry of dataset augmentation."""
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
#
# Angles are degrees; a positive angle turns the picture clockwise as seen
# on screen (image y grows downwards). Images keep their size, so rotated
# boxes are clipped to the original frame.

from dataclasses import dataclass
from dataclasses import replace
import math
import os

import numpy as np
from oslo_log import log as logging
import pandas as pd

from orcharddetect import constants
from orcharddetect.detection import boxes as box_ops
from orcharddetect import exceptions as od_exc

LOG = logging.getLogger(__name__)

LOG_COLUMNS = ('source', 'output', 'op', 'param', 'kept', 'dropped')


@dataclass(frozen=True)
class AugmentSpec(object):
    """One augmentation: ``param`` is the angle of ``rotate``, the sigma
    of ``gaussian_blur`` and the standard deviation of ``additive_noise``.
    """

    op: str
    param: float = None

    def __post_init__(self):
        if self.op == constants.AUGMENT_MIRROR:
            return
        if self.op == constants.AUGMENT_ROTATE:
            if self.param is None or not (
                    abs(self.param) <= constants.MAX_ROTATION_DEGREES):
                raise od_exc.InvalidAugmentSpec(
                    op=self.op,
                    reason="angle must lie within +/-%g degrees, got %s" %
                           (constants.MAX_ROTATION_DEGREES, self.param))
            return
        if self.op in constants.PIXEL_AUGMENT_OPS:
            if self.param is None or not self.param > 0:
                raise od_exc.InvalidAugmentSpec(
                    op=self.op, reason="needs a positive strength")
            return
        raise od_exc.InvalidAugmentSpec(op=self.op, reason="unknown op")

    @property
    def geometric(self):
        return self.op in constants.GEOMETRIC_AUGMENT_OPS

    @property
    def tag(self):
        if self.op == constants.AUGMENT_MIRROR:
            return 'mirror'
        if self.op == constants.AUGMENT_ROTATE:
            return 'rot%+g' % self.param
        return '%s%g' % (self.op, self.param)


def parse_augment_spec(text):
    """``mirror_h``, ``rotate:30``, ``gaussian_blur:1.5`` and the like."""
    op, _, param = text.strip().partition(':')
    if not param:
        return AugmentSpec(op)
    try:
        return AugmentSpec(op, float(param))
    except ValueError:
        raise od_exc.InvalidAugmentSpec(
            op=op, reason="'%s' is not a number" % param)


def mirror_box(box, image_width):
    """Reflect a corner box about the vertical midline."""
    xmin, ymin, xmax, ymax = box
    return (image_width - xmax, ymin, image_width - xmin, ymax)


def rotated_hull(box, angle, image_size):
    """Axis-aligned hull of the box corners turned about the image centre."""
    width, height = image_size
    cx, cy = width / 2.0, height / 2.0
    theta = math.radians(angle)
    cos, sin = math.cos(theta), math.sin(theta)
    xmin, ymin, xmax, ymax = box
    corners = np.array([(xmin, ymin), (xmax, ymin), (xmax, ymax),
                        (xmin, ymax)], dtype=float) - (cx, cy)
    xs = cx + cos * corners[:, 0] - sin * corners[:, 1]
    ys = cy + sin * corners[:, 0] + cos * corners[:, 1]
    return (float(xs.min()), float(ys.min()), float(xs.max()),
            float(ys.max()))


def rotate_box(box, angle, image_size):
    """Rotated, hulled and clipped box.

    :raises: DegenerateBox when nothing of the hull stays in the image
    """
    width, height = image_size
    hull = rotated_hull(box, angle, image_size)
    clipped = box_ops.clip_boxes(hull, width, height)
    return tuple(float(v) for v in box_ops.validate_box(clipped))


def visible_fraction(box, angle, image_size):
    """Share of the rotated hull that stays inside the image."""
    width, height = image_size
    hull = rotated_hull(box, angle, image_size)
    clipped = box_ops.clip_boxes(hull, width, height)
    area = box_ops.box_area(hull)
    return float(box_ops.box_area(clipped) / area) if area > 0 else 0.0


def augment_boxes(gt_boxes, spec, image_size,
                  min_visible=constants.MIN_VISIBLE_FRACTION):
    """Transform the boxes of one image.

    Rotated boxes showing less than ``min_visible`` of their hull are
    dropped. Pixel-only ops return the boxes unchanged.

    :param gt_boxes: list of GroundTruthBox
    :returns: (kept boxes, number dropped)
    """
    if not spec.geometric:
        return list(gt_boxes), 0
    width, _ = image_size
    kept, dropped = [], 0
    for gt in gt_boxes:
        if spec.op == constants.AUGMENT_MIRROR:
            corners = mirror_box(gt.box, width)
        else:
            fraction = visible_fraction(gt.box, spec.param, image_size)
            if fraction <= 0.0 or fraction < min_visible:
                dropped += 1
                continue
            corners = rotate_box(gt.box, spec.param, image_size)
        kept.append(replace(gt, xmin=corners[0], ymin=corners[1],
                            xmax=corners[2], ymax=corners[3]))
    if dropped:
        LOG.warning("%s: %s dropped %d of %d boxes" %
                    (gt_boxes[0].image_name, spec.tag, dropped,
                     len(gt_boxes)))
    return kept, dropped


def augmented_name(image_name, spec):
    stem, ext = os.path.splitext(image_name)
    return '%s_%s%s' % (stem, spec.tag, ext)


def augment_document(document, spec,
                     min_visible=constants.MIN_VISIBLE_FRACTION):
    """Augmented copy of an annotation and its log record.

    :returns: (VocDocument, dict with the LOG_COLUMNS keys)
    :raises: MalformedXml when the annotation has no image size
    """
    if document.width is None or document.height is None:
        raise od_exc.MalformedXml(
            source=document.image_name,
            reason="no <size>; boxes cannot be transformed")
    name = augmented_name(document.image_name, spec)
    kept, dropped = augment_boxes(document.boxes, spec,
                                  (document.width, document.height),
                                  min_visible)
    kept = [replace(gt, image_name=name) for gt in kept]
    record = {'source': document.image_name, 'output': name,
              'op': spec.op, 'param': spec.param, 'kept': len(kept),
              'dropped': dropped}
    return replace(document, image_name=name, boxes=kept), record


def format_augment_log(records):
    frame = pd.DataFrame(records, columns=list(LOG_COLUMNS))
    return frame.to_csv(index=False, lineterminator='\n',
                        float_format='%g')

