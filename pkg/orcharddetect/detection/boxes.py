# coding=utf-8
u"""Box forms and intersection-over-union."""
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
# Corner form is (xmin, ymin, xmax, ymax), center form (cx, cy, w, h).
# Areas are continuous: a box from 0 to 2 is 2 pixels wide.

import numpy as np

from orcharddetect import exceptions as od_exc

FORM_CORNER = 'corner'
FORM_CENTER = 'center'


def corner_to_center(boxes):
    boxes = np.asarray(boxes, dtype=float)
    width = boxes[..., 2] - boxes[..., 0]
    height = boxes[..., 3] - boxes[..., 1]
    return np.stack([boxes[..., 0] + width / 2.0,
                     boxes[..., 1] + height / 2.0, width, height], axis=-1)


def center_to_corner(boxes):
    boxes = np.asarray(boxes, dtype=float)
    half_w = boxes[..., 2] / 2.0
    half_h = boxes[..., 3] / 2.0
    return np.stack([boxes[..., 0] - half_w, boxes[..., 1] - half_h,
                     boxes[..., 0] + half_w, boxes[..., 1] + half_h],
                    axis=-1)


def as_corner(boxes, form=FORM_CORNER):
    if form == FORM_CORNER:
        return np.asarray(boxes, dtype=float)
    if form == FORM_CENTER:
        return center_to_corner(boxes)
    raise od_exc.DomainError(reason="unknown box form '%s'" % form)


def box_area(boxes):
    boxes = np.asarray(boxes, dtype=float)
    return ((boxes[..., 2] - boxes[..., 0]) *
            (boxes[..., 3] - boxes[..., 1]))


def validate_box(box):
    """Return the corner box as a float array.

    :raises: DegenerateBox when the box has no positive area
    """
    box = np.asarray(box, dtype=float)
    if not (np.all(np.isfinite(box)) and box[2] > box[0] and
            box[3] > box[1]):
        raise od_exc.DegenerateBox(box=tuple(box.tolist()))
    return box


def iou_matrix(boxes_a, boxes_b):
    """Pairwise IoU of corner boxes, shape (len(a), len(b))."""
    a = np.asarray(boxes_a, dtype=float).reshape(-1, 4)
    b = np.asarray(boxes_b, dtype=float).reshape(-1, 4)
    if len(a) == 0 or len(b) == 0:
        return np.zeros((len(a), len(b)))
    left = np.maximum(a[:, np.newaxis, 0], b[np.newaxis, :, 0])
    top = np.maximum(a[:, np.newaxis, 1], b[np.newaxis, :, 1])
    right = np.minimum(a[:, np.newaxis, 2], b[np.newaxis, :, 2])
    bottom = np.minimum(a[:, np.newaxis, 3], b[np.newaxis, :, 3])
    inter = np.clip(right - left, 0, None) * np.clip(bottom - top, 0, None)
    union = box_area(a)[:, np.newaxis] + box_area(b)[np.newaxis, :] - inter
    with np.errstate(divide='ignore', invalid='ignore'):
        ratio = np.where(union > 0, inter / union, 0.0)
    return ratio


def iou(box_a, box_b, form=FORM_CORNER):
    """IoU of two boxes in the same form; 0 when they are disjoint.

    >>> iou((0, 0, 2, 2), (1, 1, 3, 3))  # 1 / 7
    0.14285714285714285
    """
    return float(iou_matrix(as_corner(box_a, form),
                            as_corner(box_b, form))[0, 0])


def dims_iou(dims, centroids):
    """IoU of co-centred boxes given only (w, h), shape (N, K).

    :raises: DomainError on a non-positive width or height
    """
    dims = np.asarray(dims, dtype=float).reshape(-1, 2)
    centroids = np.asarray(centroids, dtype=float).reshape(-1, 2)
    if np.any(dims <= 0) or np.any(centroids <= 0):
        raise od_exc.DomainError(
            reason="box dimensions must be positive")
    inter = (np.minimum(dims[:, np.newaxis, 0], centroids[np.newaxis, :, 0]) *
             np.minimum(dims[:, np.newaxis, 1], centroids[np.newaxis, :, 1]))
    area_d = (dims[:, 0] * dims[:, 1])[:, np.newaxis]
    area_c = (centroids[:, 0] * centroids[:, 1])[np.newaxis, :]
    return inter / (area_d + area_c - inter)


def clip_boxes(boxes, width, height):
    """Clamp corner boxes to [0, width] x [0, height]."""
    boxes = np.array(boxes, dtype=float)
    boxes[..., 0::2] = np.clip(boxes[..., 0::2], 0.0, width)
    boxes[..., 1::2] = np.clip(boxes[..., 1::2], 0.0, height)
    return boxes


def nms_indices(boxes, scores, iou_threshold):
    """Greedy non-maximum suppression over corner boxes.

    The highest score is kept and every box overlapping it by more than
    ``iou_threshold`` is dropped, until no box is left. Equal scores keep
    their input order.

    :returns: kept indices, highest score first
    """
    boxes = np.asarray(boxes, dtype=float).reshape(-1, 4)
    scores = np.asarray(scores, dtype=float)
    order = np.argsort(-scores, kind='stable')
    keep = []
    while order.size > 0:
        index = order[0]
        keep.append(int(index))
        overlap = iou_matrix(boxes[index], boxes[order[1:]])[0]
        order = order[1:][overlap <= iou_threshold]
    return keep
