# coding=utf-8
u"""Region proposal supervision: labels, deltas, loss and proposals."""
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
# Anchors and decoded proposals are center form (cx, cy, w, h) unless a
# parameter says otherwise; groundtruth boxes are corner form.

from dataclasses import dataclass

import numpy as np
from oslo_log import log as logging

from orcharddetect import constants
from orcharddetect.detection import boxes as box_ops
from orcharddetect import exceptions as od_exc

LOG = logging.getLogger(__name__)

POSITIVE = 1
NEGATIVE = 0
IGNORE = -1


@dataclass(frozen=True)
class AnchorLabel(object):
    """Supervision label of one anchor; positives carry their gt index."""

    label: int
    gt_index: int = None

    def __post_init__(self):
        if self.label not in (POSITIVE, NEGATIVE, IGNORE):
            raise od_exc.DomainError(
                reason="unknown anchor label %s" % self.label)
        if self.label == POSITIVE and self.gt_index is None:
            raise od_exc.DomainError(
                reason="a positive anchor needs a groundtruth index")

    @property
    def is_positive(self):
        return self.label == POSITIVE


@dataclass(frozen=True)
class BoxDelta(object):
    tx: float
    ty: float
    tw: float
    th: float

    def as_array(self):
        return np.array([self.tx, self.ty, self.tw, self.th])


@dataclass(frozen=True)
class LossBreakdown(object):
    """Terms of the RPN multi-task loss.

    ``cls_loss`` and ``reg_loss`` are unnormalised sums and
    ``total = cls_loss / n_cls + lam * reg_loss / n_reg``.
    """

    cls_loss: float
    reg_loss: float
    total: float
    n_cls: float
    n_reg: float
    lam: float


def label_array(anchors, gts, positive_iou=constants.RPN_POSITIVE_IOU,
                negative_iou=constants.RPN_NEGATIVE_IOU,
                anchor_form=box_ops.FORM_CENTER):
    """Vectorised labelling.

    :returns: (labels, matched) arrays; matched is -1 where not positive
    """
    corners = box_ops.as_corner(np.asarray(anchors, dtype=float)
                                .reshape(-1, 4), anchor_form)
    labels = np.full(len(corners), NEGATIVE, dtype=int)
    matched = np.full(len(corners), -1, dtype=int)
    gts = np.asarray(gts, dtype=float).reshape(-1, 4)
    if len(gts) == 0:
        return labels, matched
    overlaps = box_ops.iou_matrix(corners, gts)
    best = overlaps.max(axis=1)
    argbest = overlaps.argmax(axis=1)
    labels[best >= negative_iou] = IGNORE
    positive = best > positive_iou
    labels[positive] = POSITIVE
    matched[positive] = argbest[positive]
    return labels, matched


def label_anchors(anchors, gts, positive_iou=constants.RPN_POSITIVE_IOU,
                  negative_iou=constants.RPN_NEGATIVE_IOU,
                  anchor_form=box_ops.FORM_CENTER):
    """Label anchors by their best IoU with any groundtruth box.

    Positive above ``positive_iou``, negative below ``negative_iou`` and
    ignored in between. With no groundtruth every anchor is negative.

    :returns: list of AnchorLabel
    """
    labels, matched = label_array(anchors, gts, positive_iou, negative_iou,
                                  anchor_form)
    return [AnchorLabel(int(label), int(gt) if label == POSITIVE else None)
            for label, gt in zip(labels, matched)]


def encode(anchors, gts):
    """Regression targets of center-form gts against center-form anchors."""
    anchors = np.asarray(anchors, dtype=float)
    gts = np.asarray(gts, dtype=float)
    return np.stack([(gts[..., 0] - anchors[..., 0]) / anchors[..., 2],
                     (gts[..., 1] - anchors[..., 1]) / anchors[..., 3],
                     np.log(gts[..., 2] / anchors[..., 2]),
                     np.log(gts[..., 3] / anchors[..., 3])], axis=-1)


def decode(anchors, deltas):
    """Inverse of encode: center-form boxes from anchors and deltas."""
    anchors = np.asarray(anchors, dtype=float)
    deltas = np.asarray(deltas, dtype=float)
    return np.stack([anchors[..., 0] + deltas[..., 0] * anchors[..., 2],
                     anchors[..., 1] + deltas[..., 1] * anchors[..., 3],
                     anchors[..., 2] * np.exp(deltas[..., 2]),
                     anchors[..., 3] * np.exp(deltas[..., 3])], axis=-1)


def _positive_box(box, form):
    box_ops.validate_box(box_ops.as_corner(box, form))
    if form == box_ops.FORM_CORNER:
        return box_ops.corner_to_center(box)
    return np.asarray(box, dtype=float)


def encode_deltas(anchor, gt, form=box_ops.FORM_CENTER):
    """BoxDelta taking ``anchor`` onto ``gt``.

    :raises: DegenerateBox on a box without area
    """
    values = encode(_positive_box(anchor, form), _positive_box(gt, form))
    return BoxDelta(*(float(v) for v in values))


def decode_deltas(anchor, delta, form=box_ops.FORM_CENTER):
    """Box obtained by applying ``delta`` to ``anchor``, in ``form``."""
    if isinstance(delta, BoxDelta):
        delta = delta.as_array()
    centre = decode(_positive_box(anchor, form), delta)
    if form == box_ops.FORM_CORNER:
        return box_ops.center_to_corner(centre)
    return centre


def smooth_l1(x):
    """0.5 x^2 where |x| < 1, |x| - 0.5 elsewhere; elementwise."""
    x = np.asarray(x, dtype=float)
    absolute = np.abs(x)
    value = np.where(absolute < 1.0, 0.5 * x * x, absolute - 0.5)
    return float(value) if value.ndim == 0 else value


def rpn_loss(probs, labels, deltas, targets, lam=constants.RPN_LAMBDA,
             n_cls=constants.RPN_BATCH_SIZE, n_reg=None):
    """Multi-task loss over the non-ignored anchors.

    The classification term is the binary log loss of every sampled
    anchor; the probability of the true label is floored at 1e-7, so a
    perfect prediction costs exactly 0. The regression term sums smooth
    L1 over the four deltas of the positive anchors.

    :param probs: objectness probability per anchor
    :param labels: POSITIVE, NEGATIVE or IGNORE per anchor
    :param deltas: predicted (N, 4) deltas
    :param targets: target (N, 4) deltas
    :param n_reg: number of anchor locations; defaults to len(labels)
    :returns: LossBreakdown
    :raises: DomainError on a probability outside [0, 1] or a
        non-positive normaliser
    """
    probs = np.asarray(probs, dtype=float).ravel()
    labels = np.asarray(labels, dtype=int).ravel()
    deltas = np.asarray(deltas, dtype=float).reshape(-1, 4)
    targets = np.asarray(targets, dtype=float).reshape(-1, 4)
    if not (len(probs) == len(labels) == len(deltas) == len(targets)):
        raise od_exc.DomainError(
            reason="probs, labels, deltas and targets differ in length")
    if np.any(~np.isfinite(probs)) or np.any((probs < 0) | (probs > 1)):
        raise od_exc.DomainError(
            reason="objectness probabilities must lie in [0, 1]")
    n_reg = len(labels) if n_reg is None else n_reg
    if not (n_cls > 0 and n_reg > 0):
        raise od_exc.DomainError(
            reason="loss normalisers must be positive, got n_cls=%s "
                   "n_reg=%s" % (n_cls, n_reg))

    sampled = labels != IGNORE
    positive = labels == POSITIVE
    p_true = np.where(positive, probs, 1.0 - probs)[sampled]
    cls_loss = float(-np.log(np.maximum(p_true, constants.PROB_EPSILON))
                     .sum())
    reg_loss = float(np.sum(smooth_l1(deltas[positive] - targets[positive])))
    total = cls_loss / n_cls + lam * reg_loss / n_reg
    return LossBreakdown(cls_loss=cls_loss, reg_loss=reg_loss, total=total,
                         n_cls=n_cls, n_reg=n_reg, lam=lam)


def momentum_step(theta, grad, velocity,
                  eta=constants.LEARNING_RATE,
                  gamma=constants.MOMENTUM_GAMMA):
    """One momentum update; returns (theta', velocity').

    update = gamma * velocity - eta * grad, theta' = theta + update and the
    update becomes the new velocity.
    """
    update = gamma * np.asarray(velocity, dtype=float) - \
        eta * np.asarray(grad, dtype=float)
    theta = np.asarray(theta, dtype=float) + update
    if theta.ndim == 0:
        return float(theta), float(update)
    return theta, update


def sample_minibatch(labels, batch_size=constants.RPN_BATCH_SIZE,
                     positive_fraction=constants.RPN_POSITIVE_FRACTION,
                     seed=0):
    """Keep at most ``batch_size`` labelled anchors, the rest ignored.

    Positives fill up to ``positive_fraction`` of the batch and negatives
    fill the remainder.

    :returns: new label array
    """
    labels = np.asarray(labels, dtype=int)
    rng = np.random.default_rng(seed)
    positives = np.flatnonzero(labels == POSITIVE)
    negatives = np.flatnonzero(labels == NEGATIVE)
    n_pos = min(len(positives), int(batch_size * positive_fraction))
    n_neg = min(len(negatives), batch_size - n_pos)
    sampled = np.full(len(labels), IGNORE, dtype=int)
    sampled[rng.choice(positives, n_pos, replace=False)] = POSITIVE
    sampled[rng.choice(negatives, n_neg, replace=False)] = NEGATIVE
    LOG.debug("Sampled %d positive and %d negative anchors" %
              (n_pos, n_neg))
    return sampled


def select_proposals(anchors, deltas, scores, image_size,
                     nms_iou=constants.PROPOSAL_NMS_IOU,
                     max_proposals=constants.MAX_BOX_PROPOSALS):
    """Decode, clip, suppress and keep the best scoring proposals.

    :param anchors: (N, 4) center-form anchors
    :param image_size: (width, height) of the resized image
    :returns: (boxes, scores) with corner-form boxes, best first
    """
    width, height = image_size
    scores = np.asarray(scores, dtype=float).ravel()
    corners = box_ops.clip_boxes(
        box_ops.center_to_corner(decode(anchors, deltas)), width, height)
    valid = np.flatnonzero(box_ops.box_area(corners) > 0)
    keep = box_ops.nms_indices(corners[valid], scores[valid], nms_iou)
    keep = valid[keep[:max_proposals]]
    return corners[keep], scores[keep]
