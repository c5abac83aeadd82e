# coding=utf-8
u"""PASCAL VOC style detection metrics and the calibrated mAP."""
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
.. module:: evaluation
    :synopsis: NMS, greedy matching, AP, calibrated mAP and AR.

Detections are pooled per class over the whole test set before AP is
computed. Confidence ties keep input order everywhere (stable sorts).
Groundtruth boxes flagged ``difficult`` are neither hits nor misses: a
detection matching one is dropped from the PR curve and they do not count
towards the number of groundtruth boxes.
"""

from collections import defaultdict
from dataclasses import dataclass
from dataclasses import field
import io
import math

import numpy as np
from oslo_log import log as logging
import pandas as pd

from orcharddetect import constants
from orcharddetect.detection import boxes as box_ops
from orcharddetect import exceptions as od_exc

LOG = logging.getLogger(__name__)

TRUE_POSITIVE = 1
FALSE_POSITIVE = 0
IGNORED = -1

REPORT_COLUMNS = ('class', 'ap@0.5')
AR_KEY = 'ar@[.5:.95]'


@dataclass(frozen=True)
class Detection(object):
    """A scored, labelled corner-form box in one image."""

    image_name: str
    class_label: str
    box: tuple
    confidence: float

    def __post_init__(self):
        object.__setattr__(self, 'box', tuple(
            float(v) for v in box_ops.validate_box(self.box)))
        if not 0.0 <= self.confidence <= 1.0:
            raise od_exc.DomainError(
                reason="confidence %s outside [0, 1]" % self.confidence)


@dataclass(frozen=True, eq=False)
class PRCurve(object):
    """Precision/recall after each ranked detection, and its AP."""

    recall: np.ndarray
    precision: np.ndarray
    ap: float
    n_gt: int

    def points(self):
        return list(zip(self.recall.tolist(), self.precision.tolist()))


@dataclass
class EvaluationReport(object):
    aps: dict = field(default_factory=dict)
    calibrated_map: float = None
    true_map: float = None
    class_discrepancy: float = None
    average_recall: float = None


def _ranked(confidences):
    return np.argsort(-np.asarray(confidences, dtype=float), kind='stable')


def nms(dets, iou_threshold=constants.PROPOSAL_NMS_IOU):
    """Greedy NMS of one class; survivors by descending confidence.

    :raises: DomainError when the detections mix classes
    """
    if not dets:
        return []
    if len({d.class_label for d in dets}) > 1:
        raise od_exc.DomainError(reason="nms expects a single class")
    keep = box_ops.nms_indices([d.box for d in dets],
                               [d.confidence for d in dets], iou_threshold)
    return [dets[i] for i in keep]


def _gt_box(gt):
    return gt.box if hasattr(gt, 'box') else tuple(gt)


def _is_difficult(gt):
    return bool(getattr(gt, 'difficult', False))


def match_detections(dets, gts, iou_threshold=constants.EVAL_IOU):
    """Greedy single-match of one image and one class.

    Detections are taken in descending confidence. Each one is a true
    positive when its best overlapping still unmatched groundtruth box
    reaches ``iou_threshold``; that box is then consumed. Otherwise it is a
    false positive. A detection whose best candidate is a difficult box is
    IGNORED and consumes nothing.

    :param dets: list of Detection (or objects with box and confidence)
    :param gts: list of GroundTruthBox or corner tuples
    :returns: int array of TRUE_POSITIVE, FALSE_POSITIVE or IGNORED, in
        the input order of ``dets``
    """
    flags = np.full(len(dets), FALSE_POSITIVE, dtype=int)
    if not dets or not gts:
        return flags
    overlaps = box_ops.iou_matrix([d.box for d in dets],
                                  [_gt_box(g) for g in gts])
    difficult = np.array([_is_difficult(g) for g in gts])
    consumed = np.zeros(len(gts), dtype=bool)
    for index in _ranked([d.confidence for d in dets]):
        candidates = np.where(consumed & ~difficult, -1.0, overlaps[index])
        best = int(np.argmax(candidates))
        if candidates[best] < iou_threshold:
            continue
        if difficult[best]:
            flags[index] = IGNORED
        else:
            flags[index] = TRUE_POSITIVE
            consumed[best] = True
    return flags


def _all_point(recall, precision):
    mrec = np.concatenate([[0.0], recall, [1.0]])
    mpre = np.concatenate([[0.0], precision, [0.0]])
    mpre = np.maximum.accumulate(mpre[::-1])[::-1]
    steps = np.flatnonzero(mrec[1:] != mrec[:-1])
    return float(np.sum((mrec[steps + 1] - mrec[steps]) * mpre[steps + 1]))


def _eleven_point(recall, precision):
    total = 0.0
    for threshold in np.linspace(0.0, 1.0, 11):
        reached = precision[recall >= threshold]
        total += reached.max() if reached.size else 0.0
    return float(total / 11.0)


def average_precision(flags, confidences, n_gt,
                      method=constants.AP_ALL_POINT):
    """AP of a ranked list of match flags.

    :param flags: per-detection TRUE_POSITIVE / FALSE_POSITIVE / IGNORED
    :param confidences: detection scores, aligned with ``flags``
    :param n_gt: number of non-difficult groundtruth boxes
    :param method: 'allpoint' (area under the precision envelope) or
        '11point'
    :returns: PRCurve
    """
    if method not in constants.AP_METHODS:
        raise od_exc.DomainError(reason="unknown AP method '%s'" % method)
    if n_gt < 0:
        raise od_exc.DomainError(reason="n_gt must be >= 0, got %s" % n_gt)
    flags = np.asarray(flags, dtype=int)
    ranked = flags[_ranked(confidences)] if len(flags) else flags
    ranked = ranked[ranked != IGNORED]
    empty = np.zeros(0)
    if n_gt == 0:
        ap = 0.0 if len(ranked) else 1.0
        LOG.info("No groundtruth boxes: AP is %.1f by convention" % ap)
        return PRCurve(recall=empty, precision=empty, ap=ap, n_gt=0)
    if len(ranked) == 0:
        return PRCurve(recall=empty, precision=empty, ap=0.0, n_gt=n_gt)

    tp = np.cumsum(ranked == TRUE_POSITIVE)
    fp = np.cumsum(ranked == FALSE_POSITIVE)
    recall = tp / float(n_gt)
    precision = tp / np.maximum(tp + fp, np.finfo(float).eps)
    if method == constants.AP_ALL_POINT:
        ap = _all_point(recall, precision)
    else:
        ap = _eleven_point(recall, precision)
    return PRCurve(recall=recall, precision=precision, ap=ap, n_gt=n_gt)


def weighted_map(aps, weights):
    """Weighted mean of per-class APs.

    :raises: WeightSum, DomainError
    """
    if len(aps) != len(weights):
        raise od_exc.DomainError(
            reason="%d APs but %d weights" % (len(aps), len(weights)))
    if abs(sum(weights) - 1.0) > constants.WEIGHT_SUM_TOLERANCE:
        raise od_exc.WeightSum(weights=tuple(weights))
    for ap in aps:
        if not 0.0 <= ap <= 1.0:
            raise od_exc.DomainError(reason="AP %s outside [0, 1]" % ap)
    return float(sum(w * ap for w, ap in zip(weights, aps)))


def calibrated_map(ap_tree, ap_ground,
                   weights=constants.CALIBRATION_WEIGHTS):
    """Class-frequency weighted mAP, 0.92 tree + 0.08 ground by default."""
    return weighted_map((ap_tree, ap_ground), weights)


def true_map(aps):
    """Unweighted mean of the per-class APs."""
    aps = list(aps)
    return weighted_map(aps, [1.0 / len(aps)] * len(aps))


def class_discrepancy(ap_tree, ap_ground):
    return abs(float(ap_tree) - float(ap_ground))


def _group(items, key):
    grouped = defaultdict(list)
    for item in items:
        grouped[key(item)].append(item)
    return grouped


def _top(dets, max_dets):
    if max_dets is None:
        return list(dets)
    order = _ranked([d.confidence for d in dets])
    return [dets[i] for i in order[:max_dets]]


def average_recall(dets, gts, iou_thresholds=constants.AR_IOU_THRESHOLDS,
                   max_dets=constants.AR_MAX_DETECTIONS):
    """Pooled recall over every groundtruth box, averaged over thresholds.

    Only the ``max_dets`` most confident detections of each image and
    class are considered.

    :param dets: list of Detection over any number of images
    :param gts: list of GroundTruthBox over the same images
    :returns: AR, or None when there is no non-difficult groundtruth
    """
    dets_by = _group(dets, lambda d: (d.class_label, d.image_name))
    gts_by = _group(gts, lambda g: (g.class_label, g.image_name))
    n_gt = sum(1 for g in gts if not _is_difficult(g))
    if n_gt == 0:
        LOG.info("No groundtruth boxes: average recall is undefined")
        return None
    recalls = []
    for threshold in iou_thresholds:
        matched = 0
        for key in sorted(gts_by):
            flags = match_detections(_top(dets_by.get(key, []), max_dets),
                                     gts_by[key], threshold)
            matched += int(np.sum(flags == TRUE_POSITIVE))
        recalls.append(matched / float(n_gt))
    return float(np.mean(recalls))


def evaluate_class(dets, gts, label, iou_threshold=constants.EVAL_IOU,
                   method=constants.AP_ALL_POINT):
    """Pooled PR curve of one class over every image."""
    dets = [d for d in dets if d.class_label == label]
    gts = [g for g in gts if g.class_label == label]
    n_gt = sum(1 for g in gts if not _is_difficult(g))
    gts_by_image = _group(gts, lambda g: g.image_name)
    # flags stay in input order so confidence ties rank by position
    flags = np.full(len(dets), FALSE_POSITIVE, dtype=int)
    positions = _group(range(len(dets)), lambda i: dets[i].image_name)
    for image, indices in positions.items():
        flags[indices] = match_detections([dets[i] for i in indices],
                                          gts_by_image.get(image, []),
                                          iou_threshold)
    return average_precision(flags, [d.confidence for d in dets], n_gt,
                             method)


def evaluate_dataset(dets, gts, class_labels=constants.CLASS_LABELS,
                     weights=constants.CALIBRATION_WEIGHTS,
                     iou_threshold=constants.EVAL_IOU,
                     method=constants.AP_ALL_POINT,
                     max_dets=constants.AR_MAX_DETECTIONS):
    """Per-class AP, calibrated and true mAP, discrepancy and AR.

    :param weights: calibration weight per entry of ``class_labels``
    :returns: EvaluationReport
    """
    report = EvaluationReport()
    for label in class_labels:
        report.aps[label] = evaluate_class(dets, gts, label, iou_threshold,
                                           method)
    aps = [report.aps[label].ap for label in class_labels]
    report.calibrated_map = weighted_map(aps, weights)
    report.true_map = true_map(aps)
    if len(aps) == 2:
        report.class_discrepancy = class_discrepancy(*aps)
    report.average_recall = average_recall(dets, gts, max_dets=max_dets)
    LOG.info("Evaluated %d detections against %d boxes: calibrated mAP "
             "%.4f" % (len(dets), len(gts), report.calibrated_map))
    return report


def _line_of(position):
    return position + 2


def parse_detections_csv(text, source='detections.csv',
                         class_labels=constants.CLASS_LABELS):
    """Read ``image,label,conf,xmin,ymin,xmax,ymax`` rows.

    :raises: MalformedLine, UnknownClass
    """
    try:
        frame = pd.read_csv(io.StringIO(text), dtype={'image': str,
                                                      'label': str})
    except pd.errors.EmptyDataError:
        raise od_exc.MalformedLine(source=source, line_no=1,
                                   reason="missing header")
    except (ValueError, pd.errors.ParserError) as exc:
        raise od_exc.MalformedLine(source=source, line_no=1, reason=exc)
    if tuple(frame.columns) != constants.DETECTION_COLUMNS:
        raise od_exc.MalformedLine(
            source=source, line_no=1,
            reason="header must be %s" %
                   ','.join(constants.DETECTION_COLUMNS))
    detections = []
    for position, record in enumerate(frame.itertuples(index=False)):
        line_no = _line_of(position)
        image, label = record[0], record[1]
        if not isinstance(image, str) or not image:
            raise od_exc.MalformedLine(source=source, line_no=line_no,
                                       reason="missing image name")
        if label not in class_labels:
            raise od_exc.UnknownClass(source='%s line %d' %
                                      (source, line_no), label=label)
        try:
            values = [float(v) for v in record[2:]]
        except (TypeError, ValueError) as exc:
            raise od_exc.MalformedLine(source=source, line_no=line_no,
                                       reason=exc)
        if not all(math.isfinite(v) for v in values):
            raise od_exc.MalformedLine(source=source, line_no=line_no,
                                       reason="non-finite value")
        try:
            detections.append(Detection(image, label, tuple(values[1:]),
                                        values[0]))
        except (od_exc.DegenerateBox, od_exc.DomainError) as exc:
            raise od_exc.MalformedLine(source=source, line_no=line_no,
                                       reason=exc)
    return detections


def format_detections_csv(dets):
    frame = pd.DataFrame(
        [(d.image_name, d.class_label, d.confidence) + d.box for d in dets],
        columns=list(constants.DETECTION_COLUMNS))
    return frame.to_csv(index=False, lineterminator='\n',
                        float_format='%.6f')


def format_report(report):
    """Metrics CSV: one AP row per class, then the summary rows."""
    def _value(value):
        return '' if value is None else '%.6f' % value
    rows = [(label, _value(curve.ap)) for label, curve in
            report.aps.items()]
    rows.append(('calibrated_map', _value(report.calibrated_map)))
    rows.append(('true_map', _value(report.true_map)))
    if report.class_discrepancy is not None:
        rows.append(('class_discrepancy',
                     _value(report.class_discrepancy)))
    rows.append((AR_KEY, _value(report.average_recall)))
    frame = pd.DataFrame(rows, columns=list(REPORT_COLUMNS))
    return frame.to_csv(index=False, lineterminator='\n')
