# coding=utf-8
u"""Anchor grids and k-means anchor design."""
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
.. module:: anchors
    :synopsis: Grid anchors for the RPN and k-means clustering of box sizes.

Clustering works on groundtruth (w, h) pairs in resized-image space. Two
distances are supported: squared Euclidean on (w, h), and ``1 - IoU`` of
co-centred boxes. WSS is the sum of squared distances to the assigned
centroid under the chosen metric.

Runs are reproducible: every restart draws from a child of
``numpy.random.SeedSequence(seed)``.
"""

from dataclasses import dataclass
import itertools
import math

import numpy as np
from oslo_log import log as logging
import pandas as pd

from orcharddetect import constants
from orcharddetect.detection import boxes as box_ops
from orcharddetect import exceptions as od_exc

LOG = logging.getLogger(__name__)
MEDOID_BLOCK = 1024


@dataclass(frozen=True)
class BoxDims(object):
    """Width and height of a groundtruth box, resized pixels."""

    w: float
    h: float

    def __post_init__(self):
        if not (self.w > 0 and self.h > 0):
            raise od_exc.DomainError(
                reason="box dimensions must be positive, got (%s, %s)" %
                       (self.w, self.h))


@dataclass(frozen=True)
class AnchorSpec(object):
    """Anchor shapes tiled at every feature map location.

    A plain spec crosses every scale with every aspect ratio (h / w). A
    ``paired`` spec, as produced from k-means centroids, zips them.
    """

    base_size: float = constants.ANCHOR_BASE_SIZE
    scales: tuple = constants.ANCHOR_SCALES
    aspect_ratios: tuple = constants.ANCHOR_ASPECT_RATIOS
    height_stride: int = constants.ANCHOR_STRIDE
    width_stride: int = constants.ANCHOR_STRIDE
    paired: bool = False

    def __post_init__(self):
        object.__setattr__(self, 'scales',
                           tuple(float(s) for s in self.scales))
        object.__setattr__(self, 'aspect_ratios',
                           tuple(float(r) for r in self.aspect_ratios))
        if not self.scales or not self.aspect_ratios:
            raise od_exc.DomainError(
                reason="anchor scales and aspect ratios must be non-empty")
        if min(self.scales + self.aspect_ratios) <= 0:
            raise od_exc.DomainError(
                reason="anchor scales and aspect ratios must be positive")
        if self.height_stride < 1 or self.width_stride < 1:
            raise od_exc.DomainError(reason="anchor strides must be >= 1")
        if not self.base_size > 0:
            raise od_exc.DomainError(reason="anchor base size must be > 0")
        if self.paired and len(self.scales) != len(self.aspect_ratios):
            raise od_exc.DomainError(
                reason="paired anchor spec needs as many scales as ratios")

    def pairs(self):
        """(scale, ratio) of each anchor at one location, in order."""
        if self.paired:
            return list(zip(self.scales, self.aspect_ratios))
        return list(itertools.product(self.scales, self.aspect_ratios))

    @property
    def anchors_per_location(self):
        return len(self.pairs())


PRESETS = {
    'baseline': AnchorSpec(),
    'faster_rcnn': AnchorSpec(scales=constants.FASTER_RCNN_SCALES,
                              aspect_ratios=(
                                  constants.FASTER_RCNN_ASPECT_RATIOS)),
}


def preset(name):
    try:
        return PRESETS[name]
    except KeyError:
        raise od_exc.DomainError(
            reason="unknown anchor preset '%s', expected one of %s" %
                   (name, sorted(PRESETS)))


@dataclass(frozen=True, eq=False)
class ClusterResult(object):
    """Best k-means solution over all restarts."""

    centroids: np.ndarray
    assignments: np.ndarray
    wss: float
    metric: str
    restart: int
    iterations: int

    @property
    def k(self):
        return len(self.centroids)

    def centroid_dims(self):
        return [BoxDims(float(w), float(h)) for w, h in self.centroids]


def anchor_dims(spec):
    """(w, h) of each anchor of a spec; area is preserved across ratios."""
    return np.array([(spec.base_size * s / math.sqrt(r),
                      spec.base_size * s * math.sqrt(r))
                     for s, r in spec.pairs()])


def generate_anchor_grid(spec, fmap_w, fmap_h):
    """Center-form anchors for every cell of a feature map.

    Cells are visited row by row; each cell contributes its anchors in
    ``spec.pairs()`` order, centred at (col + 1/2, row + 1/2) strides.

    :returns: (fmap_w * fmap_h * anchors_per_location, 4) array
    """
    dims = anchor_dims(spec)
    xs = (np.arange(fmap_w) + 0.5) * spec.width_stride
    ys = (np.arange(fmap_h) + 0.5) * spec.height_stride
    cx, cy = np.meshgrid(xs, ys)
    centres = np.stack([cx.ravel(), cy.ravel()], axis=-1)
    grid = np.empty((len(centres), len(dims), 4))
    grid[:, :, 0:2] = centres[:, np.newaxis, :]
    grid[:, :, 2:4] = dims[np.newaxis, :, :]
    return grid.reshape(-1, 4)


def resize_scale(width, height, min_dim=constants.RESIZE_MIN_DIMENSION,
                 max_dim=constants.RESIZE_MAX_DIMENSION):
    """Scale of the fixed-aspect resizer.

    The short side becomes ``min_dim`` unless that pushes the long side
    past ``max_dim``, in which case the long side becomes ``max_dim``.
    """
    if not (width > 0 and height > 0):
        raise od_exc.DomainError(
            reason="image size must be positive, got %sx%s" %
                   (width, height))
    scale = float(min_dim) / min(width, height)
    if max(width, height) * scale > max_dim:
        scale = float(max_dim) / max(width, height)
    return scale


def feature_map_size(width, height, stride=constants.FEATURE_STRIDE):
    """(fmap_w, fmap_h) of a resized image at the given output stride."""
    return (int(math.ceil(width / float(stride))),
            int(math.ceil(height / float(stride))))


def _as_dims(boxes):
    if len(boxes) and isinstance(boxes[0], BoxDims):
        return np.array([(b.w, b.h) for b in boxes], dtype=float)
    dims = np.asarray(boxes, dtype=float).reshape(-1, 2)
    if np.any(dims <= 0):
        raise od_exc.DomainError(reason="box dimensions must be positive")
    return dims


def _distances(dims, centroids, metric):
    """Squared distance of every box to every centroid, shape (N, K)."""
    if metric == constants.METRIC_EUCLIDEAN:
        diff = dims[:, np.newaxis, :] - centroids[np.newaxis, :, :]
        return np.sum(diff * diff, axis=-1)
    if metric == constants.METRIC_IOU:
        return (1.0 - box_ops.dims_iou(dims, centroids)) ** 2
    raise od_exc.DomainError(reason="unknown k-means metric '%s'" % metric)


def _cost(dims, centroid, metric):
    return float(_distances(dims, centroid[np.newaxis, :], metric).sum())


def _kmeans_plus_plus(dims, k, metric, rng):
    centroids = [dims[rng.integers(len(dims))]]
    for _ in range(1, k):
        nearest = _distances(dims, np.array(centroids), metric).min(axis=1)
        total = nearest.sum()
        if total > 0:
            index = rng.choice(len(dims), p=nearest / total)
        else:
            index = rng.integers(len(dims))
        centroids.append(dims[index])
    return np.array(centroids)


def _medoid(members, metric):
    # candidate columns in blocks keep memory at m x MEDOID_BLOCK
    within = np.empty(len(members))
    for start in range(0, len(members), MEDOID_BLOCK):
        block = members[start:start + MEDOID_BLOCK]
        within[start:start + len(block)] = _distances(
            members, block, metric).sum(axis=0)
    return int(np.argmin(within))


def _update(dims, assign, centroids, metric):
    updated = centroids.copy()
    nearest = _distances(dims, centroids, metric).min(axis=1)
    for cluster in range(len(centroids)):
        members = dims[assign == cluster]
        if len(members) == 0:
            # empty cluster restarts at the worst-served box
            far = int(np.argmax(nearest))
            updated[cluster] = dims[far]
            nearest[far] = 0.0
            continue
        mean = members.mean(axis=0)
        if metric == constants.METRIC_EUCLIDEAN:
            updated[cluster] = mean
            continue
        candidates = [mean, members[_medoid(members, metric)],
                      centroids[cluster]]
        costs = [_cost(members, c, metric) for c in candidates]
        updated[cluster] = candidates[int(np.argmin(costs))]
    return updated


def _lloyd(dims, centroids, metric, max_iter):
    assign = None
    iterations = 0
    for iterations in range(1, max_iter + 1):
        fresh = np.argmin(_distances(dims, centroids, metric), axis=1)
        if assign is not None and np.array_equal(fresh, assign):
            break
        assign = fresh
        centroids = _update(dims, assign, centroids, metric)
    else:
        assign = np.argmin(_distances(dims, centroids, metric), axis=1)
    distances = _distances(dims, centroids, metric)
    wss = float(distances[np.arange(len(dims)), assign].sum())
    return centroids, assign, wss, iterations


def kmeans_boxes(boxes, k, metric=constants.METRIC_EUCLIDEAN, seed=0,
                 restarts=constants.KMEANS_RESTARTS,
                 max_iter=constants.KMEANS_MAX_ITER,
                 initial_centroids=None):
    """Cluster box dimensions with Lloyd iterations from k-means++ seeds.

    Euclidean centroids are member means. IoU centroids take whichever of
    the member mean, the member medoid and the previous centroid has the
    lowest within-cluster cost, so WSS never increases.

    :param boxes: list of BoxDims or an (N, 2) array of (w, h)
    :param initial_centroids: optional (k, 2) start run alongside the
        seeded restarts
    :returns: ClusterResult with the lowest WSS; ties go to the first run
    :raises: InsufficientBoxes, DomainError
    """
    dims = _as_dims(boxes)
    if k < 1:
        raise od_exc.DomainError(reason="k must be at least 1, got %s" % k)
    if len(dims) < k:
        raise od_exc.InsufficientBoxes(k=k, count=len(dims))
    if metric not in constants.KMEANS_METRICS:
        raise od_exc.DomainError(
            reason="unknown k-means metric '%s'" % metric)

    starts = []
    if initial_centroids is not None:
        starts.append(np.array(initial_centroids, dtype=float).reshape(k, 2))
    children = np.random.SeedSequence(seed).spawn(max(restarts, 1))
    for child in children:
        starts.append(_kmeans_plus_plus(dims, k, metric,
                                        np.random.default_rng(child)))

    best = None
    for index, start in enumerate(starts):
        centroids, assign, wss, iterations = _lloyd(dims, start, metric,
                                                    max_iter)
        LOG.debug("k-means k=%d metric=%s run %d: wss=%.6g after %d "
                  "iterations" % (k, metric, index, wss, iterations))
        if best is None or wss < best.wss:
            best = ClusterResult(centroids=centroids, assignments=assign,
                                 wss=wss, metric=metric, restart=index,
                                 iterations=iterations)
    return best


def _farthest(dims, centroids, metric):
    nearest = _distances(dims, centroids, metric).min(axis=1)
    return dims[int(np.argmax(nearest))]


def wss_curve(boxes, k_max=constants.KMEANS_K_MAX,
              metric=constants.METRIC_EUCLIDEAN, seed=0,
              restarts=constants.KMEANS_RESTARTS,
              max_iter=constants.KMEANS_MAX_ITER):
    """Best WSS for every k from 1 to k_max.

    Each k also runs from the k - 1 solution plus its worst-served box,
    which keeps the curve non-increasing.

    :returns: list of (k, wss)
    :raises: InsufficientBoxes when k_max exceeds the box count
    """
    dims = _as_dims(boxes)
    if k_max > len(dims):
        raise od_exc.InsufficientBoxes(k=k_max, count=len(dims))
    curve = []
    previous = None
    for k in range(1, k_max + 1):
        warm = None
        if previous is not None:
            warm = np.vstack([previous.centroids,
                              _farthest(dims, previous.centroids, metric)])
        previous = kmeans_boxes(dims, k, metric, seed, restarts, max_iter,
                                initial_centroids=warm)
        curve.append((k, previous.wss))
    return curve


def suggest_elbow(curve):
    """k of the largest second difference of a WSS curve, or None.

    Only interior points of the curve are candidates.
    """
    if len(curve) < 3:
        return None
    wss = np.array([value for _, value in curve], dtype=float)
    second = wss[:-2] - 2.0 * wss[1:-1] + wss[2:]
    return int(curve[int(np.argmax(second)) + 1][0])


def centroids_to_anchor_spec(centroids, base_size=constants.ANCHOR_BASE_SIZE,
                             baseline=None):
    """Paired spec with scale sqrt(w h) / base and ratio h / w per centroid.

    Strides are copied from ``baseline``, the baseline preset by default.
    """
    baseline = baseline or PRESETS['baseline']
    dims = _as_dims(centroids)
    scales = tuple(float(math.sqrt(w * h) / base_size) for w, h in dims)
    ratios = tuple(float(h / w) for w, h in dims)
    return AnchorSpec(base_size=base_size, scales=scales,
                      aspect_ratios=ratios,
                      height_stride=baseline.height_stride,
                      width_stride=baseline.width_stride, paired=True)


def mean_best_iou(boxes, spec):
    """Average over boxes of the best co-centred IoU with any anchor shape."""
    dims = _as_dims(boxes)
    return float(box_ops.dims_iou(dims, anchor_dims(spec)).max(axis=1).mean())


def format_wss_table(curve_euclid, curve_iou):
    """CSV ``k,wss_euclid,wss_iou``."""
    frame = pd.DataFrame(
        [(k, wss_e, wss_i)
         for (k, wss_e), (_, wss_i) in zip(curve_euclid, curve_iou)],
        columns=list(constants.WSS_COLUMNS))
    return frame.to_csv(index=False, lineterminator='\n',
                        float_format='%.12g')


def format_box_dims(boxes):
    """CSV ``w,h`` of every box, the input of a density plot."""
    frame = pd.DataFrame(_as_dims(boxes), columns=['w', 'h'])
    return frame.to_csv(index=False, lineterminator='\n',
                        float_format='%.6f')


def format_anchor_spec(spec, group='anchors'):
    """An AnchorSpec as a configuration file fragment."""
    def _list(values):
        return ', '.join('%.12g' % v for v in values)
    lines = ['[%s]' % group,
             'base_size = %.12g' % spec.base_size,
             'scales = %s' % _list(spec.scales),
             'aspect_ratios = %s' % _list(spec.aspect_ratios),
             'height_stride = %d' % spec.height_stride,
             'width_stride = %d' % spec.width_stride,
             'paired = %s' % str(spec.paired).lower()]
    return '\n'.join(lines) + '\n'
