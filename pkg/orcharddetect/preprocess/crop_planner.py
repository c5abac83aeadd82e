# coding=utf-8
u"""Plan one tree-level crop per tree across an overlapping survey."""
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

from collections import defaultdict
from dataclasses import dataclass
from dataclasses import field
import io
import math
import numbers

from oslo_log import log as logging
import pandas as pd

from orcharddetect import constants
from orcharddetect import exceptions as od_exc
from orcharddetect.preprocess import projection

LOG = logging.getLogger(__name__)


@dataclass(frozen=True)
class TreeSighting(object):
    """A tree whose base and top both project inside an image."""

    tree_id: str
    image_name: str
    base_px: tuple
    top_px: tuple
    depth: float


@dataclass(frozen=True)
class CropRect(object):
    """Integer crop rectangle; maxes are exclusive image bounds."""

    tree_id: str
    image_name: str
    xmin: int
    ymin: int
    xmax: int
    ymax: int


@dataclass
class CropManifest(object):
    """Tree to image assignment of a survey.

    ``assignments`` holds the winning sighting of every sighted tree,
    ``crops`` the planned rectangles, ``missing`` the trees seen in no image
    and ``degenerate`` the sighted trees whose crop has no area.
    """

    assignments: list = field(default_factory=list)
    crops: list = field(default_factory=list)
    missing: list = field(default_factory=list)
    degenerate: list = field(default_factory=list)

    def assigned_images(self):
        return {s.tree_id: s.image_name for s in self.assignments}


def _in_frame(pixels, depths, width, height):
    return ((depths > constants.MIN_DEPTH) &
            (pixels[:, 0] >= 0) & (pixels[:, 0] < width) &
            (pixels[:, 1] >= 0) & (pixels[:, 1] < height))


def visible_trees(camera, trees, image_size=None):
    """Sight every tree whose base and top both land inside the image.

    :param camera: PinholeCamera or MatrixCamera
    :param trees: list of TreeRecord
    :param image_size: (width, height), defaults to the camera's
    :returns: list of TreeSighting in tree order
    """
    if not trees:
        return []
    width, height = image_size or camera.image_size
    base_px, base_depth = projection.project_points(
        [t.base for t in trees], camera)
    top_px, top_depth = projection.project_points(
        [t.top for t in trees], camera)
    visible = (_in_frame(base_px, base_depth, width, height) &
               _in_frame(top_px, top_depth, width, height))
    return [TreeSighting(tree_id=tree.tree_id, image_name=camera.name,
                         base_px=(float(base_px[i, 0]),
                                  float(base_px[i, 1])),
                         top_px=(float(top_px[i, 0]), float(top_px[i, 1])),
                         depth=float(base_depth[i]))
            for i, tree in enumerate(trees) if visible[i]]


def plan_crop(sighting, spacing, focal, margin=constants.CROP_MARGIN,
              image_size=(constants.RAW_IMAGE_WIDTH,
                          constants.RAW_IMAGE_HEIGHT)):
    """Crop rectangle around a sighted tree.

    The width is the row spacing projected at the base depth, widened by
    ``margin``. The trunk-to-crown span is padded by ``margin`` of its
    length above and below. Both are clamped to the image, then mins are
    floored and maxes ceiled.

    :raises: DegenerateCrop when the clamped area is empty
    """
    width, height = image_size
    half_width = spacing * focal / sighting.depth / 2.0 * (1.0 + margin)
    us = (sighting.base_px[0], sighting.top_px[0])
    vs = (sighting.base_px[1], sighting.top_px[1])
    pad = margin * (max(vs) - min(vs))

    xmin = min(max(min(us) - half_width, 0.0), width)
    xmax = min(max(max(us) + half_width, 0.0), width)
    ymin = min(max(min(vs) - pad, 0.0), height)
    ymax = min(max(max(vs) + pad, 0.0), height)
    if not (xmax > xmin and ymax > ymin):
        raise od_exc.DegenerateCrop(tree_id=sighting.tree_id,
                                    image=sighting.image_name)
    return CropRect(tree_id=sighting.tree_id, image_name=sighting.image_name,
                    xmin=int(math.floor(xmin)), ymin=int(math.floor(ymin)),
                    xmax=int(math.ceil(xmax)), ymax=int(math.ceil(ymax)))


def dedup_assign(images, sightings, tree_ids=None, planner=None):
    """Give every tree to the first image, in name order, that sights it.

    Within an image, sightings are taken in tree id order.

    :param images: image names; visited in lexicographic order
    :param sightings: iterable of TreeSighting
    :param tree_ids: every tree of the orchard, to report the missing ones
    :param planner: optional callable TreeSighting -> CropRect
    :returns: CropManifest
    """
    by_image = defaultdict(list)
    for sighting in sightings:
        by_image[sighting.image_name].append(sighting)

    manifest = CropManifest()
    recorded = set()
    for image in sorted(images):
        for sighting in sorted(by_image.get(image, []),
                               key=lambda s: s.tree_id):
            if sighting.tree_id in recorded:
                continue
            recorded.add(sighting.tree_id)
            manifest.assignments.append(sighting)
            if planner is None:
                continue
            try:
                manifest.crops.append(planner(sighting))
            except od_exc.DegenerateCrop as exc:
                LOG.warning("Skipping crop: %s" % exc)
                manifest.degenerate.append(sighting.tree_id)

    if tree_ids is not None:
        manifest.missing = [t for t in tree_ids if t not in recorded]
    LOG.info("Assigned %d trees, %d missing, %d degenerate" %
             (len(manifest.assignments), len(manifest.missing),
              len(manifest.degenerate)))
    return manifest


def plan_survey(cameras, trees, row_spacing, margin=constants.CROP_MARGIN):
    """Sight all trees in all cameras, deduplicate and plan crops.

    :param cameras: list of PinholeCamera or MatrixCamera
    :param trees: list of TreeRecord
    :param row_spacing: spacing in metres, or a mapping row -> spacing
    :returns: CropManifest
    """
    by_name = {camera.name: camera for camera in cameras}
    tree_rows = {tree.tree_id: tree.row for tree in trees}

    def spacing_of(tree_id):
        if isinstance(row_spacing, numbers.Number):
            return row_spacing
        return row_spacing[tree_rows[tree_id]]

    def planner(sighting):
        camera = by_name[sighting.image_name]
        return plan_crop(sighting, spacing_of(sighting.tree_id),
                         camera.focal_length, margin, camera.image_size)

    sightings = []
    for camera in cameras:
        sightings.extend(visible_trees(camera, trees))
    return dedup_assign(list(by_name), sightings,
                        [tree.tree_id for tree in trees], planner)


def format_manifest(manifest):
    """CSV text ``tree_id,image,xmin,ymin,xmax,ymax``."""
    frame = pd.DataFrame(
        [(c.tree_id, c.image_name, c.xmin, c.ymin, c.xmax, c.ymax)
         for c in manifest.crops],
        columns=list(constants.MANIFEST_COLUMNS))
    return frame.to_csv(index=False, lineterminator='\n')


def format_missing(manifest):
    return ''.join('%s\n' % tree_id for tree_id in manifest.missing)


def tag_table(sightings):
    """Per-image tag rows ``tree_id,u,v`` of the tree bases."""
    frame = pd.DataFrame(
        [(s.tree_id, s.base_px[0], s.base_px[1]) for s in sightings],
        columns=list(constants.TAG_COLUMNS))
    return frame.to_csv(index=False, lineterminator='\n',
                        float_format='%.3f')


def crop_bounds_ok(crop, image_size):
    width, height = image_size
    return (0 <= crop.xmin < crop.xmax <= width and
            0 <= crop.ymin < crop.ymax <= height)


def parse_manifest(text, source='manifest.csv'):
    """Read a manifest written by format_manifest back into CropRects.

    :raises: MalformedLine
    """
    try:
        frame = pd.read_csv(io.StringIO(text), dtype={'tree_id': str,
                                                      'image': str})
    except (ValueError, pd.errors.ParserError) as exc:
        raise od_exc.MalformedLine(source=source, line_no=1, reason=exc)
    if tuple(frame.columns) != constants.MANIFEST_COLUMNS:
        raise od_exc.MalformedLine(
            source=source, line_no=1,
            reason="header must be %s" % ','.join(constants.MANIFEST_COLUMNS))
    crops = []
    for position, record in enumerate(frame.itertuples(index=False)):
        try:
            crops.append(CropRect(record[0], record[1],
                                  *(int(v) for v in record[2:])))
        except (TypeError, ValueError) as exc:
            raise od_exc.MalformedLine(source=source, line_no=position + 2,
                                       reason=exc)
    return crops
