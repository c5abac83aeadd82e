# coding=utf-8
u"""Synthetic orchards with exact groundtruth sightings."""
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
.. module:: synth_scene
    :synopsis: Generator of synthetic surveys for tests and demonstrations.

A scene is a rectangular orchard of straight rows running along +x, a DTM
built from one of the terrain functions, a DSM a few metres above it, and
an oblique camera path flying south of the first row and looking north.

The sightings of a scene are computed by an independent scalar projection
of every tree into every camera. They are the oracle the vectorised
pipeline is checked against.
"""

from dataclasses import dataclass
from dataclasses import field
import math
import os

import numpy as np
from oslo_log import log as logging
from PIL import Image

from orcharddetect import constants
from orcharddetect import exceptions as od_exc
from orcharddetect.preprocess import crop_planner
from orcharddetect.preprocess import ingest
from orcharddetect.preprocess import projection
from orcharddetect.preprocess import terrain
from orcharddetect.utils import fileio

LOG = logging.getLogger(__name__)

TERRAIN_FLAT = 'flat'
TERRAIN_INCLINE = 'incline'
TERRAIN_SINUSOID = 'sinusoid'
TERRAIN_FUNCTIONS = (TERRAIN_FLAT, TERRAIN_INCLINE, TERRAIN_SINUSOID)

GROUND_LEVEL = 50.0
GRID_MARGIN = 10.0

# cluster centres (w, h) of the bundled planted box set; an equilateral
# triangle so no pair of clusters is closer than the others
PLANTED_CENTRES = ((30.0, 30.0), (90.0, 30.0), (60.0, 81.96))

PROJECT_FILES = {'pmatrix': 'pmatrix.txt',
                 'offset': 'offset.xyz',
                 'dtm': 'dtm.asc',
                 'dsm': 'dsm.asc',
                 'rows': 'rows.csv'}


@dataclass(frozen=True)
class CameraPose(object):
    """Camera position and the world point it looks at."""

    name: str
    position: tuple
    target: tuple


@dataclass(frozen=True)
class SceneSpec(object):
    """Parameters of a synthetic survey; all distances in metres.

    When ``poses`` is None a path of ``n_poses`` cameras is flown parallel
    to the rows, ``standoff`` south of the first row and ``altitude`` above
    the ground, stepping ``(1 - overlap)`` of the horizontal footprint.
    """

    n_rows: int = 5
    trees_per_row: int = 20
    spacing: float = 3.0
    row_gap: float = 4.0
    terrain: str = TERRAIN_FLAT
    poses: tuple = None
    n_poses: int = 20
    overlap: float = 0.9
    seed: int = 0
    focal_length: float = 3650.0
    image_width: int = constants.RAW_IMAGE_WIDTH
    image_height: int = constants.RAW_IMAGE_HEIGHT
    standoff: float = 12.0
    altitude: float = 6.0
    canopy_height: float = 3.0
    origin: tuple = (1000.0, 2000.0)
    offset: tuple = (900.0, 1900.0, 0.0)
    cellsize: float = 1.0
    jitter: float = 0.25

    def __post_init__(self):
        if self.n_rows < 1 or self.trees_per_row < 1:
            raise od_exc.DomainError(
                reason="a scene needs at least one row and one tree")
        if not self.spacing > 0 or not self.row_gap > 0:
            raise od_exc.DomainError(
                reason="spacing and row gap must be positive")
        if not 0.0 <= self.overlap < 1.0:
            raise od_exc.DomainError(
                reason="overlap must lie in [0, 1), got %s" % self.overlap)
        if self.terrain not in TERRAIN_FUNCTIONS:
            raise od_exc.DomainError(
                reason="unknown terrain function '%s'" % self.terrain)
        if self.canopy_height <= 0.25:
            raise od_exc.DomainError(
                reason="canopy height must exceed 0.25 m")
        if self.poses is None and self.n_poses < 1:
            raise od_exc.DomainError(reason="n_poses must be at least 1")

    @property
    def intrinsics(self):
        return projection.CameraIntrinsics(
            focal_length=self.focal_length,
            cx=self.image_width / 2.0, cy=self.image_height / 2.0,
            image_width=self.image_width, image_height=self.image_height)


@dataclass(eq=False)
class Scene(object):
    """A generated survey and its exhaustive groundtruth sightings."""

    spec: SceneSpec
    rows: list
    dtm: terrain.TerrainGrid
    dsm: terrain.TerrainGrid
    trees: list
    cameras: list
    offset: ingest.WorldOffset
    sightings: list = field(default_factory=list)

    @property
    def tree_ids(self):
        return [tree.tree_id for tree in self.trees]

    def oracle_assignment(self):
        return oracle_assignment(self.sightings, self.tree_ids)


def terrain_height(kind, x, y, origin=(0.0, 0.0)):
    """Ground elevation of a terrain function; x and y may be arrays."""
    dx = np.asarray(x, dtype=float) - origin[0]
    dy = np.asarray(y, dtype=float) - origin[1]
    if kind == TERRAIN_FLAT:
        return GROUND_LEVEL + 0.0 * dx * dy
    if kind == TERRAIN_INCLINE:
        return GROUND_LEVEL + 0.05 * dx + 0.02 * dy
    if kind == TERRAIN_SINUSOID:
        return GROUND_LEVEL + 0.8 * (np.sin(2.0 * np.pi * dx / 25.0) *
                                     np.cos(2.0 * np.pi * dy / 30.0))
    raise od_exc.DomainError(reason="unknown terrain function '%s'" % kind)


def canopy_height(spec, x, y):
    return spec.canopy_height + 0.25 * np.sin(0.9 * np.asarray(x) +
                                              0.4 * np.asarray(y))


def look_at(position, target, up=(0.0, 0.0, 1.0)):
    """Rotation whose Z_c points at target and whose Y_c points up.

    Columns are the camera axes in world coordinates, X_c = Y_c x Z_c.

    :raises: DomainError when the view direction is vertical or null
    """
    position = np.asarray(position, dtype=float)
    forward = np.asarray(target, dtype=float) - position
    norm = np.linalg.norm(forward)
    if norm == 0:
        raise od_exc.DomainError(reason="camera target equals its position")
    z_axis = forward / norm
    up = np.asarray(up, dtype=float)
    y_axis = up - up.dot(z_axis) * z_axis
    if np.linalg.norm(y_axis) < 1e-9:
        raise od_exc.DomainError(reason="view direction parallel to up")
    y_axis /= np.linalg.norm(y_axis)
    x_axis = np.cross(y_axis, z_axis)
    return np.column_stack([x_axis, y_axis, z_axis])


def _orchard_extent(spec):
    x0, y0 = spec.origin
    x1 = x0 + (spec.trees_per_row - 1) * spec.spacing
    y1 = y0 + (spec.n_rows - 1) * spec.row_gap
    return x0, y0, x1, y1


def _make_rows(spec):
    x0, y0, x1, _ = _orchard_extent(spec)
    return [terrain.RowSpec(row_index=r + 1,
                            start=(x0, y0 + r * spec.row_gap),
                            end=(x1, y0 + r * spec.row_gap),
                            spacing=spec.spacing)
            for r in range(spec.n_rows)]


def _make_grids(spec):
    x0, y0, x1, y1 = _orchard_extent(spec)
    xll = math.floor(x0 - GRID_MARGIN - spec.standoff)
    yll = math.floor(y0 - GRID_MARGIN - spec.standoff)
    ncols = int(math.ceil((x1 + GRID_MARGIN - xll) / spec.cellsize))
    nrows = int(math.ceil((y1 + GRID_MARGIN - yll) / spec.cellsize))
    cols = xll + (np.arange(ncols) + 0.5) * spec.cellsize
    # row 0 is the northernmost
    rows = yll + (nrows - np.arange(nrows) - 0.5) * spec.cellsize
    xs, ys = np.meshgrid(cols, rows)
    ground = terrain_height(spec.terrain, xs, ys, spec.origin)
    surface = ground + canopy_height(spec, xs, ys)
    grids = [terrain.TerrainGrid(ncols=ncols, nrows=nrows, xll=float(xll),
                                 yll=float(yll), cellsize=spec.cellsize,
                                 nodata=ingest.DEFAULT_NODATA, values=values)
             for values in (ground, surface)]
    return grids[0], grids[1]


def flight_path(spec):
    """Camera poses flown along the rows, named IMG_0001.JPG onwards."""
    x0, y0, x1, y1 = _orchard_extent(spec)
    target_y = (y0 + y1) / 2.0
    camera_y = y0 - spec.standoff
    distance = math.hypot(target_y - camera_y, spec.altitude)
    footprint = spec.image_width * distance / spec.focal_length
    step = (1.0 - spec.overlap) * footprint
    centre_x = (x0 + x1) / 2.0
    rng = np.random.default_rng(spec.seed)

    poses = []
    for index in range(spec.n_poses):
        x = centre_x + (index - (spec.n_poses - 1) / 2.0) * step
        ground = float(terrain_height(spec.terrain, x, camera_y,
                                      spec.origin))
        target_ground = float(terrain_height(spec.terrain, x, target_y,
                                             spec.origin))
        jitter = rng.uniform(-spec.jitter, spec.jitter, size=3)
        poses.append(CameraPose(
            name='IMG_%04d.JPG' % (index + 1),
            position=(x, camera_y, ground + spec.altitude),
            target=(x + jitter[0], target_y + jitter[1],
                    target_ground + jitter[2])))
    return poses


def _scalar_project(point, camera):
    # independent of the vectorised path: explicit R^T (p - T) sums
    rotation = camera.extrinsics.rotation
    centre = camera.extrinsics.translation
    diff = [float(point[i]) - float(centre[i]) for i in range(3)]
    local = [sum(float(rotation[i][j]) * diff[i] for i in range(3))
             for j in range(3)]
    if local[2] <= constants.MIN_DEPTH:
        return None, local[2]
    intr = camera.intrinsics
    u = intr.focal_length * local[0] / local[2] + intr.cx
    v = -intr.focal_length * local[1] / local[2] + intr.cy
    return (u, v), local[2]


def _inside(pixel, width, height):
    return (pixel is not None and 0 <= pixel[0] < width and
            0 <= pixel[1] < height)


def oracle_sightings(trees, cameras):
    """Project every tree into every camera one point at a time.

    :returns: list of TreeSighting, camera-major then tree order
    """
    sightings = []
    for camera in cameras:
        width, height = camera.image_size
        for tree in trees:
            base, depth = _scalar_project(tree.base, camera)
            top, _ = _scalar_project(tree.top, camera)
            if _inside(base, width, height) and _inside(top, width, height):
                sightings.append(crop_planner.TreeSighting(
                    tree_id=tree.tree_id, image_name=camera.name,
                    base_px=base, top_px=top, depth=depth))
    return sightings


def oracle_assignment(sightings, tree_ids):
    """Each tree's smallest sighting image name, plus the unseen trees.

    :returns: (dict tree_id -> image name, list of missing tree ids)
    """
    best = {}
    for sighting in sightings:
        current = best.get(sighting.tree_id)
        if current is None or sighting.image_name < current:
            best[sighting.tree_id] = sighting.image_name
    missing = [tree_id for tree_id in tree_ids if tree_id not in best]
    return best, missing


def make_camera(pose, intrinsics):
    rotation = look_at(pose.position, pose.target)
    return projection.PinholeCamera(
        name=pose.name,
        extrinsics=projection.CameraExtrinsics(
            rotation=rotation, translation=np.asarray(pose.position)),
        intrinsics=intrinsics)


def generate_scene(spec):
    """Build trees, terrain, cameras and the exhaustive sighting table.

    :param spec: SceneSpec
    :returns: Scene
    """
    rows = _make_rows(spec)
    dtm, dsm = _make_grids(spec)
    trees = terrain.build_tree_records(rows, dtm, dsm)
    poses = spec.poses if spec.poses is not None else flight_path(spec)
    intrinsics = spec.intrinsics
    cameras = [make_camera(pose, intrinsics) for pose in poses]
    scene = Scene(spec=spec, rows=rows, dtm=dtm, dsm=dsm, trees=trees,
                  cameras=cameras, offset=ingest.WorldOffset(*spec.offset))
    scene.sightings = oracle_sightings(trees, cameras)
    LOG.debug("Synthetic scene: %d trees, %d cameras, %d sightings" %
              (len(trees), len(cameras), len(scene.sightings)))
    return scene


def write_project(scene, directory, precision=17):
    """Emit pmatrix.txt, offset.xyz, dtm.asc, dsm.asc and rows.csv.

    Seventeen significant digits make every value re-parse exactly.

    :returns: dict of file kind -> path
    """
    offset = scene.offset.as_array()
    poses = [ingest.ImagePose(image_name=camera.name,
                              pmatrix=camera.to_pmatrix(offset))
             for camera in scene.cameras]
    contents = {
        'pmatrix': ingest.format_pmatrix(poses, precision),
        'offset': ingest.format_offset(scene.offset, precision),
        'dtm': ingest.format_ascii_grid(scene.dtm, precision),
        'dsm': ingest.format_ascii_grid(scene.dsm, precision),
        'rows': ingest.format_rows_csv(scene.rows, precision),
    }
    paths = {}
    for kind, content in contents.items():
        paths[kind] = fileio.write_atomic(
            os.path.join(directory, PROJECT_FILES[kind]), content)
    return paths


def write_images(scene, directory, color=(86, 132, 60)):
    """Write a plain image per camera so crops can be cut from it."""
    paths = []
    for camera in scene.cameras:
        path = os.path.join(directory, camera.name)
        Image.new('RGB', camera.image_size, color).save(path)
        paths.append(path)
    return paths


def planted_box_set(centres=PLANTED_CENTRES, per_cluster=30, spread=2.0,
                    seed=0):
    """Box dimensions drawn uniformly within ``spread`` of each centre.

    :returns: (N, 2) array of (w, h), clusters in ``centres`` order
    """
    rng = np.random.default_rng(seed)
    clusters = [np.asarray(centre, dtype=float) +
                rng.uniform(-spread, spread, size=(per_cluster, 2))
                for centre in centres]
    return np.vstack(clusters)


def write_planted_annotations(directory, dims, image_size=(1024, 600),
                              per_image=10,
                              label=constants.TREE_APPLE):
    """Lay planted box dimensions out as labelImg VOC files.

    Boxes are placed left to right on a shelf layout; the default image
    size needs no resizing, so clustering sees the planted dimensions.

    :returns: list of written paths
    """
    width, height = image_size
    paths = []
    for start in range(0, len(dims), per_image):
        index = start // per_image
        image_name = 'synth_%03d.png' % index
        boxes = []
        x, y, shelf = 0.0, 0.0, 0.0
        for w, h in dims[start:start + per_image]:
            if x + w > width:
                x, y, shelf = 0.0, y + shelf, 0.0
            if y + h > height:
                raise od_exc.DomainError(
                    reason="planted boxes do not fit a %dx%d image" %
                           (width, height))
            boxes.append(ingest.GroundTruthBox(
                image_name, label, x, y, x + float(w), y + float(h)))
            x += math.ceil(w) + 1
            shelf = max(shelf, math.ceil(h) + 1)
        document = ingest.VocDocument(image_name=image_name, width=width,
                                      height=height, boxes=boxes)
        paths.append(fileio.write_atomic(
            os.path.join(directory, 'synth_%03d.xml' % index),
            ingest.render_voc_document(document)))
    return paths
