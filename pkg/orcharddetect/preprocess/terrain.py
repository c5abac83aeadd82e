# coding=utf-8
u"""Orchard tree map: RTK row extrapolation and DTM/DSM sampling."""
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

from dataclasses import dataclass
import math

import numpy as np
from oslo_log import log as logging
from scipy import ndimage

from orcharddetect import constants
from orcharddetect import exceptions as od_exc

LOG = logging.getLogger(__name__)

# absorbs floating point noise in length / spacing
_FLOOR_SLACK = 1e-9


@dataclass(frozen=True, eq=False)
class TerrainGrid(object):
    """Georeferenced elevation raster; values[0] is the northernmost row."""

    ncols: int
    nrows: int
    xll: float
    yll: float
    cellsize: float
    nodata: float
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, 'values', values)
        if self.ncols < 1 or self.nrows < 1:
            raise od_exc.DomainError(
                reason="grid must have at least one row and column")
        if not self.cellsize > 0:
            raise od_exc.DomainError(
                reason="cellsize must be positive, got %s" % self.cellsize)
        if values.shape != (self.nrows, self.ncols):
            raise od_exc.DomainError(
                reason="values shape %s does not match %dx%d" %
                (values.shape, self.nrows, self.ncols))

    @property
    def xmax(self):
        return self.xll + self.ncols * self.cellsize

    @property
    def ymax(self):
        return self.yll + self.nrows * self.cellsize

    def contains(self, x, y):
        return self.xll <= x <= self.xmax and self.yll <= y <= self.ymax

    def cell_centre(self, row, col):
        """World (x, y) of the centre of cell [row, col]."""
        return (self.xll + (col + 0.5) * self.cellsize,
                self.ymax - (row + 0.5) * self.cellsize)


@dataclass(frozen=True)
class RowSpec(object):
    """An orchard row between two RTK-surveyed tree bases."""

    row_index: int
    start: tuple
    end: tuple
    spacing: float

    def __post_init__(self):
        if not self.spacing > 0:
            raise od_exc.DomainError(
                reason="row %s spacing must be positive, got %s" %
                (self.row_index, self.spacing))

    @property
    def length(self):
        return math.hypot(self.end[0] - self.start[0],
                          self.end[1] - self.start[1])


@dataclass(frozen=True, eq=False)
class TreeRecord(object):
    """World-frame base and top of one tree plus its orchard address."""

    tree_id: str
    row: int
    col: int
    base: np.ndarray
    top: np.ndarray

    @property
    def height(self):
        return float(self.top[2] - self.base[2])


def extrapolate_row(spec):
    """Place trees every ``spacing`` metres from start towards end.

    A trailing stretch shorter than one spacing gets no tree.

    :param spec: RowSpec
    :returns: list of (col, x, y), columns numbered from 0
    """
    start = np.asarray(spec.start, dtype=float)
    length = spec.length
    if length == 0:
        return [(0, float(start[0]), float(start[1]))]
    direction = (np.asarray(spec.end, dtype=float) - start) / length
    count = int(math.floor(length / spec.spacing + _FLOOR_SLACK)) + 1
    positions = []
    for col in range(count):
        x, y = start + col * spec.spacing * direction
        positions.append((col, float(x), float(y)))
    return positions


def sample_terrain(grid, x, y):
    """Bilinear elevation at (x, y) from the four surrounding cell centres.

    Inside the outer half cell the nearest edge centres are used, so the
    whole raster footprint is sampleable and cell centres are reproduced
    exactly.

    :raises: OutOfExtent, NoDataCell
    """
    if not grid.contains(x, y):
        raise od_exc.OutOfExtent(x=x, y=y)
    col = min(max((x - grid.xll) / grid.cellsize - 0.5, 0.0), grid.ncols - 1)
    row = min(max((grid.ymax - y) / grid.cellsize - 0.5, 0.0), grid.nrows - 1)
    r0, c0 = int(math.floor(row)), int(math.floor(col))
    r1, c1 = min(r0 + 1, grid.nrows - 1), min(c0 + 1, grid.ncols - 1)
    corners = grid.values[[r0, r0, r1, r1], [c0, c1, c0, c1]]
    if np.any(corners == grid.nodata):
        raise od_exc.NoDataCell(x=x, y=y)
    value = ndimage.map_coordinates(grid.values, [[row], [col]], order=1,
                                    mode='nearest')
    return float(value[0])


def format_tree_id(row, col, width=constants.TREE_ID_MIN_WIDTH,
                   id_format=constants.TREE_ID_FORMAT):
    return id_format.format(row=row, col=col, width=width)


def _id_width(rows_and_cols):
    largest = max([max(r, c) for r, c in rows_and_cols] or [0])
    return max(constants.TREE_ID_MIN_WIDTH, len(str(largest)))


def _sample_for_tree(grid, grid_name, tree_id, x, y):
    try:
        return sample_terrain(grid, x, y)
    except (od_exc.OutOfExtent, od_exc.NoDataCell) as exc:
        raise od_exc.TreeSamplingFailed(tree_id=tree_id, x=x, y=y,
                                        grid=grid_name, reason=exc)


def build_tree_records(rows, dtm, dsm, id_format=constants.TREE_ID_FORMAT):
    """Build the orchard tree map.

    Base altitude comes from the DTM and the top from the DSM at the same
    (x, y). Identifiers are zero padded to a common width of at least two
    digits.

    :param rows: iterable of RowSpec
    :param dtm: TerrainGrid of bare ground
    :param dsm: TerrainGrid of canopy surface
    :param id_format: format string with row, col and width fields
    :returns: list of TreeRecord in row then column order
    :raises: TreeSamplingFailed, TreeHeightInvalid, DomainError
    """
    placed = [(spec.row_index, col, x, y)
              for spec in rows for col, x, y in extrapolate_row(spec)]
    width = _id_width([(r, c) for r, c, _, _ in placed])

    records = []
    seen = set()
    for row, col, x, y in placed:
        tree_id = format_tree_id(row, col, width, id_format)
        if tree_id in seen:
            raise od_exc.DomainError(
                reason="duplicate tree identifier %s; row indices must "
                       "be unique" % tree_id)
        seen.add(tree_id)
        base_z = _sample_for_tree(dtm, 'DTM', tree_id, x, y)
        top_z = _sample_for_tree(dsm, 'DSM', tree_id, x, y)
        if top_z < base_z:
            raise od_exc.TreeHeightInvalid(tree_id=tree_id, x=x, y=y,
                                           top=top_z, base=base_z)
        records.append(TreeRecord(tree_id=tree_id, row=row, col=col,
                                  base=np.array([x, y, base_z]),
                                  top=np.array([x, y, top_z])))
    LOG.info("Built %d tree records from %d rows" %
             (len(records), len({r for r, _, _, _ in placed})))
    return records
