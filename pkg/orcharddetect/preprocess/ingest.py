# coding=utf-8
u"""Parsers and writers for Pix4D, ESRI grid, VOC and row CSV files."""
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
.. module:: ingest
    :synopsis: Bit-exact readers and writers for the external file formats.

Formats handled:

* ``pmatrix.txt`` -- one ``<image_name> <12 floats>`` line per image, the
  row-major 3x4 projection matrix acting on local project coordinates.
* ``offset.xyz`` -- a single line of three floats; global coordinates are
  ``local + offset``.
* ESRI ASCII grids (DTM and DSM) -- ``ncols``, ``nrows``, ``xllcorner`` or
  ``xllcenter``, ``yllcorner`` or ``yllcenter``, ``cellsize`` and an
  optional ``NODATA_value`` header, then the rows from north to south.
* PASCAL-VOC XML annotations as written by labelImg.
* The orchard rows CSV ``row,start_x,start_y,end_x,end_y,spacing``.

Parsers never skip a malformed record; every error names its location.
"""

from dataclasses import dataclass
from dataclasses import field
import io
import math
from xml.etree import ElementTree

import numpy as np
from oslo_log import log as logging
import pandas as pd

from orcharddetect import constants
from orcharddetect import exceptions as od_exc
from orcharddetect.preprocess import terrain

LOG = logging.getLogger(__name__)

DEFAULT_NODATA = -9999.0

_GRID_HEADER_KEYS = ('ncols', 'nrows', 'xllcorner', 'xllcenter', 'yllcorner',
                     'yllcenter', 'cellsize', 'nodata_value')


@dataclass(frozen=True, eq=False)
class ImagePose(object):
    """Projection matrix of one image from pmatrix.txt."""

    image_name: str
    pmatrix: np.ndarray


@dataclass(frozen=True)
class WorldOffset(object):
    """Offset between local project and global coordinates, metres."""

    x: float
    y: float
    z: float

    def as_array(self):
        return np.array([self.x, self.y, self.z])


@dataclass(frozen=True)
class GroundTruthBox(object):
    """A labelled box, inclusive pixel corners."""

    image_name: str
    class_label: str
    xmin: float
    ymin: float
    xmax: float
    ymax: float
    difficult: bool = False

    @property
    def box(self):
        return (self.xmin, self.ymin, self.xmax, self.ymax)

    @property
    def width(self):
        return self.xmax - self.xmin

    @property
    def height(self):
        return self.ymax - self.ymin


@dataclass(frozen=True)
class VocDocument(object):
    """An annotation file: image name, image size and its boxes."""

    image_name: str
    width: int = None
    height: int = None
    boxes: list = field(default_factory=list)


def _floats(tokens, source, line_no):
    try:
        values = [float(t) for t in tokens]
    except ValueError as exc:
        raise od_exc.MalformedLine(source=source, line_no=line_no,
                                   reason=str(exc))
    if not all(math.isfinite(v) for v in values):
        raise od_exc.MalformedLine(source=source, line_no=line_no,
                                   reason="non-finite value")
    return values


def _numbered_lines(text):
    for line_no, line in enumerate(text.splitlines(), 1):
        if line.strip():
            yield line_no, line.split()


def parse_pmatrix(text, source='pmatrix.txt'):
    """Parse pmatrix.txt into ImagePose objects in file order.

    :raises: MalformedLine
    """
    poses = []
    for line_no, tokens in _numbered_lines(text):
        if len(tokens) != 13:
            raise od_exc.MalformedLine(
                source=source, line_no=line_no,
                reason="expected an image name and 12 numbers, got %d "
                       "tokens" % len(tokens))
        values = _floats(tokens[1:], source, line_no)
        poses.append(ImagePose(image_name=tokens[0],
                               pmatrix=np.array(values).reshape(3, 4)))
    LOG.debug("Parsed %d image poses from %s" % (len(poses), source))
    return poses


def parse_offset(text, source='offset.xyz'):
    """Parse offset.xyz, a single line of three floats.

    :raises: MalformedLine
    """
    lines = list(_numbered_lines(text))
    if len(lines) != 1:
        line_no = lines[1][0] if len(lines) > 1 else 1
        raise od_exc.MalformedLine(
            source=source, line_no=line_no,
            reason="expected exactly one line, got %d" % len(lines))
    line_no, tokens = lines[0]
    if len(tokens) != 3:
        raise od_exc.MalformedLine(
            source=source, line_no=line_no,
            reason="expected 3 numbers, got %d" % len(tokens))
    return WorldOffset(*_floats(tokens, source, line_no))


def _is_number(token):
    try:
        float(token)
    except ValueError:
        return False
    return True


def parse_ascii_grid(text, source='grid.asc'):
    """Parse an ESRI ASCII grid into a TerrainGrid.

    :raises: HeaderMissing, DimensionMismatch, MalformedLine
    """
    header = {}
    values = []
    in_data = False
    for line_no, tokens in _numbered_lines(text):
        if not in_data and not _is_number(tokens[0]):
            key = tokens[0].lower()
            if key not in _GRID_HEADER_KEYS or len(tokens) != 2:
                raise od_exc.MalformedLine(
                    source=source, line_no=line_no,
                    reason="unexpected header line '%s'" % ' '.join(tokens))
            header[key] = _floats(tokens[1:], source, line_no)[0]
            continue
        in_data = True
        values.extend(_floats(tokens, source, line_no))

    for key in ('ncols', 'nrows', 'cellsize'):
        if key not in header:
            raise od_exc.HeaderMissing(source=source, key=key)
    ncols, nrows = int(header['ncols']), int(header['nrows'])
    cellsize = header['cellsize']
    half = cellsize / 2.0
    origin = []
    for axis in ('x', 'y'):
        if axis + 'llcorner' in header:
            origin.append(header[axis + 'llcorner'])
        elif axis + 'llcenter' in header:
            origin.append(header[axis + 'llcenter'] - half)
        else:
            raise od_exc.HeaderMissing(source=source, key=axis + 'llcorner')

    if len(values) != ncols * nrows:
        raise od_exc.DimensionMismatch(
            source=source,
            reason="header declares %dx%d cells but %d values follow" %
                   (nrows, ncols, len(values)))
    return terrain.TerrainGrid(
        ncols=ncols, nrows=nrows, xll=origin[0], yll=origin[1],
        cellsize=cellsize, nodata=header.get('nodata_value', DEFAULT_NODATA),
        values=np.array(values).reshape(nrows, ncols))


def _number_text(element, tag, source, index):
    text = element.findtext(tag)
    if text is None:
        raise od_exc.MalformedXml(
            source=source, reason="object %d has no <%s>" % (index, tag))
    try:
        return float(text)
    except ValueError:
        raise od_exc.MalformedXml(
            source=source,
            reason="object %d <%s> is not a number: '%s'" %
                   (index, tag, text))


def _size(root, tag):
    text = root.findtext('size/' + tag)
    return int(float(text)) if text and text.strip() else None


def parse_voc_document(xml_text, source='annotation.xml', image_name=None,
                       class_labels=constants.CLASS_LABELS):
    """Parse a VOC annotation into a VocDocument.

    :param image_name: used when the file has no <filename>
    :raises: MalformedXml, UnknownClass
    """
    try:
        root = ElementTree.fromstring(xml_text)
    except ElementTree.ParseError as exc:
        raise od_exc.MalformedXml(source=source, reason=str(exc))
    if root.tag != 'annotation':
        raise od_exc.MalformedXml(
            source=source,
            reason="root element is <%s>, expected <annotation>" % root.tag)
    name = (root.findtext('filename') or '').strip() or image_name
    if not name:
        raise od_exc.MalformedXml(source=source, reason="no <filename>")

    boxes = []
    for index, obj in enumerate(root.findall('object')):
        label = (obj.findtext('name') or '').strip()
        if label not in class_labels:
            raise od_exc.UnknownClass(source=source, label=label)
        bndbox = obj.find('bndbox')
        if bndbox is None:
            raise od_exc.MalformedXml(
                source=source, reason="object %d has no <bndbox>" % index)
        corners = [_number_text(bndbox, tag, source, index)
                   for tag in ('xmin', 'ymin', 'xmax', 'ymax')]
        if not (corners[0] < corners[2] and corners[1] < corners[3]):
            raise od_exc.MalformedXml(
                source=source,
                reason="object %d box %s has no area" % (index, corners))
        difficult = (obj.findtext('difficult') or '0').strip() == '1'
        boxes.append(GroundTruthBox(name, label, *corners,
                                    difficult=difficult))
    return VocDocument(image_name=name, width=_size(root, 'width'),
                       height=_size(root, 'height'), boxes=boxes)


def parse_voc_annotations(xml_text, source='annotation.xml', image_name=None,
                          class_labels=constants.CLASS_LABELS):
    """One GroundTruthBox per <object> element."""
    return parse_voc_document(xml_text, source, image_name,
                              class_labels).boxes


def _sub(parent, tag, text=None):
    child = ElementTree.SubElement(parent, tag)
    if text is not None:
        child.text = str(text)
    return child


def render_voc_document(document, depth=3):
    """Serialise a VocDocument in labelImg's layout.

    Corners are written as integers, mins floored and maxes ceiled.
    """
    root = ElementTree.Element('annotation')
    _sub(root, 'filename', document.image_name)
    if document.width is not None and document.height is not None:
        size = _sub(root, 'size')
        _sub(size, 'width', int(document.width))
        _sub(size, 'height', int(document.height))
        _sub(size, 'depth', depth)
    _sub(root, 'segmented', 0)
    for box in document.boxes:
        obj = _sub(root, 'object')
        _sub(obj, 'name', box.class_label)
        _sub(obj, 'pose', 'Unspecified')
        _sub(obj, 'truncated', 0)
        _sub(obj, 'difficult', int(box.difficult))
        bndbox = _sub(obj, 'bndbox')
        _sub(bndbox, 'xmin', int(math.floor(box.xmin)))
        _sub(bndbox, 'ymin', int(math.floor(box.ymin)))
        _sub(bndbox, 'xmax', int(math.ceil(box.xmax)))
        _sub(bndbox, 'ymax', int(math.ceil(box.ymax)))
    ElementTree.indent(root)
    return ElementTree.tostring(root, encoding='unicode') + '\n'


def parse_rows_csv(text, source='rows.csv'):
    """Parse the orchard rows CSV into RowSpec objects.

    :raises: MalformedLine
    """
    try:
        frame = pd.read_csv(io.StringIO(text))
    except (ValueError, pd.errors.ParserError) as exc:
        raise od_exc.MalformedLine(source=source, line_no=1, reason=exc)
    if tuple(frame.columns) != constants.ROWS_COLUMNS:
        raise od_exc.MalformedLine(
            source=source, line_no=1,
            reason="header must be %s" % ','.join(constants.ROWS_COLUMNS))
    rows = []
    for offset, record in enumerate(frame.itertuples(index=False)):
        line_no = offset + 2
        values = _floats(record, source, line_no)
        if not values[0].is_integer():
            raise od_exc.MalformedLine(source=source, line_no=line_no,
                                       reason="row index must be an integer")
        rows.append(terrain.RowSpec(row_index=int(values[0]),
                                    start=(values[1], values[2]),
                                    end=(values[3], values[4]),
                                    spacing=values[5]))
    return rows


def _number(value, precision):
    return '%.*g' % (precision, value)


def format_pmatrix(poses, precision=12):
    lines = []
    for pose in poses:
        numbers = ' '.join(_number(v, precision)
                           for v in np.asarray(pose.pmatrix).ravel())
        lines.append('%s %s' % (pose.image_name, numbers))
    return '\n'.join(lines) + '\n'


def format_offset(offset, precision=12):
    return '%s %s %s\n' % tuple(_number(v, precision)
                                for v in (offset.x, offset.y, offset.z))


def format_ascii_grid(grid, precision=12):
    lines = ['ncols %d' % grid.ncols,
             'nrows %d' % grid.nrows,
             'xllcorner %s' % _number(grid.xll, precision),
             'yllcorner %s' % _number(grid.yll, precision),
             'cellsize %s' % _number(grid.cellsize, precision),
             'NODATA_value %s' % _number(grid.nodata, precision)]
    for row in grid.values:
        lines.append(' '.join(_number(v, precision) for v in row))
    return '\n'.join(lines) + '\n'


def format_rows_csv(rows, precision=12):
    frame = pd.DataFrame(
        [(spec.row_index, spec.start[0], spec.start[1], spec.end[0],
          spec.end[1], spec.spacing) for spec in rows],
        columns=list(constants.ROWS_COLUMNS))
    return frame.to_csv(index=False, lineterminator='\n',
                        float_format='%%.%dg' % precision)
