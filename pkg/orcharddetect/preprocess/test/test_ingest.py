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

import numpy as np
import pytest

from orcharddetect import exceptions as od_exc
import orcharddetect.preprocess.ingest as ingest
from orcharddetect.preprocess import terrain

VOC_ONE_APPLE = """<annotation>
  <folder>images</folder>
  <filename>IMG_0001.png</filename>
  <size><width>1024</width><height>600</height><depth>3</depth></size>
  <object>
    <name>tree_apple</name>
    <difficult>0</difficult>
    <bndbox><xmin>10</xmin><ymin>20</ymin><xmax>30</xmax><ymax>40</ymax>
    </bndbox>
  </object>
</annotation>
"""


def voc(objects, filename='IMG_0002.png'):
    body = ''.join(
        '<object><name>%s</name><difficult>%d</difficult><bndbox>'
        '<xmin>%s</xmin><ymin>%s</ymin><xmax>%s</xmax><ymax>%s</ymax>'
        '</bndbox></object>' % ((label, difficult) + tuple(box))
        for label, box, difficult in objects)
    return ('<annotation><filename>%s</filename>%s</annotation>' %
            (filename, body))


def test_parse_pmatrix_identity():
    poses = ingest.parse_pmatrix('img1.jpg 1 0 0 0 0 1 0 0 0 0 1 0\n')
    assert len(poses) == 1
    assert poses[0].image_name == 'img1.jpg'
    assert np.array_equal(poses[0].pmatrix,
                          np.hstack([np.eye(3), np.zeros((3, 1))]))


def test_parse_pmatrix_keeps_order_and_skips_blank_lines():
    text = ('b.jpg 1 2 3 4 5 6 7 8 9 10 11 12\n'
            '\n'
            'a.jpg 0 0 0 0 0 0 0 0 0 0 0 1\n')
    poses = ingest.parse_pmatrix(text)
    assert [p.image_name for p in poses] == ['b.jpg', 'a.jpg']
    assert poses[0].pmatrix[2, 3] == 12.0


def test_parse_pmatrix_short_line():
    text = ('a.jpg 1 0 0 0 0 1 0 0 0 0 1 0\n'
            'b.jpg 1 0 0 0 0 1 0 0 0 0 1\n')
    with pytest.raises(od_exc.MalformedLine) as exc:
        ingest.parse_pmatrix(text)
    assert exc.value.kwargs['line_no'] == 2


def test_parse_pmatrix_bad_number():
    with pytest.raises(od_exc.MalformedLine):
        ingest.parse_pmatrix('a.jpg 1 0 0 0 0 x 0 0 0 0 1 0\n')
    with pytest.raises(od_exc.MalformedLine):
        ingest.parse_pmatrix('a.jpg 1 0 0 0 0 nan 0 0 0 0 1 0\n')


def test_parse_offset():
    offset = ingest.parse_offset('345000.0 5621000.0 0.0\n')
    assert offset == ingest.WorldOffset(345000.0, 5621000.0, 0.0)
    assert np.array_equal(ingest.parse_offset('0 0 0').as_array(),
                          np.zeros(3))


@pytest.mark.parametrize('text', ['1 2 3\n4 5 6\n', '1 2\n', '', 'a b c\n'])
def test_parse_offset_malformed(text):
    with pytest.raises(od_exc.MalformedLine):
        ingest.parse_offset(text)


def test_parse_ascii_grid_single_cell():
    grid = ingest.parse_ascii_grid(
        'ncols 1\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 1\n'
        'NODATA_value -9999\n7\n')
    assert grid.values.shape == (1, 1)
    assert grid.values[0, 0] == 7.0
    assert grid.nodata == -9999.0


def test_parse_ascii_grid_first_row_is_north():
    grid = ingest.parse_ascii_grid(
        'ncols 2\nnrows 2\nxllcorner 10\nyllcorner 20\ncellsize 5\n'
        '1 2\n3 4\n')
    assert grid.xll == 10.0 and grid.yll == 20.0
    assert terrain.sample_terrain(grid, 12.5, 27.5) == 1.0
    assert terrain.sample_terrain(grid, 17.5, 22.5) == 4.0
    assert grid.nodata == ingest.DEFAULT_NODATA


def test_parse_ascii_grid_centre_origin():
    grid = ingest.parse_ascii_grid(
        'ncols 1\nnrows 1\nxllcenter 0.5\nyllcenter 0.5\ncellsize 1\n3\n')
    assert (grid.xll, grid.yll) == (0.0, 0.0)


def test_parse_ascii_grid_dimension_mismatch():
    with pytest.raises(od_exc.DimensionMismatch):
        ingest.parse_ascii_grid(
            'ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\n'
            '1 2\n3\n')


@pytest.mark.parametrize('missing', ['ncols', 'nrows', 'cellsize',
                                     'xllcorner'])
def test_parse_ascii_grid_header_missing(missing):
    header = {'ncols': 1, 'nrows': 1, 'xllcorner': 0, 'yllcorner': 0,
              'cellsize': 1}
    del header[missing]
    text = ''.join('%s %s\n' % item for item in header.items()) + '5\n'
    with pytest.raises(od_exc.HeaderMissing) as exc:
        ingest.parse_ascii_grid(text)
    assert exc.value.kwargs['key'] == missing


def test_parse_ascii_grid_unknown_header():
    with pytest.raises(od_exc.MalformedLine):
        ingest.parse_ascii_grid('ncols 1\nnrows 1\ncolour blue\n1\n')


def test_ascii_grid_round_trip_keeps_nodata():
    values = np.array([[1.5, -9999.0], [123.456789012, 4.0]])
    grid = terrain.TerrainGrid(ncols=2, nrows=2, xll=345000.25,
                               yll=5621000.5, cellsize=0.5,
                               nodata=-9999.0, values=values)
    again = ingest.parse_ascii_grid(ingest.format_ascii_grid(grid))
    assert np.allclose(again.values, values, rtol=1e-12)
    assert again.values[0, 1] == again.nodata == -9999.0
    assert (again.xll, again.yll, again.cellsize) == (345000.25, 5621000.5,
                                                      0.5)


def test_pmatrix_and_offset_round_trip():
    rng = np.random.default_rng(0)
    poses = [ingest.ImagePose('IMG_%04d.JPG' % i,
                              rng.uniform(-1e4, 1e4, (3, 4)))
             for i in range(5)]
    again = ingest.parse_pmatrix(ingest.format_pmatrix(poses))
    for pose, parsed in zip(poses, again):
        assert parsed.image_name == pose.image_name
        assert np.allclose(parsed.pmatrix, pose.pmatrix, rtol=1e-11)
    offset = ingest.WorldOffset(345000.125, 5621000.0, -12.5)
    assert ingest.parse_offset(ingest.format_offset(offset)) == offset


def test_parse_voc_one_box():
    boxes = ingest.parse_voc_annotations(VOC_ONE_APPLE)
    assert boxes == [ingest.GroundTruthBox('IMG_0001.png', 'tree_apple',
                                           10.0, 20.0, 30.0, 40.0)]
    assert boxes[0].width == 20.0 and boxes[0].height == 20.0


def test_parse_voc_document_size():
    document = ingest.parse_voc_document(VOC_ONE_APPLE)
    assert (document.width, document.height) == (1024, 600)


def test_parse_voc_unknown_class():
    with pytest.raises(od_exc.UnknownClass) as exc:
        ingest.parse_voc_annotations(voc([('pear', (1, 1, 5, 5), 0)]))
    assert exc.value.kwargs['label'] == 'pear'


def test_parse_voc_background_image():
    document = ingest.parse_voc_document(voc([]))
    assert document.boxes == []
    assert document.width is None


def test_parse_voc_difficult_flag():
    boxes = ingest.parse_voc_annotations(
        voc([('ground_apple', (1, 1, 5, 5), 1),
             ('tree_apple', (2, 2, 6, 6), 0)]))
    assert [b.difficult for b in boxes] == [True, False]


@pytest.mark.parametrize('xml', [
    '<annotation><filename>a.png',
    '<notvoc/>',
    '<annotation><object><name>tree_apple</name></object></annotation>',
    voc([('tree_apple', (5, 1, 5, 9), 0)]),
    voc([('tree_apple', (1, 1, 'x', 9), 0)]),
])
def test_parse_voc_malformed(xml):
    with pytest.raises(od_exc.MalformedXml):
        ingest.parse_voc_annotations(xml, image_name='a.png')


def test_parse_voc_filename_fallback():
    xml = '<annotation><size><width>4</width></size></annotation>'
    document = ingest.parse_voc_document(xml, image_name='fallback.png')
    assert document.image_name == 'fallback.png'
    with pytest.raises(od_exc.MalformedXml):
        ingest.parse_voc_document(xml)


def test_render_voc_document_round_trip():
    document = ingest.parse_voc_document(VOC_ONE_APPLE)
    again = ingest.parse_voc_document(ingest.render_voc_document(document))
    assert again == document


def test_render_voc_document_rounds_outward():
    box = ingest.GroundTruthBox('a.png', 'tree_apple', 1.4, 2.6, 7.2, 8.0)
    document = ingest.VocDocument('a.png', 10, 10, [box])
    again = ingest.parse_voc_document(ingest.render_voc_document(document))
    assert again.boxes[0].box == (1.0, 2.0, 8.0, 8.0)


def test_parse_rows_csv():
    text = ('row,start_x,start_y,end_x,end_y,spacing\n'
            '1,0,0,9,0,3\n'
            '2,0,4,9,4,3\n')
    rows = ingest.parse_rows_csv(text)
    assert rows[1] == terrain.RowSpec(2, (0.0, 4.0), (9.0, 4.0), 3.0)
    assert ingest.parse_rows_csv(ingest.format_rows_csv(rows)) == rows


def test_parse_rows_csv_bad_header():
    with pytest.raises(od_exc.MalformedLine) as exc:
        ingest.parse_rows_csv('row,x,y\n1,2,3\n')
    assert exc.value.kwargs['line_no'] == 1


def test_parse_rows_csv_bad_value():
    text = ('row,start_x,start_y,end_x,end_y,spacing\n'
            '1,0,0,9,0,3\n'
            '2,0,abc,9,4,3\n')
    with pytest.raises(od_exc.MalformedLine) as exc:
        ingest.parse_rows_csv(text)
    assert exc.value.kwargs['line_no'] == 3
