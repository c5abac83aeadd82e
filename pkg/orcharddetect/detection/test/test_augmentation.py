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

import math

import numpy as np
import pytest

from orcharddetect import constants
import orcharddetect.detection.augmentation as aug
from orcharddetect import exceptions as od_exc
from orcharddetect.preprocess import ingest

SIZE = (100, 100)


def gt(box, image='a.png'):
    return ingest.GroundTruthBox(image, constants.TREE_APPLE, *box)


def test_mirror_example():
    assert aug.mirror_box((10, 20, 30, 40), 100) == (70, 20, 90, 40)


def test_mirror_centred_box_and_involution():
    assert aug.mirror_box((40, 0, 60, 10), 100) == (40, 0, 60, 10)
    rng = np.random.default_rng(3)
    for _ in range(100):
        x = sorted(rng.uniform(0, 640, 2))
        box = (x[0], 5.0, x[1], 9.0)
        assert aug.mirror_box(aug.mirror_box(box, 640), 640) == box


def test_rotate_zero_is_identity():
    assert aug.rotate_box((10, 20, 30, 40), 0, SIZE) == (10, 20, 30, 40)


def test_rotate_square_45():
    hull = aug.rotate_box((49, 49, 51, 51), 45, SIZE)
    side = 2 * math.sqrt(2)
    assert hull[2] - hull[0] == pytest.approx(side)
    assert hull[3] - hull[1] == pytest.approx(side)
    assert (hull[0] + hull[2]) / 2 == pytest.approx(50.0)


def test_rotate_half_turn_of_centred_box():
    assert aug.rotate_box((40, 30, 60, 70), 180, SIZE) == pytest.approx(
        (40, 30, 60, 70))


def test_positive_angle_turns_clockwise_on_screen():
    # a box right of the centre ends up below it
    assert aug.rotate_box((80, 48, 90, 52), 90, SIZE) == pytest.approx(
        (48, 80, 52, 90))


def test_rotated_hull_contains_corners_and_grows():
    rng = np.random.default_rng(8)
    for _ in range(200):
        angle = rng.uniform(-60, 60)
        cx, cy = rng.uniform(40, 60, 2)
        w, h = rng.uniform(2, 20, 2)
        box = (cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2)
        hull = aug.rotated_hull(box, angle, SIZE)
        theta = math.radians(angle)
        for x, y in ((box[0], box[1]), (box[2], box[1]), (box[2], box[3]),
                     (box[0], box[3])):
            dx, dy = x - 50.0, y - 50.0
            rx = 50.0 + math.cos(theta) * dx - math.sin(theta) * dy
            ry = 50.0 + math.sin(theta) * dx + math.cos(theta) * dy
            assert hull[0] - 1e-9 <= rx <= hull[2] + 1e-9
            assert hull[1] - 1e-9 <= ry <= hull[3] + 1e-9
        area = (hull[2] - hull[0]) * (hull[3] - hull[1])
        assert area >= w * h - 1e-9


def test_rotate_outside_image():
    with pytest.raises(od_exc.DegenerateBox):
        aug.rotate_box((0, 0, 5, 5), 60, SIZE)
    assert aug.visible_fraction((0, 0, 5, 5), 60, SIZE) == 0.0
    assert aug.visible_fraction((40, 40, 60, 60), 30, SIZE) == 1.0


def test_augment_boxes_drops_mostly_hidden_boxes():
    spec = aug.AugmentSpec(constants.AUGMENT_ROTATE, 60.0)
    kept, dropped = aug.augment_boxes([gt((0, 0, 5, 5)),
                                       gt((45, 45, 55, 55))], spec, SIZE)
    assert dropped == 1
    assert len(kept) == 1
    assert kept[0].class_label == constants.TREE_APPLE
    assert (kept[0].xmin + kept[0].xmax) / 2 == pytest.approx(50.0)


def test_augment_boxes_min_visible_zero_keeps_clipped():
    spec = aug.AugmentSpec(constants.AUGMENT_ROTATE, 30.0)
    # the corner box partly leaves the frame, the other one entirely
    kept, dropped = aug.augment_boxes([gt((0, 0, 20, 20)),
                                       gt((0, 0, 10, 10))], spec, SIZE,
                                      min_visible=0.0)
    assert dropped == 1
    assert len(kept) == 1
    assert kept[0].ymin == 0.0
    assert kept[0].ymax == pytest.approx(50 - 15 - 15 * math.sqrt(3))


def test_augment_boxes_mirror_and_pixel_ops():
    boxes = [gt((10, 20, 30, 40))]
    kept, _ = aug.augment_boxes(boxes, aug.AugmentSpec('mirror_h'), SIZE)
    assert kept[0].box == (70, 20, 90, 40)
    blur = aug.AugmentSpec(constants.AUGMENT_BLUR, 1.5)
    assert aug.augment_boxes(boxes, blur, SIZE) == (boxes, 0)
    assert not blur.geometric


@pytest.mark.parametrize('op, param', [
    ('rotate', 61.0), ('rotate', -60.5), ('rotate', None),
    ('gaussian_blur', None), ('additive_noise', 0.0), ('shear', 1.0),
])
def test_augment_spec_validation(op, param):
    with pytest.raises(od_exc.InvalidAugmentSpec):
        aug.AugmentSpec(op, param)


def test_parse_augment_spec():
    assert aug.parse_augment_spec('mirror_h') == aug.AugmentSpec('mirror_h')
    assert aug.parse_augment_spec(' rotate:-60 ') == aug.AugmentSpec(
        'rotate', -60.0)
    with pytest.raises(od_exc.InvalidAugmentSpec):
        aug.parse_augment_spec('rotate:left')


def test_tags_and_names():
    assert aug.AugmentSpec('mirror_h').tag == 'mirror'
    assert aug.AugmentSpec('rotate', 30.0).tag == 'rot+30'
    assert aug.AugmentSpec('rotate', -15.0).tag == 'rot-15'
    assert aug.AugmentSpec('gaussian_blur', 1.5).tag == 'gaussian_blur1.5'
    assert aug.augmented_name('IMG_1.png',
                              aug.AugmentSpec('rotate', 30.0)) == (
        'IMG_1_rot+30.png')


def test_augment_document():
    document = ingest.VocDocument('a.png', 100, 100,
                                  [gt((10, 20, 30, 40)),
                                   gt((0, 0, 5, 5))])
    augmented, record = aug.augment_document(
        document, aug.AugmentSpec('rotate', 60.0))
    assert augmented.image_name == 'a_rot+60.png'
    assert (augmented.width, augmented.height) == (100, 100)
    assert [b.image_name for b in augmented.boxes] == ['a_rot+60.png']
    assert record == {'source': 'a.png', 'output': 'a_rot+60.png',
                      'op': 'rotate', 'param': 60.0, 'kept': 1,
                      'dropped': 1}
    assert document.image_name == 'a.png'


def test_augment_document_needs_size():
    with pytest.raises(od_exc.MalformedXml):
        aug.augment_document(ingest.VocDocument('a.png'),
                             aug.AugmentSpec('mirror_h'))


def test_format_augment_log():
    records = [{'source': 'a.png', 'output': 'a_mirror.png',
                'op': 'mirror_h', 'param': None, 'kept': 2, 'dropped': 0},
               {'source': 'a.png', 'output': 'a_rot+30.png',
                'op': 'rotate', 'param': 30.0, 'kept': 1, 'dropped': 1}]
    assert aug.format_augment_log(records) == (
        'source,output,op,param,kept,dropped\n'
        'a.png,a_mirror.png,mirror_h,,2,0\n'
        'a.png,a_rot+30.png,rotate,30,1,1\n')
