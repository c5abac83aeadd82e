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

from orcharddetect import exceptions as od_exc
import orcharddetect.preprocess.projection as proj


@pytest.fixture
def intrinsics():
    return proj.CameraIntrinsics(focal_length=1000.0, cx=2736.0, cy=1824.0)


def random_camera(rng, name='IMG_0001.JPG'):
    angles = proj.EulerAngles(*rng.uniform(-math.pi, math.pi, 3))
    extrinsics = proj.CameraExtrinsics(
        proj.build_rotation(angles),
        rng.uniform(-500.0, 500.0, 3) + (1000.0, 2000.0, 50.0))
    intrinsics = proj.CameraIntrinsics(
        focal_length=rng.uniform(1000.0, 5000.0),
        cx=rng.uniform(2000.0, 3400.0), cy=rng.uniform(1400.0, 2200.0))
    return proj.PinholeCamera(name, extrinsics, intrinsics)


def points_in_front(rng, camera, count):
    depth = rng.uniform(1.0, 100.0, count)
    camera_points = np.column_stack([
        rng.uniform(-1.0, 1.0, count) * depth,
        rng.uniform(-1.0, 1.0, count) * depth,
        depth])
    return proj.camera_to_world(camera_points, camera.extrinsics)


def test_zero_angles_give_identity():
    rotation = proj.build_rotation(proj.EulerAngles(0.0, 0.0, 0.0))
    assert np.array_equal(rotation, np.eye(3))


def test_kappa_quarter_turn():
    rotation = proj.build_rotation(proj.EulerAngles(0.0, 0.0, math.pi / 2))
    expected = np.array([[0.0, -1.0, 0.0],
                         [1.0, 0.0, 0.0],
                         [0.0, 0.0, 1.0]])
    assert np.allclose(rotation, expected, rtol=0.0, atol=1e-15)


@pytest.mark.parametrize('kappa', [-3.0, -math.pi / 3, 0.25, 1.0, 2.5])
def test_kappa_turns_x_axis_by_kappa(kappa):
    rotation = proj.build_rotation(proj.EulerAngles(0.0, 0.0, kappa))
    x, y, z = rotation.dot((1.0, 0.0, 0.0))
    assert math.atan2(y, x) == pytest.approx(kappa, abs=1e-12)
    assert z == 0.0


def test_quarter_turns():
    half_pi = math.pi / 2
    rotation = proj.build_rotation(
        proj.EulerAngles(half_pi, half_pi, half_pi))
    expected = np.array([[0.0, 0.0, 1.0],
                         [0.0, -1.0, 0.0],
                         [1.0, 0.0, 0.0]])
    assert np.allclose(rotation, expected, atol=1e-12)


def test_from_degrees():
    angles = proj.EulerAngles.from_degrees(90.0, 0.0, -180.0)
    assert angles.omega == pytest.approx(math.pi / 2)
    assert angles.phi == 0.0
    assert angles.kappa == pytest.approx(-math.pi)


def test_rotations_are_orthonormal():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        angles = proj.EulerAngles(*rng.uniform(-math.pi, math.pi, 3))
        assert proj.is_rotation(proj.build_rotation(angles))


def test_is_rotation_rejects_reflection_and_shape():
    assert not proj.is_rotation(np.diag([1.0, 1.0, -1.0]))
    assert not proj.is_rotation(np.eye(4))
    assert not proj.is_rotation(2 * np.eye(3))


def test_world_to_camera_translation_only():
    extrinsics = proj.CameraExtrinsics(np.eye(3), (1.0, 2.0, 3.0))
    camera = proj.world_to_camera((1.0, 2.0, 13.0), extrinsics)
    assert np.allclose(camera, (0.0, 0.0, 10.0))


def test_world_to_camera_rotation_only():
    extrinsics = proj.CameraExtrinsics(
        proj.rotation_z(math.pi / 2), np.zeros(3))
    camera = proj.world_to_camera((1.0, 0.0, 0.0), extrinsics)
    assert np.allclose(camera, (0.0, -1.0, 0.0), atol=1e-12)


def test_camera_to_world_inverts_world_to_camera():
    rng = np.random.default_rng(3)
    camera = random_camera(rng)
    world = rng.uniform(-1000.0, 1000.0, (50, 3))
    back = proj.camera_to_world(
        proj.world_to_camera(world, camera.extrinsics), camera.extrinsics)
    assert np.allclose(back, world, atol=1e-9)


def test_camera_to_pixel_principal_point(intrinsics):
    pixel = proj.camera_to_pixel((0.0, 0.0, 5.0), intrinsics)
    assert np.allclose(pixel, (2736.0, 1824.0))


def test_camera_to_pixel_v_axis_points_down(intrinsics):
    pixel = proj.camera_to_pixel((1.0, -1.0, 10.0), intrinsics)
    assert np.allclose(pixel, (2836.0, 1924.0))


@pytest.mark.parametrize('depth', [0.0, -1.0, 1e-12])
def test_camera_to_pixel_behind(intrinsics, depth):
    with pytest.raises(od_exc.BehindCamera):
        proj.camera_to_pixel((0.0, 0.0, depth), intrinsics)


def test_camera_to_pixel_behind_in_batch(intrinsics):
    with pytest.raises(od_exc.BehindCamera):
        proj.camera_to_pixel([(0.0, 0.0, 4.0), (0.0, 0.0, -4.0)],
                             intrinsics)


def test_ray_scale_invariance(intrinsics):
    rng = np.random.default_rng(11)
    points = np.column_stack([rng.uniform(-5.0, 5.0, 100),
                              rng.uniform(-5.0, 5.0, 100),
                              rng.uniform(1.0, 50.0, 100)])
    pixels = proj.camera_to_pixel(points, intrinsics)
    for scale in (0.01, 3.0, 1000.0):
        scaled = proj.camera_to_pixel(points * scale, intrinsics)
        assert np.allclose(scaled, pixels, rtol=0.0, atol=1e-9)


def test_ray_scale_invariance_many_points(intrinsics):
    rng = np.random.default_rng(12)
    count = 10000
    points = np.column_stack([rng.uniform(-50.0, 50.0, count),
                              rng.uniform(-50.0, 50.0, count),
                              rng.uniform(0.5, 500.0, count)])
    pixels = proj.camera_to_pixel(points, intrinsics)
    scales = rng.uniform(1e-3, 1e3, count)
    scaled = proj.camera_to_pixel(points * scales[:, np.newaxis], intrinsics)
    assert np.abs(scaled - pixels).max() <= 1e-9


def test_intrinsics_validation():
    with pytest.raises(od_exc.DomainError):
        proj.CameraIntrinsics(focal_length=0.0, cx=10.0, cy=10.0)
    with pytest.raises(od_exc.DomainError):
        proj.CameraIntrinsics(focal_length=100.0, cx=6000.0, cy=10.0)


def test_pmatrix_agrees_with_decomposed_model():
    rng = np.random.default_rng(2020)
    offset = np.array([900.0, 1900.0, 0.0])
    for index in range(100):
        pinhole = random_camera(rng, 'IMG_%04d.JPG' % index)
        matrix = proj.MatrixCamera(pinhole.name,
                                   pinhole.to_pmatrix(offset),
                                   offset=offset)
        world = points_in_front(rng, pinhole, 100)
        expected, expected_depth = pinhole.project(world)
        pixels, depths = matrix.project(world)
        assert np.abs(pixels - expected).max() <= 1e-6
        assert np.allclose(depths, expected_depth, atol=1e-9)
        assert matrix.focal_length == pytest.approx(
            pinhole.focal_length, rel=1e-9)


def test_pmatrix_agrees_over_many_cameras():
    rng = np.random.default_rng(4096)
    offset = np.array([1000.0, 2000.0, 0.0])
    worst = 0.0
    for index in range(10000):
        pinhole = random_camera(rng, 'IMG_%05d.JPG' % index)
        matrix = proj.MatrixCamera(pinhole.name,
                                   pinhole.to_pmatrix(offset),
                                   offset=offset)
        world = points_in_front(rng, pinhole, 5)
        expected, _ = pinhole.project(world)
        pixels, _ = matrix.project(world)
        worst = max(worst, np.abs(pixels - expected).max())
    assert worst <= 1e-6


def test_matrix_camera_scaled_identity():
    pmatrix = np.hstack([np.diag([100.0, 100.0, 1.0]), np.zeros((3, 1))])
    matrix = proj.MatrixCamera('img1.jpg', pmatrix)
    assert np.allclose(proj.project_world_point((1.0, 1.0, 10.0), matrix),
                       (10.0, 10.0))


def test_matrix_camera_identity():
    matrix = proj.MatrixCamera('img1.jpg', np.hstack([np.eye(3),
                                                      np.zeros((3, 1))]))
    pixels, depths = matrix.project((2.0, 4.0, 2.0))
    assert np.allclose(pixels, (1.0, 2.0))
    assert depths == pytest.approx(2.0)


def test_matrix_camera_depth_ignores_matrix_scale():
    rng = np.random.default_rng(5)
    pinhole = random_camera(rng)
    scaled = proj.MatrixCamera('a', 42.0 * pinhole.to_pmatrix())
    world = points_in_front(rng, pinhole, 20)
    pixels, depths = scaled.project(world)
    expected, expected_depth = pinhole.project(world)
    assert np.allclose(depths, expected_depth, atol=1e-9)
    assert np.abs(pixels - expected).max() <= 1e-6


def test_project_world_point(intrinsics):
    extrinsics = proj.CameraExtrinsics(np.eye(3), (10.0, 20.0, 0.0))
    camera = proj.PinholeCamera('IMG_0001.JPG', extrinsics, intrinsics)
    pixel = proj.project_world_point((11.0, 19.0, 10.0), camera)
    assert np.allclose(pixel, (2836.0, 1924.0))
    with pytest.raises(od_exc.BehindCamera):
        proj.project_world_point((11.0, 19.0, -10.0), camera)


def test_project_points_shapes(intrinsics):
    extrinsics = proj.CameraExtrinsics(np.eye(3), np.zeros(3))
    camera = proj.PinholeCamera('IMG_0001.JPG', extrinsics, intrinsics)
    pixels, depths = proj.project_points((0.0, 0.0, 2.0), camera)
    assert pixels.shape == (1, 2)
    assert depths.shape == (1,)
