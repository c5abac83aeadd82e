# coding=utf-8
u"""Pinhole projection of world points into drone images."""
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
# Pixel convention: u is the column and grows right, v is the row and grows
# down, origin at the top-left corner. The camera looks along +Z_c and an
# upward Y_c maps to a smaller v.

from dataclasses import dataclass
from dataclasses import field
import math

import numpy as np

from orcharddetect import constants
from orcharddetect import exceptions as od_exc


@dataclass(frozen=True)
class EulerAngles(object):
    """Rotation angles in radians about x (omega), y (phi) and z (kappa)."""

    omega: float
    phi: float
    kappa: float

    @classmethod
    def from_degrees(cls, omega, phi, kappa):
        return cls(math.radians(omega), math.radians(phi),
                   math.radians(kappa))


@dataclass(frozen=True, eq=False)
class CameraExtrinsics(object):
    """Camera pose: rotation R and projection centre T in the world frame."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'rotation',
                           np.asarray(self.rotation, dtype=float))
        object.__setattr__(self, 'translation',
                           np.asarray(self.translation, dtype=float))


@dataclass(frozen=True)
class CameraIntrinsics(object):
    """Focal length and principal point in pixels, plus the image size."""

    focal_length: float
    cx: float
    cy: float
    image_width: int = constants.RAW_IMAGE_WIDTH
    image_height: int = constants.RAW_IMAGE_HEIGHT

    def __post_init__(self):
        if not self.focal_length > 0:
            raise od_exc.DomainError(
                reason="focal length must be positive, got %s" %
                self.focal_length)
        if not (0 <= self.cx < self.image_width and
                0 <= self.cy < self.image_height):
            raise od_exc.DomainError(
                reason="principal point (%s, %s) outside %dx%d image" %
                (self.cx, self.cy, self.image_width, self.image_height))

    @property
    def matrix(self):
        """Calibration matrix with the negative v axis of the model."""
        return np.array([[self.focal_length, 0.0, self.cx],
                         [0.0, -self.focal_length, self.cy],
                         [0.0, 0.0, 1.0]])


def rotation_x(omega):
    c, s = math.cos(omega), math.sin(omega)
    return np.array([[1.0, 0.0, 0.0],
                     [0.0, c, -s],
                     [0.0, s, c]])


def rotation_y(phi):
    c, s = math.cos(phi), math.sin(phi)
    return np.array([[c, 0.0, s],
                     [0.0, 1.0, 0.0],
                     [-s, 0.0, c]])


def rotation_z(kappa):
    c, s = math.cos(kappa), math.sin(kappa)
    return np.array([[c, -s, 0.0],
                     [s, c, 0.0],
                     [0.0, 0.0, 1.0]])


def build_rotation(angles):
    """Compose R = Rx(omega) . Ry(phi) . Rz(kappa) (right hand rule).

    :param angles: EulerAngles in radians
    :returns: 3x3 orthonormal numpy array with determinant +1
    """
    return rotation_x(angles.omega).dot(
        rotation_y(angles.phi)).dot(rotation_z(angles.kappa))


def is_rotation(matrix, tolerance=1e-9):
    """True when matrix is orthonormal with determinant +1."""
    matrix = np.asarray(matrix, dtype=float)
    if matrix.shape != (3, 3):
        return False
    drift = np.abs(matrix.T.dot(matrix) - np.eye(3)).max()
    return (drift <= tolerance and
            abs(np.linalg.det(matrix) - 1.0) <= tolerance)


def world_to_camera(points, extrinsics):
    """P_c = R^T (P_w - T), for one point (3,) or many (N, 3)."""
    points = np.asarray(points, dtype=float)
    # row vectors: (R^T d)^T == d^T R
    return (points - extrinsics.translation).dot(extrinsics.rotation)


def camera_to_world(points, extrinsics):
    """Inverse of world_to_camera: P_w = R P_c + T."""
    points = np.asarray(points, dtype=float)
    return points.dot(extrinsics.rotation.T) + extrinsics.translation


def _pinhole(points, intrinsics):
    f = intrinsics.focal_length
    with np.errstate(divide='ignore', invalid='ignore'):
        u = f * points[..., 0] / points[..., 2] + intrinsics.cx
        v = -f * points[..., 1] / points[..., 2] + intrinsics.cy
    return np.stack([u, v], axis=-1)


def camera_to_pixel(points, intrinsics):
    """Project camera-frame points with the undistorted pinhole model.

    u = f X_c / Z_c + c_x and v = -f Y_c / Z_c + c_y.

    :raises: BehindCamera when any Z_c <= 1e-9 m
    """
    points = np.asarray(points, dtype=float)
    depth = np.atleast_1d(points[..., 2])
    if np.any(depth <= constants.MIN_DEPTH):
        raise od_exc.BehindCamera(depth=float(depth.min()))
    return _pinhole(points, intrinsics)


@dataclass(frozen=True, eq=False)
class PinholeCamera(object):
    """A camera given by decomposed extrinsics and intrinsics."""

    name: str
    extrinsics: CameraExtrinsics
    intrinsics: CameraIntrinsics

    @property
    def image_size(self):
        return (self.intrinsics.image_width, self.intrinsics.image_height)

    @property
    def focal_length(self):
        return self.intrinsics.focal_length

    def project(self, points):
        """Return (pixels, depths) without raising for points behind."""
        camera = world_to_camera(points, self.extrinsics)
        return _pinhole(camera, self.intrinsics), camera[..., 2]

    def to_pmatrix(self, offset=None):
        """Equivalent 3x4 matrix K [R^T | -R^T (T - offset)].

        The matrix acts on local coordinates, global = local + offset.
        """
        offset = np.zeros(3) if offset is None else np.asarray(offset)
        rt = self.extrinsics.rotation.T
        centre = self.extrinsics.translation - offset
        return self.intrinsics.matrix.dot(
            np.hstack([rt, -rt.dot(centre).reshape(3, 1)]))


@dataclass(frozen=True, eq=False)
class MatrixCamera(object):
    """A camera given by a raw 3x4 projection matrix (pmatrix.txt).

    The matrix maps local project coordinates to homogeneous pixels; world
    points are brought into the local frame by subtracting ``offset``.
    """

    name: str
    pmatrix: np.ndarray
    image_width: int = constants.RAW_IMAGE_WIDTH
    image_height: int = constants.RAW_IMAGE_HEIGHT
    offset: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, 'pmatrix',
                           np.asarray(self.pmatrix, dtype=float))
        object.__setattr__(self, 'offset',
                           np.asarray(self.offset, dtype=float))

    @property
    def image_size(self):
        return (self.image_width, self.image_height)

    @property
    def focal_length(self):
        """Horizontal focal length recovered from the left 3x3 block."""
        m = self.pmatrix[:, :3] / np.linalg.norm(self.pmatrix[2, :3])
        cx = m[0].dot(m[2])
        return math.sqrt(max(m[0].dot(m[0]) - cx * cx, 0.0))

    def project(self, points):
        """Return (pixels, depths) without raising for points behind.

        Depth is the distance along the principal axis, the homogeneous
        scale divided by the norm of the matrix's third row.
        """
        local = np.asarray(points, dtype=float) - self.offset
        homogeneous = local.dot(self.pmatrix[:, :3].T) + self.pmatrix[:, 3]
        w = homogeneous[..., 2]
        with np.errstate(divide='ignore', invalid='ignore'):
            pixels = homogeneous[..., :2] / w[..., np.newaxis]
        return pixels, w / np.linalg.norm(self.pmatrix[2, :3])


def project_points(points, model):
    """Vectorised projection: returns (pixels (N, 2), depths (N,))."""
    return model.project(np.atleast_2d(np.asarray(points, dtype=float)))


def project_world_point(point, model):
    """Project a single world point through either camera model.

    :param point: world coordinates (x, y, z) in metres
    :param model: PinholeCamera or MatrixCamera
    :returns: numpy array (u, v)
    :raises: BehindCamera when the point is not in front of the camera
    """
    pixels, depths = model.project(np.asarray(point, dtype=float))
    if not depths > constants.MIN_DEPTH:
        raise od_exc.BehindCamera(depth=float(depths))
    return pixels
