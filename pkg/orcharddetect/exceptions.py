# coding=utf-8
u"""Orchard detection toolkit exceptions."""
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

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_DATA = 2


class OrchardDetectException(Exception):
    """General orchard detection toolkit exception.

    Subclasses set ``message`` to a template which is formatted with the
    keyword arguments given when the exception is raised.
    """

    message = "An unknown exception occurred."
    exit_code = EXIT_DATA

    def __init__(self, message=None, **kwargs):
        self.kwargs = kwargs
        if message:
            self.message = message
        else:
            try:
                self.message = self.message % kwargs
            except (KeyError, TypeError):
                # keep the raw template rather than hide the real error
                pass
        super(OrchardDetectException, self).__init__(self.message)

    def __str__(self):
        return self.message


class OrchardDataError(OrchardDetectException):
    """Input could not be read or parsed."""

    message = "Data error"
    exit_code = EXIT_DATA


class OrchardValidationError(OrchardDetectException):
    """Input was read but violates a geometric or metric rule."""

    message = "Validation error"
    exit_code = EXIT_VALIDATION


class BehindCamera(OrchardValidationError):
    message = "Point at depth %(depth)s m is not in front of the camera"


class OutOfExtent(OrchardValidationError):
    message = "Point (%(x)s, %(y)s) lies outside the terrain grid extent"


class NoDataCell(OrchardValidationError):
    message = "Point (%(x)s, %(y)s) touches a NODATA terrain cell"


class TreeHeightInvalid(OrchardValidationError):
    message = ("Tree %(tree_id)s at (%(x)s, %(y)s): surface %(top)s m "
               "is below terrain %(base)s m")


class TreeSamplingFailed(OrchardValidationError):
    message = ("Tree %(tree_id)s at (%(x)s, %(y)s) could not be sampled "
               "in the %(grid)s: %(reason)s")


class MalformedLine(OrchardDataError):
    message = "%(source)s line %(line_no)d: %(reason)s"


class HeaderMissing(OrchardDataError):
    message = "%(source)s: grid header %(key)s is missing"


class DimensionMismatch(OrchardDataError):
    message = "%(source)s: %(reason)s"


class MalformedXml(OrchardDataError):
    message = "%(source)s: %(reason)s"


class UnknownClass(OrchardDataError):
    message = "%(source)s: unknown class label '%(label)s'"


class DegenerateBox(OrchardValidationError):
    message = "Box %(box)s has no area"


class DegenerateCrop(OrchardValidationError):
    message = "Crop for tree %(tree_id)s in %(image)s has no area"


class InsufficientBoxes(OrchardValidationError):
    message = "k-means needs at least %(k)d boxes, got %(count)d"


class DomainError(OrchardValidationError):
    message = "%(reason)s"


class WeightSum(OrchardValidationError):
    message = "Calibration weights %(weights)s do not sum to 1"


class InvalidAugmentSpec(OrchardValidationError):
    message = "Invalid augmentation %(op)s: %(reason)s"


class ConfigPathMissing(OrchardDataError):
    message = "Configured %(option)s path does not exist: %(path)s"


class ImageUnreadable(OrchardDataError):
    message = "Image %(path)s could not be read: %(reason)s"
