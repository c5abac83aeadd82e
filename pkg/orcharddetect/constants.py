# coding=utf-8
u"""Constants for the orchard detection toolkit."""
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
#

# Annotation classes
TREE_APPLE = 'tree_apple'
GROUND_APPLE = 'ground_apple'
CLASS_LABELS = (TREE_APPLE, GROUND_APPLE)

# instance ratio tree_apple:ground_apple used by the calibrated mAP
CALIBRATION_WEIGHTS = (0.92, 0.08)
WEIGHT_SUM_TOLERANCE = 1e-9

# raw drone frame, pixels
RAW_IMAGE_WIDTH = 5472
RAW_IMAGE_HEIGHT = 3648

# projection
MIN_DEPTH = 1e-9

# tree identifiers
TREE_ID_FORMAT = 'R{row:0{width}d}C{col:0{width}d}'
TREE_ID_MIN_WIDTH = 2

# crop planning
CROP_MARGIN = 0.1

# image resizer (fixed aspect ratio)
RESIZE_MIN_DIMENSION = 600
RESIZE_MAX_DIMENSION = 1024

# grid anchors
ANCHOR_BASE_SIZE = 256
ANCHOR_SCALES = (0.25, 0.5, 1.0, 2.0)
ANCHOR_ASPECT_RATIOS = (0.5, 1.0, 2.0)
ANCHOR_STRIDE = 16
FEATURE_STRIDE = 16

# anchors proposed for PASCAL VOC by the original Faster R-CNN
FASTER_RCNN_SCALES = (0.5, 1.0, 2.0)
FASTER_RCNN_ASPECT_RATIOS = (0.5, 1.0, 2.0)

# k-means
KMEANS_RESTARTS = 10
KMEANS_MAX_ITER = 300
KMEANS_K_MAX = 10
METRIC_EUCLIDEAN = 'euclidean'
METRIC_IOU = 'iou'
KMEANS_METRICS = (METRIC_EUCLIDEAN, METRIC_IOU)

# RPN supervision
RPN_POSITIVE_IOU = 0.7
RPN_NEGATIVE_IOU = 0.3
RPN_LAMBDA = 10.0
RPN_BATCH_SIZE = 256
RPN_POSITIVE_FRACTION = 0.5
PROB_EPSILON = 1e-7
PROPOSAL_NMS_IOU = 0.7
MAX_BOX_PROPOSALS = 150

# optimiser
MOMENTUM_GAMMA = 0.9
LEARNING_RATE = 0.0003

# evaluation
EVAL_IOU = 0.5
AR_IOU_THRESHOLDS = tuple(round(0.5 + 0.05 * i, 2) for i in range(10))
AR_MAX_DETECTIONS = 100
AP_ALL_POINT = 'allpoint'
AP_11_POINT = '11point'
AP_METHODS = (AP_ALL_POINT, AP_11_POINT)

# augmentation
MAX_ROTATION_DEGREES = 60.0
MIN_VISIBLE_FRACTION = 0.25
AUGMENT_MIRROR = 'mirror_h'
AUGMENT_ROTATE = 'rotate'
AUGMENT_BLUR = 'gaussian_blur'
AUGMENT_NOISE = 'additive_noise'
GEOMETRIC_AUGMENT_OPS = (AUGMENT_MIRROR, AUGMENT_ROTATE)
PIXEL_AUGMENT_OPS = (AUGMENT_BLUR, AUGMENT_NOISE)

# dataset splits (train:test, then train:validation)
SPLIT_FRACTION = 0.8

# CSV schemas
ROWS_COLUMNS = ('row', 'start_x', 'start_y', 'end_x', 'end_y', 'spacing')
MANIFEST_COLUMNS = ('tree_id', 'image', 'xmin', 'ymin', 'xmax', 'ymax')
TAG_COLUMNS = ('tree_id', 'u', 'v')
DETECTION_COLUMNS = ('image', 'label', 'conf', 'xmin', 'ymin', 'xmax',
                     'ymax')
WSS_COLUMNS = ('k', 'wss_euclid', 'wss_iou')
