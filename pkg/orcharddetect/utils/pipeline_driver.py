# coding=utf-8
u"""Command dispatch of the orchard pipeline."""
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

from oslo_log import helpers as log_helpers
from oslo_log import log as logging
from oslo_utils import fileutils

from orcharddetect import exceptions as od_exc
from orcharddetect.utils import pipeline_library as library

LOG = logging.getLogger(__name__)


class CommandManager(object):
    '''Parent for all managers defined in this module.'''

    def __init__(self, driver):
        self.driver = driver

    @property
    def config(self):
        return self.driver.config

    def _prepare(self):
        '''Create the output directory before any file is written.'''
        fileutils.ensure_tree(self.config.output())

    def run(self):
        raise NotImplementedError()


class TagManager(CommandManager):
    """Tags visible tree bases in every survey image."""

    @log_helpers.log_method_call
    def run(self):
        self._prepare()
        return library.tag_images(self.config)


class CropManager(CommandManager):
    """Crops every tree once from the first image that sees it."""

    @log_helpers.log_method_call
    def run(self):
        self._prepare()
        manifest = library.crop_images(self.config)
        if manifest.missing:
            LOG.warning("%d trees are seen in no image" %
                        len(manifest.missing))
        return manifest


class AnchorManager(CommandManager):
    @log_helpers.log_method_call
    def run(self):
        self._prepare()
        return library.design_anchors(self.config)


class EvalManager(CommandManager):
    @log_helpers.log_method_call
    def run(self):
        self._prepare()
        report = library.evaluate(self.config)
        LOG.info("calibrated mAP %.4f, true mAP %.4f" %
                 (report.calibrated_map, report.true_map))
        return report


class AugmentManager(CommandManager):
    @log_helpers.log_method_call
    def run(self):
        self._prepare()
        return library.augment_annotations(self.config)


class SplitManager(CommandManager):
    @log_helpers.log_method_call
    def run(self):
        self._prepare()
        return library.split_annotations(self.config)


class YieldManager(CommandManager):
    @log_helpers.log_method_call
    def run(self):
        self._prepare()
        return library.yield_map(self.config)


class PipelineDriver(object):
    """Runs pipeline commands against one PipelineConfig."""

    def __init__(self, config):
        self.config = config
        self.managers = {
            'tag': TagManager(self),
            'crop': CropManager(self),
            'anchors': AnchorManager(self),
            'eval': EvalManager(self),
            'augment': AugmentManager(self),
            'split': SplitManager(self),
            'yield': YieldManager(self),
        }

    def run(self, command=None):
        """Run a command, by default the one the config was built for.

        :raises: DomainError for an unknown command
        """
        command = command or self.config.command
        try:
            manager = self.managers[command]
        except KeyError:
            raise od_exc.DomainError(reason="unknown command '%s'" % command)
        LOG.debug("Running %s with output in %s" %
                  (command, self.config.output()))
        return manager.run()
