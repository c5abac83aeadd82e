# coding=utf-8
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
'''Console entry point; see pipeline_library for the commands.'''
import sys

from oslo_config import cfg
from oslo_log import log as logging

import orcharddetect
from orcharddetect import exceptions as od_exc
from orcharddetect.utils import config as od_config
from orcharddetect.utils import pipeline_driver

LOG = logging.getLogger(__name__)

DOMAIN = 'orcharddetect'


def main(argv=None, conf=None):
    """Parse options, run one command and return its exit code.

    0 on success, 1 on a validation failure and 2 on an I/O or parse
    failure.
    """
    conf = conf or cfg.CONF
    if 'command' not in conf:
        # CLI options cannot be registered again once arguments are parsed
        od_config.register_opts(conf)
        logging.register_options(conf)
    conf(sys.argv[1:] if argv is None else argv, project=DOMAIN,
         version=orcharddetect.__version__)
    logging.setup(conf, DOMAIN)
    try:
        config = od_config.PipelineConfig.from_conf(conf)
        pipeline_driver.PipelineDriver(config).run()
    except od_exc.OrchardDetectException as exc:
        LOG.error("%s failed: %s" % (conf.command.name, exc))
        return exc.exit_code
    return od_exc.EXIT_OK


if __name__ == '__main__':
    sys.exit(main())
