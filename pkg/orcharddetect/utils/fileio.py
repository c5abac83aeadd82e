# coding=utf-8
u"""Single-writer file output with atomic replacement."""
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

import os

from oslo_log import log as logging
from oslo_utils import fileutils

from orcharddetect import exceptions as od_exc

LOG = logging.getLogger(__name__)


def write_atomic(path, content):
    """Write text or bytes to path via a temporary file and os.replace.

    Readers never observe a partially written file.
    """
    if isinstance(content, str):
        content = content.encode('utf-8')
    directory = os.path.dirname(os.path.abspath(path))
    fileutils.ensure_tree(directory)
    temp_path = fileutils.write_to_tempfile(
        content, path=directory, suffix='.tmp',
        prefix='.' + os.path.basename(path) + '.')
    try:
        os.replace(temp_path, path)
    except OSError:
        fileutils.delete_if_exists(temp_path)
        raise
    LOG.debug('Wrote %d bytes to %s' % (len(content), path))
    return path


def read_text(path, option=None):
    """Read a UTF-8 text file, mapping a missing file to ConfigPathMissing.

    :param option: name of the configuration option the path came from
    """
    if not os.path.isfile(path):
        raise od_exc.ConfigPathMissing(option=option or 'input', path=path)
    with open(path, 'r', encoding='utf-8') as handle:
        return handle.read()
