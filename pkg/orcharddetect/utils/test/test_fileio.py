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

import os

import pytest

from orcharddetect import exceptions as od_exc
import orcharddetect.utils.fileio as fileio


def test_write_atomic_text_and_bytes(tmp_path):
    path = str(tmp_path / 'deep' / 'dir' / 'out.csv')
    assert fileio.write_atomic(path, 'a,b\n1,2\n') == path
    assert fileio.read_text(path) == 'a,b\n1,2\n'
    fileio.write_atomic(path, b'\x89PNG')
    with open(path, 'rb') as handle:
        assert handle.read() == b'\x89PNG'


def test_write_atomic_leaves_no_temporary_files(tmp_path):
    path = str(tmp_path / 'out.txt')
    fileio.write_atomic(path, 'first')
    fileio.write_atomic(path, 'second')
    assert os.listdir(str(tmp_path)) == ['out.txt']
    assert fileio.read_text(path) == 'second'


def test_read_text_missing(tmp_path):
    with pytest.raises(od_exc.ConfigPathMissing) as excinfo:
        fileio.read_text(str(tmp_path / 'gone.asc'), 'dtm')
    assert excinfo.value.kwargs['option'] == 'dtm'
    with pytest.raises(od_exc.ConfigPathMissing) as excinfo:
        fileio.read_text(str(tmp_path))
    assert excinfo.value.kwargs['option'] == 'input'
