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

import mock
from oslo_config import cfg
import pytest

from orcharddetect import exceptions as od_exc
import orcharddetect.utils.manage as manage


@pytest.fixture
def annotations(tmp_path):
    directory = tmp_path / 'annotations'
    directory.mkdir()
    for index in range(10):
        (directory / ('img_%02d.xml' % index)).write_text('<annotation/>')
    return str(directory)


def run(args):
    return manage.main(args, conf=cfg.ConfigOpts())


def test_split_succeeds(annotations, tmp_path):
    out = str(tmp_path / 'out')
    assert run(['--paths-annotations-dir', annotations,
                '--paths-output-dir', out, 'split']) == od_exc.EXIT_OK
    assert sorted(os.listdir(out)) == ['test.txt', 'train.txt', 'val.txt']


def test_validation_failure_exit_code(annotations, tmp_path):
    assert run(['--evaluation-calibration-weights', '0.5,0.6',
                '--paths-annotations-dir', annotations,
                '--paths-output-dir', str(tmp_path), 'split']) == (
        od_exc.EXIT_VALIDATION)


def test_data_failure_exit_code(tmp_path):
    assert run(['--paths-annotations-dir', str(tmp_path / 'none'),
                '--paths-output-dir', str(tmp_path), 'anchors']) == (
        od_exc.EXIT_DATA)


@pytest.mark.parametrize('exc, code', [
    (od_exc.InsufficientBoxes(k=3, count=1), od_exc.EXIT_VALIDATION),
    (od_exc.MalformedLine(source='d.csv', line_no=2, reason='x'),
     od_exc.EXIT_DATA),
    (od_exc.OrchardDetectException(), od_exc.EXIT_DATA),
])
@mock.patch('orcharddetect.utils.manage.pipeline_driver')
def test_driver_errors_map_to_exit_codes(mock_driver, exc, code,
                                         annotations):
    mock_driver.PipelineDriver.return_value.run.side_effect = exc
    assert run(['--paths-annotations-dir', annotations, 'split']) == code


@mock.patch('orcharddetect.utils.manage.pipeline_driver')
def test_driver_gets_parsed_config(mock_driver, annotations):
    assert run(['--seed', '9', '--paths-annotations-dir', annotations,
                'augment']) == od_exc.EXIT_OK
    config = mock_driver.PipelineDriver.call_args[0][0]
    assert config.command == 'augment'
    assert config.seed == 9


def test_main_runs_twice_on_one_config(annotations, tmp_path):
    conf = cfg.ConfigOpts()
    for name in ('first', 'second'):
        out = str(tmp_path / name)
        assert manage.main(['--paths-annotations-dir', annotations,
                            '--paths-output-dir', out, 'split'],
                           conf=conf) == od_exc.EXIT_OK
        assert sorted(os.listdir(out)) == ['test.txt', 'train.txt',
                                           'val.txt']
