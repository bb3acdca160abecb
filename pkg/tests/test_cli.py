# Copyright © 2024 The ranplan-py authors. All Rights Reserved.
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

import os

import pytest

from ranplan import read_pcap
from ranplan.cli import build_parser
from ranplan.cli import main


def write_scenario(tmpdir, text, name='scenario.yaml'):
  path = tmpdir.join(name)
  path.write(text)
  return str(path)


def test_parser():
  args = build_parser().parse_args(
      ['plan', '--attenuation-sweep', '0,10.5', '--combine', 'power'])
  assert args.command == 'plan'
  assert args.attenuation_sweep == [0.0, 10.5]
  assert args.combine == 'power'
  assert args.out is None


def test_usage_errors(capsys):
  with pytest.raises(SystemExit) as err:
    main([])
  assert err.value.code == 1

  with pytest.raises(SystemExit) as err:
    main(['deploy'])
  assert err.value.code == 1

  with pytest.raises(SystemExit) as err:
    main(['plan', '--attenuation-sweep', 'a,b'])
  assert err.value.code == 1
  assert 'invalid attenuation list' in capsys.readouterr().err

  with pytest.raises(SystemExit) as err:
    main(['--version'])
  assert err.value.code == 0


def test_capacity(tmpdir, capsys):
  assert main(['capacity']) == 0
  out = capsys.readouterr().out
  assert '525.8 Mbps DL, 93.75 Mbps UL' in out
  assert 'cell_dl_mbps=525.825' in out
  assert not os.path.exists(str(tmpdir.join('capacity.txt')))

  assert main(['capacity', '--out', str(tmpdir)]) == 0
  out = capsys.readouterr().out
  block = tmpdir.join('capacity.txt').read()
  assert 'cell_dl_mbps=525.825\n' in block
  assert block in out


def test_capacity_scenario(tmpdir, capsys):
  path = write_scenario(tmpdir, 'tdd:\n  pattern: DDSUU\n')
  assert main(['capacity', '--scenario', path]) == 0
  assert 'cell_dl_mbps=525.825' not in capsys.readouterr().out


def test_config_errors(tmpdir, capsys):
  path = write_scenario(tmpdir, 'colour: red\n')
  assert main(['capacity', '--scenario', path]) == 2
  assert 'ranplan: ConfigError: unknown keys colour' in capsys.readouterr().err

  assert main(['capacity', '--scenario', str(tmpdir.join('no.yaml'))]) == 2
  assert 'IOError' in capsys.readouterr().err

  path = write_scenario(
      tmpdir, 'ru_points: [[1, 1, 2.2]]\nue_points: [[2, 2, 0.8]]\n',
      'single.yaml')
  assert main(['plan', '--scenario', path, '--out', str(tmpdir)]) == 2
  assert 'need >=2 locations' in capsys.readouterr().err

  path = write_scenario(
      tmpdir,
      'ru_points: [[0, 0, 1], [4, 0, 1]]\nue_points: [[0, 0, 1], [2, 2, 1]]\n',
      'coincident.yaml')
  assert main(['plan', '--scenario', path, '--out', str(tmpdir)]) == 2
  err = capsys.readouterr().err
  assert 'ChannelError: pair (0, 0): transmitter and receiver' in err


def test_plan(tmpdir, capsys):
  path = write_scenario(
      tmpdir,
      'ru_points: [[0, 0, 2.2], [10, 0, 2.2], [5, 8, 2.2]]\n'
      'ue_points: [[1, 1, 0.8], [9, 1, 0.8], [5, 6, 0.8], [5, 2, 0.8]]\n')
  out = tmpdir.join('out')
  assert main(['plan', '--scenario', path, '--out', str(out),
               '--attenuation-sweep', '0,20']) == 0
  for name in ('channel.csv', 'scores_0dB.csv', 'scores_20dB.csv',
               'heatmap_0dB.csv', 'heatmap_20dB.csv', 'best_pairs.txt'):
    assert out.join(name).check(file=1)

  channel = out.join('channel.csv').read().splitlines()
  assert len(channel) == 1 + 3 * 4
  scores = out.join('scores_0dB.csv').read().splitlines()
  assert len(scores) == 1 + 3
  table = out.join('best_pairs.txt').read()
  assert 'A_RU (dB)' in table
  assert table in capsys.readouterr().out


def test_plan_greedy(tmpdir):
  path = write_scenario(
      tmpdir,
      'ru_points: [[0, 0, 2.2], [10, 0, 2.2], [5, 8, 2.2], [5, 4, 2.2]]\n'
      'ue_points: [[1, 1, 0.8], [9, 1, 0.8], [5, 6, 0.8]]\n'
      'placement:\n'
      '  m: 3\n'
      '  strategy: greedy\n'
      '  attenuation_sweep: [10]\n')
  assert main(['plan', '--scenario', path, '--out', str(tmpdir)]) == 0
  assert tmpdir.join('scores_10dB.csv').check(file=1)
  assert tmpdir.join('best_pairs.txt').check(file=1)
  assert not tmpdir.join('heatmap_10dB.csv').check()


def test_simulate(tmpdir, capsys):
  path = write_scenario(
      tmpdir,
      'simulation:\n'
      '  ue_count: 2\n'
      '  n_slots: 20\n')
  assert main(['simulate', '--scenario', path, '--out', str(tmpdir),
               '--seed', '3']) == 0
  stats = tmpdir.join('stats.txt').read()
  assert stats.startswith('slots=20\n')
  assert 'ue1_dl_mbps=' in stats
  assert stats == capsys.readouterr().out

  messages = read_pcap(str(tmpdir.join('trace.pcap')))
  assert messages
  assert messages[0].kind.label == 'ParamRequest'


def test_analyze(tmpdir, capsys):
  log = tmpdir.join('throughput.csv')
  log.write('timestamp,value\n0,1\n1,2\n2,3\n3,4\n4,5\n')
  out = tmpdir.join('out')
  assert main(['analyze', str(log), '--out', str(out)]) == 0
  assert 'throughput: 3 [' in capsys.readouterr().out
  lines = out.join('stats.csv').read().splitlines()
  assert lines[0] == 'label,mean,ci_lo,ci_hi'
  assert lines[1].startswith('throughput,3.0,')

  bad = tmpdir.join('bad.csv')
  bad.write('timestamp,value\n0,1\n1,fast\n')
  assert main(['analyze', str(bad), '--out', str(out)]) == 2
  assert 'SchemaError' in capsys.readouterr().err

  instant = tmpdir.join('instant.csv')
  instant.write('event,start,duration\nsession,0,0\n')
  assert main(['analyze', str(instant), '--out', str(out)]) == 2
  assert 'session duration must be positive' in capsys.readouterr().err
