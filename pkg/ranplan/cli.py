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

"""Command line entry point: ranplan {plan,capacity,simulate,analyze}."""

import argparse
import dataclasses
import logging
import os
import sys

from .capacity import format_capacity_table
from .capacity import summary as capacity_summary
from .error import RanError
from .measure import ingest_csv
from .measure import summarize
from .measure import write_stats_csv
from .pcap import export_pcap
from .placement import SweepResult
from .placement import export_heatmap
from .placement import format_best_table
from .placement import search
from .placement import sweep_attenuation
from .raytrace import build_channel_matrix
from .raytrace import export_channel_csv
from .scenario import Scenario
from .slotsim import Simulator
from .version import __version__


__all__ = ['build_parser', 'main']


logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s - %(levelname)s - %(name)s - %(message)s'

EXIT_USAGE = 1
EXIT_INTERNAL = 3

_COMBINE_MODES = {'coherent': 'coherent', 'power': 'power_sum'}


class _ArgumentParser(argparse.ArgumentParser):
  """Exits with the usage error code instead of argparse's 2."""

  def error(self, message):
    self.print_usage(sys.stderr)
    self.exit(EXIT_USAGE, f'{self.prog}: error: {message}\n')


def _sweep(text):
  try:
    values = [float(v) for v in text.split(',') if v.strip()]
  except ValueError:
    raise argparse.ArgumentTypeError(f'invalid attenuation list: {text}')
  if not values:
    raise argparse.ArgumentTypeError('empty attenuation list')
  return values


def build_parser():
  parser = _ArgumentParser(
      prog='ranplan',
      description='Private 5G deployment planning and FAPI slot simulation.')
  parser.add_argument(
      '--version', action='version', version=f'%(prog)s {__version__}')
  parser.add_argument(
      '-v', '--verbose', action='count', default=0,
      help='log INFO messages, DEBUG with -vv')

  common = _ArgumentParser(add_help=False)
  common.add_argument('--scenario', help='scenario YAML file')
  common.add_argument('--out', help='output directory')

  commands = parser.add_subparsers(dest='command', metavar='command')
  commands.required = True

  plan = commands.add_parser(
      'plan', parents=[common], help='RU placement by average SINR')
  plan.add_argument(
      '--attenuation-sweep', type=_sweep, metavar='LIST',
      help='comma separated RU attenuations in dB, e.g. 0,10,20')
  plan.add_argument(
      '--combine', choices=sorted(_COMBINE_MODES),
      help='path combination: coherent amplitudes or power sum')
  plan.set_defaults(handler=cmd_plan)

  capacity = commands.add_parser(
      'capacity', parents=[common], help='theoretical TDD throughput')
  capacity.set_defaults(handler=cmd_capacity)

  simulate = commands.add_parser(
      'simulate', parents=[common], help='FAPI slot-procedure simulation')
  simulate.add_argument('--seed', type=int, help='traffic generator seed')
  simulate.set_defaults(handler=cmd_simulate)

  analyze = commands.add_parser(
      'analyze', help='mean and confidence interval of experiment logs')
  analyze.add_argument('csv', nargs='+', help='experiment CSV files')
  analyze.add_argument('--out', default='.', help='output directory')
  analyze.set_defaults(handler=cmd_analyze)
  return parser


def _scenario(args):
  scenario = Scenario.load(args.scenario) if args.scenario else Scenario()
  combine = getattr(args, 'combine', None)
  return scenario.with_overrides(
      attenuation_sweep=getattr(args, 'attenuation_sweep', None),
      seed=getattr(args, 'seed', None),
      combine=_COMBINE_MODES[combine] if combine else None)


def _output_dir(path):
  try:
    os.makedirs(path, exist_ok=True)
  except OSError as err:
    raise RanError('IOError', f'{path}: {err}')
  return path


def _write_text(path, text):
  try:
    with open(path, 'w', encoding='utf-8') as f:
      f.write(text)
  except OSError as err:
    raise RanError('IOError', f'{path}: {err}')


def cmd_plan(args):
  """Traces the channel, sweeps the RU attenuation and writes, per value, a
  normalized heatmap and the score table, then the best-pair summary."""
  scenario = _scenario(args)
  out = _output_dir(args.out or '.')
  settings = scenario.placement
  if len(scenario.ru_points) < 2:
    raise RanError('ConfigError', 'need >=2 locations for pair search')
  channel = build_channel_matrix(
      scenario.load_scene(), scenario.ru_points, scenario.ue_points,
      scenario.trace, workers=scenario.workers)
  export_channel_csv(channel, os.path.join(out, 'channel.csv'))
  planner = scenario.planner(channel)

  if settings.m == 2 and settings.strategy == 'exhaustive':
    results = sweep_attenuation(planner, settings.attenuation_sweep)
  else:
    results = []
    for value in settings.attenuation_sweep:
      planner.ru = dataclasses.replace(planner.ru, attenuation=value)
      found = search(planner, settings.m, settings.strategy)
      results.append(SweepResult(value, found.table, found.best))

  for result in results:
    name = f'{result.attenuation_db:g}dB'
    result.table.to_csv(os.path.join(out, f'scores_{name}.csv'))
    if settings.m == 2 and settings.strategy == 'exhaustive':
      export_heatmap(
          result.table, os.path.join(out, f'heatmap_{name}.csv'),
          normalize=True, n_locations=planner.n_locations)
  table = format_best_table(results)
  _write_text(os.path.join(out, 'best_pairs.txt'), table)
  sys.stdout.write(table)
  return 0


def cmd_capacity(args):
  scenario = _scenario(args)
  configs = (scenario.carrier, scenario.tdd, scenario.link, scenario.harq)
  sys.stdout.write(format_capacity_table(*configs))
  block = capacity_summary(*configs)
  sys.stdout.write('\n' + block)
  if args.out:
    _write_text(os.path.join(_output_dir(args.out), 'capacity.txt'), block)
  return 0


def cmd_simulate(args):
  scenario = _scenario(args)
  out = _output_dir(args.out or '.')
  stats, trace = Simulator(scenario.simulation).run()
  export_pcap(trace, os.path.join(out, 'trace.pcap'))
  block = stats.summary()
  _write_text(os.path.join(out, 'stats.txt'), block)
  sys.stdout.write(block)
  return 0


def cmd_analyze(args):
  rows = []
  for path in args.csv:
    rows.extend(summarize(ingest_csv(path)))
  out = _output_dir(args.out)
  write_stats_csv(rows, os.path.join(out, 'stats.csv'))
  for label, ci in rows:
    sys.stdout.write(f'{label}: {ci.mean:.4g} [{ci.lo:.4g}, {ci.hi:.4g}]\n')
  return 0


def main(argv=None):
  """Runs the command line and returns its exit code.

  0 on success, 1 on usage errors, 2 on data or configuration errors and 3
  on anything else.
  """
  parser = build_parser()
  args = parser.parse_args(argv)
  level = (logging.WARNING, logging.INFO, logging.DEBUG)[min(args.verbose, 2)]
  logging.basicConfig(format=LOG_FORMAT, level=level)
  try:
    return args.handler(args)
  except RanError as err:
    sys.stderr.write(f'ranplan: {err}\n')
    return err.exit_code
  except Exception:  # pylint: disable=broad-except
    logger.exception('internal error')
    return EXIT_INTERNAL


if __name__ == '__main__':
  sys.exit(main())
