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

__all__ = ['RanError']


class RanError(Exception):
  """Class that encapsules data and configuration errors raised by ranplan.

  Every error carries a short machine-readable `code` (like
  'SceneParseError' or 'ProtocolError') and a human readable `message`.
  """

  # Data and configuration errors share a single CLI exit code.
  exit_code = 2

  @classmethod
  def from_diagnostic(cls, code, diagnostic):
    """Creates an error from a :class:`ranplan.Diagnostic`."""
    return cls(code, str(diagnostic))

  def __init__(self, code, message):
    # Unpickling calls cls(*args), so args holds both arguments.
    super().__init__(code, message)
    self.code = code
    self.message = message

  def __str__(self):
    return f'{self.code}: {self.message}'
