import copy
import json
import os
from dataclasses import dataclass, field, fields

import yaml

from nogap.modules.python.Options import PrecisionOptions, TruncationOptions, SequenceOptions, CostOptions, \
    SweepOptions, QuadratureOptions
from nogap.modules.python.Exceptions import ConfigInvalid, InvalidParameters, InvalidShift, PrefixExhausted
from nogap.modules.python.MpNumerics import resolve_precision
from nogap.modules.python.ExampleSequences import sequence_from_spec
"""
Experiment configuration of the command line front-end.

  1) FORMAT:
    - One JSON object, or YAML read with yaml.safe_load. Unknown keys are rejected.
  2) RESOLUTION:
    - Missing fields take the defaults of the option classes, the command line flags --precision, --threads and
      --out override the file, and the resolved object is echoed into manifest.json.
  3) REPLAY:
    - ExperimentConfig.from_manifest(path) rebuilds the resolved config of a previous run.
"""

COMMANDS = ('classify', 'biortho', 'pw', 'bounds', 'cost', 'sweep')
ABSCISSAS = ('inverse_T', 'inverse_T_power')

# first and last default index per command
_DEFAULT_K = {'biortho': (1, 10), 'pw': (1, 3), 'bounds': (3, 12)}
_MOLLIFIER_KEYS = ('theta0', 'theta1', 'theta2')
_GRID_KEYS = ('gamma', 'T')


def _fail(detail, **witness):
    raise ConfigInvalid(detail, **witness)


def _integer(name, value, minimum):
    if isinstance(value, bool) or not isinstance(value, int):
        _fail("{} MUST BE AN INTEGER".format(name), value=value)
    if value < minimum:
        _fail("{} MUST BE AT LEAST {}".format(name, minimum), value=value)
    return value


def _positive_number(name, value):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        _fail("{} MUST BE A NUMBER".format(name), value=value)
    if not value > 0:
        _fail("{} MUST BE POSITIVE".format(name), value=value)
    return float(value)


def _number_list(name, value):
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        value = [value]
    if not isinstance(value, list) or not value:
        _fail("{} MUST BE A NUMBER OR A NONEMPTY LIST".format(name), value=value)
    return [_positive_number(name, item) for item in value]


def _index_list(value):
    if isinstance(value, dict):
        unknown = set(value) - {'from', 'to'}
        if unknown or 'from' not in value or 'to' not in value:
            _fail("k RANGE NEEDS EXACTLY from AND to", value=value)
        first, last = _integer('k.from', value['from'], 1), _integer('k.to', value['to'], 1)
        if last < first:
            _fail("EMPTY k RANGE", value=value)
        return list(range(first, last + 1))
    if isinstance(value, int) and not isinstance(value, bool):
        value = [value]
    if not isinstance(value, list) or not value:
        _fail("k MUST BE AN INDEX, A LIST OR A {from, to} RANGE", value=value)
    return [_integer('k', item, 1) for item in value]


@dataclass
class ExperimentConfig:
    command: str
    sequence: dict = None
    precision_bits: int = PrecisionOptions.DEFAULT_BITS
    rtol: float = TruncationOptions.RTOL
    M_max: int = TruncationOptions.M_MAX
    T: list = None
    k: list = None
    prefix: int = SequenceOptions.DEFAULT_PREFIX
    grid: dict = None
    abscissa: str = 'inverse_T'
    mollifier: dict = None
    samples: int = QuadratureOptions.T_GRID_POINTS
    output_dir: str = './nogap_output/'
    threads: int = SweepOptions.DEFAULT_THREADS
    # path of the file the config was read from, never echoed
    source: str = field(default=None, compare=False)

    @classmethod
    def field_names(cls):
        return [item.name for item in fields(cls) if item.name != 'source']

    @classmethod
    def from_dict(cls, values, source=None):
        """
        Validate a parsed config object and fill in the defaults.
        :param values: dict from JSON or YAML
        :param source: Path of the config file
        :return: ExperimentConfig
        """
        if not isinstance(values, dict):
            _fail("CONFIG MUST BE AN OBJECT", source=source)
        unknown = sorted(set(values) - set(cls.field_names()))
        if unknown:
            _fail("UNKNOWN CONFIG FIELDS", fields=",".join(unknown))
        if 'command' not in values:
            _fail("CONFIG NEEDS A command")
        config = cls(**copy.deepcopy(values))
        config.source = source
        config.validate()
        return config

    def validate(self):
        if self.command not in COMMANDS:
            _fail("UNKNOWN COMMAND", command=self.command, known="|".join(COMMANDS))
        if self.sequence is not None:
            if not isinstance(self.sequence, dict) or not self.sequence or 'kind' not in self.sequence:
                _fail("SEQUENCE SPEC MUST BE AN OBJECT WITH A kind", sequence=self.sequence)
        elif self.command != 'sweep':
            _fail("COMMAND NEEDS A SEQUENCE SPEC", command=self.command)
        self.precision_bits = _integer('precision_bits', self.precision_bits, PrecisionOptions.MIN_BITS)
        self.rtol = _positive_number('rtol', self.rtol)
        self.M_max = _integer('M_max', self.M_max, 1)
        self.prefix = _integer('prefix', self.prefix, 3)
        self.samples = _integer('samples', self.samples, 2)
        self.threads = _integer('threads', self.threads, 1)
        if not isinstance(self.output_dir, str) or not self.output_dir:
            _fail("output_dir MUST BE A PATH", output_dir=self.output_dir)
        if self.T is None:
            self.T = list(CostOptions.T_GRID) if self.command == 'cost' else [1.0]
        self.T = _number_list('T', self.T)
        if self.k is None and self.command in _DEFAULT_K:
            first, last = _DEFAULT_K[self.command]
            self.k = list(range(first, last + 1))
        if self.k is not None:
            self.k = _index_list(self.k)
        if self.abscissa not in ABSCISSAS:
            _fail("UNKNOWN ABSCISSA", abscissa=self.abscissa, known="|".join(ABSCISSAS))
        if self.mollifier is not None:
            if not isinstance(self.mollifier, dict) or set(self.mollifier) - set(_MOLLIFIER_KEYS):
                _fail("mollifier ACCEPTS ONLY theta0, theta1, theta2", mollifier=self.mollifier)
            self.mollifier = {key: _positive_number(key, value) for key, value in self.mollifier.items()}
        if self.command == 'sweep':
            self._validate_grid()
        elif self.grid is not None:
            _fail("grid IS ONLY USED BY sweep", command=self.command)

    def _validate_grid(self):
        if not isinstance(self.grid, dict) or not self.grid:
            _fail("SWEEP NEEDS A NONEMPTY grid")
        unknown = set(self.grid) - set(_GRID_KEYS)
        if unknown:
            _fail("UNKNOWN GRID AXES", axes=",".join(sorted(unknown)))
        grid = {}
        if 'gamma' in self.grid:
            grid['gamma'] = _number_list('grid.gamma', self.grid['gamma'])
            if self.sequence is not None and self.sequence.get('kind') != 'perturbed':
                _fail("A gamma GRID SWEEPS THE PERTURBED SYSTEM", kind=self.sequence.get('kind'))
        elif self.sequence is None:
            _fail("SWEEP NEEDS A SEQUENCE SPEC OR A gamma GRID")
        grid['T'] = _number_list('grid.T', self.grid.get('T', self.T))
        self.grid = grid

    def override(self, precision_bits=None, threads=None, output_dir=None):
        """
        Apply command line overrides and validate again.
        """
        if precision_bits is not None:
            self.precision_bits = precision_bits
        if threads is not None:
            self.threads = threads
        if output_dir is not None:
            self.output_dir = output_dir
        self.validate()
        return self

    def to_dict(self):
        return {name: copy.deepcopy(getattr(self, name)) for name in self.field_names()}

    def ks(self):
        return list(self.k or [])

    def precision(self):
        return resolve_precision(self.precision_bits)

    def build_sequence(self, spec=None):
        """
        The sequence named by the config. Spec errors are configuration errors.
        """
        spec = spec if spec is not None else self.sequence
        try:
            return sequence_from_spec(spec)
        except (InvalidParameters, InvalidShift, PrefixExhausted) as error:
            raise ConfigInvalid("BAD SEQUENCE SPEC", reason=error.plain_message())

    @staticmethod
    def class_parameters(seq):
        if seq.params is None:
            _fail("SEQUENCE HAS NO CLASS PARAMETERS, ADD class_params TO ITS SPEC", sequence=seq.label)
        return seq.params

    @classmethod
    def from_manifest(cls, path):
        """
        The resolved config echoed by a previous run.
        """
        with open(path) as fh:
            manifest = json.load(fh)
        if 'config' not in manifest:
            _fail("MANIFEST HAS NO config", path=path)
        return cls.from_dict(manifest['config'], source=path)


def _is_manifest(values):
    return isinstance(values, dict) and 'config' in values and 'nogap_version' in values


def load_config(path, command=None):
    """
    Read and validate a JSON or YAML experiment config. A manifest.json of a previous run is accepted and
    replays that run.
    :param path: Path to the config file
    :param command: Subcommand of the command line, fills in or must match the config's command
    :return: ExperimentConfig
    """
    if not os.path.isfile(path):
        _fail("CAN NOT LOCATE CONFIG FILE", path=path)
    with open(path) as fh:
        text = fh.read()
    try:
        values = json.loads(text)
    except json.JSONDecodeError:
        # yaml reads 1e-10 without a dot as a string, JSON goes through the json module first
        try:
            values = yaml.safe_load(text)
        except yaml.YAMLError as error:
            _fail("CONFIG IS NOT VALID JSON OR YAML", path=path, reason=str(error).splitlines()[0])
    if _is_manifest(values):
        values = values['config']
    if command is not None and isinstance(values, dict):
        values = dict(values)
        if values.setdefault('command', command) != command:
            _fail("CONFIG COMMAND DOES NOT MATCH THE SUBCOMMAND", config=values['command'], subcommand=command)
    return ExperimentConfig.from_dict(values, source=path)
