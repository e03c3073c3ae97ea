import concurrent.futures
import copy
import itertools
import os

from tqdm import tqdm

from nogap.modules.python.ControlCost import ControlProblem, control_cost
from nogap.modules.python.ExampleSequences import sequence_from_spec
from nogap.modules.python.DataStore import DataStore
from nogap.modules.python.Exceptions import NoGapError
from nogap.modules.python.FileManager import FileManager
from nogap.modules.python.MpNumerics import resolve_precision
from nogap.modules.python.Options import SweepOptions
from nogap.modules.python.TextColor import TextColor
from nogap.modules.python.CommandOutcome import CommandOutcome
from nogap.version import __version__
"""
The sweep command evaluates K(T) over a (gamma, T) grid.

  1) GRID:
    - The grid is the product of the gamma axis (or the single sequence of the config) and the T axis, kept in
      that order in results.csv whatever order the points finish in.
  2) CACHE:
    - Every point is keyed by the SHA-256 of its inputs in nogap_cache.h5 of the output directory. A rerun reuses
      finished points, failed points are never cached.
  3) WORKERS:
    - With threads > 1 the points run in a process pool with quiet logging. A failing point is reported in its
      row and does not stop the sweep.
"""

SWEEP_HEADER = ('gamma', 'T', 'K', 'M_star', 'precision_bits', 'status', 'error')


def _quiet_worker():
    os.environ[TextColor.QUIET_ENV] = '1'


def _point_spec(config, gamma):
    if gamma is None:
        return copy.deepcopy(config.sequence)
    spec = copy.deepcopy(config.sequence) if config.sequence else {'kind': 'perturbed'}
    spec['params'] = dict(spec.get('params') or {}, gamma=gamma)
    return spec


def _point_key(spec, gamma, T, config):
    return FileManager.content_hash({'command': 'cost', 'sequence': spec, 'gamma': gamma, 'T': T,
                                     'M_max': config.M_max, 'precision_bits': config.precision_bits,
                                     'rtol': config.rtol})


def evaluate_point(spec, gamma, T, m_max, bits, rtol):
    """
    K(T) for one grid point. Any failure is returned as an error record, in a worker or in the calling process.
    :return: dict with the columns of SWEEP_HEADER and log_K
    """
    record = {'gamma': gamma, 'T': T, 'K': '', 'M_star': '', 'precision_bits': bits, 'status': 'ok', 'error': '',
              'log_K': None}
    try:
        precision = resolve_precision(bits)
        problem = ControlProblem(sequence_from_spec(spec), T, precision=precision)
        estimate = control_cost(problem, rtol, m_max=m_max)
        record.update(K=precision.nstr(estimate.value), M_star=estimate.M_star, precision_bits=estimate.precision_bits,
                      log_K=float(precision.ctx.log(estimate.value)))
    except NoGapError as error:
        record.update(status='error', error=error.plain_message())
    except Exception as error:
        TextColor.error("POINT gamma={} T={} FAILED: {}".format(gamma, T, error))
        record.update(status='error', error="{}: {}".format(type(error).__name__, error))
    return record


def _run_points(pending, config):
    """
    :param pending: list of (index, spec, gamma, T)
    :return: dict index -> record
    """
    done = {}
    with tqdm(total=len(pending), desc='sweep', leave=True, ncols=100, disable=TextColor.quiet()) as progress_bar:
        if config.threads == 1:
            for index, spec, gamma, T in pending:
                done[index] = evaluate_point(spec, gamma, T, config.M_max, config.precision_bits, config.rtol)
                progress_bar.update(1)
            return done
        with concurrent.futures.ProcessPoolExecutor(max_workers=config.threads,
                                                    initializer=_quiet_worker) as executor:
            futures = {executor.submit(evaluate_point, spec, gamma, T, config.M_max, config.precision_bits,
                                       config.rtol): (index, gamma, T)
                       for index, spec, gamma, T in pending}
            for fut in concurrent.futures.as_completed(futures):
                index, gamma, T = futures[fut]
                if fut.exception() is None:
                    done[index] = fut.result()
                else:
                    TextColor.error("POINT gamma={} T={} FAILED: {}".format(gamma, T, fut.exception()))
                    done[index] = {'gamma': gamma, 'T': T, 'K': '', 'M_star': '',
                                   'precision_bits': config.precision_bits, 'status': 'error',
                                   'error': str(fut.exception()), 'log_K': None}
                progress_bar.update(1)
    return done


def cost_sweep(config, output_dir):
    """
    :param config: ExperimentConfig with a validated grid
    :param output_dir: Existing output directory
    :return: CommandOutcome
    """
    gammas = config.grid.get('gamma', [None])
    points = []
    for gamma, T in itertools.product(gammas, config.grid['T']):
        spec = _point_spec(config, gamma)
        points.append((spec, gamma, T, _point_key(spec, gamma, T, config)))
    # bad specs are configuration errors, raised before any point runs
    for gamma in gammas:
        config.build_sequence(_point_spec(config, gamma))

    records = [None] * len(points)
    cache_path = os.path.join(output_dir, SweepOptions.CACHE_FILE)
    with DataStore(cache_path, 'a') as store:
        for index, (spec, gamma, T, key) in enumerate(points):
            records[index] = store.read_result(key)
        pending = [(index, spec, gamma, T) for index, (spec, gamma, T, key) in enumerate(points)
                   if records[index] is None]
        TextColor.info("SWEEP: {} POINTS, {} CACHED".format(len(points), len(points) - len(pending)))
        for index, record in _run_points(pending, config).items():
            records[index] = record
            if record['status'] == 'ok':
                store.write_result(points[index][3], record)
        store.update_meta({'nogap_version': __version__, 'created_by': 'nogap sweep'})

    failures = sum(record['status'] != 'ok' for record in records)
    if failures:
        TextColor.warn("{} OF {} GRID POINTS FAILED".format(failures, len(records)))
    rows = [tuple('' if record[name] is None else record[name] for name in SWEEP_HEADER) for record in records]
    series = {}
    for record in records:
        if record['log_K'] is not None:
            label = 'gamma={}'.format(record['gamma']) if record['gamma'] is not None else config.sequence['kind']
            series.setdefault(label, []).append((1 / float(record['T']), record['log_K']))
    artifacts = [FileManager.write_json(os.path.join(output_dir, 'sweep.json'), {'points': records})]
    if series:
        artifacts.append(FileManager.write_svg(os.path.join(output_dir, 'sweep.svg'), series, '1/T', 'log K(T)',
                                               title='control cost sweep'))
    return CommandOutcome(SWEEP_HEADER, rows, artifacts, failures=failures)
