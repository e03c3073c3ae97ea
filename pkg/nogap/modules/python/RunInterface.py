import os
import time

from nogap.modules.python.Exceptions import NoGapError, ConfigInvalid, ComputeFailed, PartialFailure
from nogap.modules.python.FileManager import FileManager
from nogap.modules.python.TextColor import TextColor
from nogap.modules.python.ClassifyInterface import classify_sequence
from nogap.modules.python.BiorthoInterface import biorthogonal_norms
from nogap.modules.python.PaleyWienerInterface import paley_wiener_family
from nogap.modules.python.BoundsInterface import bound_comparison
from nogap.modules.python.CostInterface import control_cost_curve
from nogap.modules.python.SweepInterface import cost_sweep
from nogap.version import __version__
"""
run() executes one experiment config end to end.

  1) OUTPUT DIRECTORY:
    - Created if missing, every artifact of the run is written into it.
  2) COMMAND:
    - The command of the config produces the rows of results.csv and its own files (classify.json, biortho.json,
      pw.json and q_k samples, bounds.json, cost.json and plots, sweep.json and sweep.svg).
  3) MANIFEST:
    - manifest.json echoes the resolved config, the version, the artifacts and the status. It holds no timestamp,
      so a rerun of the same config writes the same bytes, and it can be passed back as a config.
"""

COMMAND_HANDLERS = {
    'classify': classify_sequence,
    'biortho': biorthogonal_norms,
    'pw': paley_wiener_family,
    'bounds': bound_comparison,
    'cost': control_cost_curve,
    'sweep': cost_sweep,
}


def get_elapsed_time_string(start_time, end_time):
    """
    Get a string representing the elapsed time given a start and end time.
    :param start_time: Start time (time.time())
    :param end_time: End time (time.time())
    :return:
    """
    elapsed = end_time - start_time
    hours = int(elapsed / 60**2)
    mins = int(elapsed % 60**2 / 60)
    secs = int(elapsed % 60**2 % 60)
    time_string = "{} HOURS {} MINS {} SECS.".format(hours, mins, secs)

    return time_string


def _write_manifest(output_dir, config, artifacts, status, error=None, summary=None):
    manifest = {'nogap_version': __version__,
                'command': config.command,
                'config': config.to_dict(),
                'artifacts': sorted(os.path.basename(path) for path in artifacts),
                'status': status}
    if error is not None:
        manifest['error'] = error.to_record()
    if summary:
        manifest['summary'] = summary
    return FileManager.write_json(os.path.join(output_dir, 'manifest.json'), manifest)


def run(config):
    """
    Run the command of a validated config.
    :param config: ExperimentConfig
    :return: Exit status, 0 success, 1 invalid config, 2 failed computation, 3 failed grid points
    """
    start_time = time.time()
    output_dir = FileManager.handle_output_directory(config.output_dir)
    TextColor.info("OUTPUT DIRECTORY: " + output_dir)
    handler = COMMAND_HANDLERS[config.command]
    try:
        outcome = handler(config, output_dir)
    except ConfigInvalid as error:
        TextColor.error(error.plain_message())
        _write_manifest(output_dir, config, [], 'config_invalid', error)
        return ConfigInvalid.exit_code
    except NoGapError as error:
        failure = ComputeFailed("{} FAILED".format(config.command.upper()),
                                **dict(error.witness, reason=error.plain_message()))
        TextColor.error(failure.plain_message())
        _write_manifest(output_dir, config, [], 'compute_failed', failure)
        return ComputeFailed.exit_code

    artifacts = list(outcome.artifacts)
    artifacts.append(FileManager.write_csv(os.path.join(output_dir, 'results.csv'), outcome.header, outcome.rows))
    if outcome.failures:
        partial = PartialFailure(failed=outcome.failures, total=len(outcome.rows))
        TextColor.error(partial.plain_message())
        _write_manifest(output_dir, config, artifacts, 'partial_failure', partial, outcome.summary)
        status = PartialFailure.exit_code
    else:
        _write_manifest(output_dir, config, artifacts, 'ok', summary=outcome.summary)
        status = 0
    TextColor.info("TOTAL TIME ELAPSED: " + get_elapsed_time_string(start_time, time.time()))
    return status
