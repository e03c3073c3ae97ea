import os

from nogap.modules.python.SequenceCore import check_class, fit_index_constant
from nogap.modules.python.FileManager import FileManager
from nogap.modules.python.TextColor import TextColor
from nogap.modules.python.CommandOutcome import CommandOutcome
"""
The classify command checks the class hypotheses of a sequence on a finite prefix.

  1) DECLARED PARAMETERS:
    - The parameters attached to the sequence (or given as class_params in its spec) are checked exactly when
      both are rational, in extended precision otherwise.
  2) SHARPNESS:
    - When q > 1 the same check runs with q - 1; a failing H5 is the counterexample showing q cannot be lowered.
  3) OUTPUT:
    - results.csv with one row per hypothesis and check, classify.json with witnesses and the index bound fit.
"""

CLASSIFY_HEADER = ('check', 'hypothesis', 'status', 'label', 'witness', 'margin', 'note')


def classify_sequence(config, output_dir):
    """
    Run the class check for the sequence of the config.
    :param config: ExperimentConfig
    :param output_dir: Existing output directory
    :return: CommandOutcome
    """
    precision = config.precision()
    seq = config.build_sequence()
    params = config.class_parameters(seq)
    TextColor.info("CHECKING {} ON {} TERMS".format(seq.label, config.prefix))
    report = check_class(seq, params, config.prefix, precision)
    rows = [dict(row, check='declared q={}'.format(params.q)) for row in report.to_rows()]
    record = {'declared': report.to_record(), 'parameters': params.to_dict()}

    if params.q > 1:
        lowered = check_class(seq, params.replace(q=params.q - 1), config.prefix, precision)
        h5 = lowered.results['H5']
        if h5.status == 'FAIL':
            h5.note = 'counterexample: q={} is not admissible'.format(params.q - 1)
            TextColor.info("q={} FAILS H5 AT {}".format(params.q - 1, h5.witness))
        rows.extend(dict(row, check='lowered q={}'.format(params.q - 1)) for row in lowered.to_rows()
                    if row['hypothesis'] == 'H5')
        record['lowered_q'] = {'q': params.q - 1, 'H5': h5.status,
                               'witness': {key: str(value) for key, value in h5.witness.items()}}

    index_fit = fit_index_constant(seq, params, config.prefix, precision)
    record['index_bound'] = {'constant': str(index_fit.constant), 'constant_real': str(index_fit.constant_real),
                             'lower_holds': index_fit.lower_holds, 'lower_witness': index_fit.lower_witness}
    artifacts = [FileManager.write_json(os.path.join(output_dir, 'classify.json'), record)]
    failures = [result.name for result in report.failures()]
    if failures:
        TextColor.warn("DECLARED PARAMETERS FAIL " + ", ".join(failures))
    return CommandOutcome(CLASSIFY_HEADER, rows, artifacts)
