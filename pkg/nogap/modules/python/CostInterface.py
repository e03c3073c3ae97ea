import os

from nogap.modules.python.ControlCost import COST_TABLE_HEADER, cost_scaling_experiment, phase_field_cost, \
    sequence_cost
from nogap.modules.python.FileManager import FileManager
from nogap.modules.python.TextColor import TextColor
from nogap.modules.python.CommandOutcome import CommandOutcome
"""
The cost command estimates K(T) over the time grid of the config.

  1) DISPATCH:
    - A perturbed sequence runs the scaling experiment in gamma, a phase-field sequence the phase-field cost with
      its T log K band, any other sequence the plain cost grid.
  2) PLOTS:
    - (x, log K) pairs are written against 1/T, and against 1/T^{gamma/(1-gamma)} when gamma is known.
    - cost.svg draws the abscissa chosen in the config.
"""

PLOT_HEADER = ('x', 'log_K')


def _report_for(config, seq, precision):
    kind = config.sequence['kind']
    if kind == 'perturbed':
        gamma = seq.metadata['gamma']
        if float(gamma) < 1:
            return cost_scaling_experiment(gamma, config.T, precision, config.rtol, m_max=config.M_max)
        TextColor.warn("gamma={} HAS POSITIVE MINIMAL TIME {}, TRUNCATED COSTS ONLY".format(
            gamma, seq.metadata['minimal_time']))
    if kind == 'phase_field':
        params = config.sequence['params']
        return phase_field_cost(params['xi'], params['rho'], params['tau'], config.T, precision, config.rtol,
                                m_max=config.M_max)
    return sequence_cost(seq, config.T, precision, config.rtol, m_max=config.M_max)


def control_cost_curve(config, output_dir):
    """
    :param config: ExperimentConfig
    :param output_dir: Existing output directory
    :return: CommandOutcome
    """
    precision = config.precision()
    # a bad sequence fails here, before any long computation starts
    seq = config.build_sequence()
    report = _report_for(config, seq, precision)
    artifacts = [FileManager.write_json(os.path.join(output_dir, 'cost.json'), report.to_record())]
    abscissas = ['inverse_T'] if report.gamma is None else ['inverse_T', 'inverse_T_power']
    for abscissa in abscissas:
        path = os.path.join(output_dir, 'plot_{}.csv'.format(abscissa))
        artifacts.append(FileManager.write_csv(path, PLOT_HEADER, report.plot_pairs(abscissa)))
        fit = report.fits.get(abscissa)
        if fit is not None:
            TextColor.info("log K ~ {:.6g} x + {:.6g} AGAINST {}".format(fit.slope, fit.intercept, abscissa))
    abscissa = config.abscissa if config.abscissa in abscissas else 'inverse_T'
    if abscissa != config.abscissa:
        TextColor.warn("NO gamma FOR {}, PLOTTING AGAINST 1/T".format(config.abscissa))
    x_label = '1/T' if abscissa == 'inverse_T' else '1/T^(gamma/(1-gamma))'
    artifacts.append(FileManager.write_svg(os.path.join(output_dir, 'cost.svg'),
                                           {report.label: report.plot_pairs(abscissa)}, x_label, 'log K(T)',
                                           title='control cost of ' + report.label))
    if report.band is not None:
        TextColor.info("T log K(T) IN [{:.6g}, {:.6g}]".format(*report.band))
    summary = {'minimal_time': report.minimal_time, 'band': report.band}
    return CommandOutcome(COST_TABLE_HEADER, report.to_rows(), artifacts, summary=summary)
