import os

from nogap.modules.python.GuichalBounds import BOUND_TABLE_HEADER, bound_table
from nogap.modules.python.FileManager import FileManager
from nogap.modules.python.TextColor import TextColor
from nogap.modules.python.CommandOutcome import CommandOutcome

BOUNDS_HEADER = BOUND_TABLE_HEADER + ('label', 'lower_holds', 'certificate', 'per_order_holds')


def bound_comparison(config, output_dir):
    """
    Lower bound, truncated and estimated norms and fitted upper form for every (T, k) of the config.
    :param config: ExperimentConfig
    :param output_dir: Existing output directory
    :return: CommandOutcome
    """
    precision = config.precision()
    seq = config.build_sequence()
    params = config.class_parameters(seq)
    reports, fit = bound_table(seq, params, config.ks(), config.T, rtol=config.rtol, precision=precision,
                               m_max=config.M_max)
    rows = [report.to_row() + (report.label, report.lower_holds, report.certificate,
                               all(check.holds for check in report.per_order)) for report in reports]
    violations = [report for report in reports if report.label == 'plateau-certified'
                  and report.certificate == 'violated']
    for report in violations:
        TextColor.warn("CERTIFIED LOWER BOUND ABOVE THE PLATEAU NORM AT k={} T={}".format(report.k, report.T))
    inconclusive = [report for report in reports if report.certificate == 'inconclusive']
    for report in inconclusive:
        TextColor.warn("LOWER BOUND ABOVE THE TRUNCATED NORM AT k={} T={} (M*={})".format(report.k, report.T,
                                                                                         report.M_star))
    per_order = [(report, check) for report in reports for check in report.per_order_violations]
    for report, check in per_order:
        TextColor.warn("E_k P_k ABOVE ||s_k^(M)|| AT k={} T={} M={}".format(report.k, report.T, check.M))
    record = {'sequence': seq.label, 'parameters': params.to_dict(),
              'reports': [report.to_record() for report in reports],
              'per_order_violations': [{'k': report.k, 'T': str(report.T), 'M': check.M,
                                        'truncated_norm': str(check.truncated_norm), 'bound': str(check.bound)}
                                       for report, check in per_order]}
    if fit is not None:
        TextColor.info("FITTED C = {} FROM {} OBSERVATIONS".format(precision.nstr(fit.constant, 10), fit.observations))
        record['fit'] = {'constant': str(fit.constant), 'slack': [str(value) for value in fit.slack],
                         'observations': fit.observations, 'times': fit.times}
    artifacts = [FileManager.write_json(os.path.join(output_dir, 'bounds.json'), record)]
    return CommandOutcome(BOUNDS_HEADER, rows, artifacts,
                          summary={'certified_violations': len(violations), 'inconclusive': len(inconclusive),
                                   'per_order_violations': len(per_order)})
