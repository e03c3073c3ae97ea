import os

from nogap.modules.python.PaleyWiener import MollifierConfig, synthesize_qk, verify_mollifier
from nogap.modules.python.GramBiorthogonal import converge_truncation
from nogap.modules.python.FileManager import FileManager
from nogap.modules.python.TextColor import TextColor
from nogap.modules.python.CommandOutcome import CommandOutcome
"""
The pw command builds q_k by Fourier synthesis of the entire functions G_k.

  1) MOLLIFIER:
    - N is chosen from (T, p2) and the thetas of the config; the mollifier checks are written with the results.
  2) SYNTHESIS:
    - q_k is sampled on [0, T] and both of its norms are reported with the biorthogonality residuals.
  3) OPTIMALITY:
    - The plateau norm of the minimal family is reported next to ||q_k||, which can never be smaller.
"""

PW_HEADER = ('k', 'T', 'X', 'nodes', 'norm_plancherel', 'norm_direct', 'residual_max', 'minimal_norm',
             'optimality_holds', 'precision_bits')
SAMPLES_HEADER = ('t', 're', 'im')


def paley_wiener_family(config, output_dir):
    """
    Synthesize q_k for every (T, k) of the config.
    :param config: ExperimentConfig
    :param output_dir: Existing output directory
    :return: CommandOutcome
    """
    precision = config.precision()
    seq = config.build_sequence()
    params = config.class_parameters(seq)
    thetas = dict(config.mollifier or {})
    rows, records, artifacts = [], [], []
    for T in config.T:
        cfg = MollifierConfig.for_problem(T, params.p2, **thetas)
        check = verify_mollifier(cfg, T, precision=precision)
        if not check.passed:
            TextColor.warn("MOLLIFIER CHECKS FAILED FOR N={} T={}".format(cfg.N, T))
        for k in config.ks():
            family = synthesize_qk(seq, params, k, T, cfg, precision=precision, samples=config.samples)
            minimal = converge_truncation(seq, k, T, config.rtol, precision, m_max=config.M_max).norm
            holds = family.norm_direct >= minimal * (1 - precision.tolerance)
            rows.append((k, T, family.X, family.nodes, precision.nstr(family.norm_plancherel),
                         precision.nstr(family.norm_direct), precision.nstr(family.residual_max, 8),
                         precision.nstr(minimal), holds, precision.bits))
            path = os.path.join(output_dir, 'qk_k{}_T{}.csv'.format(k, T))
            artifacts.append(FileManager.write_csv(path, SAMPLES_HEADER, family.to_rows()))
            record = family.to_record()
            record['mollifier_check'] = {'passed': check.passed, 'decay_holds': check.decay_holds}
            records.append(record)
    artifacts.append(FileManager.write_json(os.path.join(output_dir, 'pw.json'),
                                            {'sequence': seq.label, 'families': records}))
    return CommandOutcome(PW_HEADER, rows, artifacts)
