import os

from nogap.modules.python.GramBiorthogonal import converge_truncation
from nogap.modules.python.GuichalBounds import evaluate_lower_bounds, resolve_delta, certificate_status
from nogap.modules.python.FileManager import FileManager
from nogap.modules.python.TextColor import TextColor
from nogap.modules.python.CommandOutcome import CommandOutcome

BIORTHO_HEADER = ('k', 'T', 'norm', 'truncated_norm', 'M_star', 'method', 'complete', 'lower_bound',
                  'certified_index', 'lower_holds', 'certificate', 'precision_bits')


def biorthogonal_norms(config, output_dir):
    """
    Plateau norms of the minimal biorthogonal family for every (T, k) of the config, next to the lower bound
    certificate when the sequence carries class parameters. The certificate compares the bound with the
    truncated norm at the plateau order, the plateau estimate is reported beside it.
    :param config: ExperimentConfig
    :param output_dir: Existing output directory
    :return: CommandOutcome
    """
    precision = config.precision()
    seq = config.build_sequence()
    params = seq.params
    delta = resolve_delta(params, seq, precision) if params is not None else None
    rows, records = [], []
    violations = 0
    for T in config.T:
        for k in config.ks():
            result = converge_truncation(seq, k, T, config.rtol, precision, m_max=config.M_max)
            record = result.to_record()
            lower, certified, holds, certificate = '', '', '', ''
            if params is not None:
                bounds = evaluate_lower_bounds(k, params.q, params.nu, delta, seq, T, precision)
                lower, certified = precision.nstr(bounds.combined), bounds.certified_index
                holds = bounds.combined <= result.truncated_norm
                certificate = certificate_status(bounds.combined, result.truncated_norm, result.norm)
                record.update(lower_bound=str(bounds.combined), certificate=certificate)
                if certified and certificate == 'violated':
                    violations += 1
                    TextColor.warn("LOWER BOUND VIOLATED AT k={} T={}".format(k, T))
                elif certificate == 'inconclusive':
                    TextColor.warn("LOWER BOUND ABOVE THE TRUNCATED NORM AT k={} T={}".format(k, T))
            TextColor.info("k={} T={} ||s_k||={} M*={} ({})".format(k, T, precision.nstr(result.norm, 12),
                                                                   result.M_star, result.method))
            rows.append((k, T, precision.nstr(result.norm), precision.nstr(result.truncated_norm), result.M_star,
                         result.method, result.complete, lower, certified, holds, certificate,
                         result.precision_bits))
            records.append(record)
    artifacts = [FileManager.write_json(os.path.join(output_dir, 'biortho.json'),
                                        {'sequence': seq.label, 'truncations': records,
                                         'certified_violations': violations})]
    return CommandOutcome(BIORTHO_HEADER, rows, artifacts, summary={'certified_violations': violations})
