import argparse
import sys
from nogap.version import __version__
from nogap.modules.python.TextColor import TextColor
from nogap.modules.python.Exceptions import ConfigInvalid
from nogap.modules.python.ExperimentConfig import load_config
from nogap.modules.python.RunInterface import run

COMMAND_HELP = {
    'classify': "Check the class hypotheses of a sequence on a finite prefix.\n"
                "OUTPUT: results.csv with one row per hypothesis, classify.json with witnesses.\n",
    'biortho': "Norms of the minimal biorthogonal family from the Gram matrix, next to the lower bounds.\n"
               "OUTPUT: results.csv norms table, biortho.json with the truncation histories.\n",
    'pw': "Construct q_k by Fourier synthesis of the Paley-Wiener functions G_k.\n"
          "OUTPUT: results.csv norms table, qk_k<k>_T<T>.csv samples and pw.json.\n",
    'bounds': "Lower bound, observed norm and fitted upper form of ||s_k|| for every (k, T).\n"
              "OUTPUT: results.csv bound table, bounds.json with the fitted constant.\n",
    'cost': "Control cost K(T) over a time grid with the scaling fits of log K.\n"
            "OUTPUT: results.csv, cost.json, plot_*.csv and cost.svg.\n",
    'sweep': "Control cost over a (gamma, T) grid, cached and run in parallel.\n"
             "OUTPUT: results.csv with one row per grid point, sweep.json and sweep.svg.\n",
}


def add_run_arguments(parser):
    """
    Add arguments shared by every experiment sub-command
    :param parser: argeparse object
    :return:
    """
    parser.add_argument(
        "-c",
        "--config",
        type=str,
        required=True,
        help="[REQUIRED] Path to a JSON or YAML experiment config, or the manifest.json of a previous run."
    )
    parser.add_argument(
        "-o",
        "--out",
        type=str,
        required=False,
        default=None,
        help="Path to the output directory, overrides output_dir of the config."
    )
    parser.add_argument(
        "-p",
        "--precision",
        type=int,
        required=False,
        default=None,
        help="Working precision in bits, overrides precision_bits of the config. Default is 512."
    )
    parser.add_argument(
        "-t",
        "--threads",
        type=int,
        required=False,
        default=None,
        help="Number of worker processes for sweep, overrides threads of the config. Default is 1."
    )
    return parser


def run_experiment(command, config_path, output_dir, precision, threads):
    """
    Load a config for a sub-command, apply the command line overrides and run it.
    :return: Exit status
    """
    try:
        config = load_config(config_path, command)
        config.override(precision_bits=precision, threads=threads, output_dir=output_dir)
    except ConfigInvalid as error:
        TextColor.error(error.plain_message())
        return ConfigInvalid.exit_code
    return run(config)


def main(argv=None):
    """
    Main interface for NOGAP. The submodules supported as of now are these:
    1) classify
    2) biortho
    3) pw
    4) bounds
    5) cost
    6) sweep
    """
    parser = argparse.ArgumentParser(description="NOGAP computes biorthogonal families to exponentials and control "
                                                 "costs for spectra without a gap condition.\n"
                                                 "You can avail these commands with this script:\n"
                                                 "1) classify: Check the class hypotheses of a sequence.\n"
                                                 "2) biortho: Norms of the minimal biorthogonal family.\n"
                                                 "3) pw: Paley-Wiener construction of a biorthogonal family.\n"
                                                 "4) bounds: Compare lower and upper bounds with observed norms.\n"
                                                 "5) cost: Control cost K(T) over a time grid.\n"
                                                 "6) sweep: Control cost over a (gamma, T) grid.\n"
                                                 "7) version: check NOGAP version.\n",
                                     formatter_class=argparse.RawTextHelpFormatter)
    parser.add_argument(
        "--version",
        default=False,
        action='store_true',
        help="Show version."
    )
    subparsers = parser.add_subparsers(dest='sub_command')
    for command, help_text in COMMAND_HELP.items():
        add_run_arguments(subparsers.add_parser(command, help=help_text,
                                                formatter_class=argparse.RawTextHelpFormatter))
    subparsers.add_parser('version', help="Show program version.")

    FLAGS, unparsed = parser.parse_known_args(argv)
    if unparsed:
        TextColor.warn("IGNORED ARGUMENTS: " + " ".join(unparsed))

    if FLAGS.sub_command in COMMAND_HELP:
        TextColor.info(FLAGS.sub_command.upper() + " MODULE SELECTED")
        status = run_experiment(FLAGS.sub_command, FLAGS.config, FLAGS.out, FLAGS.precision, FLAGS.threads)
        sys.exit(status)
    elif FLAGS.sub_command == 'version' or FLAGS.version is True:
        print("NOGAP VERSION: ", __version__)
    else:
        sys.stderr.write(TextColor.RED + "ERROR: NO SUBCOMMAND SELECTED. "
                                         "PLEASE SELECT ONE OF THE AVAILABLE SUB-COMMANDS.\n"
                         + TextColor.END)
        parser.print_help()


if __name__ == '__main__':
    main()
