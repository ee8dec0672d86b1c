import argparse
import os
import shutil
import sys

from . import __version__
from . import utils
from .errors import ConfigurationError, FormatError, NumericalError
from .config import load_config
from .model import NowcastModel

LOCK_FILE = '.mefnow.lock'

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4


def _comma_list(text):
    return [item.strip() for item in text.split(',') if item.strip()]


def build_parser():
    parser = argparse.ArgumentParser(
        prog='mefnow', description='Multi-scale extrapolation and GAN fusion for satellite cloud nowcasting.',
    )
    parser.add_argument('--version', action='version', version='%(prog)s ' + __version__)
    parser.add_argument('--config', help='JSON run configuration merged onto the built-in defaults')
    parser.add_argument(
        '--set', action='append', default=[], metavar='SECTION.KEY=VALUE', dest='overrides',
        help='Override one configuration key (repeatable)',
    )
    parser.add_argument('--quiet', action='store_true', help='Suppress per-epoch training output')
    subparsers = parser.add_subparsers(dest='command', required=True)

    subparsers.add_parser('synth', help='Generate synthetic train and test sequences, or import them from FSEQ files')

    p1 = subparsers.add_parser('train-p1', help='Train phase-1 predictors')
    p1.add_argument('--level', type=int, help='Pyramid level to train (default: every level)')
    p1.add_argument(
        '--per-position', action='store_true', help='Also train one model per grid position and compare',
    )

    subparsers.add_parser('build-fusion', help='Build the phase-2 fusion dataset')

    p2 = subparsers.add_parser('train-p2', help='Train phase-2 fusion GANs')
    p2.add_argument('--variants', type=_comma_list, help='Comma-separated fusion variants')

    ev = subparsers.add_parser('eval', help='Evaluate methods on the test windows')
    ev.add_argument('--methods', type=_comma_list, help='Comma-separated methods')
    ev.add_argument('--render', type=int, help='Number of cases to render as PNG panels')

    return parser


class OutputLock:
    """Exclusive lock on an output directory, held for the duration of one command."""

    def __init__(self, folder):
        self.path = os.path.join(folder, LOCK_FILE)

    def __enter__(self):
        utils.make_folder(os.path.dirname(self.path))
        try:
            fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise ConfigurationError(
                'Output directory is in use by another command (remove ' + self.path + ' if it is stale)'
            )
        os.write(fd, str(os.getpid()).encode('ascii'))
        os.close(fd)
        return self

    def __exit__(self, exc_type, exc_value, traceback):
        if os.path.exists(self.path):
            os.remove(self.path)
        return False


def write_run_record(config, command, argv, config_file=None):
    """Persist the effective configuration and the version, seed and arguments of ``command``."""
    utils.write_json(config.to_dict(), os.path.join(config.output_dir, 'config.json'))
    if config_file is not None:
        shutil.copyfile(config_file, os.path.join(config.output_dir, 'config_source.json'))
    path = os.path.join(config.output_dir, 'run_info.json')
    run_info = utils.read_json(path) if os.path.exists(path) else {}
    commands = run_info.get('commands', {})
    commands[command] = list(argv)
    run_info = {'version': __version__, 'seed': config.seed, 'commands': commands}
    utils.write_json(run_info, path)


def run(args, argv):
    config = load_config(args.config, args.overrides)
    verbose = not args.quiet
    with OutputLock(config.output_dir):
        write_run_record(config, args.command, argv, args.config)
        model = NowcastModel(config)
        if args.command == 'synth':
            model.synthesize()
        elif args.command == 'train-p1':
            model.train_extrapolation(args.level, per_position=args.per_position, verbose=verbose)
        elif args.command == 'build-fusion':
            model.build_fusion()
        elif args.command == 'train-p2':
            model.train_fusion(args.variants, verbose=verbose)
        elif args.command == 'eval':
            model.evaluate(args.methods, args.render)


def main(argv=None):
    """
    Command-line entry point.

    Returns:
        int: 0 on success, 2 for configuration errors (including missing checkpoints or data), 3 for data or file
        format errors and 4 for numerical aborts during training.

    """
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(argv)
    try:
        run(args, argv)
    except FormatError as exc:
        print('Data error: ' + str(exc), file=sys.stderr)
        return EXIT_DATA
    except ConfigurationError as exc:
        print('Configuration error: ' + str(exc), file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print('Numerical error: ' + str(exc), file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print('Data error: ' + str(exc), file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print('Configuration error: ' + str(exc), file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK
