import argparse
import logging.config
import sys

from aggmin.logs import get_log_config
from aggmin.runner import COMMANDS


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='aggmin', description='aggregation-diffusion free-energy experiments')
    parser.add_argument('command', choices=list(COMMANDS))
    parser.add_argument('config', help='experiment config (JSON)')
    parser.add_argument('--out', help='output directory (default: AGGMIN_OUT_DIR or ./out)')
    parser.add_argument('--jobs', type=int, help='worker count for operator builds, multistarts and sweeps')
    parser.add_argument('--seed', type=int, help='overrides the config seed')
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.config.dictConfig(get_log_config())
    return COMMANDS[args.command](args.config, out=args.out, jobs=args.jobs, seed=args.seed)


if __name__ == '__main__':
    sys.exit(main())
