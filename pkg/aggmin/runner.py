"""Batch experiment commands. Each returns a process exit code."""
from __future__ import annotations
import functools
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from aggmin import __version__
from aggmin.config import ExperimentConfig, load_config
from aggmin.criticality import classify, estimate_C0, scaling_probe
from aggmin.energy import build_interaction, energy_split, free_energy
from aggmin.errors import ConfigError, NumericalError
from aggmin.minimizer import Outcome, infimum_estimate, write_result
from aggmin.models import PowerEntropy
from aggmin.radial import Profile
from aggmin.settings import get_settings
from aggmin.utils.io import write_commented_csv, write_key_values
from aggmin.utils.plot import line_chart

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2
EXIT_IO = 3


@dataclass
class RunContext:
    config: ExperimentConfig
    config_path: Path
    sha: str
    out: Path
    jobs: int

    @property
    def comments(self) -> list[str]:
        return [f'aggmin {__version__}', f'config_sha256 {self.sha}']

    def operator(self, config: ExperimentConfig | None = None):
        config = config or self.config
        cache = get_settings().CACHE_DIR or None
        return build_interaction(config.grid.build(), config.kernel, jobs=self.jobs, cache_dir=cache)


def command(fn):
    """Load the config, apply CLI overrides and map failures to exit codes."""

    @functools.wraps(fn)
    def wrapper(config_path: str | Path, out: str | Path | None = None, jobs: int | None = None, seed: int | None = None) -> int:
        settings = get_settings()
        try:
            config, sha = load_config(config_path)
            if seed is not None:
                config = config.model_copy(update={'seed': seed})
            ctx = RunContext(
                config=config,
                config_path=Path(config_path),
                sha=sha,
                out=Path(out or settings.OUT_DIR),
                jobs=jobs or settings.JOBS,
            )
            return fn(ctx)
        except ConfigError as e:
            logger.error('configuration error', extra={'command': fn.__name__, 'error': str(e)})
            print(f'config error: {e}')
            return EXIT_CONFIG
        except NumericalError as e:
            logger.error('numerical failure', extra={'command': fn.__name__, 'error': str(e)})
            print(f'numerical failure: {e}')
            return EXIT_NUMERICAL
        except OSError as e:
            logger.error('i/o error', extra={'command': fn.__name__, 'error': str(e)})
            print(f'i/o error: {e}')
            return EXIT_IO
        except ValueError as e:
            logger.error('invalid experiment', extra={'command': fn.__name__, 'error': str(e)})
            print(f'invalid experiment: {e}')
            return EXIT_CONFIG

    return wrapper


@command
def cmd_energy(ctx: RunContext) -> int:
    cfg = ctx.config
    if cfg.profile is None:
        raise ConfigError('energy needs a "profile" entry pointing at a profile CSV')
    path = Path(cfg.profile)
    if not path.is_absolute():
        path = ctx.config_path.parent / path
    u = Profile.read_csv(path)
    if u.grid.d != cfg.kernel.d:
        raise ConfigError(f'profile is in dimension {u.grid.d}, kernel in {cfg.kernel.d}')
    cache = get_settings().CACHE_DIR or None
    op = build_interaction(u.grid, cfg.kernel, jobs=ctx.jobs, cache_dir=cache)
    report = free_energy(cfg.entropy, op, u)
    delta = cfg.criticality.delta
    op_near = build_interaction(u.grid, cfg.kernel.truncated(delta), jobs=ctx.jobs, cache_dir=cache)
    W_near, W_far = energy_split(op_near, op, u)
    values = {
        **report.to_dict(),
        'mass': u.mass(),
        'grid': u.grid.header(),
        'delta': delta,
        'W_near': W_near,
        'W_far': W_far,
    }
    write_key_values(values, ctx.out / 'energy.txt', ctx.comments)
    print(report.to_text(), end='')
    return EXIT_OK


@command
def cmd_classify(ctx: RunContext) -> int:
    cfg = ctx.config
    crit = cfg.criticality
    K, phi = cfg.kernel, cfg.entropy
    C0 = crit.C0
    if C0 is None and not K.bounded and math.isfinite(phi.liminf_ratio(K.mstar())):
        p = crit.p or K.singularity_index
        estimate = estimate_C0(K, p, crit.delta, crit.ensemble_size, cfg.seed)
        C0 = None if estimate.degenerate else estimate.value
    report = classify(phi, K, cfg.mass, crit.delta, C0, nu=crit.nu, alpha=crit.alpha)
    write_key_values(report.to_dict(), ctx.out / 'classify.txt', ctx.comments)
    print(report.to_text(), end='')
    return EXIT_OK


@command
def cmd_probe(ctx: RunContext) -> int:
    cfg = ctx.config
    op = ctx.operator()
    bump = Profile.gaussian(op.grid, cfg.mass, cfg.probe.width)
    result = scaling_probe(bump, cfg.entropy, op, cfg.probe.lambdas, jobs=ctx.jobs)
    summary = result.summary()
    comments = ctx.comments + [f'{k} = {v}' for k, v in summary.items()]
    write_commented_csv(result.trace, ctx.out / 'probe.csv', comments)

    trace = result.trace.assign(absF=result.trace['F'].abs())
    negative = trace[trace['F'] < 0]
    series = {'|F|': trace}
    if len(negative):
        series['|F|, F < 0'] = negative
    line_chart(
        series, 'lam', 'absF', ctx.out / 'probe.svg',
        title='mass-invariant scaling', logx=True, logy=True, comments=ctx.comments,
    )
    print(''.join(f'{k} = {v}\n' for k, v in summary.items()), end='')
    return EXIT_OK


@command
def cmd_minimize(ctx: RunContext) -> int:
    cfg = ctx.config
    op = ctx.operator()
    estimate = infimum_estimate(cfg.mass, cfg.entropy, op, cfg.flow, cfg.flow.widths, jobs=ctx.jobs)
    for k, result in enumerate(estimate.results):
        write_result(result, ctx.out, str(k), ctx.comments + [f'width = {estimate.widths[k]}'])

    summary = {
        'I_M': estimate.value,
        'vanishing': estimate.vanishing,
        'mass': cfg.mass,
        'scheme': str(cfg.flow.scheme),
        'R': cfg.grid.R,
        'outcomes': ' '.join(str(o) for o in estimate.outcomes),
        'widths': ' '.join(f'{w:g}' for w in estimate.widths),
    }
    write_key_values(summary, ctx.out / 'summary.txt', ctx.comments)
    line_chart(
        {f'width {w:g}': r.trace for w, r in zip(estimate.widths, estimate.results)},
        'step', 'F', ctx.out / 'trace.svg', title='free energy along the descent',
        comments=ctx.comments,
    )
    print(''.join(f'{k} = {v}\n' for k, v in summary.items()), end='')
    return EXIT_OK


def _sweep_variant(cfg: ExperimentConfig, parameter: str, value: float) -> ExperimentConfig:
    match parameter:
        case 'amplitude':
            return cfg.model_copy(update={'kernel': cfg.kernel.model_copy(update={'c': value})})
        case 'mass':
            return cfg.model_copy(update={'mass': value})
        case 'm':
            if not isinstance(cfg.entropy, PowerEntropy):
                raise ConfigError('sweeping m needs a power entropy')
            return cfg.model_copy(update={'entropy': cfg.entropy.model_copy(update={'m': value})})
    raise ConfigError(f'unknown sweep parameter {parameter!r}')


def _sweep_point(cfg: ExperimentConfig, parameter: str, value: float, cache: str | None) -> dict:
    variant = _sweep_variant(cfg, parameter, value)
    op = build_interaction(variant.grid.build(), variant.kernel, cache_dir=cache)
    estimate = infimum_estimate(variant.mass, variant.entropy, op, variant.flow, variant.flow.widths)
    best = min(estimate.results, key=lambda r: r.I_M)
    return {
        parameter: value,
        'K1': variant.kernel.l1(),
        'outcome': str(Outcome.VANISHING if estimate.vanishing else best.outcome),
        'I_M': estimate.value,
        'sup': best.profile.sup(),
    }


@command
def cmd_sweep(ctx: RunContext) -> int:
    cfg = ctx.config
    if cfg.sweep is None or not cfg.sweep.values:
        raise ConfigError('sweep needs a non-empty "sweep.values" grid')
    parameter, values = cfg.sweep.parameter, cfg.sweep.values
    cache = get_settings().CACHE_DIR or None
    args = ([cfg] * len(values), [parameter] * len(values), values, [cache] * len(values))
    if ctx.jobs > 1:
        with ProcessPoolExecutor(max_workers=ctx.jobs) as pool:
            rows = list(pool.map(_sweep_point, *args))
    else:
        rows = list(map(_sweep_point, *args))

    df = pd.DataFrame(rows)
    write_commented_csv(df, ctx.out / 'sweep.csv', ctx.comments)
    print(df.to_string(index=False, float_format=lambda v: f'{v:.6g}'))
    flips = np.flatnonzero(df['outcome'].to_numpy()[1:] != df['outcome'].to_numpy()[:-1])
    for i in flips:
        logger.info('outcome changes', extra={'between': [float(df[parameter][i]), float(df[parameter][i + 1])]})
    return EXIT_OK


COMMANDS = {
    'energy': cmd_energy,
    'classify': cmd_classify,
    'probe': cmd_probe,
    'minimize': cmd_minimize,
    'sweep': cmd_sweep,
}
