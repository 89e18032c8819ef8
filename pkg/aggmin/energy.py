"""Free energy F(u) = S(u) - W(u)/2 on a radial grid.

The interaction is discretised through the sphere integral

    psi(r, s) = int_{S^{d-1}} K(|r e - s w|) dsigma(w),

so that (K*u)(r_i) = sum_j psi_ij kappa_j u_j with kappa_j = w_j / sigma_{d-1}
the radial line measure, and W(u) = sum_i w_i u_i (K*u)_i
= sigma_{d-1} sum_ij kappa_i kappa_j psi_ij u_i u_j. The sphere factor is
carried by the cell volumes w_i; psi itself is the full sphere integral.

Off the diagonal band psi_ij = psi(r_i, r_j) (exact antiderivative in d=3,
graded Gauss-Legendre in the angle in d=2). On the band |i-j| <= 1 the entry
is the cell average (1/kappa_j) int_{annulus j} K(|x_i - y|) dy, computed as a
one-dimensional integral over the distance t, with the analytic ball integral
around x_i taking the kernel singularity. The matrix is symmetrised exactly.
"""
from __future__ import annotations
import hashlib
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.integrate import quad

from aggmin.errors import NonFiniteError
from aggmin.models import EntropyBase, KernelBase, kernel_adapter
from aggmin.radial import Profile, RadialGrid
from aggmin.utils.io import format_key_values

logger = logging.getLogger(__name__)

GL_ORDER = 10
PAIR_CHUNK = 8192


# --- Sphere integrals ---

def _angular_2d(K: KernelBase, r: np.ndarray, s: np.ndarray, order: int = GL_ORDER) -> np.ndarray:
    """int_0^{2pi} K(sqrt(r^2 + s^2 - 2 r s cos th)) dth for r, s > 0, r != s.

    Panels double in width from h = |r - s| / sqrt(r s), the angular scale on
    which the distance leaves its minimum, and kernel breakpoints become edges.
    """
    a = np.abs(r - s)
    prod = r * s
    h = np.clip(a / np.sqrt(prod), 1e-12, math.pi)
    panels = min(int(math.ceil(math.log2(math.pi / h.min()))) + 1, 64)
    geo = np.minimum(h[:, None] * 2.0 ** np.arange(panels), math.pi)

    breaks = []
    for T in K.breakpoints():
        x = np.clip((T**2 - a**2) / (4 * prod), 0.0, 1.0)
        breaks.append(2 * np.arcsin(np.sqrt(x)))
    cols = [np.zeros_like(a)[:, None], geo, *(b[:, None] for b in breaks), np.full_like(a, math.pi)[:, None]]
    edges = np.sort(np.concatenate(cols, axis=1), axis=1)
    lo, hi = edges[:, :-1], edges[:, 1:]

    x, wts = leggauss(order)
    half = 0.5 * (hi - lo)
    theta = lo[..., None] + half[..., None] * (x + 1)
    dist = np.sqrt(a[:, None, None] ** 2 + 4 * prod[:, None, None] * np.sin(theta / 2) ** 2)
    vals = K(dist)
    return 2 * np.einsum('pk,pkn,n->p', half, vals, wts)


def sphere_average(K: KernelBase, r, s) -> np.ndarray:
    """psi(r, s): integral of K(|r e - s w|) over the unit sphere in w.

    d=3 uses psi = (2 pi / (r s)) int_{|r-s|}^{r+s} K(t) t dt, which is exact.
    At r s = 0 the distance is constant and psi = sigma_{d-1} K(max(r, s)).
    """
    r, s = np.broadcast_arrays(np.asarray(r, dtype=float), np.asarray(s, dtype=float))
    out = np.empty(r.shape)
    axis = (r == 0) | (s == 0)
    sigma = 2 * math.pi if K.d == 2 else 4 * math.pi
    out[axis] = sigma * K(np.maximum(r[axis], s[axis]))
    rest = ~axis
    rr, ss = r[rest], s[rest]
    if K.d == 3:
        with np.errstate(invalid='ignore'):
            out[rest] = 2 * math.pi / (rr * ss) * (K.antiderivative(rr + ss) - K.antiderivative(np.abs(rr - ss)))
    elif rr.size:
        out[rest] = _angular_2d(K, rr, ss)
    return out


def _shell_measure(d: int, r: float, t: float, lo: float, hi: float) -> float:
    """Measure of the sphere |y - x| = t (|x| = r) lying in the shell lo < |y| < hi."""
    def clipped(b):
        return min(1.0, max(-1.0, (b * b - r * r - t * t) / (2 * r * t)))
    if d == 2:
        return 2 * t * (math.acos(clipped(lo)) - math.acos(clipped(hi)))
    return 2 * math.pi * t * t * (clipped(hi) - clipped(lo))


def _cell_integral(K: KernelBase, grid: RadialGrid, i: int, j: int) -> tuple[float, float]:
    """int_{annulus j} K(|x_i - y|) dy with |x_i| = r_i, and its error estimate."""
    r = float(grid.centers[i])
    lo, hi = float(grid.edges[j]), float(grid.edges[j + 1])
    d = grid.d
    k = lambda t: float(K(t))

    if i == j:
        # ball of radius dr/2 around x_i lies inside annulus i
        rho = min(r - lo, hi - r)
        ball = K.l1(rho)
        t0 = rho
    else:
        ball = 0.0
        t0 = min(abs(r - lo), abs(r - hi))
    t1 = r + hi
    cuts = {abs(r - lo), abs(r - hi), r + lo, *K.breakpoints()}
    points = sorted(p for p in cuts if t0 < p < t1)
    value, err = quad(
        lambda t: k(t) * _shell_measure(d, r, t, lo, hi),
        t0, t1, points=points or None, limit=200, epsabs=1e-14, epsrel=1e-10,
    )
    return ball + value, err


# --- Operator ---

@dataclass(frozen=True, eq=False)
class InteractionOperator:
    grid: RadialGrid
    kernel: KernelBase
    psi: np.ndarray = field(repr=False)
    quad_error: dict[str, float] = field(default_factory=dict)

    @cached_property
    def _weighted(self) -> np.ndarray:
        """psi_ij kappa_j, so that K*u = psi kappa u."""
        return self.psi * self.grid.line_weights[None, :]

    def apply(self, values: np.ndarray) -> np.ndarray:
        return self._weighted @ values


def cache_key(grid: RadialGrid, K: KernelBase) -> str:
    payload = json.dumps({'d': grid.d, 'R': grid.R, 'N': grid.N, 'kernel': K.record()}, sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()[:20]


def save_operator(op: InteractionOperator, path: str | Path) -> None:
    """Header line (JSON) followed by the row-major float64 matrix."""
    header = {
        'd': op.grid.d, 'R': op.grid.R, 'N': op.grid.N,
        'kernel': op.kernel.record(), 'key': cache_key(op.grid, op.kernel),
        'quad_error': op.quad_error,
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'wb') as f:
        f.write(json.dumps(header).encode() + b'\n')
        f.write(np.ascontiguousarray(op.psi, dtype='<f8').tobytes())


def load_operator(path: str | Path) -> InteractionOperator:
    with open(path, 'rb') as f:
        header = json.loads(f.readline())
        data = f.read()
    grid = RadialGrid(d=header['d'], R=header['R'], N=header['N'])
    kernel = kernel_adapter.validate_python(header['kernel'])
    psi = np.frombuffer(data, dtype='<f8').reshape(grid.N, grid.N).copy()
    psi.flags.writeable = False
    return InteractionOperator(grid, kernel, psi, header.get('quad_error', {}))


def build_interaction(
    grid: RadialGrid,
    K: KernelBase,
    jobs: int = 1,
    cache_dir: str | Path | None = None,
) -> InteractionOperator:
    if K.d != grid.d:
        K = K.in_dimension(grid.d)
    if cache_dir:
        path = Path(cache_dir) / f'psi_{cache_key(grid, K)}.bin'
        if path.exists():
            logger.debug('interaction operator from cache', extra={'path': str(path)})
            return load_operator(path)

    N, r = grid.N, grid.centers
    psi = np.zeros((N, N))
    iu, ju = np.triu_indices(N, k=1)

    def far(chunk):
        return sphere_average(K, r[iu[chunk]], r[ju[chunk]])

    chunks = [slice(k, k + PAIR_CHUNK) for k in range(0, len(iu), PAIR_CHUNK)]
    with ThreadPoolExecutor(max_workers=max(jobs, 1)) as pool:
        for chunk, values in zip(chunks, pool.map(far, chunks)):
            psi[iu[chunk], ju[chunk]] = values
    psi = psi + psi.T

    # diagonal band: cell averages carry the singularity
    kappa = grid.line_weights
    near_err = 0.0
    for i in range(N):
        for j in range(max(i - 1, 0), min(i + 2, N)):
            value, err = _cell_integral(K, grid, i, j)
            psi[i, j] = value / kappa[j]
            if value > 0:
                near_err = max(near_err, err / value)
    psi = 0.5 * (psi + psi.T)

    if not np.all(np.isfinite(psi)):
        raise NonFiniteError(f'interaction matrix has non-finite entries for {K!r}')

    # far-field check against a higher quadrature order on a few rows
    far_err = 0.0
    if grid.d == 2:
        for i in sorted({0, N // 2, N - 1}):
            j = np.array([k for k in range(N) if abs(k - i) > 1])
            if j.size:
                fine = _angular_2d(K, np.full(j.size, r[i]), r[j], order=2 * GL_ORDER)
                scale = np.maximum(np.abs(fine), 1e-300)
                far_err = max(far_err, float(np.max(np.abs(psi[i, j] - fine) / scale)))

    psi.flags.writeable = False
    op = InteractionOperator(grid, K, psi, {'near': near_err, 'far': far_err})
    logger.debug('built interaction operator', extra={'N': N, 'd': grid.d, 'shape': K.shape, **op.quad_error})
    if cache_dir:
        save_operator(op, path)
    return op


# --- Energies ---

@dataclass(frozen=True)
class FreeEnergyReport:
    S: float
    W: float
    F: float

    def to_dict(self) -> dict:
        return asdict(self)

    def to_text(self) -> str:
        return format_key_values(self.to_dict())


def _check_grid(op: InteractionOperator, u: Profile) -> None:
    if u.grid != op.grid:
        raise ValueError(f'profile grid {u.grid} does not match operator grid {op.grid}')


def convolve(op: InteractionOperator, u: Profile) -> Profile:
    _check_grid(op, u)
    return Profile(op.grid, np.maximum(op.apply(u.values), 0.0))


def interaction_energy(op: InteractionOperator, u: Profile) -> float:
    _check_grid(op, u)
    return float(np.dot(u.values * op.grid.volumes, op.apply(u.values)))


def entropy_energy(phi: EntropyBase, u: Profile) -> float:
    return float(np.dot(phi.phi(u.values), u.grid.volumes))


def free_energy(phi: EntropyBase, op: InteractionOperator, u: Profile) -> FreeEnergyReport:
    S = entropy_energy(phi, u)
    W = interaction_energy(op, u)
    F = S - 0.5 * W
    if not math.isfinite(F):
        raise NonFiniteError(f'free energy is not finite (S={S}, W={W})')
    return FreeEnergyReport(S=S, W=W, F=F)


def first_variation(phi: EntropyBase, op: InteractionOperator, u: Profile) -> np.ndarray:
    """g = Phi'(u) - K*u; dF(u)[h] = sum_i w_i g_i h_i."""
    _check_grid(op, u)
    return phi.phi_prime(u.values) - op.apply(u.values)


def energy_split(op_near: InteractionOperator, op: InteractionOperator, u: Profile) -> tuple[float, float]:
    """W = W_near + W_far with W_near from the delta-truncated operator."""
    near = interaction_energy(op_near, u)
    return near, interaction_energy(op, u) - near


@dataclass(frozen=True)
class GHLSReport:
    lhs: float
    mid: float
    rhs: float
    weak_norm: float
    p: float
    delta: float
    interpolation_ok: bool
    # empirical lower bound on C0 from this profile; C0 itself is not known
    c0_sample: float

    def to_dict(self) -> dict:
        return asdict(self)

    def to_text(self) -> str:
        return format_key_values(self.to_dict())


def ghls_check(
    u: Profile,
    K: KernelBase,
    p: float,
    delta: float,
    op_delta: InteractionOperator | None = None,
    weak_norm: float | None = None,
) -> GHLSReport:
    """Evaluate the chain lhs <= C0 mid <= C0 rhs of the generalized HLS inequality.

    lhs = iint u u K 1_{B_delta}, mid = ||K 1_{B_delta}||_{p,inf} ||u||_{2p/(2p-1)}^2 and
    rhs = ||K 1_{B_delta}||_{p,inf} ||u||_1^{2-m*} ||u||_{m*}^{m*} with m* = (p+1)/p.
    Pass a prebuilt truncated operator and weak norm when checking many profiles.
    """
    if not p > 1:
        raise ValueError(f'ghls_check needs p > 1, got {p}')
    mstar = (p + 1) / p
    if op_delta is None:
        op_delta = build_interaction(u.grid, K.truncated(delta))
    if weak_norm is None:
        weak_norm = K.weak_lp(p, delta)

    lhs = interaction_energy(op_delta, u)
    mid = weak_norm * u.lp_norm(2 * p / (2 * p - 1)) ** 2
    rhs = weak_norm * u.lp_norm(1) ** (2 - mstar) * u.lp_norm(mstar) ** mstar
    ok = mid <= rhs * (1 + 1e-12) + 1e-300
    if not ok:
        logger.warning('interpolation step of the HLS chain failed', extra={'mid': mid, 'rhs': rhs})
    return GHLSReport(
        lhs=lhs, mid=mid, rhs=rhs, weak_norm=weak_norm, p=p, delta=delta,
        interpolation_ok=ok, c0_sample=lhs / mid if mid > 0 else 0.0,
    )
