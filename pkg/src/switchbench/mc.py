"""Monte Carlo evaluation of interval-union switching policies.

Every path owns a PCG64 stream seeded from (seed, path index), so an estimate
depends only on the seed and the configuration, never on how paths are split
across workers.  Several tracks (start state, start regime, policy) can share
one set of paths; a track's result is identical whether it runs alone or with
others.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numba
import numpy as np

from .diffusion import ABM, GBM, OU, Boundary
from .errors import ExplodedPath, UnsupportedModel
from .payoff import AffineIndicator, Power, SwitchingProblem


@dataclass(frozen=True)
class MCConfig:
    n_paths: int = 100_000
    dt: float = 1e-3
    seed: int = 20240917
    t_max: float | None = None     # default: e^{-alpha T} < tail
    tail: float = 1e-6
    block: int = 256
    chunk: int = 8192
    threads: int | None = None     # default: SWITCHBENCH_THREADS or 1

    def __post_init__(self):
        if self.n_paths < 1 or self.dt <= 0 or self.block < 1 or self.chunk < 1:
            raise ValueError("n_paths, dt, block and chunk must be positive")
        if not 0 < self.tail < 1:
            raise ValueError("tail must lie in (0, 1)")

    def horizon(self, alpha: float) -> float:
        return self.t_max if self.t_max is not None else math.log(1.0 / self.tail) / alpha


@dataclass(frozen=True)
class Track:
    x0: float
    i0: int
    gamma0: tuple        # intervals (lo, hi, lo_closed, hi_closed) where regime 0 switches
    gamma1: tuple


@dataclass
class MCEstimate:
    mean: float
    std_error: float
    n_paths: int
    dt: float
    seed: int
    switch_count_stats: dict = field(default_factory=dict)
    t_max: float = 0.0


def _as_intervals(ivs):
    out = []
    for iv in ivs:
        if hasattr(iv, "lo"):
            out.append((float(iv.lo), float(iv.hi), bool(iv.lo_closed), bool(iv.hi_closed)))
        else:
            lo, hi, lc, hc = iv
            out.append((float(lo), float(hi), bool(lc), bool(hc)))
    return tuple(out)


def track(x0: float, i0: int, policy) -> Track:
    """Build a track from anything with ``gamma0``/``gamma1`` interval lists, or a pair of lists."""
    if hasattr(policy, "gamma0"):
        g0, g1 = policy.gamma0, policy.gamma1
    else:
        g0, g1 = policy
    return Track(float(x0), int(i0), _as_intervals(g0), _as_intervals(g1))


# --- kernel ------------------------------------------------------------------------

_GBM, _OU, _ABM = 0, 1, 2
_POWER, _AFFINE = 0, 1


@numba.njit(cache=True, nogil=True)
def _kernel(Z, k0, dyn, dp, rew, cf, K, H, alpha, dt, absorb_lo, lo, absorb_hi, hi,
            x0s, drv, fac, alive, wt, xprev, xi, reg, acc, nsw, ivs, niv):
    """Advance a block of paths through one chunk of normals.

    All start states of a path share one driver ``drv``: log X - log x0 for
    GBM, the noise part of the (affine) Euler recursion for OU, and X - x0
    for ABM.  For GBM the states and interval bounds are in log coordinates
    and ``cf[i, j] = k_i x0_j^gamma_i``.  Returns the first path whose driver
    stopped being finite, or -1.

    For OU and ABM an absorbing end is also monitored between grid points:
    ``wt`` holds the Brownian-bridge probability that the path from start
    state j has not touched the end yet, and every cash flow is weighted by it.
    """
    B, S = Z.shape
    nt = xi.shape[0]
    nx = x0s.shape[0]
    sq = math.sqrt(dt)
    decay = math.exp(-alpha * dt)
    step_mu = 0.0
    rho = 1.0
    if dyn == _GBM:
        step_mu = (dp[0] - 0.5 * dp[1] * dp[1]) * dt
        step_sd = dp[1] * sq
        vol = dp[1]
    elif dyn == _OU:
        rho = 1.0 - dp[0] * dt
        step_sd = dp[2] * sq
        vol = dp[2]
    else:
        step_mu = dp[0] * dt
        step_sd = dp[1] * sq
        vol = dp[1]
    bridge = dyn != _GBM and (absorb_lo or absorb_hi)
    bscale = 2.0 / (vol * vol * dt)
    for b in range(B):
        # running discount and OU decay factors live in ``fac`` so chunking is invisible
        disc = fac[b, 0]
        r = fac[b, 1]
        y = drv[b]
        ac = acc[b].copy()
        rg = reg[b].copy()
        ns = nsw[b].copy()
        al = alive[b].copy()
        w = wt[b].copy()
        xs = xprev[b].copy()
        for s in range(S):
            for j in range(nx):
                if not al[j]:
                    continue
                if dyn == _GBM:
                    x = x0s[j] + y
                elif dyn == _OU:
                    x = dp[1] + (x0s[j] - dp[1]) * r + y
                else:
                    x = x0s[j] + y
                if (absorb_lo and x <= lo) or (absorb_hi and x >= hi):
                    al[j] = False
                    continue
                if bridge and k0 + s > 0:
                    # chance that the bridge from the previous grid point touched the end
                    xp = xs[j]
                    g = 0.0
                    if absorb_lo:
                        g = bscale * (xp - lo) * (x - lo)
                    else:
                        g = bscale * (hi - xp) * (hi - x)
                    if g < 50.0:
                        w[j] *= 1.0 - math.exp(-g)
                xs[j] = x
            e0 = 0.0
            e1 = 0.0
            if dyn == _GBM:
                if rew == _POWER:
                    e0 = math.exp(cf[2, 0] * y)
                    e1 = math.exp(cf[2, 1] * y)
                else:
                    e1 = math.exp(y)
            for t in range(nt):
                j = xi[t]
                if not al[j]:
                    continue
                x = xs[j]
                if dyn == _GBM:
                    if rew == _POWER:
                        f0 = cf[0, j] * e0
                        f1 = cf[1, j] * e1
                    else:
                        f0 = 0.0
                        f1 = cf[1, j] * e1 - K
                elif rew == _POWER:
                    f0 = cf[0, j] * x ** cf[2, 0]
                    f1 = cf[1, j] * x ** cf[2, 1]
                else:
                    f0 = 0.0
                    f1 = x - K
                i = rg[t]
                hit = False
                for k in range(niv[t, i]):
                    if ivs[t, i, k, 0] <= x <= ivs[t, i, k, 1]:
                        hit = True
                        break
                dw = disc * w[j]
                if hit:
                    ac[t] -= dw * H[i]
                    i = 1 - i
                    rg[t] = i
                    ns[t] += 1
                ac[t] += dw * (f1 if i == 1 else f0) * dt
            z = Z[b, s]
            if dyn == _OU:
                y = y * rho + step_sd * z
                r *= rho
            else:
                y = y + step_mu + step_sd * z
            if not math.isfinite(y):
                return b
            disc *= decay
        drv[b] = y
        fac[b, 0] = disc
        fac[b, 1] = r
        acc[b] = ac
        reg[b] = rg
        nsw[b] = ns
        alive[b] = al
        wt[b] = w
        xprev[b] = xs
    return -1


def _encode(problem: SwitchingProblem):
    model = problem.model
    dyn = model.dynamics
    if isinstance(dyn, GBM):
        code, dp, log = _GBM, np.array([dyn.m, dyn.beta]), True
    elif isinstance(dyn, OU):
        code, dp, log = _OU, np.array([dyn.delta, dyn.m, dyn.sigma]), False
    elif isinstance(dyn, ABM):
        code, dp, log = _ABM, np.array([dyn.mu, dyn.sigma]), False
    else:
        raise UnsupportedModel(f"no simulator for {dyn!r}")
    fam = problem.rewards.family
    if isinstance(fam, Power):
        rew, rp = _POWER, (fam.k0, fam.gamma0, fam.k1, fam.gamma1, 0.0)
    elif isinstance(fam, AffineIndicator):
        rew, rp = _AFFINE, (0.0, 0.0, 1.0, 1.0, fam.K)
    else:
        raise UnsupportedModel("Monte Carlo supports the built-in reward families only")
    return code, dp, log, rew, rp


def _coefficients(rp, x0s, log):
    """cf[i, j]: reward prefactor of regime i at start j; cf[2] holds the exponents."""
    k0, g0, k1, g1, _ = rp
    cf = np.zeros((3, max(2, len(x0s))))
    for j, x in enumerate(x0s):
        cf[0, j] = k0 * x ** g0 if log else k0
        cf[1, j] = k1 * x ** g1 if log else k1
    cf[2, 0], cf[2, 1] = g0, g1
    return cf


def _to_state(x, log):
    if not log:
        return x
    return math.log(x) if x > 0 else -math.inf


def _threads(cfg: MCConfig) -> int:
    if cfg.threads is not None:
        return max(1, int(cfg.threads))
    env = os.environ.get("SWITCHBENCH_THREADS")
    return max(1, int(env)) if env else 1


def _path_generator(seed: int, path: int):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, path])))


def simulate(problem: SwitchingProblem, tracks: list, config: MCConfig | None = None):
    """Per-path discounted payoffs for each track: arrays (n_paths, n_tracks)."""
    cfg = config or MCConfig()
    model = problem.model
    code, dp, log, rew, rp = _encode(problem)
    c, d = model.interval
    x0s = sorted({t.x0 for t in tracks})
    for x in x0s:
        if not model.contains(x):
            raise ValueError(f"start state {x} outside {model.interval}")
    xi = np.array([x0s.index(t.x0) for t in tracks], dtype=np.int64)
    nt = len(tracks)
    maxiv = max([1] + [len(g) for t in tracks for g in (t.gamma0, t.gamma1)])
    ivs = np.zeros((nt, 2, maxiv, 2))
    niv = np.zeros((nt, 2), dtype=np.int64)
    for k, t in enumerate(tracks):
        for i, g in enumerate((t.gamma0, t.gamma1)):
            niv[k, i] = len(g)
            for m, (lo_, hi_, lc, hc) in enumerate(g):
                # open ends move one ulp inward so the kernel only needs lo <= x <= hi
                a, b = _to_state(lo_, log), _to_state(hi_, log)
                ivs[k, i, m] = (a if lc else np.nextafter(a, np.inf), b if hc else np.nextafter(b, -np.inf))
    H = np.array([problem.H01, problem.H10])
    n_steps = int(math.ceil(cfg.horizon(model.alpha) / cfg.dt))
    absorb_lo = model.left is Boundary.ABSORBING
    absorb_hi = model.right is Boundary.ABSORBING
    lo_s = _to_state(c, log) if math.isfinite(c) else -math.inf
    hi_s = _to_state(d, log) if math.isfinite(d) else math.inf
    acc_all = np.zeros((cfg.n_paths, nt))
    nsw_all = np.zeros((cfg.n_paths, nt), dtype=np.int64)
    i0 = np.array([t.i0 for t in tracks], dtype=np.int8)
    start = np.array([_to_state(x, log) for x in x0s])
    cf = _coefficients(rp, x0s, log)

    def run_block(p0):
        p1 = min(p0 + cfg.block, cfg.n_paths)
        B = p1 - p0
        gens = [_path_generator(cfg.seed, p) for p in range(p0, p1)]
        drv = np.zeros(B)
        fac = np.ones((B, 2))
        alive = np.ones((B, len(x0s)), dtype=np.bool_)
        wt = np.ones((B, len(x0s)))
        xprev = np.tile(start, (B, 1))
        reg = np.tile(i0, (B, 1))
        acc = np.zeros((B, nt))
        nsw = np.zeros((B, nt), dtype=np.int64)
        Z = np.empty((B, cfg.chunk))
        for k0 in range(0, n_steps, cfg.chunk):
            S = min(cfg.chunk, n_steps - k0)
            Zs = Z[:, :S] if S == cfg.chunk else np.empty((B, S))
            for b in range(B):
                gens[b].standard_normal(out=Zs[b])
            bad = _kernel(Zs, k0, code, dp, rew, cf, rp[4], H, model.alpha, cfg.dt,
                          absorb_lo, lo_s, absorb_hi, hi_s,
                          start, drv, fac, alive, wt, xprev, xi, reg, acc, nsw, ivs, niv)
            if bad >= 0:
                raise ExplodedPath(f"path {p0 + bad} left the floating-point range near step "
                                   f"{k0}..{k0 + S} (seed {cfg.seed})")
        acc_all[p0:p1] = acc
        nsw_all[p0:p1] = nsw

    starts = range(0, cfg.n_paths, cfg.block)
    workers = _threads(cfg)
    if workers == 1:
        for p0 in starts:
            run_block(p0)
    else:
        with ThreadPoolExecutor(workers) as pool:
            list(pool.map(run_block, starts))
    return acc_all, nsw_all, n_steps * cfg.dt


def _estimate(acc, nsw, cfg, t_max) -> MCEstimate:
    n = len(acc)
    mean = float(np.mean(acc))
    se = float(np.std(acc, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    stats = {"mean": float(np.mean(nsw)), "max": int(np.max(nsw))}
    return MCEstimate(mean, se, n, cfg.dt, cfg.seed, stats, t_max)


def mc_values(problem: SwitchingProblem, tracks: list, config: MCConfig | None = None) -> list:
    cfg = config or MCConfig()
    acc, nsw, t_max = simulate(problem, tracks, cfg)
    return [_estimate(acc[:, k], nsw[:, k], cfg, t_max) for k in range(len(tracks))]


def mc_value(problem: SwitchingProblem, policy, x0: float, i0: int,
             config: MCConfig | None = None) -> MCEstimate:
    """Discounted payoff of following ``policy`` from (x0, i0)."""
    return mc_values(problem, [track(x0, i0, policy)], config)[0]


NEVER = ((), ())
