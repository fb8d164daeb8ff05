"""No-U-turn sampler over a gradient-bearing target.

The target is any callable ``z -> (log_density, gradient)`` on an
unconstrained real vector.  A transition draws a momentum, grows a binary
tree of leapfrog states by doubling until the trajectory starts to turn
back on itself (velocity-based criterion) or the tree depth limit is hit,
and selects the next state by multinomial sampling over the trajectory with
a progressive bias toward the newer half.  Energy errors above
``divergence_nats`` flag the draw as divergent and stop the doubling.

Warmup adapts the step size by dual averaging toward ``target_accept``
(gamma=0.05, t0=10, kappa=0.75, anchored at 10x an initial step found by
doubling/halving until the one-step acceptance crosses 1/2) and, when
``mass_matrix="diag"``, estimates a diagonal inverse mass from draw
variances over an expanding schedule of warmup windows (75 iterations of
settling, windows of 25, 50, 100, ... iterations, 50 iterations of final
step-size polish).  Chains use independent Philox streams spawned from one
master seed, so results are bit-reproducible for a given (seed, config,
target) regardless of how chains are scheduled.

Diagnostics follow the rank-normalization recipe: split each chain in half,
transform pooled ranks through the normal quantile function, then compute
the between/within variance ratio (split-Rhat) and the autocorrelation-sum
effective sample size with Geyer's pairwise truncation rule (bulk ESS).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri
from scipy.stats import rankdata

__all__ = [
    "SamplerConfig",
    "DrawStore",
    "ChainState",
    "StepStats",
    "Diagnostics",
    "leapfrog",
    "find_initial_step",
    "nuts_step",
    "run",
    "diagnostics",
    "split_rhat",
    "ess_bulk",
]


@dataclass(frozen=True)
class SamplerConfig:
    """Sampler settings; defaults target routine posterior work.

    ``step_size=None`` means dual-averaging adaptation; a fixed value turns
    step adaptation off.  ``mass_matrix`` is ``"diag"`` (adapted from warmup
    draws) or ``"unit"``.
    """

    warmup: int = 5000
    draws: int = 5000
    chains: int = 4
    seed: int = 0
    target_accept: float = 0.8
    max_tree_depth: int = 10
    divergence_nats: float = 1000.0
    step_size: float | None = None
    mass_matrix: str = "diag"

    def __post_init__(self) -> None:
        if self.draws < 1:
            raise ValueError(f"draws must be >= 1, got {self.draws}")
        if self.chains < 1:
            raise ValueError(f"chains must be >= 1, got {self.chains}")
        if self.warmup < 0:
            raise ValueError(f"warmup must be >= 0, got {self.warmup}")
        if not 0.0 < self.target_accept < 1.0:
            raise ValueError(f"target_accept must be in (0, 1), got {self.target_accept}")
        if self.max_tree_depth < 1:
            raise ValueError(f"max_tree_depth must be >= 1, got {self.max_tree_depth}")
        if self.divergence_nats <= 0.0:
            raise ValueError(f"divergence_nats must be positive, got {self.divergence_nats}")
        if self.mass_matrix not in ("unit", "diag"):
            raise ValueError(f"mass_matrix must be 'unit' or 'diag', got {self.mass_matrix!r}")
        if self.step_size is not None and not self.step_size > 0.0:
            raise ValueError(f"step_size must be positive, got {self.step_size}")
        adapting = self.step_size is None or self.mass_matrix == "diag"
        if adapting and self.warmup < 100:
            raise ValueError(
                "warmup must be >= 100 when step-size or mass adaptation is "
                "enabled; pass a fixed step_size and mass_matrix='unit' for "
                "adaptation-free runs"
            )


@dataclass
class DrawStore:
    """Post-warmup draws plus per-draw sampler statistics."""

    draws: np.ndarray            # (chains, draws, dim), unconstrained
    accept_stat: np.ndarray      # (chains, draws)
    divergent: np.ndarray        # (chains, draws) bool
    tree_depth: np.ndarray       # (chains, draws)
    energy: np.ndarray           # (chains, draws)
    step_size_trace: np.ndarray  # (chains, warmup + draws)
    step_size: np.ndarray        # (chains,) step used after warmup
    inv_mass: np.ndarray         # (chains, dim)
    config: SamplerConfig

    @property
    def n_chains(self) -> int:
        return self.draws.shape[0]

    @property
    def n_draws(self) -> int:
        return self.draws.shape[1]

    @property
    def dim(self) -> int:
        return self.draws.shape[2]


@dataclass
class ChainState:
    z: np.ndarray
    val: float
    grad: np.ndarray


@dataclass
class StepStats:
    accept_stat: float
    divergent: bool
    depth: int
    energy: float
    n_leapfrog: int


def leapfrog(z, p, step, target, inv_mass=None, n_steps=1):
    """Half-kick / drift / half-kick integrator; returns (position, momentum).

    ``n_steps=0`` is the identity.  The map is exactly reversible: negating
    the momentum and integrating again returns the start point.
    """
    z = np.asarray(z, dtype=float).copy()
    p = np.asarray(p, dtype=float).copy()
    if inv_mass is None:
        inv_mass = np.ones_like(z)
    if n_steps == 0:
        return z, p
    _, grad = target(z)
    for _ in range(n_steps):
        p = p + 0.5 * step * grad
        z = z + step * (inv_mass * p)
        _, grad = target(z)
        p = p + 0.5 * step * grad
    return z, p


def _kinetic(p, inv_mass) -> float:
    # Momenta explode on divergent trajectories; an inf here is handled by
    # the energy-error check, so suppress the overflow warning only.
    with np.errstate(over="ignore"):
        return 0.5 * float(p @ (inv_mass * p))


def find_initial_step(target, z, rng, inv_mass) -> float:
    """Double/halve a unit step until the one-step acceptance crosses 1/2."""
    val, grad = target(z)
    if not np.isfinite(val):
        raise ValueError("initial point has non-finite log density")
    p0 = rng.standard_normal(z.size) / np.sqrt(inv_mass)
    j0 = val - _kinetic(p0, inv_mass)

    def log_ratio(eps: float) -> float:
        ph = p0 + 0.5 * eps * grad
        z1 = z + eps * (inv_mass * ph)
        v1, g1 = target(z1)
        if not np.isfinite(v1):
            return -np.inf
        p1 = ph + 0.5 * eps * g1
        return (v1 - _kinetic(p1, inv_mass)) - j0

    eps = 1.0
    dj = log_ratio(eps)
    for _ in range(200):
        if np.isfinite(dj):
            break
        eps *= 0.5
        dj = log_ratio(eps)
    else:
        raise ValueError("could not find a finite initial step size")
    a = 1.0 if dj > -math.log(2.0) else -1.0
    for _ in range(200):
        if not a * dj > -a * math.log(2.0):
            break
        eps *= 2.0**a
        if not 1e-17 < eps < 1e17:
            raise ValueError("could not find a finite initial step size")
        dj = log_ratio(eps)
    return eps


class _DualAveraging:
    """Step-size adaptation toward a target acceptance statistic."""

    gamma = 0.05
    t0 = 10.0
    kappa = 0.75

    def __init__(self, eps0: float, target: float):
        self.mu = math.log(10.0 * eps0)
        self.target = target
        self.t = 0
        self.h_bar = 0.0
        self.log_eps = math.log(eps0)
        self.log_eps_bar = math.log(eps0)

    def update(self, accept_stat: float) -> float:
        self.t += 1
        eta = 1.0 / (self.t + self.t0)
        self.h_bar = (1.0 - eta) * self.h_bar + eta * (self.target - accept_stat)
        self.log_eps = self.mu - math.sqrt(self.t) / self.gamma * self.h_bar
        w = self.t ** (-self.kappa)
        self.log_eps_bar = w * self.log_eps + (1.0 - w) * self.log_eps_bar
        return math.exp(self.log_eps)

    def adapted(self) -> float:
        return math.exp(self.log_eps_bar)


class _Welford:
    """Running per-coordinate mean/variance of warmup draws."""

    def __init__(self, dim: int):
        self.dim = dim
        self.reset()

    def reset(self) -> None:
        self.count = 0
        self.mean = np.zeros(self.dim)
        self.m2 = np.zeros(self.dim)

    def add(self, x: np.ndarray) -> None:
        self.count += 1
        delta = x - self.mean
        self.mean += delta / self.count
        self.m2 += delta * (x - self.mean)

    def variance_regularized(self) -> np.ndarray:
        # shrink toward 1e-3 with prior weight 5, guarding short windows
        n = self.count
        if n < 2:
            return np.ones(self.dim)
        var = self.m2 / (n - 1)
        return (n / (n + 5.0)) * var + 1e-3 * (5.0 / (n + 5.0))


def _adapt_windows(warmup: int, init_buffer: int = 75, term_buffer: int = 50,
                   base_window: int = 25) -> list[tuple[int, int]]:
    """Expanding variance-estimation windows inside the warmup phase."""
    if warmup < init_buffer + base_window + term_buffer:
        init_buffer = int(0.15 * warmup)
        term_buffer = int(0.10 * warmup)
        base_window = warmup - init_buffer - term_buffer
    windows = []
    start = init_buffer
    size = base_window
    last = warmup - term_buffer
    while True:
        end = start + size
        if end + 2 * size > last:
            windows.append((start, last))
            break
        windows.append((start, end))
        start = end
        size *= 2
    return windows


def _uturn(z_minus, z_plus, p_minus, p_plus, inv_mass) -> bool:
    dz = z_plus - z_minus
    return (dz @ (inv_mass * p_minus)) < 0.0 or (dz @ (inv_mass * p_plus)) < 0.0


class _Tree:
    __slots__ = (
        "z_minus", "p_minus", "g_minus", "z_plus", "p_plus", "g_plus",
        "z_prop", "v_prop", "g_prop", "log_sum_w", "alpha_sum", "n_alpha",
        "divergent", "turning", "n_leapfrog",
    )

    def __init__(self, **kw):
        for k, v in kw.items():
            setattr(self, k, v)


def _build_tree(depth, z, p, grad, direction, step, j0, target, inv_mass,
                div_nats, rng) -> _Tree:
    if depth == 0:
        eps = direction * step
        ph = p + 0.5 * eps * grad
        z1 = z + eps * (inv_mass * ph)
        v1, g1 = target(z1)
        if np.isfinite(v1):
            p1 = ph + 0.5 * eps * g1
            dj = (v1 - _kinetic(p1, inv_mass)) - j0
        else:
            p1 = ph
            dj = -np.inf
        divergent = not np.isfinite(dj) or -dj > div_nats
        alpha = math.exp(min(0.0, dj)) if np.isfinite(dj) else 0.0
        return _Tree(
            z_minus=z1, p_minus=p1, g_minus=g1,
            z_plus=z1, p_plus=p1, g_plus=g1,
            z_prop=z1, v_prop=v1, g_prop=g1,
            log_sum_w=dj, alpha_sum=alpha, n_alpha=1,
            divergent=divergent, turning=False, n_leapfrog=1,
        )

    first = _build_tree(depth - 1, z, p, grad, direction, step, j0, target,
                        inv_mass, div_nats, rng)
    if first.divergent or first.turning:
        return first
    if direction == 1:
        edge = (first.z_plus, first.p_plus, first.g_plus)
    else:
        edge = (first.z_minus, first.p_minus, first.g_minus)
    second = _build_tree(depth - 1, *edge, direction, step, j0, target,
                         inv_mass, div_nats, rng)

    if direction == 1:
        z_minus, p_minus, g_minus = first.z_minus, first.p_minus, first.g_minus
        z_plus, p_plus, g_plus = second.z_plus, second.p_plus, second.g_plus
    else:
        z_minus, p_minus, g_minus = second.z_minus, second.p_minus, second.g_minus
        z_plus, p_plus, g_plus = first.z_plus, first.p_plus, first.g_plus

    alpha_sum = first.alpha_sum + second.alpha_sum
    n_alpha = first.n_alpha + second.n_alpha
    n_leapfrog = first.n_leapfrog + second.n_leapfrog

    if second.divergent or second.turning:
        first.z_minus, first.p_minus, first.g_minus = z_minus, p_minus, g_minus
        first.z_plus, first.p_plus, first.g_plus = z_plus, p_plus, g_plus
        first.alpha_sum, first.n_alpha = alpha_sum, n_alpha
        first.n_leapfrog = n_leapfrog
        first.divergent = second.divergent
        first.turning = second.turning
        return first

    log_sum_w = np.logaddexp(first.log_sum_w, second.log_sum_w)
    if math.log(rng.random()) < second.log_sum_w - log_sum_w:
        z_prop, v_prop, g_prop = second.z_prop, second.v_prop, second.g_prop
    else:
        z_prop, v_prop, g_prop = first.z_prop, first.v_prop, first.g_prop

    return _Tree(
        z_minus=z_minus, p_minus=p_minus, g_minus=g_minus,
        z_plus=z_plus, p_plus=p_plus, g_plus=g_plus,
        z_prop=z_prop, v_prop=v_prop, g_prop=g_prop,
        log_sum_w=log_sum_w, alpha_sum=alpha_sum, n_alpha=n_alpha,
        divergent=False,
        turning=_uturn(z_minus, z_plus, p_minus, p_plus, inv_mass),
        n_leapfrog=n_leapfrog,
    )


def nuts_step(state: ChainState, target, step: float, rng, inv_mass=None,
              max_tree_depth: int = 10,
              divergence_nats: float = 1000.0) -> tuple[ChainState, StepStats]:
    """One trajectory: momentum refresh, doubling, multinomial selection."""
    dim = state.z.size
    if inv_mass is None:
        inv_mass = np.ones(dim)
    p0 = rng.standard_normal(dim) / np.sqrt(inv_mass)
    j0 = state.val - _kinetic(p0, inv_mass)

    z_minus = z_plus = state.z
    p_minus = p_plus = p0
    g_minus = g_plus = state.grad
    z_prop, v_prop, g_prop = state.z, state.val, state.grad
    log_sum_w = 0.0
    alpha_sum = 0.0
    n_alpha = 0
    n_leapfrog = 0
    divergent = False
    depth = 0

    for j in range(max_tree_depth):
        direction = 1 if rng.random() < 0.5 else -1
        if direction == 1:
            sub = _build_tree(j, z_plus, p_plus, g_plus, 1, step, j0, target,
                              inv_mass, divergence_nats, rng)
            z_plus, p_plus, g_plus = sub.z_plus, sub.p_plus, sub.g_plus
        else:
            sub = _build_tree(j, z_minus, p_minus, g_minus, -1, step, j0,
                              target, inv_mass, divergence_nats, rng)
            z_minus, p_minus, g_minus = sub.z_minus, sub.p_minus, sub.g_minus
        alpha_sum += sub.alpha_sum
        n_alpha += sub.n_alpha
        n_leapfrog += sub.n_leapfrog
        if sub.divergent:
            divergent = True
            break
        if sub.turning:
            break
        # biased-progressive selection: favor the newly built half
        if math.log(rng.random()) < sub.log_sum_w - log_sum_w:
            z_prop, v_prop, g_prop = sub.z_prop, sub.v_prop, sub.g_prop
        log_sum_w = np.logaddexp(log_sum_w, sub.log_sum_w)
        depth = j + 1
        if _uturn(z_minus, z_plus, p_minus, p_plus, inv_mass):
            break

    new_state = ChainState(z=z_prop, val=v_prop, grad=g_prop)
    stats = StepStats(
        accept_stat=alpha_sum / max(n_alpha, 1),
        divergent=divergent,
        depth=depth,
        energy=-j0,
        n_leapfrog=n_leapfrog,
    )
    return new_state, stats


def _run_chain(target, dim, config, init, seed_seq, out, chain):
    rng = np.random.Generator(np.random.Philox(seed_seq))
    z = np.array(init, dtype=float)
    val, grad = target(z)
    if not np.isfinite(val):
        raise ValueError("initial point has non-finite log density")
    state = ChainState(z=z, val=val, grad=grad)
    inv_mass = np.ones(dim)

    adapt_step = config.step_size is None
    adapt_mass = config.mass_matrix == "diag" and config.warmup > 0
    if adapt_step:
        eps = find_initial_step(target, state.z, rng, inv_mass)
        da = _DualAveraging(eps, config.target_accept)
    else:
        eps = config.step_size
        da = None
    welford = _Welford(dim) if adapt_mass else None
    windows = _adapt_windows(config.warmup) if adapt_mass else []
    window_idx = 0

    trace = out["step_size_trace"][chain]
    for it in range(config.warmup):
        trace[it] = eps
        state, stats = nuts_step(
            state, target, eps, rng, inv_mass,
            config.max_tree_depth, config.divergence_nats,
        )
        if adapt_step:
            eps = da.update(stats.accept_stat)
        if welford is not None and window_idx < len(windows):
            start, end = windows[window_idx]
            if start <= it:
                welford.add(state.z)
            if it == end - 1:
                # update the metric only; restarting the averaging here
                # would leave too few iterations to settle the step again
                inv_mass = welford.variance_regularized()
                welford.reset()
                window_idx += 1
    if adapt_step:
        eps = da.adapted()

    for it in range(config.draws):
        trace[config.warmup + it] = eps
        state, stats = nuts_step(
            state, target, eps, rng, inv_mass,
            config.max_tree_depth, config.divergence_nats,
        )
        out["draws"][chain, it] = state.z
        out["accept_stat"][chain, it] = stats.accept_stat
        out["divergent"][chain, it] = stats.divergent
        out["tree_depth"][chain, it] = stats.depth
        out["energy"][chain, it] = stats.energy
    out["step_size"][chain] = eps
    out["inv_mass"][chain] = inv_mass


def run(target, dim: int, config: SamplerConfig, init=None) -> DrawStore:
    """Sample all chains; deterministic for a given (seed, config, target).

    ``init`` is a (chains, dim) array of start points, one vector broadcast
    to all chains, or None for zeros.  Chains draw from Philox streams
    spawned off the master seed, so each is independent and the store is
    identical across runs and schedulings.
    """
    if init is None:
        init = np.zeros((config.chains, dim))
    else:
        init = np.asarray(init, dtype=float)
        if init.ndim == 1:
            init = np.broadcast_to(init, (config.chains, dim)).copy()
        if init.shape != (config.chains, dim):
            raise ValueError(
                f"init shape {init.shape} does not match (chains, dim) = "
                f"({config.chains}, {dim})"
            )
    out = {
        "draws": np.empty((config.chains, config.draws, dim)),
        "accept_stat": np.empty((config.chains, config.draws)),
        "divergent": np.zeros((config.chains, config.draws), dtype=bool),
        "tree_depth": np.zeros((config.chains, config.draws), dtype=np.int16),
        "energy": np.empty((config.chains, config.draws)),
        "step_size_trace": np.empty((config.chains, config.warmup + config.draws)),
        "step_size": np.empty(config.chains),
        "inv_mass": np.empty((config.chains, dim)),
    }
    seeds = np.random.SeedSequence(config.seed).spawn(config.chains)
    for c in range(config.chains):
        _run_chain(target, dim, config, init[c], seeds[c], out, c)
    return DrawStore(config=config, **out)


# ---------------------------------------------------------------------------
# diagnostics


def _z_scale(x: np.ndarray) -> np.ndarray:
    ranks = rankdata(x, method="average").reshape(x.shape)
    return ndtri((ranks - 0.5) / x.size)


def _split_chains(x: np.ndarray) -> np.ndarray:
    n = x.shape[1]
    half = n // 2
    return np.vstack([x[:, :half], x[:, n - half:]])


def split_rhat(x: np.ndarray) -> float:
    """Rank-normalized split-chain potential scale reduction factor."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 4:
        return math.nan
    s = _z_scale(_split_chains(x))
    n = s.shape[1]
    within = s.var(axis=1, ddof=1).mean()
    between = n * s.mean(axis=1).var(ddof=1)
    var_plus = (n - 1) / n * within + between / n
    if within == 0.0:
        return math.nan
    return float(math.sqrt(var_plus / within))


def _autocov(x: np.ndarray) -> np.ndarray:
    # biased sample autocovariance per row, via FFT
    n = x.shape[1]
    m = 1 << (2 * n - 1).bit_length()
    centered = x - x.mean(axis=1, keepdims=True)
    f = np.fft.rfft(centered, n=m, axis=1)
    acov = np.fft.irfft(f * np.conjugate(f), n=m, axis=1)[:, :n].real
    return acov / n


def ess_bulk(x: np.ndarray) -> float:
    """Bulk effective sample size of rank-normalized split chains.

    The autocorrelation sum follows Geyer: accumulate consecutive lag pairs
    while their sum stays positive, then enforce monotone decay.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[1] < 4:
        return math.nan
    s = _z_scale(_split_chains(x))
    n_chain, n_draw = s.shape
    acov = _autocov(s)
    chain_var = acov[:, 0] * n_draw / (n_draw - 1)
    mean_var = chain_var.mean()
    var_plus = mean_var * (n_draw - 1) / n_draw
    if n_chain > 1:
        var_plus += s.mean(axis=1).var(ddof=1)
    if var_plus == 0.0:
        return math.nan

    rho = 1.0 - (mean_var - acov.mean(axis=0)) / var_plus
    rho[0] = 1.0
    # Geyer initial positive sequence: stop before the first negative pair sum
    tau = 0.0
    prev_pair = np.inf
    t = 1
    pair = rho[0] + rho[1] if n_draw > 1 else rho[0]
    while t < n_draw - 2 and pair >= 0.0:
        tau += min(pair, prev_pair)  # initial monotone adjustment
        prev_pair = min(pair, prev_pair)
        t += 2
        pair = rho[t - 1] + rho[t] if t < n_draw else -1.0
    tau = max(2.0 * tau - 1.0, 1.0 / math.log10(n_chain * n_draw + 10.0))
    return float(n_chain * n_draw / tau)


@dataclass
class Diagnostics:
    rhat: np.ndarray | None
    ess_bulk: np.ndarray | None
    divergences: int
    available: bool


def diagnostics(store: DrawStore) -> Diagnostics:
    """Split-Rhat and bulk ESS per coordinate plus the divergence count.

    Requires at least 2 chains and 4 draws per chain; otherwise the rank
    statistics are reported unavailable rather than fabricated.
    """
    ndiv = int(store.divergent.sum())
    if store.n_chains < 2 or store.n_draws < 4:
        return Diagnostics(rhat=None, ess_bulk=None, divergences=ndiv, available=False)
    dim = store.dim
    rhat = np.empty(dim)
    ess = np.empty(dim)
    for d in range(dim):
        coord = store.draws[:, :, d]
        rhat[d] = split_rhat(coord)
        ess[d] = ess_bulk(coord)
    return Diagnostics(rhat=rhat, ess_bulk=ess, divergences=ndiv, available=True)
