"""Model-comparison criteria over posterior draws: DIC, WAIC, PSIS-LOO.

Everything works from a pointwise log-likelihood matrix L with one row per
retained draw and one column per observation, entries log p(y_i | theta_s)
conditional on the draw's latent volatility path.  WAIC and LOO are
estimated on the expected-log-predictive-density scale and reported on the
deviance scale (-2 x elpd) alongside standard errors; LOO importance
weights are stabilized by fitting a generalized Pareto distribution to the
weight tail and replacing the tail by its fitted quantiles, with the shape
estimate k-hat reported per observation as a reliability flag.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

__all__ = [
    "PsisConfig",
    "CriteriaReport",
    "dic",
    "waic",
    "gpd_fit",
    "psis_loo",
    "criteria",
    "compare",
]


@dataclass(frozen=True)
class PsisConfig:
    """Constants of the Pareto-smoothing procedure."""

    tail_frac: float = 0.2      # tail size = min(ceil(tail_frac*S), ceil(tail_mult*sqrt(S)))
    tail_mult: float = 3.0
    min_tail: int = 5           # below this, no smoothing is attempted
    k_ok: float = 0.5           # k-hat below this: negligible bias
    k_warn: float = 0.7         # k-hat above this: estimate unreliable
    min_draws: int = 20


def _check_loglik(L) -> np.ndarray:
    L = np.asarray(L, dtype=float)
    if L.ndim != 2:
        raise ValueError(f"log-likelihood matrix must be 2-d, got shape {L.shape}")
    bad = ~np.isfinite(L)
    if bad.any():
        s, i = np.argwhere(bad)[0]
        raise ValueError(
            f"log-likelihood matrix has a non-finite entry at draw {s}, observation {i}"
        )
    return L


def dic(loglik_at_posterior_mean: float, per_draw_loglik) -> tuple[float, float]:
    """Deviance information criterion and its effective-parameter count.

    ``per_draw_loglik`` holds the total log-likelihood of each retained draw;
    the plug-in value is evaluated at the posterior mean of parameters and
    latent path in the constrained space.
    """
    lp_hat = float(loglik_at_posterior_mean)
    ll = np.asarray(per_draw_loglik, dtype=float)
    if ll.ndim != 1 or ll.size < 2:
        raise ValueError("per-draw log-likelihood must be a vector with at least 2 entries")
    if not math.isfinite(lp_hat) or not np.all(np.isfinite(ll)):
        raise ValueError("log-likelihood values must be finite")
    p_dic = 2.0 * (lp_hat - float(ll.mean()))
    return -2.0 * lp_hat + 2.0 * p_dic, p_dic


def _pointwise_waic(L: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    s = L.shape[0]
    lpd = logsumexp(L, axis=0) - math.log(s)
    p = L.var(axis=0, ddof=1)
    return lpd, p


def _se(pointwise: np.ndarray) -> float:
    n = pointwise.size
    if n < 2:
        return 0.0
    return math.sqrt(n * float(pointwise.var(ddof=1)))


def waic(L) -> tuple[float, float, float]:
    """Widely applicable information criterion on the elpd scale.

    Returns (elpd_waic, p_waic, se).  The pointwise penalty is the
    (n-1)-denominator variance of log-likelihood over draws.
    """
    L = _check_loglik(L)
    if L.shape[0] < 2:
        raise ValueError("waic needs at least 2 draws")
    lpd, p = _pointwise_waic(L)
    elpd_i = lpd - p
    return float(elpd_i.sum()), float(p.sum()), _se(elpd_i)


def gpd_fit(tail) -> tuple[float, float]:
    """Generalized-Pareto (shape, scale) for a sample of nonnegative excesses.

    Profile-likelihood estimate over a grid of transformed scale values with
    likelihood weights, followed by the small-sample prior adjustment
    k <- (M*k + 5) / (M + 10).  An all-equal sample carries no tail
    information and returns the sentinel k = -inf.
    """
    x = np.sort(np.asarray(tail, dtype=float))
    n = x.size
    if n < 5:
        raise ValueError(f"generalized-Pareto fit needs at least 5 values, got {n}")
    if not np.all(np.isfinite(x)) or x[0] < 0.0:
        raise ValueError("tail excesses must be finite and nonnegative")
    if x[-1] <= x[0]:
        return -math.inf, 0.0
    xstar = x[int(n / 4.0 + 0.5) - 1]
    if xstar <= 0.0:
        xstar = x[x > 0.0][0]

    m = 30 + int(math.sqrt(n))
    j = np.arange(1, m + 1)
    b = 1.0 / x[-1] + (1.0 - np.sqrt(m / (j - 0.5))) / (3.0 * xstar)
    with np.errstate(divide="ignore", invalid="ignore"):
        k_b = np.mean(np.log1p(-b[:, None] * x[None, :]), axis=1)
        prof = n * (np.log(-b / k_b) - k_b - 1.0)
    prof[~np.isfinite(prof)] = -np.inf
    w = np.exp(prof - logsumexp(prof))
    b_hat = float(w @ b)
    k_raw = float(np.mean(np.log1p(-b_hat * x)))
    sigma = -k_raw / b_hat
    k_hat = (n * k_raw + 5.0) / (n + 10.0)
    return k_hat, sigma


def _gpd_quantiles(p: np.ndarray, k: float, sigma: float) -> np.ndarray:
    if abs(k) < 1e-12:
        return -sigma * np.log1p(-p)
    return sigma / k * (np.power(1.0 - p, -k) - 1.0)


def psis_loo(L, config: PsisConfig = PsisConfig()) -> tuple[float, float, np.ndarray]:
    """Leave-one-out elpd by Pareto-smoothed importance sampling.

    Per observation, the importance ratios 1/p(y_i | theta_s) get their
    largest-M tail replaced by generalized-Pareto quantiles at positions
    (j - 1/2)/M above the tail threshold, truncated at the raw maximum;
    the smoothed weights then form a self-normalized estimate of the
    held-out density.  Returns (elpd_loo, se, pareto_k).
    """
    L = _check_loglik(L)
    s, n = L.shape
    if s < config.min_draws:
        raise ValueError(f"psis_loo needs at least {config.min_draws} draws, got {s}")
    m = min(math.ceil(config.tail_frac * s), math.ceil(config.tail_mult * math.sqrt(s)))
    elpd_i = np.empty(n)
    pareto_k = np.empty(n)
    for i in range(n):
        lw = -L[:, i]
        lw -= lw.max()
        if m >= config.min_tail:
            order = np.argsort(lw, kind="stable")
            tail_idx = order[s - m:]
            # One vectorized exp for cutoff and tail alike; mixing scalar and
            # vector exp can flip ties by an ulp and make an excess negative.
            w = np.exp(lw)
            cutoff = float(w[order[s - m - 1]])
            excess = np.maximum(w[tail_idx] - cutoff, 0.0)
            if excess[-1] <= excess[0]:
                pareto_k[i] = -math.inf
            else:
                k_hat, sigma = gpd_fit(excess)
                pareto_k[i] = k_hat
                if math.isfinite(k_hat):
                    q = (np.arange(1, m + 1) - 0.5) / m
                    smoothed = cutoff + _gpd_quantiles(q, k_hat, sigma)
                    # raw maximum is 1 after stabilization
                    lw[tail_idx] = np.log(np.minimum(smoothed, 1.0))
        else:
            pareto_k[i] = math.inf
        elpd_i[i] = logsumexp(lw + L[:, i]) - logsumexp(lw)
    return float(elpd_i.sum()), _se(elpd_i), pareto_k


@dataclass
class CriteriaReport:
    """All three criteria for one fitted model, deviance scale up front."""

    label: str
    n: int
    s: int
    dic: float
    p_dic: float
    waic: float
    se_waic: float
    p_waic: float
    elpd_waic: float
    loo: float
    se_loo: float
    elpd_loo: float
    lpd: float
    pareto_k: np.ndarray
    k_warnings: int

    def to_dict(self) -> dict:
        out = {
            "label": self.label,
            "n": self.n,
            "draws": self.s,
            "dic": self.dic,
            "p_dic": self.p_dic,
            "waic": self.waic,
            "se_waic": self.se_waic,
            "p_waic": self.p_waic,
            "elpd_waic": self.elpd_waic,
            "loo": self.loo,
            "se_loo": self.se_loo,
            "elpd_loo": self.elpd_loo,
            "lpd": self.lpd,
            "k_warnings": self.k_warnings,
            "pareto_k": [float(k) for k in self.pareto_k],
        }
        return out


def criteria(L, loglik_at_posterior_mean: float, label: str = "model",
             config: PsisConfig = PsisConfig()) -> CriteriaReport:
    """Assemble DIC, WAIC, and PSIS-LOO into one report.

    Deviance-scale values are exactly -2 times the elpd-scale ones, and the
    deviance-scale standard errors are 2 times the elpd-scale ones.
    """
    L = _check_loglik(L)
    s, n = L.shape
    dic_val, p_dic = dic(loglik_at_posterior_mean, L.sum(axis=1))
    elpd_waic, p_waic, se_w = waic(L)
    lpd = float((logsumexp(L, axis=0) - math.log(s)).sum())
    elpd_loo, se_l, pareto_k = psis_loo(L, config)
    return CriteriaReport(
        label=label,
        n=n,
        s=s,
        dic=dic_val,
        p_dic=p_dic,
        waic=-2.0 * elpd_waic,
        se_waic=2.0 * se_w,
        p_waic=p_waic,
        elpd_waic=elpd_waic,
        loo=-2.0 * elpd_loo,
        se_loo=2.0 * se_l,
        elpd_loo=elpd_loo,
        lpd=lpd,
        pareto_k=pareto_k,
        k_warnings=int(np.sum(pareto_k > config.k_warn)),
    )


def compare(reports: list[CriteriaReport]) -> dict:
    """Rank models by each deviance-scale criterion (lower is better).

    Ties keep registration order (the order reports were passed in).
    Returns the rankings plus a per-model table with differences to the
    best model under each criterion.
    """
    if not reports:
        raise ValueError("compare needs at least one report")
    n = reports[0].n
    for r in reports[1:]:
        if r.n != n:
            raise ValueError(
                f"reports computed on different data: n={n} vs n={r.n} ({r.label!r})"
            )
    crits = ("dic", "waic", "loo")
    ranking = {
        c: [r.label for r in sorted(reports, key=lambda r: getattr(r, c))]
        for c in crits
    }
    best = {c: min(getattr(r, c) for r in reports) for c in crits}
    table = []
    for r in reports:
        row = {
            "label": r.label,
            "dic": r.dic,
            "p_dic": r.p_dic,
            "waic": r.waic,
            "se_waic": r.se_waic,
            "p_waic": r.p_waic,
            "loo": r.loo,
            "se_loo": r.se_loo,
            "k_warnings": r.k_warnings,
        }
        for c in crits:
            row[f"delta_{c}"] = getattr(r, c) - best[c]
        table.append(row)
    return {"n": n, "models": [r.label for r in reports], "ranking": ranking, "table": table}
