"""Standardized observation-error families and prior densities.

The stochastic volatility model in this package writes returns as
``y_t = exp(h_t / 2) * eps_t`` with i.i.d. standardized errors ``eps_t``.
Four families are supported, each parameterized so that the variance is 1:

* ``gaussian``: standard normal.
* ``ged``: generalized error distribution (exponential power) with shape
  ``nu > 0`` and scale ``lambda^2 = 2**(-2/nu) * G(1/nu) / G(3/nu)`` where
  ``G`` is the gamma function; Laplace at ``nu = 1``, normal at ``nu = 2``.
* ``student-t``: Student t with ``nu > 4`` degrees of freedom, carrying a
  ``(nu - 2)`` scaling so the variance is exactly 1.
* ``skew-normal``: density ``2 * npdf(x) * ncdf(nu * x)`` with shape ``nu``,
  exactly standard normal at ``nu = 0``.  This is the location-0, scale-1
  form; its mean is ``delta * sqrt(2/pi)`` with ``delta = nu / sqrt(1+nu^2)``
  and is therefore non-zero whenever ``nu != 0``.

The module also houses the prior densities for the model parameters: a
normal prior on the level ``mu``, a stretched Beta prior on the persistence
``phi`` (``phi = 2*phi_star - 1`` with ``phi_star ~ Beta(alpha, beta)``), a
tagged choice of priors on the innovation variance ``sigma_eta^2``, and
per-family shape priors on ``nu``.  Every density ships with its exact
analytic derivative; the sampler never falls back to finite differences.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import special

__all__ = [
    "FAMILIES",
    "SKEW_NU_PRIOR_VARIANCE",
    "ErrorFamily",
    "GammaSigmaPrior",
    "InvGammaSigmaPrior",
    "ScaledInvChiSqPrior",
    "TruncExpPrior",
    "NormalPrior",
    "PriorConfig",
    "log_density",
    "dlog_density_dx",
    "dlog_density_dnu",
    "sample_error",
    "log_prior",
    "ged_scale",
    "ged_excess_kurtosis",
    "mu_log_prior",
    "mu_dlog_prior",
    "phi_log_prior",
    "phi_dlog_prior",
]

FAMILIES = ("gaussian", "ged", "student-t", "skew-normal")

# Shape prior for the skew normal is N(0, SKEW_NU_PRIOR_VARIANCE); 5 is read
# as the variance.  Change here if the scale convention is revised.
SKEW_NU_PRIOR_VARIANCE = 5.0

_LOG_2PI = math.log(2.0 * math.pi)
_HALF_LOG_2PI = 0.5 * _LOG_2PI


@dataclass(frozen=True)
class ErrorFamily:
    """Tagged error family plus its shape parameter where one exists.

    ``name`` is one of ``"gaussian"``, ``"ged"``, ``"student-t"``,
    ``"skew-normal"``.  ``nu`` is required for all but gaussian: shape > 0
    for the GED, degrees of freedom > 4 for the Student t (the support of
    its prior), any finite real for the skew normal.
    """

    name: str
    nu: float | None = None

    def __post_init__(self) -> None:
        if self.name not in FAMILIES:
            raise ValueError(
                f"unknown error family {self.name!r}; expected one of {FAMILIES}"
            )
        if self.name == "gaussian":
            if self.nu is not None:
                raise ValueError("gaussian family takes no shape parameter")
            return
        if self.nu is None:
            raise ValueError(f"{self.name} family requires a shape parameter nu")
        object.__setattr__(self, "nu", float(self.nu))
        validate_shape(self.name, self.nu)

    @property
    def has_shape(self) -> bool:
        return self.name != "gaussian"


def validate_shape(name: str, nu: float) -> None:
    """Raise if ``nu`` lies outside the family's shape support."""
    if not np.isfinite(nu):
        raise ValueError(f"{name} shape parameter must be finite, got nu={nu}")
    if name == "ged" and not nu > 0.0:
        raise ValueError(f"ged shape parameter must be positive, got nu={nu}")
    if name == "student-t" and not nu > 4.0:
        raise ValueError(
            f"student-t degrees of freedom must exceed 4, got nu={nu}"
        )


# ---------------------------------------------------------------------------
# density kernels
#
# The kernels take (x, nu) with nu ignored for the gaussian so that model
# code can dispatch uniformly while nu varies draw to draw.


def gaussian_logpdf(x, nu=None):
    x = np.asarray(x, dtype=float)
    return -0.5 * x * x - _HALF_LOG_2PI


def gaussian_dlogpdf_dx(x, nu=None):
    x = np.asarray(x, dtype=float)
    return -x


def ged_scale(nu: float) -> float:
    """Scale lambda making the GED variance 1: lambda^2 = 2^(-2/nu) G(1/nu)/G(3/nu)."""
    nu = float(nu)
    return math.exp(
        -math.log(2.0) / nu
        + 0.5 * (special.gammaln(1.0 / nu) - special.gammaln(3.0 / nu))
    )


def _dlog_ged_scale_dnu(nu: float) -> float:
    # d/dnu of log lambda(nu); digamma terms from the gamma-function ratio.
    inv = 1.0 / nu
    return inv * inv * (
        math.log(2.0)
        - 0.5 * special.digamma(inv)
        + 1.5 * special.digamma(3.0 * inv)
    )


def ged_logpdf(x, nu):
    x = np.asarray(x, dtype=float)
    lam = ged_scale(nu)
    const = (
        math.log(nu)
        - math.log(lam)
        - (1.0 + 1.0 / nu) * math.log(2.0)
        - special.gammaln(1.0 / nu)
    )
    return const - 0.5 * np.abs(x / lam) ** nu


def ged_dlogpdf_dx(x, nu):
    x = np.asarray(x, dtype=float)
    lam = ged_scale(nu)
    at_zero = x == 0.0
    ax = np.where(at_zero, 1.0, np.abs(x / lam))
    out = -(nu / (2.0 * lam)) * ax ** (nu - 1.0) * np.sign(x)
    if np.any(at_zero):
        if nu < 2.0:
            warnings.warn(
                "GED log-density is non-smooth at x=0 for shape < 2; "
                "returning subgradient 0",
                RuntimeWarning,
                stacklevel=2,
            )
        out = np.where(at_zero, 0.0, out)
    return out


def ged_dlogpdf_dnu(x, nu):
    x = np.asarray(x, dtype=float)
    lam = ged_scale(nu)
    dlam = _dlog_ged_scale_dnu(nu)
    inv = 1.0 / nu
    dconst = inv - dlam + inv * inv * (math.log(2.0) + special.digamma(inv))
    at_zero = x == 0.0
    ax = np.where(at_zero, 1.0, np.abs(x / lam))
    # d/dnu of -(1/2) a^nu = -(1/2) a^nu (log a - nu * dlog lambda); -> 0 at x=0
    dtail = -0.5 * ax**nu * (np.log(ax) - nu * dlam)
    return dconst + np.where(at_zero, 0.0, dtail)


def studentt_logpdf(x, nu):
    x = np.asarray(x, dtype=float)
    const = (
        special.gammaln(0.5 * (nu + 1.0))
        - special.gammaln(0.5 * nu)
        - 0.5 * math.log(math.pi * (nu - 2.0))
    )
    return const - 0.5 * (nu + 1.0) * np.log1p(x * x / (nu - 2.0))


def studentt_dlogpdf_dx(x, nu):
    x = np.asarray(x, dtype=float)
    return -(nu + 1.0) * x / (nu - 2.0 + x * x)


def studentt_dlogpdf_dnu(x, nu):
    x = np.asarray(x, dtype=float)
    x2 = x * x
    dconst = (
        0.5 * special.digamma(0.5 * (nu + 1.0))
        - 0.5 * special.digamma(0.5 * nu)
        - 0.5 / (nu - 2.0)
    )
    return (
        dconst
        - 0.5 * np.log1p(x2 / (nu - 2.0))
        + 0.5 * (nu + 1.0) * x2 / ((nu - 2.0) * (nu - 2.0 + x2))
    )


def _normal_hazard(u):
    # npdf(u) / ncdf(u), computed in log space; ~ -u for u -> -inf, -> 0 for
    # u -> +inf.
    u = np.asarray(u, dtype=float)
    return np.exp(-0.5 * u * u - _HALF_LOG_2PI - special.log_ndtr(u))


def skewnorm_logpdf(x, nu):
    x = np.asarray(x, dtype=float)
    return math.log(2.0) - 0.5 * x * x - _HALF_LOG_2PI + special.log_ndtr(nu * x)


def skewnorm_dlogpdf_dx(x, nu):
    x = np.asarray(x, dtype=float)
    return -x + nu * _normal_hazard(nu * x)


def skewnorm_dlogpdf_dnu(x, nu):
    x = np.asarray(x, dtype=float)
    return x * _normal_hazard(nu * x)


_KERNELS = {
    "gaussian": (gaussian_logpdf, gaussian_dlogpdf_dx, None),
    "ged": (ged_logpdf, ged_dlogpdf_dx, ged_dlogpdf_dnu),
    "student-t": (studentt_logpdf, studentt_dlogpdf_dx, studentt_dlogpdf_dnu),
    "skew-normal": (skewnorm_logpdf, skewnorm_dlogpdf_dx, skewnorm_dlogpdf_dnu),
}


def kernels(name: str):
    """(logpdf, dlogpdf_dx, dlogpdf_dnu) for a family tag, each f(x, nu).

    nu is ignored by the gaussian kernels; dlogpdf_dnu is None for gaussian.
    """
    return _KERNELS[name]


def _scalar_like(x, out):
    return float(out) if np.ndim(x) == 0 else out


def log_density(family: ErrorFamily, x):
    """Log density of the standardized error family at ``x``.

    Finite for all finite ``x``; vectorizes over ``x``.
    """
    fn = _KERNELS[family.name][0]
    return _scalar_like(x, fn(x, family.nu))


def dlog_density_dx(family: ErrorFamily, x):
    """Exact d/dx of :func:`log_density`.

    For the GED with shape < 2 the density has a kink at 0; the subgradient
    0 is returned there and a RuntimeWarning flags the evaluation.
    """
    fn = _KERNELS[family.name][1]
    return _scalar_like(x, fn(x, family.nu))


def dlog_density_dnu(family: ErrorFamily, x):
    """Exact derivative of :func:`log_density` in the shape parameter."""
    fn = _KERNELS[family.name][2]
    if fn is None:
        raise ValueError("gaussian family has no shape parameter to differentiate")
    return _scalar_like(x, fn(x, family.nu))


def ged_excess_kurtosis(nu: float) -> float:
    """Excess kurtosis G(1/nu) G(5/nu) / G(3/nu)^2 - 3; zero at nu = 2."""
    nu = float(nu)
    return float(
        math.exp(
            special.gammaln(1.0 / nu)
            + special.gammaln(5.0 / nu)
            - 2.0 * special.gammaln(3.0 / nu)
        )
        - 3.0
    )


def sample_error(family: ErrorFamily, rng: np.random.Generator, size=None):
    """Draw from the standardized error family.

    Gaussian/GED/Student-t draws have mean 0 and variance 1; skew-normal
    draws follow the location-0 scale-1 density, whose mean is non-zero for
    ``nu != 0``.
    """
    if family.name == "gaussian":
        return rng.standard_normal(size)
    nu = family.nu
    if family.name == "ged":
        g = rng.standard_gamma(1.0 / nu, size)
        sign = np.where(rng.random(size) < 0.5, -1.0, 1.0)
        return ged_scale(nu) * (2.0 * g) ** (1.0 / nu) * sign
    if family.name == "student-t":
        return rng.standard_t(nu, size) * math.sqrt((nu - 2.0) / nu)
    delta = nu / math.sqrt(1.0 + nu * nu)
    z0 = rng.standard_normal(size)
    z1 = rng.standard_normal(size)
    return delta * np.abs(z0) + math.sqrt(1.0 - delta * delta) * z1


# ---------------------------------------------------------------------------
# priors


@dataclass(frozen=True)
class GammaSigmaPrior:
    """sigma_eta^2 ~ Gamma(1/2, rate 1/(2 b)), the law of b * chi2_1."""

    b: float

    def __post_init__(self) -> None:
        if not self.b > 0.0:
            raise ValueError(f"gamma prior hyperparameter b must be positive, got {self.b}")

    @property
    def rate(self) -> float:
        return 1.0 / (2.0 * self.b)

    def log_density(self, v: float) -> float:
        if v <= 0.0:
            return -math.inf
        return (
            0.5 * math.log(self.rate)
            - special.gammaln(0.5)
            - 0.5 * math.log(v)
            - self.rate * v
        )

    def dlog_density(self, v: float) -> float:
        return -0.5 / v - self.rate


@dataclass(frozen=True)
class InvGammaSigmaPrior:
    """sigma_eta^2 ~ InvGamma(shape, scale)."""

    shape: float
    scale: float

    def __post_init__(self) -> None:
        if not (self.shape > 0.0 and self.scale > 0.0):
            raise ValueError(
                "inverse-gamma prior requires positive shape and scale, got "
                f"shape={self.shape}, scale={self.scale}"
            )

    def log_density(self, v: float) -> float:
        if v <= 0.0:
            return -math.inf
        return (
            self.shape * math.log(self.scale)
            - special.gammaln(self.shape)
            - (self.shape + 1.0) * math.log(v)
            - self.scale / v
        )

    def dlog_density(self, v: float) -> float:
        return -(self.shape + 1.0) / v + self.scale / (v * v)


@dataclass(frozen=True)
class ScaledInvChiSqPrior:
    """Scaled inverse chi-square with df degrees of freedom and scale s.

    Equivalent to InvGamma(df/2, df*s/2).  Used both as a variance prior and
    as the GED shape prior.
    """

    df: float
    scale: float

    def __post_init__(self) -> None:
        if not (self.df > 0.0 and self.scale > 0.0):
            raise ValueError(
                "scaled inverse chi-square prior requires positive df and "
                f"scale, got df={self.df}, scale={self.scale}"
            )

    def log_density(self, v: float) -> float:
        if v <= 0.0:
            return -math.inf
        a = 0.5 * self.df
        b = 0.5 * self.df * self.scale
        return (
            a * math.log(b)
            - special.gammaln(a)
            - (a + 1.0) * math.log(v)
            - b / v
        )

    def dlog_density(self, v: float) -> float:
        a = 0.5 * self.df
        b = 0.5 * self.df * self.scale
        return -(a + 1.0) / v + b / (v * v)


@dataclass(frozen=True)
class TruncExpPrior:
    """Exponential with the given rate, shifted to x > lower.

    Density rate * exp(-rate * (x - lower)) on (lower, inf); equals the rate
    itself at the boundary.
    """

    rate: float
    lower: float

    def __post_init__(self) -> None:
        if not self.rate > 0.0:
            raise ValueError(f"truncated exponential rate must be positive, got {self.rate}")

    def log_density(self, x: float) -> float:
        if x < self.lower:
            return -math.inf
        return math.log(self.rate) - self.rate * (x - self.lower)

    def dlog_density(self, x: float) -> float:
        return -self.rate


@dataclass(frozen=True)
class NormalPrior:
    """Normal prior parameterized by mean and variance."""

    mean: float = 0.0
    var: float = SKEW_NU_PRIOR_VARIANCE

    def __post_init__(self) -> None:
        if not self.var > 0.0:
            raise ValueError(f"normal prior variance must be positive, got {self.var}")

    def log_density(self, x: float) -> float:
        return -0.5 * math.log(2.0 * math.pi * self.var) - 0.5 * (x - self.mean) ** 2 / self.var

    def dlog_density(self, x: float) -> float:
        return -(x - self.mean) / self.var


_DEFAULT_NU_PRIORS = {
    "gaussian": None,
    "ged": ScaledInvChiSqPrior(10.0, 0.05),
    "student-t": TruncExpPrior(rate=1.0 / 3.0, lower=4.0),
    "skew-normal": NormalPrior(0.0, SKEW_NU_PRIOR_VARIANCE),
}


@dataclass(frozen=True)
class PriorConfig:
    """Hyperparameters of the parameter priors.

    Defaults are the baseline set used throughout: mu ~ N(-10, 1), stretched
    Beta(20, 1.5) on phi, Gamma variance prior with b = 0.1, and the
    per-family shape priors (scaled inverse chi-square (10, 0.05) for the
    GED, exponential rate 1/3 truncated to nu > 4 for the Student t, and
    N(0, 5) for the skew normal).  ``nu_prior`` overrides the family default
    when set.
    """

    mu_mean: float = -10.0
    mu_sd: float = 1.0
    phi_alpha: float = 20.0
    phi_beta: float = 1.5
    sigma2_prior: GammaSigmaPrior | InvGammaSigmaPrior | ScaledInvChiSqPrior = GammaSigmaPrior(0.1)
    nu_prior: ScaledInvChiSqPrior | TruncExpPrior | NormalPrior | None = None

    def __post_init__(self) -> None:
        if not self.mu_sd > 0.0:
            raise ValueError(f"mu prior sd must be positive, got {self.mu_sd}")
        # Beta shapes must exceed 1/2 for the stretched-Beta density to give
        # phi a proper prior near the endpoints.
        if not self.phi_alpha > 0.5:
            raise ValueError(f"phi prior alpha must exceed 1/2, got {self.phi_alpha}")
        if not self.phi_beta > 0.5:
            raise ValueError(f"phi prior beta must exceed 1/2, got {self.phi_beta}")

    def resolve_nu_prior(self, family_name: str):
        if self.nu_prior is not None and family_name != "gaussian":
            return self.nu_prior
        return _DEFAULT_NU_PRIORS[family_name]


def mu_log_prior(priors: PriorConfig, mu: float) -> float:
    z = (mu - priors.mu_mean) / priors.mu_sd
    return -0.5 * z * z - _HALF_LOG_2PI - math.log(priors.mu_sd)


def mu_dlog_prior(priors: PriorConfig, mu: float) -> float:
    return -(mu - priors.mu_mean) / priors.mu_sd**2


def phi_log_prior(priors: PriorConfig, phi: float) -> float:
    """Log density of phi = 2*phi_star - 1, phi_star ~ Beta(alpha, beta)."""
    if not -1.0 < phi < 1.0:
        return -math.inf
    a, b = priors.phi_alpha, priors.phi_beta
    return (
        -math.log(2.0)
        - special.betaln(a, b)
        + (a - 1.0) * math.log(0.5 * (1.0 + phi))
        + (b - 1.0) * math.log(0.5 * (1.0 - phi))
    )


def phi_dlog_prior(priors: PriorConfig, phi: float) -> float:
    return (priors.phi_alpha - 1.0) / (1.0 + phi) - (priors.phi_beta - 1.0) / (1.0 - phi)


def log_prior(priors: PriorConfig, theta, family: ErrorFamily | None = None) -> float:
    """Joint log prior at a parameter state.

    ``theta`` needs attributes ``mu``, ``phi``, ``sigma_eta`` and, for shape
    families, ``nu``.  The variance prior is a density in sigma_eta^2.
    Support violations return -inf rather than raising.
    """
    total = mu_log_prior(priors, theta.mu)
    total += phi_log_prior(priors, theta.phi)
    if theta.sigma_eta <= 0.0:
        return -math.inf
    total += priors.sigma2_prior.log_density(theta.sigma_eta**2)
    name = family.name if family is not None else "gaussian"
    prior = priors.resolve_nu_prior(name)
    if prior is not None:
        nu = getattr(theta, "nu", None)
        if nu is None:
            raise ValueError(f"{name} state requires a shape parameter nu")
        total += prior.log_density(nu)
    return total
