"""Malliavin-weighted Greek estimators.

Every sensitivity here has the form

    Greek = E[ e^{-D} * Phi(S_T) * weight ]

with a payoff-independent random weight assembled from the path
accumulators.  The central combination is

    C = I1 - (rho12/mu1) * I2 + ((rho12*mu2 - rho13*mu1)/(mu1*mu3)) * I3

with Ii = int_0^T (1/sigma(V_t)) dW^i_t, and with the maturity-only
weighting alpha(t) = 1/T throughout (European payoffs priced at T).  The
implemented weights:

    Delta:        e^{-D} * C / (s0 * T)
    Rho:          e^{-D} * (C - T^2) / T                (stock-drift +
                  discount shift; identical to the stock_shift drift kind)
    Vega:         (e^{-D}/T) * [(W^1_T - A) * C - Q],  A = int sigma dt,
                  Q = int (1/sigma) dt  (diffusion row scaled by epsilon)
    Vega^{V_0}:   e^{-D} * P2 / T     (Bismut vector, second component)
    Rho^{r_0}:    e^{-D} * P3 / T     (third component)
    kappa:        (e^{-D}/T) * kappa * [(1/mu1) J2 - (mu2/(mu1*mu3)) J3],
                  Ji = int (1/v(V_t)) dW^i_t; no discount term (r is
                  unaffected by the V drift)
    reversion:    (e^{-D}/T) * (a/mu3) * G3  minus the deterministic
                  discount correction e^{-D} * (T - (1-e^{-aT})/a),
                  G3 = int (1/g(r_t)) dW^3_t

Estimators are pure folds over the accumulator arrays using the engine's
exactly-rounded reduction, so results are independent of worker count.
For testing convenience every estimator also accepts a precomputed
per-path payoff array in place of a :class:`~hsv_greeks.models.Payoff`.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .engine import PathAccumulators, stable_mean_se
from .errors import (
    DegenerateModel,
    DegenerateWeightWarning,
    EmptyInput,
    InvalidParams,
    UnsupportedModel,
)
from .models import Payoff, evaluate_payoff

__all__ = [
    "GreekEstimate",
    "WeightBundle",
    "weight_bundle",
    "price",
    "delta",
    "bismut_vector",
    "rho",
    "vega",
    "drift_sensitivity",
    "GAMMA_KINDS",
]

ESTIMATOR_LABELS = ("malliavin", "fd_forward", "fd_backward", "fd_central", "analytic")
GAMMA_KINDS = ("stock_shift", "kappa", "reversion_speed")

# Fraction of clamped integrand evaluations above which estimates are flagged.
_CLAMP_FLAG_RATIO = 0.01


@dataclass(frozen=True)
class GreekEstimate:
    """One Monte Carlo sensitivity estimate.

    ``std_error`` is the sample standard deviation over paths divided by
    sqrt(n_paths); ``clamp_count`` counts safeguarding clamps that fired in
    the simulation that produced the inputs.
    """

    value: float
    std_error: float
    n_paths: int
    estimator: str
    clamp_count: int = 0

    def __post_init__(self):
        if self.estimator not in ESTIMATOR_LABELS:
            raise InvalidParams(
                f"estimator must be one of {ESTIMATOR_LABELS}, got {self.estimator!r}"
            )
        if not math.isfinite(self.value):
            raise InvalidParams(f"estimate value must be finite, got {self.value!r}")
        if not (self.std_error >= 0.0):
            raise InvalidParams(f"std_error must be >= 0, got {self.std_error!r}")
        if self.n_paths < 1:
            raise InvalidParams(f"n_paths must be >= 1, got {self.n_paths!r}")
        if self.std_error > 0.0 and self.n_paths < 2:
            raise InvalidParams(
                "a nonzero std_error needs at least two paths, got "
                f"n_paths={self.n_paths!r}")


@dataclass
class WeightBundle:
    """Per-path Malliavin weights plus the shared pieces they are built from.

    ``vega_v0`` / ``rho_r0`` are None when the model is degenerate (the
    Bismut integrands 1/v, 1/g are undefined there).
    """

    delta: np.ndarray
    rho: np.ndarray
    vega: np.ndarray
    vega_v0: np.ndarray | None
    rho_r0: np.ndarray | None
    discount: np.ndarray
    C: np.ndarray


def _combination(paths: PathAccumulators) -> np.ndarray:
    """The weight combination C built from I1..I3 and the mixing loadings."""
    if paths.model is None:
        raise InvalidParams(
            "paths carry no model metadata (replayed dump?); reattach a model "
            "via read_accumulators(..., model=...)"
        )
    rho_c = paths.model.correlations
    mu = paths.model.mixing
    c2 = -rho_c.rho12 / mu.mu1
    c3 = (rho_c.rho12 * mu.mu2 - rho_c.rho13 * mu.mu1) / (mu.mu1 * mu.mu3)
    return paths.I1 + c2 * paths.I2 + c3 * paths.I3


def weight_bundle(paths: PathAccumulators, s0: float, maturity: float) -> WeightBundle:
    """Assemble all per-path weights for the given initial spot and maturity.

    The Delta and Rho entries satisfy the pathwise identity
    ``rho = s0*delta - T*discount`` up to rounding, since both are affine in
    the same combination C.
    """
    if len(paths) == 0:
        raise EmptyInput("no paths")
    if not (s0 > 0.0):
        raise InvalidParams(f"s0 must be > 0, got {s0!r}")
    if not (maturity > 0.0):
        raise InvalidParams(f"maturity must be > 0, got {maturity!r}")
    T = maturity
    C = _combination(paths)
    disc = np.exp(-paths.D)
    delta_w = disc * C / (s0 * T)
    rho_w = disc * (C - T * T) / T
    vega_w = (disc / T) * ((paths.w1_T - paths.A) * C - paths.Q)
    if paths.p23_valid:
        vega_v0_w = disc * paths.P2 / T
        rho_r0_w = disc * paths.P3 / T
    else:
        vega_v0_w = None
        rho_r0_w = None
    return WeightBundle(
        delta=delta_w, rho=rho_w, vega=vega_w,
        vega_v0=vega_v0_w, rho_r0=rho_r0_w,
        discount=disc, C=C,
    )


def _payoff_values(payoff, s_T: np.ndarray) -> np.ndarray:
    if isinstance(payoff, Payoff):
        return evaluate_payoff(payoff, s_T)
    arr = np.asarray(payoff, dtype=float)
    if arr.shape != s_T.shape:
        raise InvalidParams(
            f"payoff array shape {arr.shape} does not match paths {s_T.shape}"
        )
    return arr


def _require_paths(paths: PathAccumulators) -> None:
    if len(paths) == 0:
        raise EmptyInput("estimator received zero paths")


def _flag_clamps(paths: PathAccumulators) -> None:
    if paths.n_integrand_evals > 0 and (
        paths.clamp_count > _CLAMP_FLAG_RATIO * paths.n_integrand_evals
    ):
        warnings.warn(
            f"{paths.clamp_count} of {paths.n_integrand_evals} integrand "
            "evaluations were clamped; Malliavin weights are unreliable",
            DegenerateWeightWarning,
            stacklevel=3,
        )


def _estimate(samples: np.ndarray, paths: PathAccumulators) -> GreekEstimate:
    if not np.isfinite(samples).all():
        bad = int(np.argmin(np.isfinite(samples)))
        raise InvalidParams(f"non-finite estimator sample at path {bad}")
    mean, se = stable_mean_se(samples)
    return GreekEstimate(
        value=mean,
        std_error=se,
        n_paths=len(paths),
        estimator="malliavin",
        clamp_count=paths.clamp_count,
    )


def price(paths: PathAccumulators, payoff) -> GreekEstimate:
    """Discounted payoff mean E[e^{-D} Phi(S_T)] (weight identically 1)."""
    _require_paths(paths)
    phi = _payoff_values(payoff, paths.s_T)
    return _estimate(np.exp(-paths.D) * phi, paths)


def delta(paths: PathAccumulators, payoff, s0: float) -> GreekEstimate:
    """Sensitivity to the initial spot: E[Phi * e^{-D} C/(s0 T)]."""
    _require_paths(paths)
    _flag_clamps(paths)
    T = paths.maturity
    if not (T > 0.0):
        raise InvalidParams("paths carry no maturity metadata")
    if not (s0 > 0.0):
        raise InvalidParams(f"s0 must be > 0, got {s0!r}")
    phi = _payoff_values(payoff, paths.s_T)
    w = np.exp(-paths.D) * _combination(paths) / (s0 * T)
    return _estimate(phi * w, paths)


def bismut_vector(paths: PathAccumulators, payoff) -> tuple[GreekEstimate, GreekEstimate, GreekEstimate]:
    """All three components of the Bismut weight vector pi = (C/s0, P2, P3)/T.

    Returns (delta, vega_v0, rho_r0) estimates; the first is computed by
    :func:`delta` on the same paths (bitwise identical).  Initial spot and
    maturity come from the accumulator metadata.

    Raises
    ------
    DegenerateModel
        If P2/P3 are sentinel-invalid (degenerate model: the weights would
        divide by v(V_t) or g(r_t) which are identically zero).
    """
    _require_paths(paths)
    if not paths.p23_valid:
        raise DegenerateModel(
            "initial-volatility/initial-rate weights need non-degenerate "
            "v(V) and g(r); P2/P3 are sentinel-invalid on these paths"
        )
    if not (paths.s0 > 0.0) or not (paths.maturity > 0.0):
        raise InvalidParams("paths carry no s0/maturity metadata")
    _flag_clamps(paths)
    T = paths.maturity
    phi = _payoff_values(payoff, paths.s_T)
    disc = np.exp(-paths.D)
    d = delta(paths, payoff, paths.s0)
    v0_est = _estimate(phi * disc * paths.P2 / T, paths)
    r0_est = _estimate(phi * disc * paths.P3 / T, paths)
    return d, v0_est, r0_est


def rho(paths: PathAccumulators, payoff, maturity: float) -> GreekEstimate:
    """Sensitivity to a parallel shift added to the stock drift and the
    discount rate simultaneously: E[Phi * e^{-D} (C - T^2)/T]."""
    _require_paths(paths)
    _flag_clamps(paths)
    T = maturity
    if not (T > 0.0):
        raise InvalidParams(f"maturity must be > 0, got {maturity!r}")
    phi = _payoff_values(payoff, paths.s_T)
    w = np.exp(-paths.D) * (_combination(paths) - T * T) / T
    return _estimate(phi * w, paths)


def vega(paths: PathAccumulators, payoff, maturity: float) -> GreekEstimate:
    """Sensitivity to epsilon in the diffusion perturbation a + eps*diag(S,0,0):
    E[Phi * (e^{-D}/T) ((W^1_T - A) C - Q)]."""
    _require_paths(paths)
    _flag_clamps(paths)
    T = maturity
    if not (T > 0.0):
        raise InvalidParams(f"maturity must be > 0, got {maturity!r}")
    phi = _payoff_values(payoff, paths.s_T)
    w = (np.exp(-paths.D) / T) * ((paths.w1_T - paths.A) * _combination(paths) - paths.Q)
    return _estimate(phi * w, paths)


def drift_sensitivity(paths: PathAccumulators, payoff, gamma_kind: str) -> GreekEstimate:
    """Drift-perturbation sensitivities for the three supported gamma vectors.

    * ``stock_shift``  — gamma = (S, 0, 0): identical to :func:`rho`.
    * ``kappa``        — gamma = (0, kappa, 0): Ito weight built from the
      1/v(V_t) integrals; the discount derivative is zero because the short
      rate does not feel the V drift.
    * ``reversion_speed`` — gamma = (0, 0, a): Ito weight from the 1/g(r_t)
      integral plus the deterministic discount correction
      -(T - (1 - e^{-aT})/a), the time integral of the pathwise derivative
      1 - e^{-at} of the Vasicek rate with respect to the perturbation.

    ``kappa``/``reversion_speed`` require Heston–Vasicek paths simulated
    with ``drift_extras=True``.
    """
    if gamma_kind not in GAMMA_KINDS:
        raise InvalidParams(f"gamma_kind must be one of {GAMMA_KINDS}, got {gamma_kind!r}")
    _require_paths(paths)
    if gamma_kind == "stock_shift":
        return rho(paths, payoff, paths.maturity)

    model = paths.model
    if model is None or model.hv_params is None:
        raise UnsupportedModel(
            f"gamma_kind {gamma_kind!r} is defined for the Heston–Vasicek "
            "instance only"
        )
    if paths.j2 is None or paths.g3 is None:
        raise InvalidParams(
            "paths lack the drift-sensitivity integrals; simulate with "
            "drift_extras=True"
        )
    _flag_clamps(paths)
    T = paths.maturity
    mu = model.mixing
    phi = _payoff_values(payoff, paths.s_T)
    disc = np.exp(-paths.D)
    if gamma_kind == "kappa":
        kappa = model.hv_params.kappa
        ito = kappa * (paths.j2 / mu.mu1 - (mu.mu2 / (mu.mu1 * mu.mu3)) * paths.j3)
        samples = phi * disc * ito / T
    else:
        a = model.hv_params.a
        correction = T - (1.0 - math.exp(-a * T)) / a
        samples = phi * disc * ((a / mu.mu3) * paths.g3 / T - correction)
    return _estimate(samples, paths)
