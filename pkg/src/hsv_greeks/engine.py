"""Path engine for the merged three-factor SDE system.

Simulates

    dS_t = r_t S_t dt + S_t sigma(V_t) dW^1_t
    dV_t = u(V_t) dt + v(V_t) dZ^2_t
    dr_t = f(r_t) dt + g(r_t) dZ^3_t

on a uniform grid together with the first-variation entries
Y^11, Y^12, Y^13, Y^22, Y^33, accumulating per path every integral the
Malliavin-weight estimators consume.

Scheme choices
--------------
* S is stepped in log space (log-Euler), which makes the discrete identity
  Y^11_t = S_t / S_0 hold to rounding and keeps S positive.
* V uses full-truncation Euler: the state may go negative, but drift and
  diffusion are evaluated at max(V, variance_floor).
* r uses plain Euler.
* All dt-integrals are left-Riemann sums on the grid; all dW-integrals use
  the same increments that drive the state.
* Integrands dividing by sigma(V), v(V) or g(r) evaluate the denominator as
  max(., sigma_floor); every clamp is counted and surfaced.

Randomness
----------
Draws come from a counter-based generator (Philox) with the counter laid
out so that the normal draw for (seed, path, step, driver) is a pure
function of those four indices: path ``p`` owns the counter range
``[p*stride, (p+1)*stride)`` of the stream keyed by (seed, stream).  Draws
are therefore independent of block sizes, worker counts, and execution
order, and bumped re-simulations with the same seed reuse identical draws
(exact common random numbers).

Monte Carlo reductions use exactly-rounded compensated summation
(:func:`stable_sum`), so estimates are independent of worker count too.
"""

from __future__ import annotations

import math
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.random import Generator, Philox
from scipy.special import ndtri

from .errors import (
    DegenerateModel,
    EmptyInput,
    InvalidConfig,
    InvalidParams,
    NumericalBlowup,
)
from .models import InitialState, ModelSpec

__all__ = [
    "SimConfig",
    "Perturbation",
    "PathAccumulators",
    "ACCUMULATOR_DUMP_FIELDS",
    "ACCUMULATOR_MAGIC",
    "standard_draws",
    "simulate_paths",
    "simulate_series",
    "PathSeries",
    "first_variation_closed_forms",
    "simulate_y12_y13",
    "write_accumulators",
    "read_accumulators",
    "stable_sum",
    "stable_mean_se",
]

# Paths are simulated in fixed-size blocks regardless of worker count; the
# RNG mapping makes results independent of this constant, it only bounds
# per-block memory.
_BLOCK_PATHS = 16384
_BLOWUP_LIMIT = 1e12
_LOG_BLOWUP_LIMIT = math.log(_BLOWUP_LIMIT)
# Philox emits 4 uint64 words per counter tick; advance() counts ticks.
_PHILOX_WORDS = 4


@dataclass(frozen=True)
class SimConfig:
    """Simulation grid, seed, safeguarding floors, and worker hint."""

    n_paths: int = 10000
    n_steps: int = 252
    maturity: float = 1.0
    seed: int = 12345
    variance_floor: float = 0.0
    sigma_floor: float = 1e-8
    worker_hint: int | None = None

    def __post_init__(self):
        if not (isinstance(self.n_paths, int) and self.n_paths >= 1):
            raise InvalidConfig("n_paths", f"must be an integer >= 1, got {self.n_paths!r}")
        if not (isinstance(self.n_steps, int) and self.n_steps >= 1):
            raise InvalidConfig("n_steps", f"must be an integer >= 1, got {self.n_steps!r}")
        if not (isinstance(self.maturity, (int, float)) and math.isfinite(self.maturity) and self.maturity > 0):
            raise InvalidConfig("maturity", f"must be > 0, got {self.maturity!r}")
        if not (isinstance(self.seed, int) and 0 <= self.seed < 2**64):
            raise InvalidConfig("seed", f"must fit in an unsigned 64-bit integer, got {self.seed!r}")
        if not (math.isfinite(self.variance_floor) and self.variance_floor >= 0):
            raise InvalidConfig("variance_floor", f"must be >= 0, got {self.variance_floor!r}")
        if not (math.isfinite(self.sigma_floor) and self.sigma_floor > 0):
            raise InvalidConfig("sigma_floor", f"must be > 0, got {self.sigma_floor!r}")
        if self.worker_hint is not None and not (isinstance(self.worker_hint, int) and self.worker_hint >= 1):
            raise InvalidConfig("worker_hint", f"must be None or an integer >= 1, got {self.worker_hint!r}")


@dataclass(frozen=True)
class Perturbation:
    """Additive drift / volatility shift used for bump-and-revalue runs.

    target:
      * ``stock_drift`` — the S drift rate becomes r_t + delta (the matching
        discount shift exp(-delta*T) is applied by the caller at pricing
        time; the accumulated D still integrates the unperturbed r path);
      * ``stock_vol``   — the S update uses sigma(V_t) + delta;
      * ``v_drift``     — the V drift becomes u(V_t) + delta;
      * ``r_drift``     — the r drift becomes f(r_t) + delta (D then
        integrates the perturbed r path).
    """

    target: str
    delta: float

    _TARGETS = ("stock_drift", "stock_vol", "v_drift", "r_drift")

    def __post_init__(self):
        if self.target not in self._TARGETS:
            raise InvalidParams(f"perturbation target must be one of {self._TARGETS}, got {self.target!r}")
        if not math.isfinite(self.delta):
            raise InvalidParams(f"perturbation delta must be finite, got {self.delta!r}")


# Field order of the binary accumulator dump (record-per-path, little-endian
# float64).  Do not reorder.
ACCUMULATOR_DUMP_FIELDS = (
    "s_T", "v_T", "r_T", "D", "I1", "I2", "I3", "A", "Q", "w1_T",
    "P2", "P3", "y12_T", "y13_T", "y22_T", "y33_T",
)
ACCUMULATOR_MAGIC = b"HSVACC1\x00"


@dataclass
class PathAccumulators:
    """Per-path terminal states and integrals, stored as parallel arrays.

    One entry per path in every array.  ``P2``/``P3`` hold NaN sentinels
    (``p23_valid`` False) when the model is degenerate and the Bismut
    integrands 1/v(V_t) or 1/g(r_t) are undefined.  ``j2``, ``j3``, ``g3``
    are the optional drift-sensitivity integrals ∫(1/v)dW^2, ∫(1/v)dW^3,
    ∫(1/g)dW^3, present only when requested.
    """

    s_T: np.ndarray
    v_T: np.ndarray
    r_T: np.ndarray
    D: np.ndarray
    I1: np.ndarray
    I2: np.ndarray
    I3: np.ndarray
    A: np.ndarray
    Q: np.ndarray
    w1_T: np.ndarray
    P2: np.ndarray
    P3: np.ndarray
    y12_T: np.ndarray
    y13_T: np.ndarray
    y22_T: np.ndarray
    y33_T: np.ndarray
    p23_valid: bool = True
    clamp_count: int = 0
    n_integrand_evals: int = 0
    j2: np.ndarray | None = None
    j3: np.ndarray | None = None
    g3: np.ndarray | None = None
    model: ModelSpec | None = None
    s0: float = math.nan
    v0: float = math.nan
    r0: float = math.nan
    maturity: float = math.nan
    n_steps: int = 0
    seed: int = 0

    def __len__(self) -> int:
        return int(self.s_T.shape[0])

    @property
    def n_paths(self) -> int:
        return len(self)


@dataclass
class PathSeries:
    """Full state and first-variation series on the grid (validation runs).

    Arrays have shape (n_paths, n_steps+1); column 0 is the initial point.
    ``accumulators`` holds the same per-path integrals the fast engine
    produces from identical increments.
    """

    s: np.ndarray
    v: np.ndarray
    r: np.ndarray
    y11: np.ndarray
    y22: np.ndarray
    y33: np.ndarray
    y12: np.ndarray
    y13: np.ndarray
    accumulators: PathAccumulators | None = None


def _stride(n_steps: int) -> int:
    """uint64 words reserved per path: 3 doubles per step, padded to a
    multiple of the Philox output width so every path starts on a counter
    tick boundary."""
    need = 3 * n_steps
    return _PHILOX_WORDS * ((need + _PHILOX_WORDS - 1) // _PHILOX_WORDS)


def standard_draws(
    seed: int,
    n_paths: int,
    n_steps: int,
    first_path: int = 0,
    stream: int = 0,
) -> np.ndarray:
    """Standard-normal draws z[path, step, driver], shape (n_paths, n_steps, 3).

    The draw at (path, step, driver) is a pure function of
    (seed, stream, first_path+path, step, driver): uniforms come from a
    Philox stream keyed by (seed, stream) at counter offset path*stride and
    are mapped through the inverse normal CDF.  Identical indices always
    yield identical draws, which is what makes common-random-number bumping
    and worker-count independence exact.
    """
    stride = _stride(n_steps)
    bg = Philox(key=np.array([seed, stream], dtype=np.uint64))
    bg.advance(first_path * stride // _PHILOX_WORDS)
    u = Generator(bg).random((n_paths, stride))
    u = u[:, : 3 * n_steps]
    # random() yields [0,1); floor away exact zeros before the inverse CDF.
    z = ndtri(np.maximum(u, 1e-300))
    return z.reshape(n_paths, n_steps, 3)


def _run_block(
    model: ModelSpec,
    init: InitialState,
    cfg: SimConfig,
    z: np.ndarray,
    perturbation: Perturbation | None,
    drift_extras: bool,
    want_series: bool,
):
    """Advance one block of paths through all steps.

    Returns (dict of accumulator arrays, clamp_count, n_evals, series or None).
    ``z`` has shape (nb, n_steps, 3).
    """
    nb, n_steps, _ = z.shape
    dt = cfg.maturity / cfg.n_steps
    sqdt = math.sqrt(dt)
    rho = model.correlations
    mu = model.mixing
    r12, r13 = rho.rho12, rho.rho13
    m1, m2, m3 = mu.mu1, mu.mu2, mu.mu3
    # Column coefficients of (a^{-1} Y)^T against (dW^1, dW^2, dW^3); t below
    # stands for y1j/(S*sigma), q for y22/v, w for y33/g.
    cA = -r12 / m1
    cB = 1.0 / m1
    cC = (r12 * m2 - r13 * m1) / (m1 * m3)
    cD = -m2 / (m1 * m3)
    cE = 1.0 / m3

    pert_target = perturbation.target if perturbation is not None else None
    pert_delta = perturbation.delta if perturbation is not None else 0.0

    want_p23 = not model.degenerate
    if drift_extras and model.degenerate:
        raise DegenerateModel(
            "drift-sensitivity integrals need non-degenerate v(V) and g(r)"
        )

    log_s0 = math.log(init.s0)
    logS = np.full(nb, log_s0)
    S = np.full(nb, init.s0)
    V = np.full(nb, init.v0)
    r = np.full(nb, init.r0)
    L22 = np.zeros(nb)
    L33 = np.zeros(nb)
    y22 = np.ones(nb)
    y33 = np.ones(nb)
    y12 = np.zeros(nb)
    y13 = np.zeros(nb)

    zeros = lambda: np.zeros(nb)  # noqa: E731
    sum_r, sum_sig, sum_invsig = zeros(), zeros(), zeros()
    sI1, sI2, sI3, sW1 = zeros(), zeros(), zeros(), zeros()
    sP2, sP3 = zeros(), zeros()
    sJ2, sJ3, sG3 = (zeros(), zeros(), zeros()) if drift_extras else (None, None, None)
    clamps = 0
    n_evals = 0

    if want_series:
        shape = (nb, n_steps + 1)
        series = PathSeries(
            s=np.empty(shape), v=np.empty(shape), r=np.empty(shape),
            y11=np.empty(shape), y22=np.empty(shape), y33=np.empty(shape),
            y12=np.empty(shape), y13=np.empty(shape), accumulators=None,
        )
        for arr, val in ((series.s, S), (series.v, V), (series.r, r),
                         (series.y11, 1.0), (series.y22, y22), (series.y33, y33),
                         (series.y12, 0.0), (series.y13, 0.0)):
            arr[:, 0] = val
    else:
        series = None

    for n in range(n_steps):
        z1 = z[:, n, 0]
        z2 = z[:, n, 1]
        z3 = z[:, n, 2]
        dW1 = sqdt * z1
        dZ2 = r12 * dW1 + (m1 * sqdt) * z2
        dZ3 = r13 * dW1 + (m2 * sqdt) * z2 + (m3 * sqdt) * z3

        Vp = np.maximum(V, cfg.variance_floor)
        sig = model.sigma(Vp)
        clamps += int(np.count_nonzero(sig < cfg.sigma_floor))
        n_evals += nb
        inv_sig = 1.0 / np.maximum(sig, cfg.sigma_floor)

        sum_r += r
        sum_sig += sig
        sum_invsig += inv_sig
        sI1 += z1 * inv_sig
        sI2 += z2 * inv_sig
        sI3 += z3 * inv_sig
        sW1 += z1

        if want_p23 or drift_extras:
            vv = model.v(Vp)
            gg = model.g(r)
            clamps += int(np.count_nonzero(vv < cfg.sigma_floor))
            clamps += int(np.count_nonzero(gg < cfg.sigma_floor))
            n_evals += 2 * nb
            inv_vv = 1.0 / np.maximum(vv, cfg.sigma_floor)
            inv_gg = 1.0 / np.maximum(gg, cfg.sigma_floor)
        if want_p23:
            t1 = y12 * inv_sig / S
            t2 = y13 * inv_sig / S
            q = y22 * inv_vv
            w = y33 * inv_gg
            sP2 += t1 * z1 + (cA * t1 + cB * q) * z2 + (cC * t1 + cD * q) * z3
            sP3 += t2 * z1 + cA * t2 * z2 + (cC * t2 + cE * w) * z3
        if drift_extras:
            sJ2 += z2 * inv_vv
            sJ3 += z3 * inv_vv
            sG3 += z3 * inv_gg

        # First-variation updates, all from left-point values.
        sp = model.sigma_prime(Vp)
        vp = model.v_prime(Vp)
        up = model.u_prime(Vp)
        fp = model.f_prime(r)
        gp = model.g_prime(r)
        y12_new = y12 + r * y12 * dt + (sig * y12 + S * sp * y22) * dW1
        y13_new = y13 + (r * y13 + S * y33) * dt + sig * y13 * dW1
        L22 += (up - 0.5 * vp * vp) * dt + vp * dZ2
        L33 += (fp - 0.5 * gp * gp) * dt + gp * dZ3

        # State updates (log-Euler / full truncation / Euler).
        sig_s = sig + pert_delta if pert_target == "stock_vol" else sig
        rate_s = r + pert_delta if pert_target == "stock_drift" else r
        u_eval = model.u(Vp)
        if pert_target == "v_drift":
            u_eval = u_eval + pert_delta
        f_eval = model.f(r)
        if pert_target == "r_drift":
            f_eval = f_eval + pert_delta
        g_state = model.g(r)

        logS += (rate_s - 0.5 * sig_s * sig_s) * dt + sig_s * dW1
        V = V + u_eval * dt + model.v(Vp) * dZ2
        r = r + f_eval * dt + g_state * dZ3
        S = np.exp(logS)
        y22 = np.exp(L22)
        y33 = np.exp(L33)
        y12, y13 = y12_new, y13_new

        for name, arr, limit in (("S", logS, _LOG_BLOWUP_LIMIT), ("V", V, _BLOWUP_LIMIT), ("r", r, _BLOWUP_LIMIT)):
            peak = np.abs(arr).max()
            if not (peak <= limit):  # also catches NaN
                bad = ~(np.abs(arr) <= limit)
                idx = int(np.argmax(bad))
                raise NumericalBlowup(idx, n, f"state {name}")

        if want_series:
            j = n + 1
            series.s[:, j] = S
            series.v[:, j] = V
            series.r[:, j] = r
            series.y11[:, j] = S / init.s0
            series.y22[:, j] = y22
            series.y33[:, j] = y33
            series.y12[:, j] = y12
            series.y13[:, j] = y13

    nan = np.full(nb, math.nan)
    out = {
        "s_T": S, "v_T": V, "r_T": r,
        "D": dt * sum_r,
        "I1": sqdt * sI1, "I2": sqdt * sI2, "I3": sqdt * sI3,
        "A": dt * sum_sig, "Q": dt * sum_invsig,
        "w1_T": sqdt * sW1,
        "P2": sqdt * sP2 if want_p23 else nan,
        "P3": sqdt * sP3 if want_p23 else nan.copy(),
        "y12_T": y12, "y13_T": y13, "y22_T": y22, "y33_T": y33,
    }
    if drift_extras:
        out["j2"] = sqdt * sJ2
        out["j3"] = sqdt * sJ3
        out["g3"] = sqdt * sG3
    return out, clamps, n_evals, series


def _finite_check(acc: PathAccumulators) -> None:
    skip = () if acc.p23_valid else ("P2", "P3")
    for name in ACCUMULATOR_DUMP_FIELDS:
        if name in skip:
            continue
        arr = getattr(acc, name)
        if not np.isfinite(arr).all():
            idx = int(np.argmin(np.isfinite(arr)))
            raise NumericalBlowup(idx, acc.n_steps, f"non-finite accumulator {name}")


def simulate_paths(
    model: ModelSpec,
    init: InitialState,
    cfg: SimConfig,
    drift_extras: bool = False,
    perturbation: Perturbation | None = None,
    stream: int = 0,
) -> PathAccumulators:
    """Simulate ``cfg.n_paths`` paths and return their accumulator arrays.

    Parameters
    ----------
    model, init, cfg
        Model instance, initial state, and simulation grid/seed.
    drift_extras : bool
        Also accumulate the drift-sensitivity integrals ∫(1/v)dW^2,
        ∫(1/v)dW^3, ∫(1/g)dW^3 (refused for degenerate models).
    perturbation : Perturbation, optional
        Additive drift / volatility shift for bump-and-revalue runs.
    stream : int
        RNG sub-stream selector; distinct values give independent draws for
        the same seed (used by FD without common random numbers).

    Notes
    -----
    Results are bit-identical for a given (model, init, cfg, drift_extras,
    perturbation, stream) regardless of ``worker_hint`` and block layout.

    Raises
    ------
    NumericalBlowup
        If any state exceeds 1e12 in magnitude or an accumulator turns
        non-finite (reports path and step index).
    DegenerateModel
        If ``drift_extras`` is requested on a degenerate model.
    """
    n, n_steps = cfg.n_paths, cfg.n_steps
    blocks = [(start, min(start + _BLOCK_PATHS, n)) for start in range(0, n, _BLOCK_PATHS)]

    alloc = lambda: np.empty(n)  # noqa: E731
    arrays = {name: alloc() for name in ACCUMULATOR_DUMP_FIELDS}
    if drift_extras:
        arrays.update(j2=alloc(), j3=alloc(), g3=alloc())
    totals = {"clamps": 0, "evals": 0}

    def work(span):
        start, stop = span
        z = standard_draws(cfg.seed, stop - start, n_steps, first_path=start, stream=stream)
        try:
            out, clamps, evals, _ = _run_block(
                model, init, cfg, z, perturbation, drift_extras, want_series=False
            )
        except NumericalBlowup as exc:
            raise NumericalBlowup(exc.path_index + start, exc.step_index, exc.detail) from None
        return start, stop, out, clamps, evals

    workers = cfg.worker_hint or 1
    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(work, blocks))
    else:
        results = [work(b) for b in blocks]

    for start, stop, out, clamps, evals in results:
        for name, arr in out.items():
            arrays[name][start:stop] = arr
        totals["clamps"] += clamps
        totals["evals"] += evals

    acc = PathAccumulators(
        **{name: arrays[name] for name in ACCUMULATOR_DUMP_FIELDS},
        p23_valid=not model.degenerate,
        clamp_count=totals["clamps"],
        n_integrand_evals=totals["evals"],
        j2=arrays.get("j2"),
        j3=arrays.get("j3"),
        g3=arrays.get("g3"),
        model=model,
        s0=init.s0,
        v0=init.v0,
        r0=init.r0,
        maturity=cfg.maturity,
        n_steps=n_steps,
        seed=cfg.seed,
    )
    _finite_check(acc)
    return acc


def simulate_series(
    model: ModelSpec,
    init: InitialState,
    cfg: SimConfig,
    increments: np.ndarray | None = None,
) -> PathSeries:
    """Simulate retaining the full state / first-variation series.

    ``increments`` are physical Brownian increments dW of shape
    (n_paths, n_steps, 3); when omitted they are drawn from ``cfg.seed``
    exactly as :func:`simulate_paths` would.  Intended for validation runs
    (memory grows with n_paths * n_steps).
    """
    if increments is None:
        z = standard_draws(cfg.seed, cfg.n_paths, cfg.n_steps)
    else:
        increments = np.asarray(increments, dtype=float)
        if increments.ndim != 3 or increments.shape[2] != 3:
            raise InvalidParams(
                f"increments must have shape (n_paths, n_steps, 3), got {increments.shape}"
            )
        dt = cfg.maturity / cfg.n_steps
        z = increments / math.sqrt(dt)
    if z.shape[1] != cfg.n_steps:
        raise InvalidConfig("n_steps", "increments grid disagrees with cfg.n_steps")
    out, clamps, evals, series = _run_block(
        model, init, cfg, z, None, False, want_series=True
    )
    acc = PathAccumulators(
        **out,
        p23_valid=not model.degenerate,
        clamp_count=clamps,
        n_integrand_evals=evals,
        model=model,
        s0=init.s0,
        v0=init.v0,
        r0=init.r0,
        maturity=cfg.maturity,
        n_steps=cfg.n_steps,
        seed=cfg.seed,
    )
    _finite_check(acc)
    series.accumulators = acc
    return series


def first_variation_closed_forms(
    increments: np.ndarray,
    model: ModelSpec,
    init: InitialState,
    cfg: SimConfig,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Closed-form first-variation diagonal from given increments.

    Returns ``(y11_series, y22_T, y33_T)`` where ``y11_series`` has shape
    (n_paths, n_steps+1) and equals S_t/S_0 on the grid (log-space stepping
    makes the exponential form and the price ratio the same recursion), and
    y22_T, y33_T are the terminal exponentials of the left-Riemann drift
    sums plus Ito sums in the rebuilt correlated increments dZ^2, dZ^3.

    For a degenerate component (v or g identically zero) the corresponding
    exponential collapses to its drift-only form and is still returned.
    """
    series = simulate_series(model, init, cfg, increments=increments)
    return series.y11, series.y22[:, -1], series.y33[:, -1]


def simulate_y12_y13(
    increments: np.ndarray,
    model: ModelSpec,
    s_series: np.ndarray,
    v_series: np.ndarray,
    r_series: np.ndarray,
    y22_series: np.ndarray,
    y33_series: np.ndarray,
    cfg: SimConfig,
) -> tuple[np.ndarray, np.ndarray]:
    """Euler recursion for the off-diagonal variation entries.

        dY^12 = r Y^12 dt + [sigma(V) Y^12 + S sigma'(V) Y^22] dW^1
        dY^13 = [r Y^13 + S Y^33] dt + sigma(V) Y^13 dW^1

    both from zero initial conditions, driven by the supplied state and
    diagonal-variation series on the same grid.  Returns terminal values
    (y12_T, y13_T).
    """
    increments = np.asarray(increments, dtype=float)
    n_paths, n_steps = increments.shape[0], increments.shape[1]
    if s_series.shape != (n_paths, n_steps + 1):
        raise InvalidParams(
            f"state series shape {s_series.shape} does not match increments grid "
            f"({n_paths} paths, {n_steps} steps)"
        )
    dt = cfg.maturity / n_steps
    y12 = np.zeros(n_paths)
    y13 = np.zeros(n_paths)
    for n in range(n_steps):
        S = s_series[:, n]
        Vp = np.maximum(v_series[:, n], cfg.variance_floor)
        r = r_series[:, n]
        sig = model.sigma(Vp)
        sp = model.sigma_prime(Vp)
        dW1 = increments[:, n, 0]
        y12, y13 = (
            y12 + r * y12 * dt + (sig * y12 + S * sp * y22_series[:, n]) * dW1,
            y13 + (r * y13 + S * y33_series[:, n]) * dt + sig * y13 * dW1,
        )
    return y12, y13


def write_accumulators(path, acc: PathAccumulators) -> None:
    """Dump accumulators to ``path`` in the binary record-per-path format.

    Layout: 16-byte header (magic ``HSVACC1\\0`` + uint64 LE record count),
    then one record per path of 16 little-endian float64 fields in
    :data:`ACCUMULATOR_DUMP_FIELDS` order.  NaN sentinels (degenerate P2/P3)
    round-trip bit-exactly.
    """
    n = len(acc)
    table = np.empty((n, len(ACCUMULATOR_DUMP_FIELDS)), dtype="<f8")
    for col, name in enumerate(ACCUMULATOR_DUMP_FIELDS):
        table[:, col] = getattr(acc, name)
    with open(path, "wb") as fh:
        fh.write(ACCUMULATOR_MAGIC)
        fh.write(struct.pack("<Q", n))
        fh.write(table.tobytes())


def read_accumulators(path, **metadata) -> PathAccumulators:
    """Load a binary accumulator dump written by :func:`write_accumulators`.

    Estimator metadata that is not part of the record format (s0, maturity,
    seed, ...) may be reattached via keyword arguments.  ``p23_valid`` is
    inferred from NaN sentinels in the P2/P3 columns.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    head = len(ACCUMULATOR_MAGIC)
    if blob[:head] != ACCUMULATOR_MAGIC:
        raise InvalidParams(f"{path}: not an accumulator dump (bad magic)")
    (n,) = struct.unpack("<Q", blob[head:head + 8])
    body = blob[head + 8:]
    expect = n * len(ACCUMULATOR_DUMP_FIELDS) * 8
    if len(body) != expect:
        raise InvalidParams(
            f"{path}: truncated or oversized dump ({len(body)} payload bytes, expected {expect})"
        )
    table = np.frombuffer(body, dtype="<f8").reshape(n, len(ACCUMULATOR_DUMP_FIELDS))
    fields = {
        name: np.ascontiguousarray(table[:, col])
        for col, name in enumerate(ACCUMULATOR_DUMP_FIELDS)
    }
    valid = not (np.isnan(fields["P2"]).any() or np.isnan(fields["P3"]).any())
    return PathAccumulators(**fields, p23_valid=valid, **metadata)


def stable_sum(x: np.ndarray | Sequence[float]) -> float:
    """Exactly rounded sum (compensated); independent of accumulation order."""
    return math.fsum(np.asarray(x, dtype=float))


def stable_mean_se(x: np.ndarray) -> tuple[float, float]:
    """Mean and standard error (sample std / sqrt(n)) via compensated sums.

    Returns (mean, 0.0) for n < 2.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    if n == 0:
        raise EmptyInput("cannot average an empty sample")
    mean = stable_sum(x) / n
    if n < 2:
        return mean, 0.0
    var = stable_sum((x - mean) ** 2) / (n - 1)
    return mean, math.sqrt(var / n)
