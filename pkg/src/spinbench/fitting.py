"""Least-squares extraction of relaxation parameters.

All fits share one bounded Levenberg-Marquardt driver (:func:`levenberg_marquardt`)
with Marquardt diagonal scaling and bounds enforced by projecting each
trial point onto the box. One-sigma uncertainties come from the
Gauss-Newton covariance ``s^2 (J^T J)^-1`` with ``s^2`` the reduced
chi-square, so they are meaningful even when per-point sigmas are absent.

Decay traces are fitted in amplitude space; temperature series are
fitted as rates (1/T1 in s^-1, 1/T2 in ms^-1), the form in which both
temperature laws are written.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from .constants import DEFAULT_CONSTANTS, PhysicalConstants
from .dynamics import SlrModel, _coth_stable, flipflop_terms

__all__ = [
    "EchoDecayTrace",
    "FitResult",
    "FitConvergenceWarning",
    "LMOutcome",
    "levenberg_marquardt",
    "recovery_model",
    "recovery_jacobian",
    "exponential_model",
    "exponential_jacobian",
    "mims_model",
    "mims_jacobian",
    "fit_exponential_recovery",
    "fit_exponential_decay",
    "fit_mims",
    "fit_slr_model",
    "fit_flipflop_model",
    "MAX_ITERATIONS",
    "GRADIENT_TOL",
]

MAX_ITERATIONS = 200
GRADIENT_TOL = 1e-10
MIN_TRACE_POINTS = 5
MIN_SERIES_POINTS = 3


class FitConvergenceWarning(RuntimeWarning):
    pass


@dataclass(frozen=True, eq=False)
class EchoDecayTrace:
    """Samples (delay in us, amplitude) with optional per-point sigma."""

    delay: np.ndarray
    amplitude: np.ndarray
    sigma: np.ndarray | None = None

    def __post_init__(self):
        d = np.asarray(self.delay, dtype=float).ravel()
        a = np.asarray(self.amplitude, dtype=float).ravel()
        if d.shape != a.shape:
            raise ValueError("delay and amplitude lengths differ")
        if not (np.all(np.isfinite(d)) and np.all(np.isfinite(a))):
            raise ValueError("trace contains non-finite values")
        if np.any(np.diff(d) <= 0):
            raise ValueError("delays must be strictly increasing")
        object.__setattr__(self, "delay", d)
        object.__setattr__(self, "amplitude", a)
        if self.sigma is not None:
            s = np.asarray(self.sigma, dtype=float).ravel()
            if s.shape != d.shape or np.any(~(s > 0)):
                raise ValueError("sigma must be positive with one entry per point")
            object.__setattr__(self, "sigma", s)

    def __len__(self):
        return len(self.delay)

    def scaled(self, factor: float) -> "EchoDecayTrace":
        sig = None if self.sigma is None else self.sigma * abs(factor)
        return EchoDecayTrace(self.delay, self.amplitude * factor, sig)


@dataclass(frozen=True, eq=False)
class FitResult:
    """Fitted parameters with one-sigma uncertainties.

    ``converged`` False marks every value as non-authoritative.
    """

    model: str
    names: tuple[str, ...]
    values: np.ndarray
    sigmas: np.ndarray
    units: tuple[str, ...]
    residual_norm: float
    converged: bool
    iterations: int
    dof: int
    covariance: np.ndarray
    at_bound: tuple[str, ...] = ()
    fixed: tuple[str, ...] = ()
    message: str = ""
    metadata: dict = field(default_factory=dict)

    @property
    def authoritative(self) -> bool:
        return self.converged

    def __getitem__(self, name: str) -> float:
        return float(self.values[self.names.index(name)])

    def sigma(self, name: str) -> float:
        return float(self.sigmas[self.names.index(name)])

    def interval(self, name: str, level: float = 0.95) -> tuple[float, float]:
        """Two-sided confidence interval from the Student-t quantile."""
        k = self.names.index(name)
        q = stats.t.ppf(0.5 + level / 2, max(self.dof, 1))
        return (float(self.values[k] - q * self.sigmas[k]), float(self.values[k] + q * self.sigmas[k]))

    def as_dict(self) -> dict:
        return {
            "model": self.model,
            "authoritative": self.converged,
            "converged": self.converged,
            "iterations": self.iterations,
            "residual_norm": self.residual_norm,
            "dof": self.dof,
            "message": self.message,
            "parameters": [
                {
                    "name": n,
                    "value": float(v),
                    "sigma": float(s),
                    "unit": u,
                    "at_bound": n in self.at_bound,
                    "fixed": n in self.fixed,
                }
                for n, v, s, u in zip(self.names, self.values, self.sigmas, self.units)
            ],
            "metadata": self.metadata,
        }


# -- optimizer -----------------------------------------------------------------

@dataclass(frozen=True)
class LMOutcome:
    x: np.ndarray
    residual: np.ndarray
    jacobian: np.ndarray
    iterations: int
    converged: bool
    message: str


def _projected_gradient(g, x, lower, upper):
    g = g.copy()
    g[(x <= lower) & (g > 0)] = 0.0
    g[(x >= upper) & (g < 0)] = 0.0
    return g


def levenberg_marquardt(
    residual: Callable[[np.ndarray], np.ndarray],
    jacobian: Callable[[np.ndarray], np.ndarray],
    x0,
    lower=None,
    upper=None,
    max_iter: int = MAX_ITERATIONS,
    gtol: float = GRADIENT_TOL,
    xtol: float = 1e-15,
    ftol: float = 0.0,
) -> LMOutcome:
    """Minimize ``0.5 |r(x)|^2`` inside a box.

    Convergence is declared when every projected gradient component is
    below ``gtol`` in the scale-free sense ``|g_j| <= gtol |J_j| |r|``, when
    the accepted step falls below ``xtol`` relative to ``x``, when the
    relative cost decrease falls below ``ftol`` (off by default), or when
    the residual vanishes.

    Steps are solved in column-scaled variables, so parameters whose
    magnitudes differ by many decades are handled alike. Parameters sitting
    on a bound with the gradient pushing outward are frozen for that step.
    """
    x = np.asarray(x0, dtype=float).copy()
    n = len(x)
    tiny = np.finfo(float).tiny
    lower = np.full(n, -np.inf) if lower is None else np.asarray(lower, dtype=float)
    upper = np.full(n, np.inf) if upper is None else np.asarray(upper, dtype=float)
    x = np.clip(x, lower, upper)
    r = residual(x)
    J = jacobian(x)
    cost = 0.5 * r @ r
    d = np.maximum(np.sqrt(np.sum(J * J, axis=0)), tiny)
    lam = 1e-3
    message = "maximum iterations reached"
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        rn = math.sqrt(2 * cost)
        if rn == 0.0:
            converged, message = True, "zero residual"
            break
        grad = J.T @ r
        g = _projected_gradient(grad, x, lower, upper)
        col = np.maximum(np.sqrt(np.sum(J * J, axis=0)), tiny)
        if np.all(np.abs(g) <= gtol * col * rn):
            converged, message = True, "gradient tolerance"
            break
        d = np.maximum(d, col)
        free = ~(((x <= lower) & (grad > 0)) | ((x >= upper) & (grad < 0)))
        Js = J[:, free] / d[free]
        k = int(free.sum())
        while True:
            aug = np.vstack([Js, math.sqrt(lam) * np.eye(k)])
            rhs = np.concatenate([-r, np.zeros(k)])
            z = np.linalg.lstsq(aug, rhs, rcond=None)[0]
            step = np.zeros(n)
            step[free] = z / d[free]
            x_new = np.clip(x + step, lower, upper)
            dx = np.linalg.norm((x_new - x) * d)
            r_new = residual(x_new)
            cost_new = 0.5 * r_new @ r_new
            if np.isfinite(cost_new) and cost_new < cost:
                break
            if dx <= xtol * (np.linalg.norm(x * d) + xtol) or lam > 1e20:
                x, r, J = _polish(residual, jacobian, x, r, J, lower, upper)
                return LMOutcome(x, r, J, it, True, "no further decrease at machine precision")
            lam *= 4.0
        decrease = cost - cost_new
        x, r, cost = x_new, r_new, cost_new
        J = jacobian(x)
        lam = max(lam / 3.0, 1e-12)
        if dx <= xtol * (np.linalg.norm(x * d) + xtol):
            converged, message = True, "step tolerance"
            break
        if decrease <= ftol * cost:
            converged, message = True, "cost tolerance"
            break
    if converged:
        x, r, J = _polish(residual, jacobian, x, r, J, lower, upper)
    return LMOutcome(x, r, J, it, converged, message)


def _polish(residual, jacobian, x, r, J, lower, upper, steps: int = 6):
    """Undamped Gauss-Newton steps on the free set after convergence.

    The stopping tests leave the iterate within a tolerance band whose
    position depends on the path taken; a few full steps pin it to the
    optimum at machine precision so that, for instance, amplitude-scaled
    copies of a trace give the same time constants.
    """
    def cosine(x, J, r):
        # scale-free stationarity measure; unlike the cost it stays resolvable
        # in floating point right up to the optimum
        col = np.maximum(np.sqrt(np.sum(J * J, axis=0)), np.finfo(float).tiny)
        rn = max(math.sqrt(r @ r), np.finfo(float).tiny)
        return np.max(np.abs(_projected_gradient(J.T @ r, x, lower, upper)) / col) / rn

    cost = r @ r
    for _ in range(steps):
        grad = J.T @ r
        c_old = cosine(x, J, r)
        free = ~(((x <= lower) & (grad >= 0)) | ((x >= upper) & (grad <= 0)))
        if not free.any():
            break
        d = np.sqrt(np.sum(J[:, free] ** 2, axis=0))
        d[d == 0.0] = 1.0
        z = np.linalg.lstsq(J[:, free] / d, -r, rcond=None)[0]
        step = np.zeros_like(x)
        step[free] = z / d
        x_new = np.clip(x + step, lower, upper)
        r_new = residual(x_new)
        cost_new = r_new @ r_new
        if not np.isfinite(cost_new):
            break
        J_new = jacobian(x_new)
        moved = np.max(np.abs(x_new - x) / np.maximum(np.abs(x), np.finfo(float).tiny))
        if not (cost_new <= cost or cosine(x_new, J_new, r_new) < c_old):
            break
        x, r, cost, J = x_new, r_new, cost_new, J_new
        if moved <= 4 * np.finfo(float).eps:
            break
    return x, r, J


def _finish(
    model: str,
    outcome: LMOutcome,
    names,
    units,
    lower,
    upper,
    fixed=(),
    fixed_values=None,
    metadata=None,
) -> FitResult:
    J, r, x = outcome.jacobian, outcome.residual, outcome.x
    m, p = J.shape
    dof = m - p
    chi2 = float(r @ r)
    s2 = chi2 / dof if dof > 0 else 0.0
    # scale columns first: pinv's cutoff is relative, and a parameter in
    # microseconds next to one of order unity would otherwise be dropped
    d = np.sqrt(np.sum(J * J, axis=0))
    d[d == 0.0] = 1.0
    Js = J / d
    cov = s2 * np.linalg.pinv(Js.T @ Js) / np.outer(d, d)
    sig = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    free_names = [n for n in names if n not in fixed]
    at_bound = tuple(
        n for n, v, lo, hi in zip(free_names, x, lower, upper)
        if (np.isfinite(lo) and v <= lo + 1e-10 * abs(lo)) or (np.isfinite(hi) and v >= hi - 1e-10 * abs(hi))
    )
    values, sigmas = [], []
    full_cov = np.zeros((len(names), len(names)))
    idx = {n: k for k, n in enumerate(free_names)}
    for n in names:
        if n in fixed:
            values.append(fixed_values[n])
            sigmas.append(0.0)
        else:
            values.append(x[idx[n]])
            sigmas.append(sig[idx[n]])
    for a in free_names:
        for b in free_names:
            full_cov[names.index(a), names.index(b)] = cov[idx[a], idx[b]]
    if not outcome.converged:
        warnings.warn(f"{model} fit did not converge: {outcome.message}", FitConvergenceWarning, stacklevel=3)
    return FitResult(
        model=model,
        names=tuple(names),
        values=np.array(values),
        sigmas=np.array(sigmas),
        units=tuple(units),
        residual_norm=math.sqrt(chi2),
        converged=outcome.converged,
        iterations=outcome.iterations,
        dof=dof,
        covariance=full_cov,
        at_bound=at_bound,
        fixed=tuple(fixed),
        message=outcome.message,
        metadata=dict(metadata or {}),
    )


# -- models ----------------------------------------------------------------------

def recovery_model(tau, p):
    amplitude, offset, t1 = p
    return offset - amplitude * np.exp(-np.asarray(tau) / t1)


def recovery_jacobian(tau, p):
    amplitude, offset, t1 = p
    tau = np.asarray(tau, dtype=float)
    e = np.exp(-tau / t1)
    return np.column_stack([-e, np.ones_like(tau), -amplitude * e * tau / t1**2])


def exponential_model(tau, p):
    amplitude, t = p
    return amplitude * np.exp(-np.asarray(tau) / t)


def exponential_jacobian(tau, p):
    amplitude, t = p
    tau = np.asarray(tau, dtype=float)
    e = np.exp(-tau / t)
    return np.column_stack([e, amplitude * e * tau / t**2])


def mims_model(tau, p):
    amplitude, t2, m = p
    return amplitude * np.exp(-((2.0 * np.asarray(tau) / t2) ** m))


def mims_jacobian(tau, p):
    amplitude, t2, m = p
    u = 2.0 * np.asarray(tau, dtype=float) / t2
    um = u**m
    e = np.exp(-um)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_u = np.where(u > 0, np.log(np.where(u > 0, u, 1.0)), 0.0)
    return np.column_stack([e, amplitude * e * m * um / t2, -amplitude * e * um * log_u])


# -- initial guesses -------------------------------------------------------------

def _crossing(x, z, level):
    """First x where z falls to ``level`` (z starting above it), linearly interpolated."""
    below = np.nonzero(z <= level)[0]
    if len(below) == 0 or below[0] == 0:
        return None
    k = below[0]
    x0, x1, z0, z1 = x[k - 1], x[k], z[k - 1], z[k]
    return float(x0 + (level - z0) * (x1 - x0) / (z1 - z0)) if z1 != z0 else float(x1)


def _check_trace(trace: EchoDecayTrace):
    if len(trace) < MIN_TRACE_POINTS:
        raise ValueError(f"need at least {MIN_TRACE_POINTS} points, got {len(trace)}")
    y = trace.amplitude
    if np.ptp(y) <= 1e-12 * max(np.abs(y).max(), np.finfo(float).tiny):
        raise ValueError("degenerate flat trace")


def _weights(trace: EchoDecayTrace):
    return np.ones(len(trace)) if trace.sigma is None else 1.0 / trace.sigma


def _decay_time_guess(tau, y):
    """Delay at which y has fallen by 1/e of its range from the first sample."""
    z = (y - y[-1]) / (y[0] - y[-1])
    t = _crossing(tau - tau[0], z, 1 / math.e)
    return t if t and t > 0 else float(tau[-1] - tau[0]) or float(tau[-1])


# -- trace fits --------------------------------------------------------------------

def fit_exponential_recovery(trace: EchoDecayTrace, max_iter: int = MAX_ITERATIONS) -> FitResult:
    """Fit ``y = offset - amplitude * exp(-tau / t1)``; t1 in the delay unit (us)."""
    _check_trace(trace)
    tau, y, w = trace.delay, trace.amplitude, _weights(trace)
    span = tau[-1] - min(tau[0], 0.0)
    x0 = [y[-1] - y[0], y[-1], _decay_time_guess(tau, y)]
    lower = [-np.inf, -np.inf, 1e-9 * span]
    upper = [np.inf, np.inf, 1e9 * span]
    out = levenberg_marquardt(
        lambda p: w * (recovery_model(tau, p) - y),
        lambda p: w[:, None] * recovery_jacobian(tau, p),
        x0, lower, upper, max_iter=max_iter,
    )
    return _finish("recovery", out, ("amplitude", "offset", "t1"), ("a.u.", "a.u.", "us"), lower, upper,
                   metadata={"space": "amplitude"})


def fit_exponential_decay(trace: EchoDecayTrace, max_iter: int = MAX_ITERATIONS) -> FitResult:
    """Fit ``y = amplitude * exp(-tau / t)``."""
    _check_trace(trace)
    tau, y, w = trace.delay, trace.amplitude, _weights(trace)
    span = tau[-1] - min(tau[0], 0.0)
    t0 = _decay_to_e(tau, y)
    x0 = [y[0] * math.exp(tau[0] / t0), t0]
    lower = [0.0, 1e-9 * span]
    upper = [np.inf, 1e9 * span]
    out = levenberg_marquardt(
        lambda p: w * (exponential_model(tau, p) - y),
        lambda p: w[:, None] * exponential_jacobian(tau, p),
        x0, lower, upper, max_iter=max_iter,
    )
    return _finish("exponential", out, ("amplitude", "t"), ("a.u.", "us"), lower, upper,
                   metadata={"space": "amplitude"})


def _decay_to_e(tau, y) -> float:
    """Time constant of a decay to zero: delay where y drops to y[0]/e."""
    t = _crossing(tau, y / y[0], 1 / math.e)
    if t is not None and t > tau[0]:
        return t - tau[0]
    pos = y > 0
    if pos.sum() >= 2:
        slope = np.polyfit(tau[pos], np.log(y[pos]), 1)[0]
        if slope < 0:
            return -1.0 / slope
    return float(tau[-1] - tau[0])


def fit_mims(trace: EchoDecayTrace, m: float | None = None, max_iter: int = MAX_ITERATIONS) -> FitResult:
    """Fit the stretched echo envelope ``E0 exp[-(2 tau / t2)^m]``.

    ``m`` is free in (0.5, 2.5] unless a fixed value is given. t2 is in the
    delay unit.
    """
    _check_trace(trace)
    tau, y, w = trace.delay, trace.amplitude, _weights(trace)
    half = max(1, len(y) // 2)
    if np.any(y[:half] <= 0):
        raise ValueError("echo amplitudes must be positive over the first half of the trace")
    span = tau[-1] - min(tau[0], 0.0)
    t2_0 = 2.0 * _decay_to_e(tau, y)
    names = ("amplitude", "t2", "m")
    units = ("a.u.", "us", "")
    lo_m, hi_m = 0.5 * (1 + 1e-12), 2.5
    if m is None:
        x0 = [y[0], t2_0, 1.0]
        lower = [0.0, 1e-9 * span, lo_m]
        upper = [np.inf, 1e9 * span, hi_m]
        out = levenberg_marquardt(
            lambda p: w * (mims_model(tau, p) - y),
            lambda p: w[:, None] * mims_jacobian(tau, p),
            x0, lower, upper, max_iter=max_iter,
        )
        return _finish("mims", out, names, units, lower, upper, metadata={"space": "amplitude"})
    if not lo_m <= m <= hi_m:
        raise ValueError("fixed m must lie in (0.5, 2.5]")
    x0 = [y[0], t2_0]
    lower = [0.0, 1e-9 * span]
    upper = [np.inf, 1e9 * span]
    out = levenberg_marquardt(
        lambda p: w * (mims_model(tau, (p[0], p[1], m)) - y),
        lambda p: w[:, None] * mims_jacobian(tau, (p[0], p[1], m))[:, :2],
        x0, lower, upper, max_iter=max_iter,
    )
    return _finish("mims", out, names, units, lower, upper, fixed=("m",), fixed_values={"m": float(m)},
                   metadata={"space": "amplitude"})


# -- temperature series ----------------------------------------------------------

def _series(temperatures, times, sigmas):
    t = np.asarray(temperatures, dtype=float).ravel()
    y = np.asarray(times, dtype=float).ravel()
    if t.shape != y.shape:
        raise ValueError("temperature and time arrays differ in length")
    if len(t) < MIN_SERIES_POINTS:
        raise ValueError(f"need at least {MIN_SERIES_POINTS} temperature points, got {len(t)}")
    if np.any(~(t > 0)) or np.any(~(y > 0)):
        raise ValueError("temperatures and time constants must be positive")
    s = None
    if sigmas is not None:
        s = np.asarray(sigmas, dtype=float).ravel()
        if s.shape != t.shape or np.any(~(s > 0)):
            raise ValueError("sigma must be positive with one entry per point")
    return t, y, s


def fit_slr_model(
    temperatures,
    t1_s,
    transition_energy_ghz: float,
    sigma_t1=None,
    constants: PhysicalConstants = DEFAULT_CONSTANTS,
) -> FitResult:
    """Fit ``1/T1 = A coth(dE / 2 kB T)`` on rates; returns A in s^-1."""
    t, y_t, s = _series(temperatures, t1_s, sigma_t1)
    SlrModel(1.0, transition_energy_ghz)  # validates the energy
    rate = 1.0 / y_t
    w = np.ones_like(rate) if s is None else y_t**2 / s
    c = _coth_stable(transition_energy_ghz / (2.0 * constants.boltzmann_over_h * t))
    ends = [int(np.argmin(t)), int(np.argmax(t))]
    a0 = float(np.dot(rate[ends], c[ends]) / np.dot(c[ends], c[ends]))
    lower, upper = [0.0], [np.inf]
    out = levenberg_marquardt(
        lambda p: w * (p[0] * c - rate),
        lambda p: (w * c)[:, None],
        [max(a0, 0.0)], lower, upper,
    )
    return _finish("slr", out, ("slr_prefactor",), ("s^-1",), lower, upper,
                   metadata={"space": "rate", "transition_energy_GHz": transition_energy_ghz})


def fit_flipflop_model(
    temperatures,
    t2_us,
    zeeman_temperatures: Sequence[float],
    sigma_t2=None,
) -> FitResult:
    """Fit ``1/T2 = C sum_i w_i(T) + D`` on rates with fixed T_i; C, D in ms^-1, both >= 0."""
    t, y_t, s = _series(temperatures, t2_us, sigma_t2)
    ti = [float(x) for x in zeeman_temperatures]
    if not ti or any(not x > 0 for x in ti):
        raise ValueError("Zeeman temperatures must be positive")
    rate = 1e3 / y_t
    w = np.ones_like(rate) if s is None else y_t**2 / (1e3 * s)
    basis = flipflop_terms(ti, t).sum(axis=1)
    ends = [int(np.argmin(t)), int(np.argmax(t))]
    a = np.column_stack([basis[ends], np.ones(2)])
    try:
        x0 = np.linalg.solve(a, rate[ends])
    except np.linalg.LinAlgError:
        x0 = np.array([0.0, rate.mean()])
    x0 = np.clip(x0, 0.0, None)
    design = np.column_stack([basis, np.ones_like(basis)])
    lower, upper = [0.0, 0.0], [np.inf, np.inf]
    out = levenberg_marquardt(
        lambda p: w * (design @ p - rate),
        lambda p: w[:, None] * design,
        x0, lower, upper,
    )
    return _finish("flipflop", out, ("C", "D"), ("ms^-1", "ms^-1"), lower, upper,
                   metadata={"space": "rate", "zeeman_temperatures_K": ti})
