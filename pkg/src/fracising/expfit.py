"""Approximate the coupling kernel by a finite sum of decaying exponentials.

The fit target is the full table J0*J(r) on the integer sites r = 1..range.
Escalation starts from a minimal two-term model and adds one exponential
per round, warm-starting each round from the previous optimum, until the
uniform (sup-norm) error drops below tolerance.

The inner solver is Levenberg-Marquardt-style least squares on
log-parameterized decay rates b = exp(beta) (positivity built in), with
Lawson-style reweighting pulling weight toward the current worst site so
the least-squares optimum tracks the sup-norm objective.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from .errors import DegenerateKernel, ToleranceNotReached
from .kernel import CouplingKernel

__all__ = [
    "FitConfig",
    "ExpSumApproximation",
    "fit_exponentials",
    "evaluate_expsum",
    "pointwise_error_profile",
]

_LAWSON_ROUNDS = 6
_LAWSON_ROUNDS_FINAL = 18
_MAX_NFEV = 600
_B_MIN, _B_MAX = 1e-7, 30.0


@dataclass(frozen=True)
class FitConfig:
    """Escalation-fit configuration."""

    tolerance: float = 1e-9
    max_terms: int = 20
    range: int | None = None
    seed_strategy: str = "tail-slope"

    def __post_init__(self):
        if not (self.tolerance > 0):
            raise ValueError("tolerance must be positive")
        if self.max_terms < 2:
            raise ValueError("max_terms must be >= 2")
        if self.seed_strategy not in ("tail-slope", "geometric-grid"):
            raise ValueError(f"unknown seed strategy {self.seed_strategy!r}")


@dataclass(frozen=True)
class ExpSumApproximation:
    """Result of the escalation fit: sum_a a_i exp(-b_i r).

    Terms are stored in canonical order (descending decay rate) so that
    identical fits are bit-identical.  ``sup_error`` is the exact maximum
    pointwise deviation over r = 1..fitted_range.
    """

    amplitudes: np.ndarray
    rates: np.ndarray
    fitted_range: int
    sup_error: float
    iterations_used: int
    escalation_sup_errors: tuple = field(default_factory=tuple)

    def __post_init__(self):
        self.amplitudes.setflags(write=False)
        self.rates.setflags(write=False)

    @property
    def terms(self):
        return list(zip(self.amplitudes.tolist(), self.rates.tolist()))

    @property
    def n_terms(self) -> int:
        return len(self.amplitudes)

    def __call__(self, r):
        return evaluate_expsum(self, r)


def evaluate_expsum(approx: ExpSumApproximation, r) -> float | np.ndarray:
    """Evaluate sum_a a_i exp(-b_i r) at integer separation(s) r >= 1."""
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 1):
        raise ValueError("separations must satisfy r >= 1")
    if approx.n_terms == 0:
        return np.zeros_like(r_arr) if r_arr.ndim else 0.0
    out = np.einsum("i,i...->...", approx.amplitudes,
                    np.exp(-np.outer(approx.rates, r_arr)))
    return float(out) if r_arr.ndim == 0 else out


def pointwise_error_profile(approx: ExpSumApproximation,
                            kernel: CouplingKernel) -> np.ndarray:
    """Signed per-site residuals (r, J(r) - model(r)) over the shared range."""
    rmax = min(approx.fitted_range, kernel.max_range)
    r = np.arange(1, rmax + 1)
    resid = kernel.values[1:rmax + 1] - evaluate_expsum(approx, r)
    return np.column_stack([r, resid])


def _model(amps, rates, r):
    return np.exp(-np.outer(r, rates)) @ amps


def _solve_amplitudes(rates, r, y, w):
    """Exact linear subproblem: optimal amplitudes for fixed decay rates."""
    basis = np.exp(-np.outer(r, rates)) * w[:, None]
    amps, *_ = np.linalg.lstsq(basis, y * w, rcond=None)
    return amps


def _polish(amps, rates, r, y, w):
    """Joint LM polish of (amplitudes, log rates) on weighted residuals."""
    n = len(rates)

    def pack(a, b):
        return np.concatenate([a, np.log(np.clip(b, _B_MIN, _B_MAX))])

    def residual(theta):
        a, b = theta[:n], np.exp(theta[n:])
        return w * (_model(a, b, r) - y)

    def jacobian(theta):
        a, b = theta[:n], np.exp(theta[n:])
        e = np.exp(-np.outer(r, b))
        jac = np.empty((len(r), 2 * n))
        jac[:, :n] = w[:, None] * e
        jac[:, n:] = w[:, None] * (-a * b)[None, :] * r[:, None] * e
        return jac

    lower = np.concatenate([np.full(n, -np.inf), np.full(n, np.log(_B_MIN))])
    upper = np.concatenate([np.full(n, np.inf), np.full(n, np.log(_B_MAX))])
    sol = least_squares(residual, pack(amps, rates), jac=jacobian,
                        method="trf", x_scale="jac", max_nfev=_MAX_NFEV,
                        bounds=(lower, upper),
                        ftol=1e-15, xtol=1e-15, gtol=1e-15)
    return sol.x[:n], np.exp(sol.x[n:])


def _sup_error(amps, rates, r, y):
    return float(np.max(np.abs(_model(amps, rates, r) - y)))


def _seed_two_terms(r, y):
    """Initial decay-rate pair from the head and tail log slopes."""
    mag = np.abs(y) + 1e-300
    head = slice(0, max(2, len(r) // 20))
    tail = slice(max(0, len(r) - max(2, len(r) // 3)), len(r))
    b_head = -np.polyfit(r[head], np.log(mag[head]), 1)[0]
    b_tail = -np.polyfit(r[tail], np.log(mag[tail]), 1)[0]
    b = np.clip(np.array([b_head, b_tail]), _B_MIN, _B_MAX)
    if abs(b[0] - b[1]) < 1e-3:
        b[0] = min(_B_MAX, b[1] * 10 + 0.1)
    return np.sort(b)[::-1]


def _seed_new_rate(amps, rates, r, y, strategy):
    """Decay rate for the next exponential from the residual structure."""
    resid = y - _model(amps, rates, r)
    worst = int(np.argmax(np.abs(resid)))
    if strategy == "geometric-grid":
        # densify between the two rates bracketing the worst site scale
        candidates = np.geomspace(max(1.0 / r[-1], _B_MIN), 2.0, 24)
        scores = []
        for b_new in candidates:
            trial = np.append(rates, b_new)
            a = _solve_amplitudes(trial, r, y, np.ones_like(y))
            scores.append(_sup_error(a, trial, r, y))
        return float(candidates[int(np.argmin(scores))])
    # tail-slope: log-linear regression of |residual| over the decade
    # around the worst site
    lo = max(1, int(r[worst] / np.sqrt(10.0)))
    hi = min(int(r[-1]), int(r[worst] * np.sqrt(10.0)))
    window = (r >= lo) & (r <= hi) & (np.abs(resid) > 0)
    if np.count_nonzero(window) < 3:
        b_new = 1.0 / max(r[worst], 1.0)
    else:
        slope = np.polyfit(r[window], np.log(np.abs(resid[window])), 1)[0]
        b_new = -slope
    b_new = float(np.clip(b_new, _B_MIN, _B_MAX))
    # keep the rate set well separated: a clone of an existing rate wastes
    # the new term, so nudge into the widest nearby gap instead
    existing = np.sort(rates)
    if np.any(np.abs(np.log(existing) - np.log(b_new)) < 0.15):
        gaps = np.diff(np.log(existing))
        widest = int(np.argmax(gaps))
        b_new = float(np.exp(np.log(existing[widest]) + gaps[widest] / 2.0))
    return b_new


def fit_exponentials(kernel: CouplingKernel,
                     config: FitConfig | None = None) -> ExpSumApproximation:
    """Fit kernel values by escalating sums of decaying exponentials.

    Raises
    ------
    DegenerateKernel
        If every coupling beyond r = 1 is exactly zero (a one-point kernel
        cannot seed an exponential fit).
    ToleranceNotReached
        If ``config.max_terms`` exponentials cannot push the sup-norm error
        below tolerance; carries the best approximation in ``best``.
    """
    config = config or FitConfig()
    if kernel.max_range < 10:
        raise ValueError("kernel range too short to fit (need >= 10 sites)")
    rmax = min(config.range or kernel.max_range, kernel.max_range)
    r = np.arange(1, rmax + 1, dtype=float)
    y = np.asarray(kernel.values[1:rmax + 1], dtype=float)
    if np.all(y[1:] == 0.0):
        raise DegenerateKernel(
            "kernel tail is exactly zero beyond r=1 (e.g. q=2 nearest "
            "neighbor); an exponential fit is ill-posed")

    rates = _seed_two_terms(r, y)
    amps = _solve_amplitudes(rates, r, y, np.ones_like(y))

    iterations = 0
    history = []
    best = None  # (sup, amps, rates)

    for n_terms in range(2, config.max_terms + 1):
        if n_terms > 2:
            b_new = _seed_new_rate(amps, rates, r, y, config.seed_strategy)
            rates = np.append(rates, b_new)
            amps = np.append(amps, 0.0)
            amps = _solve_amplitudes(rates, r, y, np.ones_like(y))

        # Lawson loop: reweight toward the current worst sites so the
        # weighted least-squares optimum approaches the uniform optimum;
        # grind longer once the target is within reach
        w = np.ones_like(y)
        round_best = (_sup_error(amps, rates, r, y), amps, rates)
        rounds = _LAWSON_ROUNDS
        done = 0
        while done < rounds:
            amps, rates = _polish(amps, rates, r, y, w)
            iterations += 1
            done += 1
            sup = _sup_error(amps, rates, r, y)
            if sup < round_best[0]:
                round_best = (sup, amps.copy(), rates.copy())
            if sup <= config.tolerance:
                break
            if round_best[0] <= 30.0 * config.tolerance:
                rounds = _LAWSON_ROUNDS_FINAL
            resid = np.abs(_model(amps, rates, r) - y)
            w = w * (resid / resid.max() + 0.05)
            w = w / np.sqrt(np.mean(w ** 2))

        sup, amps, rates = round_best
        if best is None or sup < best[0]:
            best = (sup, amps, rates)
        # escalation history is monotone by construction: adding a term
        # with zero amplitude can never increase the best sup error
        history.append(best[0])
        if best[0] <= config.tolerance:
            break
        amps, rates = best[1].copy(), best[2].copy()

    sup, amps, rates = best
    order = np.argsort(rates)[::-1]
    result = ExpSumApproximation(
        amplitudes=np.array(amps[order]),
        rates=np.array(rates[order]),
        fitted_range=rmax,
        sup_error=sup,
        iterations_used=iterations,
        escalation_sup_errors=tuple(history),
    )
    if sup > config.tolerance:
        raise ToleranceNotReached(
            f"sup error {sup:.3e} above tolerance {config.tolerance:.1e} "
            f"after {result.n_terms} terms", best=result)
    return result
