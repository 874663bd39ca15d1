"""MTJ device layer: two-state resistance, Monte Carlo switching
probability, and the logistic fit of the stochastic-sigmoid curve.

Switching trials start from the antiparallel state (-z) with a small
fixed tilt, equilibrate thermally for a short window, then see the
current pulse followed by a field-only relax window; a trial counts as
switched when the final mz sign differs from the initial sign.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
import json
import math

import numpy as np

from .errors import ConvergenceError, DomainError, FitDomainError
from .llgs import DeviceParams, _integrate, default_device_params
from .rngtools import derive_rng

__all__ = [
    "MtjParams",
    "SwitchingCurve",
    "SigmoidFit",
    "default_mtj_params",
    "resistance",
    "tmr_ratio",
    "estimate_switching_probability",
    "sweep_switching_curve",
    "fit_stochastic_sigmoid",
]


@dataclass(frozen=True)
class MtjParams:
    """Device stack parameters on top of the free-layer dynamics."""

    device: DeviceParams
    R_p: float                  # parallel-state resistance, ohm
    R_ap: float                 # antiparallel-state resistance, ohm
    theta_sh: float = 0.3       # heavy-metal spin Hall efficiency
    init_tilt: float = math.radians(2.0)   # fixed tilt of the start state, rad
    equil_steps: int = 100      # thermal equilibration steps before the pulse
    relax_time: float = 3e-10   # field-only window after the pulse, s

    def __post_init__(self):
        if not (self.R_ap > self.R_p > 0):
            raise DomainError("need R_ap > R_p > 0")
        if not (0 < self.theta_sh <= 1):
            raise DomainError("theta_sh must be in (0, 1]")
        if self.equil_steps < 0 or self.relax_time < 0:
            raise DomainError("equil_steps and relax_time must be non-negative")


def default_mtj_params(T: float = 300.0) -> MtjParams:
    """Shipped default stack: default free layer, 5k/10k ohm, theta_sh 0.3."""
    return MtjParams(device=default_device_params(T=T), R_p=5e3, R_ap=10e3)


def resistance(state: str, params: MtjParams) -> float:
    """Resistance of the junction in state 'P' or 'AP'."""
    if state == "P":
        return params.R_p
    if state == "AP":
        return params.R_ap
    raise DomainError(f"unknown MTJ state {state!r}")


def tmr_ratio(params: MtjParams) -> float:
    return (params.R_ap - params.R_p) / params.R_p


@dataclass
class SwitchingCurve:
    """Monte Carlo switching-probability estimates over a current sweep."""

    currents: np.ndarray        # charge currents, A, strictly increasing
    p_hat: np.ndarray
    trials: np.ndarray          # trials per point
    ci_halfwidth: np.ndarray    # 95% normal-approximation halfwidths

    def to_csv(self, path):
        with open(path, "w", newline="\n") as fh:
            fh.write("current_A,p_hat,trials,ci_halfwidth\n")
            for i, p, n, ci in zip(self.currents, self.p_hat,
                                   self.trials, self.ci_halfwidth):
                fh.write(f"{float(i)!r},{float(p)!r},{int(n)},{float(ci)!r}\n")


@dataclass(frozen=True)
class SigmoidFit:
    """Two-parameter logistic p(I) = 1/(1+exp(-a (I - b)))."""

    a: float                    # slope, 1/A
    b: float                    # offset current, A
    r_squared: float

    def predict(self, current):
        return 1.0 / (1.0 + np.exp(-self.a * (np.asarray(current, float) - self.b)))

    def to_json(self, path):
        with open(path, "w", newline="\n") as fh:
            json.dump({"a": self.a, "b": self.b, "r_squared": self.r_squared},
                      fh, indent=2)
            fh.write("\n")


def _ci_halfwidth(p_hat: float, trials: int) -> float:
    return 1.96 * math.sqrt(p_hat * (1.0 - p_hat) / trials)


def estimate_switching_probability(charge_current: float, pulse_width: float,
                                   trials: int, params: MtjParams,
                                   seed: int) -> tuple[float, float]:
    """Fraction of seeded trials that switch, with 95% CI halfwidth."""
    dev = params.device
    if trials < 1:
        raise DomainError("trials must be >= 1")
    if pulse_width < dev.dt:
        raise DomainError("pulse_width must be at least one time-step")
    n_pulse = max(1, int(round(pulse_width / dev.dt)))
    n_relax = int(round(params.relax_time / dev.dt))
    is_mag = params.theta_sh * charge_current
    th0 = params.init_tilt
    mx = np.full(trials, math.sin(th0))
    my = np.zeros(trials)
    mz = np.full(trials, -math.cos(th0))
    rngs = [derive_rng(seed, "switch-trial", i) for i in range(trials)]
    phases = []
    if params.equil_steps:
        phases.append((params.equil_steps, np.zeros(3)))
    phases.append((n_pulse, np.array([0.0, 0.0, is_mag])))
    if n_relax:
        phases.append((n_relax, np.zeros(3)))
    mx, my, mz, _, _, _ = _integrate(mx, my, mz, phases, dev, None, rngs)
    switched = mz > 0.0
    p_hat = float(np.count_nonzero(switched)) / trials
    return p_hat, _ci_halfwidth(p_hat, trials)


def _sweep_point(args):
    idx, current, pulse_width, trials, params, seed = args
    point_seed = derive_rng(seed, "sweep-point", idx).integers(0, 2**63)
    return idx, estimate_switching_probability(
        current, pulse_width, trials, params, int(point_seed))


def sweep_switching_curve(currents, pulse_width: float, trials_per_point: int,
                          params: MtjParams, seed: int,
                          workers: int = 1) -> SwitchingCurve:
    """One switching-probability estimate per current, independent substreams."""
    currents = np.asarray(currents, dtype=float)
    if len(currents) < 5:
        raise DomainError("need at least 5 sweep currents")
    if not np.all(np.diff(currents) > 0):
        raise DomainError("sweep currents must be strictly increasing")
    jobs = [(i, c, pulse_width, trials_per_point, params, seed)
            for i, c in enumerate(currents)]
    results = [None] * len(jobs)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for idx, res in pool.map(_sweep_point, jobs):
                results[idx] = res
    else:
        for job in jobs:
            idx, res = _sweep_point(job)
            results[idx] = res
    p_hat = np.array([r[0] for r in results])
    ci = np.array([r[1] for r in results])
    return SwitchingCurve(currents=currents, p_hat=p_hat,
                          trials=np.full(len(currents), trials_per_point),
                          ci_halfwidth=ci)


def fit_stochastic_sigmoid(curve: SwitchingCurve,
                           max_iter: int = 200) -> SigmoidFit:
    """Least-squares logistic fit in (a, b) by damped Gauss-Newton."""
    I = np.asarray(curve.currents, dtype=float)
    p = np.asarray(curve.p_hat, dtype=float)
    if len(I) < 5 or p.min() >= 0.2 or p.max() <= 0.8:
        raise FitDomainError(
            "curve must have >= 5 points spanning p < 0.2 and p > 0.8")

    # initial guess from a logit regression on the interior points
    interior = (p > 0.02) & (p < 0.98)
    if np.count_nonzero(interior) >= 2:
        logit = np.log(p[interior] / (1.0 - p[interior]))
        a0, c0 = np.polyfit(I[interior], logit, 1)
        if a0 <= 0:
            a0 = 1.0 / max(I.ptp(), 1e-30)
        b0 = -c0 / a0
    else:
        b0 = float(np.interp(0.5, p, I))
        a0 = 4.0 / max(I.ptp() / len(I), 1e-30)

    a, b = float(a0), float(b0)
    lam = 1e-3

    def residuals(a, b):
        return 1.0 / (1.0 + np.exp(-a * (I - b))) - p

    r = residuals(a, b)
    cost = float(r @ r)
    converged = False
    for _ in range(max_iter):
        s = 1.0 / (1.0 + np.exp(-a * (I - b)))
        w = s * (1.0 - s)
        # Jacobian of the model wrt (a, b)
        J = np.column_stack([w * (I - b), -a * w])
        g = J.T @ r
        H = J.T @ J
        step = np.linalg.solve(H + lam * np.diag(np.diag(H) + 1e-300), -g)
        a_new, b_new = a + step[0], b + step[1]
        r_new = residuals(a_new, b_new)
        cost_new = float(r_new @ r_new)
        if cost_new <= cost:
            rel = abs(cost - cost_new) / max(cost, 1e-300)
            a, b, r, cost = a_new, b_new, r_new, cost_new
            lam = max(lam * 0.3, 1e-12)
            if rel < 1e-14 or float(np.abs(step).max()) < 1e-14 * max(abs(a), abs(b)):
                converged = True
                break
        else:
            lam *= 10.0
            if lam > 1e12:
                break
    else:
        converged = cost <= 1e-20 or float(np.abs(g).max()) < 1e-12
    if not converged and cost > 1e-20:
        # accept if the gradient is numerically flat, else report failure
        s = 1.0 / (1.0 + np.exp(-a * (I - b)))
        w = s * (1.0 - s)
        J = np.column_stack([w * (I - b), -a * w])
        if float(np.abs(J.T @ r).max()) > 1e-9:
            raise ConvergenceError("logistic fit did not converge")
    if a <= 0:
        raise ConvergenceError("logistic fit produced a non-positive slope")
    ss_res = cost
    ss_tot = float(np.sum((p - p.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return SigmoidFit(a=a, b=b, r_squared=r2)
