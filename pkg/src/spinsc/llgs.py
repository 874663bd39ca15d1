"""Stochastic macrospin dynamics of the MTJ free layer.

Integrates

    dm/dt = -gamma (m x H_eff) + alpha (m x dm/dt) + (1/(q Ns)) (m x I_s x m)

with the thermal field

    H_th = sqrt( alpha/(1+alpha^2) * 2 kB T / (gamma mu0 Ms V dt) ) * G,

G a vector of independent standard normals resampled once per step.  The
implicit damping term is removed by the usual algebraic rearrangement
(dm/dt = (A + alpha m x A)/(1+alpha^2) with A collecting the explicit
torques), and each step is advanced with the stochastic Heun scheme, the
noise held fixed within the step.  The state is renormalized to unit
length after every step.

The effective field is the minimal bistable composition: uniaxial
anisotropy Hk along +z (easy axis), a single demagnetization penalty Hd
along the hard axis y, plus any externally applied field.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from .errors import DomainError, StepFaultError
from .rngtools import derive_rng

__all__ = [
    "K_B",
    "MU_0",
    "MU_B",
    "HBAR",
    "Q_E",
    "DeviceParams",
    "SpinCurrentPulse",
    "Trajectory",
    "default_device_params",
    "thermal_prefactor",
    "sample_thermal_field",
    "effective_field",
    "llgs_step",
    "simulate_pulse",
]

# SI constants (CODATA 2018)
K_B = 1.380649e-23        # J/K
MU_0 = 1.25663706212e-6   # T m/A
MU_B = 9.2740100783e-24   # J/T
HBAR = 1.054571817e-34    # J s
Q_E = 1.602176634e-19     # C


@dataclass(frozen=True)
class DeviceParams:
    """Physical constants and free-layer geometry of one device.

    `gamma` absorbs mu0, so gamma * H has units 1/s with H in A/m.
    """

    alpha: float              # Gilbert damping ratio
    Ms: float                 # saturation magnetization, A/m
    V: float                  # free-layer volume, m^3
    T: float                  # temperature, K
    dt: float                 # integration time-step, s
    Hk: float                 # uniaxial anisotropy field along z, A/m
    Hd: float = 0.0           # hard-axis (y) demagnetization field, A/m
    gamma: float = 2.0 * MU_B * MU_0 / HBAR   # gyromagnetic ratio, m/(A s)
    kB: float = K_B
    mu0: float = MU_0
    muB: float = MU_B
    hbar: float = HBAR
    q_e: float = Q_E

    def __post_init__(self):
        if not (self.alpha > 0 and self.Ms > 0 and self.V > 0 and self.dt > 0):
            raise DomainError("alpha, Ms, V, dt must be positive")
        if self.T < 0:
            raise DomainError("temperature must be non-negative")
        if self.gamma <= 0 or self.Hk < 0 or self.Hd < 0:
            raise DomainError("gamma must be positive; Hk, Hd non-negative")

    @property
    def Ns(self) -> float:
        """Number of spins in the free layer, Ms*V/muB."""
        return self.Ms * self.V / self.muB

    @property
    def thermal_stability(self) -> float:
        """Energy barrier over kB*T at the device temperature (inf at T=0)."""
        if self.T == 0:
            return math.inf
        return self.mu0 * self.Ms * self.Hk * self.V / (2.0 * self.kB * self.T)


@dataclass(frozen=True)
class SpinCurrentPulse:
    """Constant spin current applied for a fixed duration."""

    magnitude: float                       # spin current Is, A
    duration: float                        # pulse width, s
    polarization_axis: tuple = (0.0, 0.0, 1.0)

    def __post_init__(self):
        if self.duration <= 0:
            raise DomainError("pulse duration must be positive")
        axis = np.asarray(self.polarization_axis, dtype=float)
        if axis.shape != (3,) or abs(np.linalg.norm(axis) - 1.0) > 1e-12:
            raise DomainError("polarization_axis must be a unit 3-vector")

    @property
    def vector(self) -> np.ndarray:
        return self.magnitude * np.asarray(self.polarization_axis, dtype=float)


@dataclass
class Trajectory:
    """Recorded magnetization path of a single trial."""

    times: np.ndarray          # (n,) seconds, uniform spacing dt
    m: np.ndarray              # (n, 3) unit vectors
    switched: bool
    max_pre_renorm_drift: float = 0.0
    max_post_renorm_drift: float = 0.0

    def to_csv(self, path):
        header = "time_s,mx,my,mz\n"
        with open(path, "w", newline="\n") as fh:
            fh.write(header)
            for t, (mx, my, mz) in zip(self.times, self.m):
                fh.write(f"{t!r},{mx!r},{my!r},{mz!r}\n")


def default_device_params(T: float = 300.0, dt: float = 1e-13) -> DeviceParams:
    """Shipped default device (not taken from any measured dataset).

    40x40x2 nm^3 free layer, alpha = 0.0122, Ms = 1e6 A/m; Hk set so the
    thermal stability factor is 30 at 300 K.
    """
    Ms = 1e6
    V = 40e-9 * 40e-9 * 2e-9
    Hk = 2.0 * 30.0 * K_B * 300.0 / (MU_0 * Ms * V)
    return DeviceParams(alpha=0.0122, Ms=Ms, V=V, T=T, dt=dt, Hk=Hk)


def thermal_prefactor(params: DeviceParams) -> float:
    """Standard deviation (A/m) of each thermal-field component per step."""
    a = params.alpha
    num = 2.0 * params.kB * params.T
    den = params.gamma * params.mu0 * params.Ms * params.V * params.dt
    return math.sqrt(a / (1.0 + a * a) * num / den)


def sample_thermal_field(params: DeviceParams, rng: np.random.Generator,
                         size: int | None = None) -> np.ndarray:
    """Draw the per-step thermal field; (3,) or (size, 3) in A/m.

    Each field sample consumes exactly 3 standard-normal draws.
    """
    pref = thermal_prefactor(params)
    if size is None:
        return pref * rng.standard_normal(3)
    return pref * rng.standard_normal((int(size), 3))


def effective_field(m, params: DeviceParams, applied=None) -> np.ndarray:
    """Anisotropy + hard-axis + applied field at magnetization m (A/m)."""
    m = np.asarray(m, dtype=float)
    h = np.zeros_like(m)
    h[..., 1] = -params.Hd * m[..., 1]
    h[..., 2] = params.Hk * m[..., 2]
    if applied is not None:
        h = h + np.asarray(applied, dtype=float)
    return h


def _deriv(mx, my, mz, hx, hy, hz, isx, isy, isz, gamma, alpha, inv_qns, inv_1a2):
    """Explicit LLGS right-hand side in component form (broadcasts)."""
    # A = -gamma (m x H) + (1/(q Ns)) m x (Is x m)
    tx = isy * mz - isz * my
    ty = isz * mx - isx * mz
    tz = isx * my - isy * mx
    ax = -gamma * (my * hz - mz * hy) + inv_qns * (my * tz - mz * ty)
    ay = -gamma * (mz * hx - mx * hz) + inv_qns * (mz * tx - mx * tz)
    az = -gamma * (mx * hy - my * hx) + inv_qns * (mx * ty - my * tx)
    # dm/dt = (A + alpha m x A) / (1 + alpha^2)
    dx = (ax + alpha * (my * az - mz * ay)) * inv_1a2
    dy = (ay + alpha * (mz * ax - mx * az)) * inv_1a2
    dz = (az + alpha * (mx * ay - my * ax)) * inv_1a2
    return dx, dy, dz


def _integrate(mx, my, mz, phases, params, applied, rngs,
               record=False, chunk_steps=2048, t0=0.0):
    """Advance a batch of trajectories through the given (n_steps, Is) phases.

    mx/my/mz are 1-D arrays of batch size B; `rngs` is a list of B
    generators supplying the per-trial thermal noise (ignored at T = 0).
    Returns (mx, my, mz, max_pre_drift, max_post_drift, recorded) where
    `recorded` is a (times, m) pair when record=True (B must be 1).
    """
    alpha = params.alpha
    gamma = params.gamma
    dt = params.dt
    Hk = params.Hk
    Hd = params.Hd
    inv_qns = 1.0 / (params.q_e * params.Ns)
    inv_1a2 = 1.0 / (1.0 + alpha * alpha)
    apx, apy, apz = (0.0, 0.0, 0.0) if applied is None else tuple(np.asarray(applied, float))
    pref = thermal_prefactor(params)
    thermal = pref > 0.0 and rngs is not None

    max_pre = 0.0
    max_post = 0.0
    rec_t = [t0] if record else None
    rec_m = [(float(mx[0]), float(my[0]), float(mz[0]))] if record else None
    t = t0

    for n_steps, is_vec in phases:
        isx, isy, isz = float(is_vec[0]), float(is_vec[1]), float(is_vec[2])
        done = 0
        while done < n_steps:
            cl = min(chunk_steps, n_steps - done)
            if thermal:
                noise = np.stack([g.standard_normal((cl, 3)) for g in rngs], axis=0)
                noise *= pref
            for k in range(cl):
                if thermal:
                    nx = noise[:, k, 0]
                    ny = noise[:, k, 1]
                    nz = noise[:, k, 2]
                else:
                    nx = ny = nz = 0.0
                hx = apx + nx
                hy = apy + ny - Hd * my
                hz = apz + nz + Hk * mz
                k1x, k1y, k1z = _deriv(mx, my, mz, hx, hy, hz,
                                       isx, isy, isz, gamma, alpha, inv_qns, inv_1a2)
                px = mx + dt * k1x
                py = my + dt * k1y
                pz = mz + dt * k1z
                hx2 = apx + nx
                hy2 = apy + ny - Hd * py
                hz2 = apz + nz + Hk * pz
                k2x, k2y, k2z = _deriv(px, py, pz, hx2, hy2, hz2,
                                       isx, isy, isz, gamma, alpha, inv_qns, inv_1a2)
                half = 0.5 * dt
                mx = mx + half * (k1x + k2x)
                my = my + half * (k1y + k2y)
                mz = mz + half * (k1z + k2z)
                norm = np.sqrt(mx * mx + my * my + mz * mz)
                drift = float(np.max(np.abs(norm - 1.0)))
                if drift > max_pre:
                    max_pre = drift
                mx = mx / norm
                my = my / norm
                mz = mz / norm
                post = float(np.max(np.abs(mx * mx + my * my + mz * mz - 1.0)))
                if post > max_post:
                    max_post = post
                t += dt
                if record:
                    rec_t.append(t)
                    rec_m.append((float(mx[0]), float(my[0]), float(mz[0])))
            done += cl
            if not (np.isfinite(mx).all() and np.isfinite(my).all() and np.isfinite(mz).all()):
                bad = np.nonzero(~(np.isfinite(mx) & np.isfinite(my) & np.isfinite(mz)))[0]
                raise StepFaultError(
                    f"non-finite magnetization in trial(s) {bad.tolist()}; reduce dt")
    recorded = None
    if record:
        recorded = (np.asarray(rec_t), np.asarray(rec_m))
    return mx, my, mz, max_pre, max_post, recorded


def llgs_step(m, params: DeviceParams, pulse: SpinCurrentPulse | None,
              rng: np.random.Generator, applied=None) -> np.ndarray:
    """One stochastic Heun step; returns the renormalized magnetization."""
    m = np.asarray(m, dtype=float)
    is_vec = pulse.vector if pulse is not None else np.zeros(3)
    mx, my, mz, _, _, _ = _integrate(
        np.array([m[0]]), np.array([m[1]]), np.array([m[2]]),
        [(1, is_vec)], params, applied, [rng] if rng is not None else None)
    return np.array([mx[0], my[0], mz[0]])


def simulate_pulse(m0, pulse: SpinCurrentPulse, params: DeviceParams,
                   relax_time: float, seed: int, applied=None,
                   record: bool = True) -> Trajectory:
    """Apply the pulse, then field-only relaxation; fully seed-determined."""
    if relax_time < 0:
        raise DomainError("relax_time must be non-negative")
    m0 = np.asarray(m0, dtype=float)
    n_pulse = max(1, int(round(pulse.duration / params.dt)))
    n_relax = int(round(relax_time / params.dt))
    rng = derive_rng(seed, "trajectory")
    phases = [(n_pulse, pulse.vector)]
    if n_relax:
        phases.append((n_relax, np.zeros(3)))
    mx, my, mz, pre, post, recorded = _integrate(
        np.array([m0[0]]), np.array([m0[1]]), np.array([m0[2]]),
        phases, params, applied, [rng], record=record)
    switched = bool(mz[0] * m0[2] < 0)
    if recorded is not None:
        times, samples = recorded
    else:
        n = n_pulse + n_relax
        times = np.array([n * params.dt])
        samples = np.array([[mx[0], my[0], mz[0]]])
    return Trajectory(times=times, m=samples, switched=switched,
                      max_pre_renorm_drift=pre, max_post_renorm_drift=post)
