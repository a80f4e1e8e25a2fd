"""Two-tier Lorenz 96 truth model and the shared single-level RK2 kernel.

The slow variables X_k (k = 0..K-1, cyclic) are coupled to fast variables
Y_j stored as one global cyclic vector of length J*K, so that the j+1, j+2,
j-1 neighbours wrap across X-sector boundaries.  All arithmetic is f64 and
summation order is fixed (ascending index) for reproducibility.
"""

import json
import struct
from dataclasses import dataclass, field, asdict

import numpy as np

from . import _kernels

BLOWUP_LIMIT = 1e6

TRAJ_MAGIC = b"L96D"
TRAJ_FORMAT_VERSION = 1
_TRAJ_HEADER = struct.Struct("<4sIIQddQ")  # magic, version, K, T, F, dt_save, seed


class BlowUpError(RuntimeError):
    """A simulation produced a non-finite value or exceeded the amplitude limit."""

    def __init__(self, time_mtu, step, what="state"):
        super().__init__(f"numerical blow-up in {what} at t = {time_mtu:.4f} MTU (step {step})")
        self.time_mtu = time_mtu
        self.step = step


@dataclass(frozen=True)
class L96Config:
    """Constants of the two-tier system.

    K slow variables, J fast variables per slow one; h, b, c set coupling
    strength, space-time scale ratio and amplitude ratio; F is the forcing.
    ``advection`` is a diagnostic switch used by convergence tests to reduce
    the system to independent linear relaxations.
    """

    K: int = 8
    J: int = 32
    h: float = 1.0
    b: float = 10.0
    c: float = 10.0
    F: float = 20.0
    advection: bool = True

    def __post_init__(self):
        if self.K < 4:
            raise ValueError("K must be >= 4 (advection stencil needs 3 neighbours)")
        if self.J < 1:
            raise ValueError("J must be >= 1")
        if self.b == 0:
            raise ValueError("b must be nonzero")

    @property
    def JK(self):
        return self.J * self.K


@dataclass
class TruthState:
    """Full state of the two-tier system: X in R^K, Y in R^(J*K)."""

    X: np.ndarray
    Y: np.ndarray

    def copy(self):
        return TruthState(self.X.copy(), self.Y.copy())


@dataclass
class Trajectory:
    """Time-major record of saved X states.

    data has shape (T, K); rows are dt_save apart, the first row at t0.
    """

    data: np.ndarray
    F: float
    dt_save: float
    seed: int = 0
    t0: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def T(self):
        return self.data.shape[0]

    @property
    def K(self):
        return self.data.shape[1]

    @property
    def duration(self):
        return self.T * self.dt_save

    def times(self):
        return self.t0 + self.dt_save * (1 + np.arange(self.T))


def default_init(cfg, seed=0):
    """Initial truth state: X_k iid uniform in [-5, 5], Y = 0.

    The source papers never state initial conditions; transients are removed
    by the burn-in in :func:`generate_truth`.
    """
    gen = np.random.Generator(np.random.Philox(key=np.array([seed, 0], dtype=np.uint64)))
    X = gen.uniform(-5.0, 5.0, cfg.K)
    Y = np.zeros(cfg.JK)
    return TruthState(X, Y)


def truth_tendency(state, cfg):
    """Instantaneous (dX/dt, dY/dt) of the two-tier system.

    Pure reference implementation; :func:`generate_truth` uses a compiled
    kernel with identical arithmetic.  Cyclic in k (mod K) and in the global
    fast index (mod J*K).  The coupling sum over each sector runs in
    ascending j.
    """
    X, Y = state.X, state.Y
    K, J, JK = cfg.K, cfg.J, cfg.JK
    hcb = cfg.h * cfg.c / cfg.b
    adv = 1.0 if cfg.advection else 0.0

    Ysec = Y.reshape(K, J)
    cs = np.zeros(K)
    for j in range(J):
        cs += Ysec[:, j]
    xm1, xm2, xp1 = np.roll(X, 1), np.roll(X, 2), np.roll(X, -1)
    dX = adv * (-xm1 * (xm2 - xp1)) - X + cfg.F - hcb * cs

    yp1, yp2, ym1 = np.roll(Y, -1), np.roll(Y, -2), np.roll(Y, 1)
    Xrep = np.repeat(X, J)
    dY = adv * (-cfg.c * cfg.b * yp1 * (yp2 - ym1)) - cfg.c * Y + hcb * Xrep
    return TruthState(dX, dY)


def rk4_step(state, cfg, dt):
    """Classical RK4 update of both tiers simultaneously.

    Raises :class:`BlowUpError` if the result is non-finite or exceeds the
    amplitude limit.
    """
    if dt < 0:
        raise ValueError("dt must be >= 0")
    k1 = truth_tendency(state, cfg)
    s2 = TruthState(state.X + 0.5 * dt * k1.X, state.Y + 0.5 * dt * k1.Y)
    k2 = truth_tendency(s2, cfg)
    s3 = TruthState(state.X + 0.5 * dt * k2.X, state.Y + 0.5 * dt * k2.Y)
    k3 = truth_tendency(s3, cfg)
    s4 = TruthState(state.X + dt * k3.X, state.Y + dt * k3.Y)
    k4 = truth_tendency(s4, cfg)
    X = state.X + dt / 6.0 * (k1.X + 2.0 * k2.X + 2.0 * k3.X + k4.X)
    Y = state.Y + dt / 6.0 * (k1.Y + 2.0 * k2.Y + 2.0 * k3.Y + k4.Y)
    if not (np.all(np.abs(X) <= BLOWUP_LIMIT) and np.all(np.abs(Y) <= BLOWUP_LIMIT)):
        raise BlowUpError(dt, 1)
    return TruthState(X, Y)


def generate_truth(cfg, duration, dt_inner=0.001, dt_save=0.005, init=None,
                   burn_in=10.0, seed=0):
    """Integrate the two-tier system and save X every dt_save.

    Parameters
    ----------
    cfg : L96Config
    duration : float
        Length of the saved record in MTU (burn-in excluded).
    dt_inner : float
        RK4 time step; dt_save must be an integer multiple of it.
    init : TruthState, optional
        Starting state; defaults to :func:`default_init` with ``seed``.
    burn_in : float
        MTU integrated and discarded before saving starts.

    Deterministic given (cfg, init): rerunning reproduces the trajectory
    bit for bit on the same platform.
    """
    save_every = int(round(dt_save / dt_inner))
    if abs(save_every * dt_inner - dt_save) > 1e-9 * dt_save or save_every < 1:
        raise ValueError("dt_save must be an integer multiple of dt_inner")
    if duration < dt_save:
        raise ValueError("duration must be >= dt_save")
    if init is None:
        init = default_init(cfg, seed)
    n_burn = int(round(burn_in / dt_inner))
    n_main = int(round(duration / dt_inner))

    out, steps_done, ok = _kernels.truth_run(
        init.X.astype(float), init.Y.astype(float),
        cfg.h, cfg.b, cfg.c, cfg.F, 1.0 if cfg.advection else 0.0,
        dt_inner, n_burn, n_main, save_every, BLOWUP_LIMIT)
    if not ok:
        raise BlowUpError((steps_done + 1) * dt_inner - burn_in, steps_done, "truth run")
    meta = {"dt_inner": dt_inner, "burn_in": burn_in,
            "config": asdict(cfg), "init": "uniform(-5,5)/Y=0" if init is None else "explicit"}
    return Trajectory(out, cfg.F, dt_save, seed=seed, t0=0.0, meta=meta)


def lambda_tendency(x, F, dt):
    """Single-level L96 Euler increment: dt * (-x_{k-1}(x_{k-2} - x_{k+1}) - x_k + F).

    Vectorized over leading axes; the last axis is the cyclic k axis.
    """
    xm1 = np.roll(x, 1, axis=-1)
    xm2 = np.roll(x, 2, axis=-1)
    xp1 = np.roll(x, -1, axis=-1)
    return dt * (-xm1 * (xm2 - xp1) - x + F)


def rk2_omega(x, F, dt):
    """Second-order Runge-Kutta (midpoint) increment of the single-level system.

    omega(x) = lambda(x + lambda(x)/2); the deterministic transport shared by
    every forecast model.
    """
    lam = lambda_tendency(x, F, dt)
    return lambda_tendency(x + lam / 2.0, F, dt)


def save_trajectory(traj, path, provenance=None):
    """Write a trajectory as binary (little-endian) plus a JSON sidecar.

    Layout: magic "L96D", format version u32, K u32, T u64, F f64,
    dt_save f64, seed u64, then T*K f64 values row-major (time-major).
    The sidecar at ``path + ".json"`` repeats the header fields and adds
    provenance (generator version, burn-in, inner step, ...).
    """
    path = str(path)
    data = np.ascontiguousarray(traj.data, dtype="<f8")
    header = _TRAJ_HEADER.pack(TRAJ_MAGIC, TRAJ_FORMAT_VERSION, traj.K,
                               traj.T, traj.F, traj.dt_save, traj.seed)
    with open(path, "wb") as f:
        f.write(header)
        f.write(data.tobytes())

    from . import __version__
    side = {
        "format_version": TRAJ_FORMAT_VERSION,
        "K": traj.K, "T": traj.T, "F": traj.F,
        "dt_save": traj.dt_save, "seed": traj.seed, "t0": traj.t0,
        "provenance": {"generator": f"l96lab {__version__}", **traj.meta,
                       **(provenance or {})},
    }
    with open(path + ".json", "w") as f:
        json.dump(side, f, indent=1)
        f.write("\n")


def load_trajectory(path):
    """Read a trajectory written by :func:`save_trajectory`.

    The sidecar is optional; without it t0 defaults to 0 and meta is empty.
    """
    path = str(path)
    with open(path, "rb") as f:
        header = f.read(_TRAJ_HEADER.size)
        if len(header) < _TRAJ_HEADER.size:
            raise ValueError(f"{path}: truncated header")
        magic, version, K, T, F, dt_save, seed = _TRAJ_HEADER.unpack(header)
        if magic != TRAJ_MAGIC:
            raise ValueError(f"{path}: not a L96D trajectory file")
        if version != TRAJ_FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported format version {version}")
        raw = f.read(T * K * 8)
    if len(raw) != T * K * 8:
        raise ValueError(f"{path}: truncated data section")
    data = np.frombuffer(raw, dtype="<f8").reshape(T, K).copy()

    t0, meta = 0.0, {}
    try:
        with open(path + ".json") as f:
            side = json.load(f)
        t0 = side.get("t0", 0.0)
        meta = side.get("provenance", {})
    except FileNotFoundError:
        pass
    return Trajectory(data, F, dt_save, seed=seed, t0=t0, meta=meta)
