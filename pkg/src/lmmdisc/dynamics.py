"""Benchmark systems, RK4 reference flows and windowed trajectory datasets."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .jets import SingularityError, VectorField

__all__ = [
    "DivergenceError",
    "TrajectoryWindow",
    "Dataset",
    "GlycolyticParams",
    "damped_oscillator",
    "lorenz",
    "glycolytic",
    "constant_field",
    "linear_field",
    "rk4_flow",
    "rk4_trajectory",
    "sample_box",
    "generate_dataset",
    "window_trajectory",
    "write_trajectory_csv",
    "read_trajectory_csv",
]

log = logging.getLogger(__name__)

DATA_SUBSTEPS = 100


class DivergenceError(ArithmeticError):
    """Integration produced a non-finite state."""


def damped_oscillator() -> VectorField:
    def rhs(y):
        p, q = y
        return [-0.1 * p**3 + 2.0 * q**3, -2.0 * p**3 - 0.1 * q**3]

    return VectorField(2, rhs, "damped_oscillator")


def lorenz() -> VectorField:
    def rhs(y):
        p, q, r = y
        return [10.0 * (q - p), p * (28.0 - 10.0 * r) - q, 10.0 * p * q - (8.0 / 3.0) * r]

    return VectorField(3, rhs, "lorenz")


def constant_field(c) -> VectorField:
    c = [float(v) for v in c]
    return VectorField(len(c), lambda y: list(c), "constant")


def linear_field(A) -> VectorField:
    A = np.asarray(A, dtype=float)

    def rhs(y):
        return [sum(A[i, j] * y[j] for j in range(len(y))) for i in range(A.shape[0])]

    return VectorField(A.shape[0], rhs, "linear")


@dataclass(frozen=True)
class GlycolyticParams:
    """Rate constants of the 7-species yeast glycolysis model.

    No defaults: values come from the literature and are supplied by the
    user (see ``demos/glycolytic_params.json`` for a commonly used set).
    """

    J0: float
    k1: float
    k2: float
    k3: float
    k4: float
    k5: float
    k6: float
    k: float
    kappa: float
    q: int
    K1: float
    psi: float
    N: float
    A: float

    def __post_init__(self):
        q = self.q
        if isinstance(q, float) and q.is_integer():
            object.__setattr__(self, "q", int(q))
        if not isinstance(self.q, (int, np.integer)) or self.q < 1:
            raise ValueError(f"q must be a positive integer, got {q!r}")
        if not self.K1 > 0:
            raise ValueError("K1 must be positive")
        for f in fields(self):
            v = getattr(self, f.name)
            if not np.isfinite(v) or (f.name not in ("N", "A") and v < 0):
                raise ValueError(f"{f.name} must be finite and non-negative, got {v!r}")

    @classmethod
    def from_dict(cls, d: dict) -> "GlycolyticParams":
        names = {f.name for f in fields(cls)}
        missing = names - set(d)
        if missing:
            raise ValueError(f"glycolytic parameters missing: {sorted(missing)}")
        return cls(**{k: d[k] for k in names})

    @classmethod
    def from_json(cls, path) -> "GlycolyticParams":
        return cls.from_dict(json.loads(Path(path).read_text()))


def glycolytic(params: GlycolyticParams) -> VectorField:
    P = params

    def rhs(y):
        S1, S2, S3, S4, S5, S6, S7 = y
        denom = 1.0 + (S6 / P.K1) ** P.q
        if not hasattr(denom, "coeffs") and np.any(np.asarray(denom) == 0.0):
            raise SingularityError("glycolytic: 1 + (S6/K1)^q vanishes")
        v1 = P.k1 * S1 * S6 / denom
        v2 = P.k2 * S2 * (P.N - S5)
        v3 = P.k3 * S3 * (P.A - S6)
        v4 = P.k4 * S4 * S5
        v6 = P.k6 * S2 * S5
        leak = P.kappa * (S4 - S7)
        return [
            P.J0 - v1,
            2.0 * v1 - v2 - v6,
            v2 - v3,
            v3 - v4 - leak,
            v2 - v4 - v6,
            -2.0 * v1 + 2.0 * v3 - P.k5 * S6,
            P.psi * leak - P.k * S7,
        ]

    return VectorField(7, rhs, "glycolytic")


def _rk4_step(f, y, dt):
    k1 = f(y)
    k2 = f(y + 0.5 * dt * k1)
    k3 = f(y + 0.5 * dt * k2)
    k4 = f(y + dt * k3)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def rk4_flow(f: VectorField, x, t: float, substeps: int) -> np.ndarray:
    """Classical RK4 over ``[0, t]`` with `substeps` uniform steps.

    `x` may hold a batch of states, shape ``(..., D)``.
    """
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    y = np.array(x, dtype=float)
    if t == 0:
        return y
    dt = t / substeps
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(substeps):
            y = _rk4_step(f, y, dt)
    if not np.all(np.isfinite(y)):
        raise DivergenceError(f"{getattr(f, 'name', 'field')}: non-finite state after t={t}")
    return y


def rk4_trajectory(f: VectorField, x, h: float, n_steps: int, substeps_per_h: int,
                   allow_nonfinite: bool = False) -> np.ndarray:
    """States at ``t = 0, h, ..., n_steps*h``; shape ``(n_steps+1, ..., D)``.

    With `allow_nonfinite`, diverged batch members are left as NaN/inf
    rather than raising, so callers can drop them.
    """
    if substeps_per_h < 1:
        raise ValueError("substeps_per_h must be >= 1")
    y = np.array(x, dtype=float)
    out = np.empty((n_steps + 1,) + y.shape)
    out[0] = y
    dt = h / substeps_per_h
    with np.errstate(over="ignore", invalid="ignore"):
        for n in range(n_steps):
            for _ in range(substeps_per_h):
                y = _rk4_step(f, y, dt)
            out[n + 1] = y
    if not allow_nonfinite and not np.all(np.isfinite(out)):
        raise DivergenceError(f"{getattr(f, 'name', 'field')}: non-finite state")
    return out


@dataclass
class TrajectoryWindow:
    states: np.ndarray
    h: float

    @property
    def M(self) -> int:
        return len(self.states) - 1


@dataclass
class Dataset:
    """Homogeneous set of windows, stored as an array ``(N, M+1, D)``."""

    windows: np.ndarray
    h: float

    def __post_init__(self):
        w = np.asarray(self.windows, dtype=float)
        if w.ndim != 3 or w.shape[1] < 2:
            raise ValueError(f"windows must have shape (N, M+1, D) with M >= 1, got {w.shape}")
        self.windows = w
        self.h = float(self.h)

    @property
    def N(self) -> int:
        return self.windows.shape[0]

    @property
    def M(self) -> int:
        return self.windows.shape[1] - 1

    @property
    def dim(self) -> int:
        return self.windows.shape[2]

    def __len__(self):
        return self.N

    def __iter__(self):
        for w in self.windows:
            yield TrajectoryWindow(w, self.h)

    @classmethod
    def concat(cls, parts) -> "Dataset":
        parts = list(parts)
        if not parts:
            raise ValueError("nothing to concatenate")
        h, M, D = parts[0].h, parts[0].M, parts[0].dim
        for p in parts:
            if (p.h, p.M, p.dim) != (h, M, D):
                raise ValueError("datasets differ in h, M or dimension")
        return cls(np.concatenate([p.windows for p in parts]), h)

    def initial_states(self) -> np.ndarray:
        return self.windows[:, 0]

    def to_dict(self) -> dict:
        return {"dim": self.dim, "M": self.M, "h": self.h,
                "windows": self.windows.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Dataset":
        ds = cls(np.array(d["windows"], dtype=float), d["h"])
        if ds.dim != d["dim"] or ds.M != d["M"]:
            raise ValueError("dataset header disagrees with window shape")
        return ds

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "Dataset":
        return cls.from_dict(json.loads(Path(path).read_text()))


def window_trajectory(states, M: int, h: float) -> Dataset:
    """All maximal sliding windows of length M+1 along one trajectory."""
    states = np.asarray(states, dtype=float)
    if M < 1:
        raise ValueError("M must be >= 1")
    if len(states) < M + 1:
        raise ValueError(f"need at least M+1={M + 1} states, got {len(states)}")
    n = len(states) - M
    idx = np.arange(n)[:, None] + np.arange(M + 1)[None, :]
    return Dataset(states[idx], h)


def sample_box(box, n: int, seed: int) -> np.ndarray:
    """`n` points uniform in `box` (a list of ``(lo, hi)`` per dimension).

    Point i is drawn from its own generator seeded by ``(seed, i)``.
    """
    box = np.asarray(box, dtype=float)
    lo, hi = box[:, 0], box[:, 1]
    return np.array([np.random.default_rng([seed, i]).uniform(lo, hi) for i in range(n)])


def generate_dataset(f: VectorField, initials, M: int, h: float, n_steps: int = 10,
                     substeps_per_h: int = DATA_SUBSTEPS,
                     return_trajectories: bool = False):
    """Integrate each initial state for `n_steps` steps of size `h` and window it.

    Trajectories that diverge are dropped (and counted in the log).
    """
    if substeps_per_h < 20:
        raise ValueError("substeps_per_h must be >= 20 for data generation")
    initials = np.atleast_2d(np.asarray(initials, dtype=float))
    traj = rk4_trajectory(f, initials, h, n_steps, substeps_per_h, allow_nonfinite=True)
    traj = np.swapaxes(traj, 0, 1)  # (n_traj, n_steps+1, D)
    ok = np.all(np.isfinite(traj), axis=(1, 2))
    if not np.all(ok):
        log.warning("dropped %d diverged trajectories (%d windows)",
                    int((~ok).sum()), int((~ok).sum()) * (n_steps + 1 - M))
    traj = traj[ok]
    if len(traj) == 0:
        raise DivergenceError("every trajectory diverged")
    ds = Dataset.concat(window_trajectory(t, M, h) for t in traj)
    return (ds, traj) if return_trajectories else ds


def write_trajectory_csv(path, t, states) -> None:
    states = np.asarray(states, dtype=float)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"x{i}" for i in range(states.shape[1])])
        for ti, s in zip(t, states):
            w.writerow([repr(float(ti))] + [repr(float(v)) for v in s])


def read_trajectory_csv(path) -> tuple[np.ndarray, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header = rows[0]
    if not header or header[0] != "t" or header[1:] != [f"x{i}" for i in range(len(header) - 1)]:
        raise ValueError(f"{path}: expected header t,x0,...,x{{D-1}}")
    data = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float)
    t = data[:, 0]
    if np.any(np.diff(t) <= 0):
        raise ValueError(f"{path}: time column must be strictly increasing")
    return t, data[:, 1:]
