"""Command-line driver: data generation, training and convergence studies.

One JSON experiment file describes the system, schemes, step sizes, data
sizes, network and optimizer; flags override single fields. Every command
writes CSV/JSON artifacts plus a ``run.json`` whose id is a hash of the
inputs, so two runs of the same spec and seed produce identical files.

Exit codes: 0 ok, 1 input error, 2 divergence, 3 assertion failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .dynamics import (Dataset, DivergenceError, GlycolyticParams, constant_field,
                       damped_oscillator, generate_dataset, glycolytic, lorenz,
                       rk4_trajectory, sample_box, window_trajectory, write_trajectory_csv)
from .imde import TruncatedImde, residual, xi_coefficients, xi_series
from .jets import SingularityError, VectorField
from .lmm import SCHEME_NAMES, SchemeError, catalog, schemes_to_json, validate
from .model import Mlp, mlp_new
from .train import (LossError, RegularizerConfig, TrainConfig, convergence_orders,
                    error_metric, fit_normalization, lmm_loss, train)

__all__ = [
    "SpecError",
    "ExperimentSpec",
    "CellResult",
    "METRIC_COLUMNS",
    "build_field",
    "build_data",
    "run_cell",
    "run_study",
    "assess_study",
    "write_metrics_csv",
    "read_metrics_csv",
    "main",
]

log = logging.getLogger("lmmdisc")

METRIC_COLUMNS = ["scheme", "M", "h", "test_loss_sqrt", "error_f", "error_imde", "order"]
SYSTEMS = ("damped_oscillator", "lorenz", "glycolytic", "constant")
LORENZ_Y0 = (-0.8, 0.7, 2.7)

EXIT_OK, EXIT_INPUT, EXIT_DIVERGED, EXIT_ASSERT = 0, 1, 2, 3


class SpecError(ValueError):
    """Malformed experiment file or flag."""


@dataclass
class ExperimentSpec:
    """Everything needed to reproduce a study. Parsed from one JSON file.

    The oscillator, glycolytic and constant systems sample initial states
    in ``box``; Lorenz follows a single trajectory from ``y0`` over
    ``[0, t_end]`` and is tested on windows spaced ``test_h`` apart.
    """

    system: str = "damped_oscillator"
    params: dict | None = None
    schemes: list = field(default_factory=lambda: ["AB1"])
    h: list = field(default_factory=lambda: [0.008, 0.016, 0.032])
    n_traj: int = 300
    n_test_traj: int = 100
    n_steps: int = 10
    t_end: float | None = None
    y0: list | None = None
    test_h: float = 0.002
    box: list | None = None
    eval_box: list | None = None
    n_eval: int = 10_000
    substeps_per_h: int = 100
    hidden: list = field(default_factory=lambda: [64, 64])
    normalize: bool = True
    epochs: int = 20_000
    lr_start: float = 1e-2
    lr_end: float = 1e-4
    batch: int | None = None
    log_every: int = 100
    regularizer: dict | None = None
    imde_K: int | None = 4
    runs: int = 1
    dataset: str | None = None
    test_dataset: str | None = None

    def __post_init__(self):
        if self.system not in SYSTEMS:
            raise SpecError(f"unknown system {self.system!r}; choose from {SYSTEMS}")
        for s in self.schemes:
            if s not in SCHEME_NAMES:
                raise SpecError(f"unknown scheme {s!r}; catalog has {list(SCHEME_NAMES)}")
        self.h = [float(v) for v in self.h]
        if not self.h or min(self.h) <= 0:
            raise SpecError("step sizes must be positive")
        if self.runs < 1 or self.n_traj < 1 or self.n_steps < 1:
            raise SpecError("runs, n_traj and n_steps must be >= 1")
        if self.system == "glycolytic" and self.params is None:
            raise SpecError("glycolytic system needs 'params' (inline dict or a JSON file path)")
        if self.system == "constant" and (self.params is None or "c" not in self.params):
            raise SpecError("constant system needs params {'c': [...]}")
        if self.system == "lorenz":
            self.t_end = 10.0 if self.t_end is None else float(self.t_end)
            self.y0 = list(LORENZ_Y0) if self.y0 is None else list(self.y0)
        elif self.system == "glycolytic" and self.t_end is not None:
            self.t_end = float(self.t_end)
        if self.box is None and self.system == "damped_oscillator":
            self.box = [[-2.2, 2.2], [-2.2, 2.2]]
        if self.eval_box is None and self.system == "damped_oscillator":
            self.eval_box = [[-2.0, 2.0], [-2.0, 2.0]]
        if self.system != "lorenz" and self.box is None and self.dataset is None:
            raise SpecError(f"{self.system}: 'box' of initial states is required")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise SpecError(f"unknown spec keys: {sorted(extra)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise SpecError(str(exc)) from None

    @classmethod
    def from_json(cls, path) -> "ExperimentSpec":
        path = Path(path)
        if not path.is_file():
            raise SpecError(f"spec file not found: {path}")
        try:
            d = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise SpecError(f"{path}: invalid JSON ({exc})") from None
        spec = cls.from_dict(d)
        if isinstance(spec.params, str):
            p = Path(spec.params)
            spec.params = json.loads((p if p.is_absolute() else path.parent / p).read_text())
        for key in ("dataset", "test_dataset"):
            v = getattr(spec, key)
            if v is not None and not Path(v).is_absolute():
                setattr(spec, key, str(path.parent / v))
        return spec

    def to_dict(self) -> dict:
        return asdict(self)

    def train_config(self, scheme, seed: int) -> TrainConfig:
        reg = None
        if self.regularizer is not None:
            r = dict(self.regularizer)
            grid = r.pop("grid", None)
            if grid is None and self.eval_box is not None:
                grid = _lattice(self.eval_box, int(r.pop("grid_n", 5)))
            r.pop("grid_n", None)
            reg = RegularizerConfig(grid=np.zeros((0, 0)) if grid is None else grid, **r)
        return TrainConfig(scheme, self.epochs, self.lr_start, self.lr_end, self.batch, seed,
                           self.log_every, reg)


def _lattice(box, n: int) -> np.ndarray:
    axes = [np.linspace(lo, hi, n) for lo, hi in box]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(box))


def build_field(spec: ExperimentSpec) -> VectorField:
    if spec.system == "damped_oscillator":
        return damped_oscillator()
    if spec.system == "lorenz":
        return lorenz()
    if spec.system == "glycolytic":
        return glycolytic(GlycolyticParams.from_dict(spec.params))
    return constant_field(spec.params["c"])


def _n_steps(t_end: float, h: float) -> int:
    # floor(t_end / h) with slack for binary fractions like 10 / 0.002
    return int(math.floor(t_end / h + 1e-9))


@dataclass
class CellData:
    """Train/test windows for one (h, seed) plus the evaluation point set."""

    train: Dataset
    test: Dataset
    T: np.ndarray
    train_traj: np.ndarray
    test_traj: np.ndarray


def _trajectories(spec, f, h, seed):
    """Raw train/test trajectories, shape ``(n, steps+1, D)``."""
    if spec.system == "lorenz":
        n = _n_steps(spec.t_end, h)
        tr = rk4_trajectory(f, spec.y0, h, n, spec.substeps_per_h)[None]
        ratio = h / spec.test_h
        if abs(ratio - round(ratio)) > 1e-9:
            raise SpecError(f"h={h} must be a multiple of test_h={spec.test_h}")
        fine_steps = _n_steps(spec.t_end, spec.test_h)
        sub = max(20, int(math.ceil(spec.substeps_per_h / round(ratio))))
        te = rk4_trajectory(f, spec.y0, spec.test_h, fine_steps, sub)[None]
        return tr, te
    steps = spec.n_steps if spec.t_end is None else _n_steps(spec.t_end, h)
    pts = sample_box(spec.box, spec.n_traj + spec.n_test_traj, seed)
    _, tr = generate_dataset(f, pts[:spec.n_traj], 1, h, steps, spec.substeps_per_h,
                             return_trajectories=True)
    te = np.zeros((0, steps + 1, f.dim))
    if spec.n_test_traj:
        _, te = generate_dataset(f, pts[spec.n_traj:], 1, h, steps, spec.substeps_per_h,
                                 return_trajectories=True)
    return tr, te


def _windows(traj, M, h) -> Dataset:
    return Dataset.concat(window_trajectory(t, M, h) for t in traj)


def _lorenz_test(spec, fine, M, h) -> Dataset:
    """Windows ``(x_n, phi_h(x_n), ..)`` with ``x_n`` every ``test_h`` along the fine path."""
    r = int(round(h / spec.test_h))
    n = len(fine) - M * r
    idx = np.arange(n)[:, None] + r * np.arange(M + 1)[None, :]
    return Dataset(fine[idx], h)


def build_data(spec: ExperimentSpec, f: VectorField, h: float, M: int, seed: int,
               cache: dict | None = None) -> CellData:
    key = (h, seed)
    if cache is not None and key in cache:
        tr, te = cache[key]
    else:
        tr, te = _trajectories(spec, f, h, seed)
        if cache is not None:
            cache[key] = (tr, te)
    train_ds = _windows(tr, M, h)
    if spec.system == "lorenz":
        test_ds = _lorenz_test(spec, te[0], M, h)
        T = test_ds.initial_states()
    else:
        test_ds = _windows(te, M, h) if len(te) else train_ds
        if spec.eval_box is not None:
            lo, hi = np.asarray(spec.eval_box, dtype=float).T
            T = np.random.default_rng([seed, 0x7e57]).uniform(lo, hi, (spec.n_eval, f.dim))
        else:
            T = test_ds.initial_states()
    return CellData(train_ds, test_ds, T, tr, te)


@dataclass
class CellResult:
    scheme: str
    M: int
    h: float
    seed: int
    test_loss: float = float("nan")
    error_f: float = float("nan")
    error_imde: float = float("nan")
    diverged: bool = False
    net: Mlp | None = None
    history: list = field(default_factory=list)


def run_cell(spec: ExperimentSpec, scheme_name: str, h: float, seed: int,
             imde_K: int | None = None, data: CellData | None = None,
             cache: dict | None = None) -> CellResult:
    """Train one network for (scheme, h, seed) and evaluate it."""
    scheme = catalog(scheme_name)
    f = build_field(spec)
    if data is None:
        data = build_data(spec, f, h, scheme.M, seed, cache)
    res = CellResult(scheme_name, scheme.M, h, seed)
    norm = fit_normalization(data.train) if spec.normalize else {}
    net = mlp_new([f.dim, *spec.hidden, f.dim], seed, **norm)
    try:
        net, res.history = train(spec.train_config(scheme, seed), net, data.train)
    except DivergenceError as exc:
        log.warning("%s h=%g seed=%d diverged: %s", scheme_name, h, seed, exc)
        res.diverged = True
        return res
    res.net = net
    res.test_loss = lmm_loss(scheme, net, data.test)
    pred = net(data.T)
    res.error_f = error_metric(pred, f, data.T)
    if imde_K is not None and f.liftable:
        res.error_imde = error_metric(pred, TruncatedImde(scheme, f, imde_K).at_step(h), data.T)
    log.info("%s h=%g seed=%d test_loss=%.3e err_f=%.3e err_imde=%.3e", scheme_name, h, seed,
             res.test_loss, res.error_f, res.error_imde)
    return res


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_metrics_csv(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRIC_COLUMNS)
        for r in rows:
            w.writerow([_fmt(r.get(c)) for c in METRIC_COLUMNS])


def read_metrics_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if rows and list(rows[0]) != METRIC_COLUMNS:
        raise ValueError(f"{path}: unexpected columns {list(rows[0])}")
    out = []
    for r in rows:
        d = {"scheme": r["scheme"], "M": int(r["M"])}
        for c in METRIC_COLUMNS[2:]:
            d[c] = float(r[c]) if r[c] != "" else None
        out.append(d)
    return out


def write_history_csv(path, history) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "loss", "lr"])
        for e, loss, lr in history:
            w.writerow([e, repr(float(loss)), repr(float(lr))])


def run_id(payload: dict) -> str:
    blob = json.dumps(payload, sort_keys=True, default=_jsonable)
    return hashlib.sha1(blob.encode()).hexdigest()[:12]


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"not serializable: {type(o)}")


def write_run_json(out: Path, command: str, spec: ExperimentSpec | None, seed, extra=None):
    payload = {"command": command, "seed": seed,
               "spec": None if spec is None else spec.to_dict(), **(extra or {})}
    meta = {"run_id": run_id(payload), "version": __version__, "workers": 1, **payload}
    (out / "run.json").write_text(json.dumps(meta, indent=2, sort_keys=True,
                                             default=_jsonable) + "\n")
    return meta["run_id"]


def _doubling(hs) -> list[float]:
    hs = sorted(hs)
    if len(hs) < 3:
        raise SpecError(f"a study needs >= 3 step sizes in doubling progression, got {hs}")
    if not np.allclose(np.array(hs[1:]) / np.array(hs[:-1]), 2.0, rtol=1e-9, atol=0):
        raise SpecError(f"step sizes must double: {hs}")
    return hs


def run_study(spec: ExperimentSpec, seed: int, out: Path | None = None,
              imde_K: int | None = None) -> list[dict]:
    """Train every (scheme, h, run) cell; average runs; add per-scheme orders.

    Run r uses seed ``seed + r`` for both data and initialization. Diverged
    cells are dropped from the average; a cell where every run diverged gets
    NaN metrics and is flagged in the log.
    """
    hs = _doubling(spec.h)
    f = build_field(spec)
    cache: dict = {}
    rows = []
    for name in spec.schemes:
        scheme = catalog(name)
        sub = []
        for h in hs:
            cells = []
            for r in range(spec.runs):
                res = run_cell(spec, name, h, seed + r, imde_K, cache=cache)
                cells.append(res)
                if out is not None:
                    cdir = out / name / f"h={h:g}" / f"seed={seed + r}"
                    cdir.mkdir(parents=True, exist_ok=True)
                    write_history_csv(cdir / "loss_history.csv", res.history)
                    if res.net is not None:
                        res.net.save(cdir / "model.json")
                    write_metrics_csv(cdir / "metrics.csv", [_row(res)])
            ok = [c for c in cells if not c.diverged]
            if not ok:
                log.warning("%s h=%g: all %d runs diverged (row flagged)", name, h, len(cells))
            row = {"scheme": name, "M": scheme.M, "h": h,
                   "test_loss_sqrt": _mean([math.sqrt(c.test_loss) for c in ok]),
                   "error_f": _mean([c.error_f for c in ok]),
                   "error_imde": _mean([c.error_imde for c in ok]) if imde_K is not None else None,
                   "order": None, "diverged": len(cells) - len(ok)}
            sub.append(row)
        errs = [r["error_f"] for r in sub]
        for i, o in enumerate(convergence_orders(errs, hs), start=1):
            sub[i]["order"] = float(o)
        rows += sub
    if out is not None:
        write_metrics_csv(out / "metrics.csv", rows)
    return rows


def _mean(vals) -> float:
    return float(np.mean(vals)) if vals else float("nan")


def _row(res: CellResult) -> dict:
    return {"scheme": res.scheme, "M": res.M, "h": res.h,
            "test_loss_sqrt": math.sqrt(res.test_loss) if res.test_loss == res.test_loss else
            float("nan"), "error_f": res.error_f,
            "error_imde": res.error_imde if res.error_imde == res.error_imde else None,
            "order": None}


def assess_study(rows) -> list[tuple[str, bool, str]]:
    """Order-slope and IMDE-separation checks on a study table.

    Order-1 schemes: every consecutive order within 1 +/- 0.3, and at the
    largest h ``error_imde < error_f / 3``. Order >= 2 schemes: orders of
    pairs whose errors both exceed 3 sqrt(test loss) within p +/- 0.5.
    """
    checks = []
    for name in dict.fromkeys(r["scheme"] for r in rows):
        sub = sorted((r for r in rows if r["scheme"] == name), key=lambda r: r["h"])
        p = validate(catalog(name)).order
        orders = [r["order"] for r in sub[1:]]
        if p == 1:
            ok = all(o is not None and abs(o - 1.0) <= 0.3 for o in orders)
            checks.append((f"{name} slope 1+/-0.3", ok, _orders_str(orders)))
            last = sub[-1]
            if last.get("error_imde") is not None:
                ok = last["error_imde"] < last["error_f"] / 3
                checks.append((f"{name} imde separation at h={last['h']:g}", ok,
                               f"err_imde={last['error_imde']:.3e} err_f={last['error_f']:.3e}"))
        else:
            gated = [r["order"] for a, r in zip(sub, sub[1:])
                     if min(a["error_f"], r["error_f"]) > 3 * max(a["test_loss_sqrt"],
                                                                   r["test_loss_sqrt"])]
            ok = all(abs(o - p) <= 0.5 for o in gated)
            note = _orders_str(gated) if gated else "no pair above the 3*sqrt(loss) floor"
            checks.append((f"{name} slope {p}+/-0.5 above loss floor", ok, note))
    return checks


def _orders_str(orders) -> str:
    return "orders=[" + ", ".join("nan" if o is None else f"{o:.3f}" for o in orders) + "]"


# ----------------------------------------------------------------------------- commands


def _floats(s: str) -> list[float]:
    try:
        return [float(v) for v in s.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma separated list of numbers: {s!r}")


def _load_spec(args) -> ExperimentSpec:
    if args.spec is None:
        raise SpecError("--spec is required")
    spec = ExperimentSpec.from_json(args.spec)
    if getattr(args, "scheme", None):
        spec.schemes = list(args.scheme)
        ExperimentSpec.__post_init__(spec)
    if getattr(args, "h", None):
        spec.h = list(args.h)
    return spec


def _out_dir(args) -> Path:
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_schemes(args) -> int:
    if args.json:
        print(schemes_to_json())
        return EXIT_OK
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["name", "M", "explicit", "consistent", "weakly_stable", "order"])
    for name in SCHEME_NAMES:
        s = catalog(name)
        rep = validate(s)
        w.writerow([name, s.M, s.explicit, rep.consistent, rep.weakly_stable, rep.order])
    return EXIT_OK


def cmd_xi(args) -> int:
    if not args.scheme or len(args.scheme) != 1:
        raise SpecError("xi needs exactly one --scheme")
    K = 6 if args.K is None else args.K
    s = catalog(args.scheme[0])
    xis = xi_coefficients(s, K).xis
    ser = xi_series(s, K)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["scheme", "k", "xi", "xi_oracle", "abs_diff"])
    for k in range(K + 1):
        w.writerow([s.name, k, repr(float(xis[k])), repr(float(ser[k])),
                    repr(float(abs(xis[k] - ser[k])))])
    return EXIT_OK


def cmd_gen_data(args) -> int:
    spec = _load_spec(args)
    out = _out_dir(args)
    f = build_field(spec)
    Ms = sorted({catalog(s).M for s in spec.schemes})
    for h in spec.h:
        hdir = out / f"h={h:g}"
        tr, te = _trajectories(spec, f, h, args.seed)
        for tag, traj in (("train", tr), ("test", te)):
            tdir = hdir / tag
            tdir.mkdir(parents=True, exist_ok=True)
            step = spec.test_h if (spec.system == "lorenz" and tag == "test") else h
            for i, t in enumerate(traj):
                write_trajectory_csv(tdir / f"traj_{i:04d}.csv", step * np.arange(len(t)), t)
        for M in Ms:
            _windows(tr, M, h).save(hdir / f"train_M{M}.json")
            if spec.system == "lorenz":
                _lorenz_test(spec, te[0], M, h).save(hdir / f"test_M{M}.json")
            elif len(te):
                _windows(te, M, h).save(hdir / f"test_M{M}.json")
    write_run_json(out, "gen-data", spec, args.seed)
    return EXIT_OK


def _load_dataset(path) -> Dataset:
    p = Path(path)
    if not p.is_file():
        raise SpecError(f"dataset file not found: {p}")
    return Dataset.load(p)


def cmd_train(args) -> int:
    spec = _load_spec(args)
    if len(spec.schemes) != 1 or len(spec.h) != 1:
        raise SpecError("train runs one cell: give a single --scheme and --h")
    name, h = spec.schemes[0], spec.h[0]
    f = build_field(spec)
    K = args.K if args.K is not None else None
    data = None
    if spec.dataset is not None:
        train_ds = _load_dataset(spec.dataset)
        test_ds = _load_dataset(spec.test_dataset) if spec.test_dataset else train_ds
        h = train_ds.h
        if spec.eval_box is not None:
            lo, hi = np.asarray(spec.eval_box, dtype=float).T
            T = np.random.default_rng([args.seed, 0x7e57]).uniform(lo, hi, (spec.n_eval, f.dim))
        else:
            T = test_ds.initial_states()
        data = CellData(train_ds, test_ds, T, None, None)
    res = run_cell(spec, name, h, args.seed, K, data=data)
    out = _out_dir(args)
    write_history_csv(out / "loss_history.csv", res.history)
    write_metrics_csv(out / "metrics.csv", [_row(res)])
    if res.diverged:
        write_run_json(out, "train", spec, args.seed, {"K": K, "diverged": True})
        return EXIT_DIVERGED
    res.net.save(out / "model.json")
    write_run_json(out, "train", spec, args.seed, {"K": K})
    print(f"{name} h={h:g} final_loss={res.history[-1][1]:.6e} test_loss={res.test_loss:.6e} "
          f"error_f={res.error_f:.6e}" + (f" error_imde={res.error_imde:.6e}" if K is not None
                                          else ""))
    return EXIT_OK


def cmd_study(args) -> int:
    spec = _load_spec(args)
    K = args.K if args.K is not None else spec.imde_K
    out = _out_dir(args)
    rows = run_study(spec, args.seed, out, K)
    write_run_json(out, "study", spec, args.seed, {"K": K})
    for r in rows:
        print(",".join(_fmt(r.get(c)) for c in METRIC_COLUMNS))
    diverged = any(r["diverged"] for r in rows)
    if args.check:
        checks = assess_study(rows)
        for label, ok, note in checks:
            print(f"{'PASS' if ok else 'FAIL'} {label}: {note}")
        if not all(ok for _, ok, _ in checks):
            return EXIT_ASSERT
    return EXIT_DIVERGED if diverged else EXIT_OK


def cmd_residual(args) -> int:
    if not args.scheme:
        raise SpecError("residual needs --scheme")
    K = 0 if args.K is None else args.K
    hs = args.h or [0.02, 0.01, 0.005]
    if args.spec is not None:
        spec = ExperimentSpec.from_json(args.spec)
        f = build_field(spec)
    else:
        f = {"damped_oscillator": damped_oscillator, "lorenz": lorenz}[args.system]()
    x = np.asarray(args.x if args.x is not None else [2.0, 0.0] + [0.0] * (f.dim - 2))
    if x.shape != (f.dim,):
        raise SpecError(f"--x needs {f.dim} components")
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["scheme", "K", "h", "residual_l1", "slope"])
    for name in args.scheme:
        s = catalog(name)
        imde = TruncatedImde(s, f, K)
        prev = None
        for h in sorted(hs, reverse=True):
            r = float(np.sum(np.abs(residual(s, f, imde, x, h))))
            slope = "" if prev is None or prev[1] == 0 or r == 0 else \
                repr(float(np.log(prev[1] / r) / np.log(prev[0] / h)))
            w.writerow([name, K, repr(h), repr(r), slope])
            prev = (h, r)
    return EXIT_OK


def cmd_predict(args) -> int:
    p = Path(args.checkpoint or "")
    if not p.is_file():
        raise SpecError(f"checkpoint not found: {p}")
    net = Mlp.load(p)
    if args.x0 is None or len(args.x0) != net.dims[0]:
        raise SpecError(f"--x0 needs {net.dims[0]} components")
    steps = args.substeps
    traj = rk4_trajectory(net.as_field(), args.x0, args.T / steps, steps, 1)
    t = (args.T / steps) * np.arange(steps + 1)
    if args.out:
        out = _out_dir(args)
        write_trajectory_csv(out / "trajectory.csv", t, traj)
    else:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(["t"] + [f"x{i}" for i in range(traj.shape[1])])
        for ti, s in zip(t, traj):
            w.writerow([repr(float(ti))] + [repr(float(v)) for v in s])
    return EXIT_OK


COMMANDS = {
    "schemes": cmd_schemes,
    "xi": cmd_xi,
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "study": cmd_study,
    "residual": cmd_residual,
    "predict": cmd_predict,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--spec", help="experiment JSON file")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", help="output directory")
    common.add_argument("--scheme", action="append",
                        help="scheme id (repeatable or comma separated)")
    common.add_argument("--h", type=_floats, help="step sizes, comma separated")
    common.add_argument("--K", "--imde-K", dest="K", type=int, help="IMDE truncation index")
    common.add_argument("--assert", dest="check", action="store_true",
                        help="exit 3 when acceptance thresholds fail")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="lmmdisc", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[common])
        if name == "schemes":
            sp.add_argument("--json", action="store_true")
        if name == "residual":
            sp.add_argument("--system", choices=["damped_oscillator", "lorenz"],
                            default="damped_oscillator")
            sp.add_argument("--x", type=_floats, help="base point")
        if name == "predict":
            sp.add_argument("--checkpoint")
            sp.add_argument("--x0", type=_floats)
            sp.add_argument("--T", type=float, default=10.0)
            sp.add_argument("--substeps", type=int, default=1000)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.scheme:
        args.scheme = [s for item in args.scheme for s in item.split(",") if s]
    try:
        return COMMANDS[args.command](args)
    except (DivergenceError, SingularityError) as exc:
        print(f"error: divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (SpecError, SchemeError, LossError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
