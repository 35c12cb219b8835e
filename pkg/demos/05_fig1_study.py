#!/usr/bin/env python3
"""The desk-scale convergence study on the damped oscillator.

Five schemes, h in {0.008, 0.016, 0.032}, three seeds each. The full run
trains 45 networks (over an hour on one core). --quick runs a small
version with the same layout; it is too short for the slopes to emerge and
only exercises the pipeline.
"""
import sys
from pathlib import Path

from lmmdisc.cli import ExperimentSpec, assess_study, run_study

spec = ExperimentSpec.from_json(Path(__file__).with_name("fig1_desk.json"))
if "--quick" in sys.argv:
    spec = ExperimentSpec.from_dict({**spec.to_dict(), "n_traj": 50, "epochs": 1000, "runs": 1,
                                     "hidden": [32, 32], "n_eval": 1000})
rows = run_study(spec, 0, Path("fig1_out"), imde_K=spec.imde_K)

print(f"{'scheme':6s} {'h':>6s} {'err_f':>10s} {'err_imde':>10s} {'sqrt loss':>10s} {'order':>6s}")
for r in rows:
    o = "" if r["order"] is None else f"{r['order']:.3f}"
    print(f"{r['scheme']:6s} {r['h']:6g} {r['error_f']:10.3e} {r['error_imde']:10.3e} "
          f"{r['test_loss_sqrt']:10.3e} {o:>6s}")
for name, ok, note in assess_study(rows):
    print("PASS" if ok else "FAIL", name, note)
