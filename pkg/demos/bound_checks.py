"""Hitting-time estimates on the three-mode chain.

Samples pairs of nearby starts, drives both with the same controls and checks
that differences in hitting times and hitting points stay below the
constant-based bounds. Also reports the separation below which all sampled
pairs hit the jump sets equally often.

    python3 demos/bound_checks.py [samples]
"""

import sys

from hybridreach import bound_suite, bundled, estimate_constants

samples = int(sys.argv[1]) if len(sys.argv) > 1 else 200
system = bundled("chain3").system
consts = estimate_constants(system)
print(f"F = {consts.F:.3g}  L = {consts.L:.3g}  G = {consts.G:.3g}  xi0 = {consts.xi0:.3g}  C = {consts.C:.3g}  P = {consts.P:.3g}")

report = bound_suite(system, samples=samples, seed=0, consts=consts)
for name, counts in report.to_dict(include_records=False)["counts"].items():
    tight = min((r.margin for r in report.records if r.name == name and r.passed), default=float("nan"))
    print(f"{name:>16s}  {counts}  smallest margin {tight:.3g}")
for q, h in enumerate(report.hit_count):
    print(f"hit counts (start mode {q}): {h.to_dict()}")
print("all bounds hold" if report.passed else "BOUND VIOLATED")
