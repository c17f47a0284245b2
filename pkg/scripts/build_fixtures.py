#!/usr/bin/env python3
"""Write the bundled fixture models and certify the properties tests rely on.

Every fixture is a small discrete SCM with hand-auditable CPTs.  After
building them, the script checks each one against exact enumeration and
refuses to write anything if a required property fails:

  s1         confounded A -> Y with ternary C; naive difference in means
             is off from the true ACE by more than 0.05
  s1_target  s1 with a shifted marginal of C
  s2         latent binary C with a 10%-flip proxy Cstar; adjusting for the
             proxy misses E[Y(a)] by more than 0.05
  s3         two-phase model with baseline L0, latent U0 and U1
  s4         null effect, U confounds L1 and Y, no baseline covariate;
             population regression contrast of Y on (A0, A1) exceeds 0.05
  s4_l0      null effect with baseline L0, identifiable by the sequential g-formula

usage: python3 scripts/build_fixtures.py [--check]
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from causalscope.identify import identify_sequential
from causalscope.longitudinal import Regime, regime_functional
from causalscope.scm import Mechanism, StructuralModel, exact_joint, true_counterfactual_mean

OUT = Path(__file__).resolve().parent.parent / "src" / "causalscope" / "fixtures"


def bern(p):
    return [round(1.0 - p, 6), round(p, 6)]


def table(parents_levels, fn):
    """CPT for a binary child: fn(*parent values) gives p(child = 1)."""
    out = np.zeros(tuple(parents_levels) + (2,))
    for idx in np.ndindex(*parents_levels):
        out[idx] = bern(fn(*idx))
    return out


def s1(pc=(0.5, 0.3, 0.2)):
    return StructuralModel([
        Mechanism("C", 3, (), np.array(pc)),
        Mechanism("A", 2, ("C",), table([3], lambda c: (0.2, 0.5, 0.8)[c])),
        Mechanism("Y", 2, ("A", "C"), table([2, 3], lambda a, c: (0.1, 0.3, 0.5)[c] + 0.2 * a)),
    ], observed=["A", "C", "Y"])


def s2():
    return StructuralModel([
        Mechanism("C", 2, (), np.array([0.5, 0.5])),
        Mechanism("Cstar", 2, ("C",), np.array([[0.9, 0.1], [0.1, 0.9]])),
        Mechanism("A", 2, ("C",), table([2], lambda c: (0.15, 0.85)[c])),
        Mechanism("Y", 2, ("A", "C"), table([2, 2], lambda a, c: 0.1 + 0.2 * a + 0.5 * c)),
    ], observed=["A", "Cstar", "Y"])


def s3():
    return StructuralModel([
        Mechanism("U0", 2, (), np.array(bern(0.5))),
        Mechanism("L0", 2, ("U0",), table([2], lambda u: (0.3, 0.7)[u])),
        Mechanism("A0", 2, ("L0",), table([2], lambda l: (0.3, 0.7)[l])),
        Mechanism("U1", 2, ("U0",), table([2], lambda u: (0.3, 0.7)[u])),
        Mechanism("L1", 2, ("A0", "L0", "U0", "U1"),
                  table([2] * 4, lambda a0, l0, u0, u1: 0.1 + 0.3 * a0 + 0.1 * l0 + 0.15 * u0 + 0.2 * u1)),
        Mechanism("A1", 2, ("A0", "L0", "L1"),
                  table([2] * 3, lambda a0, l0, l1: 0.15 + 0.2 * a0 + 0.15 * l0 + 0.35 * l1)),
        Mechanism("Y", 2, ("A0", "A1", "L0", "L1", "U1"),
                  table([2] * 5, lambda a0, a1, l0, l1, u1: 0.1 + 0.15 * a0 + 0.2 * a1 + 0.1 * l0 + 0.15 * l1 + 0.2 * u1)),
    ], observed=["A0", "A1", "L0", "L1", "Y"])


def s4():
    return StructuralModel([
        Mechanism("U", 2, (), np.array(bern(0.5))),
        Mechanism("A0", 2, (), np.array(bern(0.5))),
        Mechanism("L1", 2, ("A0", "U"), table([2, 2], lambda a0, u: 0.1 + 0.4 * a0 + 0.4 * u)),
        Mechanism("A1", 2, ("L1",), table([2], lambda l1: (0.2, 0.8)[l1])),
        Mechanism("Y", 2, ("U",), table([2], lambda u: (0.2, 0.8)[u])),
    ], observed=["A0", "A1", "L1", "Y"])


def s4_l0():
    return StructuralModel([
        Mechanism("U", 2, (), np.array(bern(0.5))),
        Mechanism("L0", 2, ("U",), table([2], lambda u: (0.3, 0.7)[u])),
        Mechanism("A0", 2, ("L0",), table([2], lambda l0: (0.3, 0.7)[l0])),
        Mechanism("L1", 2, ("A0", "L0", "U"), table([2] * 3, lambda a0, l0, u: 0.1 + 0.3 * a0 + 0.1 * l0 + 0.4 * u)),
        Mechanism("A1", 2, ("A0", "L0", "L1"), table([2] * 3, lambda a0, l0, l1: 0.15 + 0.2 * a0 + 0.15 * l0 + 0.35 * l1)),
        Mechanism("Y", 2, ("U",), table([2], lambda u: (0.2, 0.8)[u])),
    ], observed=["A0", "A1", "L0", "L1", "Y"])


DESCRIPTIONS = {
    "s1": "Confounded treatment: C -> A, C -> Y, A -> Y; ternary C.",
    "s1_target": "s1 with the marginal of C shifted (target population).",
    "s2": "Latent binary confounder C observed only through Cstar, which flips with probability 0.1.",
    "s3": "Two treatment phases with baseline L0 and latent U0, U1.",
    "s4": "Null effect of (A0, A1) on Y; latent U drives L1 and Y; no baseline covariate.",
    "s4_l0": "Null effect of (A0, A1) on Y with a baseline covariate L0; identifiable.",
}


def population_contrast(m, treatments, y):
    """Least-squares Y ~ 1 + treatments on the exact joint; returns sum of treatment slopes."""
    joint = exact_joint(m).marginal((*treatments, y))
    rows, weights = [], []
    for idx in np.ndindex(*joint.shape):
        rows.append(idx)
        weights.append(joint.probs[idx])
    rows = np.array(rows, dtype=float)
    w = np.array(weights)
    X = np.column_stack([np.ones(len(rows)), rows[:, :-1]])
    beta = np.linalg.solve(X.T @ (X * w[:, None]), X.T @ (w * rows[:, -1]))
    return float(beta[1:].sum())


def certify(models):
    m = models["s1"]
    j = exact_joint(m)
    ace = true_counterfactual_mean(m, {"A": 1}, "Y") - true_counterfactual_mean(m, {"A": 0}, "Y")
    naive = j.mean("Y", {"A": 1}) - j.mean("Y", {"A": 0})
    yield "s1: |diff-in-means - ACE| > 0.05", abs(naive - ace) > 0.05, f"ACE={ace:.4f} naive={naive:.4f}"

    m = models["s2"]
    j = exact_joint(m)
    truth = true_counterfactual_mean(m, {"A": 1}, "Y")
    pc = j.marginal(["Cstar"]).probs
    proxy = sum(j.mean("Y", {"A": 1, "Cstar": c}) * pc[c] for c in range(2))
    yield "s2: |proxy-adjusted - E[Y(1)]| > 0.05", abs(proxy - truth) > 0.05, f"truth={truth:.4f} proxy={proxy:.4f}"

    for name in ("s4", "s4_l0"):
        m = models[name]
        diff = (true_counterfactual_mean(m, {"A0": 1, "A1": 1}, "Y")
                - true_counterfactual_mean(m, {"A0": 0, "A1": 0}, "Y"))
        yield f"{name}: true effect is 0", abs(diff) < 1e-12, f"beta={diff:.2e}"
    contrast = population_contrast(models["s4"], ("A0", "A1"), "Y")
    yield "s4: |population regression contrast| > 0.05", abs(contrast) > 0.05, f"contrast={contrast:.4f}"

    for name in ("s3", "s4_l0"):
        m = models[name]
        est = identify_sequential(m.graph, [("A0", ("L0",)), ("A1", ("L1",))], "Y")
        j = exact_joint(m)
        for r in ((0, 0), (1, 1)):
            truth = true_counterfactual_mean(m, {"A0": r[0], "A1": r[1]}, "Y")
            gf = regime_functional(j, est, Regime(r))
            yield f"{name}: g-formula functional equals E[Y{r}]", abs(gf - truth) < 1e-12, f"{gf:.6f} vs {truth:.6f}"


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--check", action="store_true", help="certify only, do not write files")
    args = ap.parse_args(argv)

    models = {"s1": s1(), "s1_target": s1((0.2, 0.3, 0.5)), "s2": s2(), "s3": s3(),
              "s4": s4(), "s4_l0": s4_l0()}
    ok = True
    for label, passed, detail in certify(models):
        print(f"{'PASS' if passed else 'FAIL'}  {label}  ({detail})")
        ok &= passed
    if not ok:
        print("fixture certification failed; nothing written", file=sys.stderr)
        return 1
    if args.check:
        return 0
    OUT.mkdir(parents=True, exist_ok=True)
    for name, m in models.items():
        doc = {"description": DESCRIPTIONS[name], **m.to_dict()}
        (OUT / f"{name}.json").write_text(json.dumps(doc, indent=1) + "\n")
        print(f"wrote {OUT / (name + '.json')}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
