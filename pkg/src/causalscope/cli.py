"""Command-line front end.

Exit codes: 0 success, 1 usage, 2 bad input, 3 not identified,
4 positivity violation, 5 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .data import Dataset, load_schema, read_csv
from .discovery import ChiSquareCi, pc_learn
from .errors import BackdoorViolation, CausalError, InputError, NotIdentified
from .estimate import (
    EffectEstimate,
    bootstrap_ci,
    check_positivity,
    diff_in_means,
    gformula_mean,
    ipw_mean,
    transport_mean,
)
from .graph import CausalGraph, construct_swig, d_separated, load_graph, parse_graph
from .identify import BACKDOOR, Estimand, identify_effect, identify_sequential, identify_transport, verify_backdoor
from .longitudinal import Regime, load_policy, policy_value, sequential_gformula
from .measurement import corrected_effect, load_matrix
from .scm import FIXTURES, fixture, load_model, sample

EXIT_USAGE = 1


class UsageError(CausalError):
    exit_code = EXIT_USAGE


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass
class AnalysisConfig:
    """Everything a subcommand reads; paths are checked on construction."""

    command: str
    graph: str | None = None
    edges: str | None = None
    unobserved: tuple[str, ...] = ()
    data: str | None = None
    schema: str | None = None
    target: str | None = None
    target_schema: str | None = None
    treatment: str | None = None
    outcome: str | None = None
    seed: int = 0
    out: str | None = None
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        for attr in ("graph", "data", "schema", "target", "target_schema"):
            path = getattr(self, attr)
            if path is not None and not os.path.isfile(path):
                raise InputError(f"{attr.replace('_', ' ')} file not found: {path}")

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "AnalysisConfig":
        known = {f for f in cls.__dataclass_fields__ if f not in ("command", "options")}
        base = {k: v for k, v in vars(args).items() if k in known}
        if "unobserved" in base:
            base["unobserved"] = tuple(_names(base["unobserved"]))
        opts = {k: v for k, v in vars(args).items() if k not in known and k not in ("command", "func")}
        return cls(command=args.command, options=opts, **base)

    def load_graph(self) -> CausalGraph:
        if self.graph:
            return load_graph(self.graph)
        if self.edges:
            return parse_graph(self.edges, unobserved=self.unobserved)
        raise UsageError("give --graph FILE or --edges SPEC")

    def load_data(self, path=None, schema=None, population="source") -> Dataset:
        path = path or self.data
        schema = schema or self.schema
        if not path or not schema:
            raise UsageError("data commands need --data and --schema")
        return read_csv(path, load_schema(schema), population)

    def need(self, *names):
        for n in names:
            if getattr(self, n, None) is None and self.options.get(n) is None:
                raise UsageError(f"--{n.replace('_', '-')} is required for {self.command}")


def _names(text) -> list[str]:
    if not text:
        return []
    if isinstance(text, (list, tuple)):
        return [n for t in text for n in _names(t)]
    return [t.strip() for t in text.split(",") if t.strip()]


def _phases(text: str):
    """'A0:L0;A1:L1,M1' -> [('A0', ('L0',)), ('A1', ('L1', 'M1'))]."""
    out = []
    for part in text.split(";"):
        part = part.strip()
        if not part:
            continue
        a, _, block = part.partition(":")
        out.append((a.strip(), tuple(_names(block))))
    if not out:
        raise UsageError("--phases needs at least one treatment")
    return out


def _emit(cfg: AnalysisConfig, payload) -> None:
    text = payload if isinstance(payload, str) else json.dumps(payload, indent=2, sort_keys=True)
    if not text.endswith("\n"):
        text += "\n"
    if cfg.out:
        Path(cfg.out).write_text(text)
    else:
        sys.stdout.write(text)


def _with_ci(cfg: AnalysisConfig, est: EffectEstimate, stat, datasets) -> EffectEstimate:
    B = cfg.options.get("bootstrap") or 0
    if B:
        level = cfg.options.get("level", 0.95)
        lo, hi = bootstrap_ci(stat, datasets, B=B, level=level, seed=cfg.seed)
        est.ci = (lo, hi, level)
        est.__post_init__()
        est.diagnostics["bootstrap"] = {"resamples": B, "seed": cfg.seed}
    return est


# -- subcommands ----------------------------------------------------------------

def cmd_dsep(cfg: AnalysisConfig) -> int:
    g = cfg.load_graph()
    sep = d_separated(g, set(_names(cfg.options["x"])), set(_names(cfg.options["y"])),
                      set(_names(cfg.options.get("given"))))
    _emit(cfg, "d-separated" if sep else "d-connected")
    return 0


def cmd_swig(cfg: AnalysisConfig) -> int:
    g = cfg.load_graph()
    settings = {}
    for item in _names(cfg.options["intervene"]):
        name, eq, val = item.partition("=")
        settings[name.strip()] = val.strip() if eq else name.strip().lower()
    g.check(settings)
    _emit(cfg, construct_swig(g, settings).to_dict())
    return 0


def _identify(cfg: AnalysisConfig, g: CausalGraph) -> Estimand:
    adjust = cfg.options.get("adjust")
    if adjust is not None:
        w = tuple(sorted(_names(adjust)))
        if not verify_backdoor(g, cfg.treatment, cfg.outcome, w):
            raise BackdoorViolation(f"{{{','.join(w)}}} is not a backdoor set for {cfg.treatment} -> {cfg.outcome}")
        return Estimand(BACKDOOR, (cfg.treatment,), (cfg.treatment.lower(),), cfg.outcome, w)
    est = identify_effect(g, cfg.treatment, cfg.outcome)
    if not est.identified:
        raise NotIdentified(est.text())
    return est


def cmd_identify(cfg: AnalysisConfig) -> int:
    g = cfg.load_graph()
    phases = cfg.options.get("phases")
    if phases:
        cfg.need("outcome")
        est = identify_sequential(g, _phases(phases), cfg.outcome)
    else:
        cfg.need("treatment", "outcome")
        est = identify_effect(g, cfg.treatment, cfg.outcome, cfg.options.get("value"))
    _emit(cfg, est.text())
    return 0 if est.identified else NotIdentified.exit_code


def cmd_estimate(cfg: AnalysisConfig) -> int:
    cfg.need("treatment", "outcome")
    data = cfg.load_data()
    method = cfg.options["method"]
    a, y = cfg.treatment, cfg.outcome
    value = cfg.options["value"]

    if method == "diff-in-means":
        est = None
        stat = lambda d: diff_in_means(d, a, y).point  # noqa: E731
        result = diff_in_means(data, a, y)
    else:
        est = _identify(cfg, cfg.load_graph())
        kwargs = {}
        if method == "gformula":
            fn = gformula_mean
            kwargs["outcome_model"] = cfg.options["outcome_model"]
        else:
            fn = ipw_mean
            kwargs["propensity"] = cfg.options["propensity"]
            kwargs["clip"] = cfg.options["clip"]
        if cfg.options.get("ace"):
            def stat(d):
                return fn(d, est, 1, **kwargs).point - fn(d, est, 0, **kwargs).point
            result = fn(data, est, 1, **kwargs)
            result = EffectEstimate(stat(data), result.method, data.n, diagnostics=result.diagnostics)
        else:
            stat = lambda d: fn(d, est, value, **kwargs).point  # noqa: E731
            result = fn(data, est, value, **kwargs)
    result = _with_ci(cfg, result, stat, data)
    report = result.to_dict()
    if est is not None:
        report["estimand"] = est.text()
        if all(data.domain(v).categorical for v in est.adjustment):
            report["diagnostics"]["positivity"] = [
                {"stratum": e.stratum, "level": e.level, "frequency": e.frequency}
                for e in check_positivity(data, a, est.adjustment, cfg.options["eps"])]
    if method == "diff-in-means" or cfg.options.get("ace"):
        report["contrast"] = "ace"
    else:
        report["value"] = value
    _emit(cfg, report)
    return 0


def cmd_transport(cfg: AnalysisConfig) -> int:
    cfg.need("treatment", "outcome", "target", "adjust")
    g = cfg.load_graph()
    source = cfg.load_data()
    target = cfg.load_data(cfg.target, cfg.target_schema or cfg.schema, "target")
    est = identify_transport(g, cfg.treatment, cfg.outcome, _names(cfg.options["adjust"]),
                             shared_mechanism=not cfg.options.get("no_shared_mechanism"))
    if not est.identified:
        _emit(cfg, est.text())
        return NotIdentified.exit_code
    value = cfg.options["value"]
    model = cfg.options["outcome_model"]
    result = transport_mean(source, target, est, value, model)
    result = _with_ci(cfg, result, lambda s, t: transport_mean(s, t, est, value, model).point, (source, target))
    report = result.to_dict()
    report.update(estimand=est.text(), assumptions=list(est.assumptions), value=value)
    _emit(cfg, report)
    return 0


def cmd_measure_correct(cfg: AnalysisConfig) -> int:
    cfg.need("treatment", "outcome", "proxy", "matrix")
    data = cfg.load_data()
    if not os.path.isfile(cfg.options["matrix"]):
        raise InputError(f"matrix file not found: {cfg.options['matrix']}")
    mat = load_matrix(cfg.options["matrix"])
    proxy, value = cfg.options["proxy"], cfg.options["value"]
    result = corrected_effect(data, proxy, mat, cfg.treatment, cfg.outcome, value)
    result = _with_ci(cfg, result,
                      lambda d: corrected_effect(d, proxy, mat, cfg.treatment, cfg.outcome, value).point, data)
    report = result.to_dict()
    report["value"] = value
    _emit(cfg, report)
    return 0


def cmd_policy_value(cfg: AnalysisConfig) -> int:
    cfg.need("outcome", "phases")
    g = cfg.load_graph()
    data = cfg.load_data()
    est = identify_sequential(g, _phases(cfg.options["phases"]), cfg.outcome)
    model = cfg.options["outcome_model"]
    if cfg.options.get("policy"):
        if not os.path.isfile(cfg.options["policy"]):
            raise InputError(f"policy file not found: {cfg.options['policy']}")
        levels = {v: data.levels(v) for v in [*est.summed(), *est.treatments]}
        policy = load_policy(cfg.options["policy"], levels, est.treatments)
        run = lambda d: policy_value(d, est, policy, model)  # noqa: E731
    elif cfg.options.get("regime"):
        regime = Regime.parse(cfg.options["regime"])
        run = lambda d: sequential_gformula(d, est, regime, model)  # noqa: E731
    else:
        raise UsageError("policy-value needs --regime or --policy")
    result = _with_ci(cfg, run(data), lambda d: run(d).point, data)
    report = result.to_dict()
    report["estimand"] = est.text()
    _emit(cfg, report)
    return 0


def cmd_discover(cfg: AnalysisConfig) -> int:
    data = cfg.load_data()
    names = _names(cfg.options.get("variables")) or None
    if names:
        data = data.select(names)
    cp = pc_learn(ChiSquareCi(data, cfg.options["alpha"]), max_cond=cfg.options.get("max_cond"))
    doc = cp.to_dict()
    doc["report"] = cp.report
    _emit(cfg, doc)
    return 0


def cmd_simulate(cfg: AnalysisConfig) -> int:
    src = cfg.options["model"]
    if src in FIXTURES and not os.path.isfile(src):
        model = fixture(src)
    elif os.path.isfile(src):
        model = load_model(src)
    else:
        raise InputError(f"model file not found: {src} (bundled fixtures: {', '.join(FIXTURES)})")
    data = sample(model, cfg.options["n"], cfg.seed)
    if cfg.options.get("schema_out"):
        Path(cfg.options["schema_out"]).write_text(json.dumps(data.schema_dict(), indent=2, sort_keys=True) + "\n")
    _emit(cfg, data.to_csv())
    return 0


COMMANDS = {
    "dsep": cmd_dsep,
    "swig": cmd_swig,
    "identify": cmd_identify,
    "estimate": cmd_estimate,
    "transport": cmd_transport,
    "measure-correct": cmd_measure_correct,
    "policy-value": cmd_policy_value,
    "discover": cmd_discover,
    "simulate": cmd_simulate,
}


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="causalscope", description="Causal graphs, identification and estimation.",
                epilog="exit codes: 1 usage, 2 input, 3 not identified, 4 positivity, 5 numerical")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, graph=False, data=False, effect=False, seed=False):
        if graph:
            sp.add_argument("--graph", help="graph JSON document")
            sp.add_argument("--edges", help='inline edge list, e.g. "C->A, C->Y, A->Y, U<->Y"')
            sp.add_argument("--unobserved", help="comma-separated unobserved nodes (with --edges)")
        if data:
            sp.add_argument("--data", help="CSV file with a header row")
            sp.add_argument("--schema", help="schema JSON for the CSV")
        if effect:
            sp.add_argument("--treatment", "-A", help="treatment variable")
            sp.add_argument("--outcome", "-Y", help="outcome variable")
        if seed:
            sp.add_argument("--seed", type=int, default=0, help="RNG seed (default 0)")
        sp.add_argument("--out", help="write output here instead of stdout")

    def boot(sp):
        sp.add_argument("--bootstrap", type=int, default=0, metavar="B",
                        help="percentile bootstrap with B resamples (0 = off)")
        sp.add_argument("--level", type=float, default=0.95)

    sp = sub.add_parser("dsep", help="test a d-separation statement")
    common(sp, graph=True)
    sp.add_argument("--x", required=True)
    sp.add_argument("--y", required=True)
    sp.add_argument("--given", default="")

    sp = sub.add_parser("swig", help="single-world intervention graph as JSON")
    common(sp, graph=True)
    sp.add_argument("--intervene", required=True, help="A=a[,B=b]")

    sp = sub.add_parser("identify", help="print the identifying functional")
    common(sp, graph=True, effect=True)
    sp.add_argument("--value", help="value label for the treatment (default: lower-case name)")
    sp.add_argument("--phases", help='sequential treatments, e.g. "A0:L0;A1:L1"')

    sp = sub.add_parser("estimate", help="estimate E[Y(a)] or the ACE from data")
    common(sp, graph=True, data=True, effect=True, seed=True)
    boot(sp)
    sp.add_argument("--method", choices=("gformula", "ipw", "diff-in-means"), default="gformula")
    sp.add_argument("--value", type=int, default=1)
    sp.add_argument("--ace", action="store_true", help="report E[Y(1)] - E[Y(0)]")
    sp.add_argument("--adjust", help="use this adjustment set instead of searching")
    sp.add_argument("--outcome-model", default="auto", choices=("auto", "saturated", "linear", "logistic"))
    sp.add_argument("--propensity", default="auto", choices=("auto", "saturated", "logistic"))
    sp.add_argument("--clip", type=float, default=0.01)
    sp.add_argument("--eps", type=float, default=0.05, help="positivity report threshold")

    sp = sub.add_parser("transport", help="transport E[Y(a)] to a target population")
    common(sp, graph=True, data=True, effect=True, seed=True)
    boot(sp)
    sp.add_argument("--target", help="target-population CSV")
    sp.add_argument("--target-schema", help="schema for the target CSV (default: --schema)")
    sp.add_argument("--adjust", help="adjustment set W")
    sp.add_argument("--value", type=int, default=1)
    sp.add_argument("--outcome-model", default="auto", choices=("auto", "saturated", "linear", "logistic"))
    sp.add_argument("--no-shared-mechanism", action="store_true",
                    help="do not assume p(Y|A,W) is shared (the effect is then not identified)")

    sp = sub.add_parser("measure-correct", help="adjust for a misclassified confounder")
    common(sp, data=True, effect=True, seed=True)
    boot(sp)
    sp.add_argument("--proxy", help="observed proxy of the confounder")
    sp.add_argument("--matrix", help="misclassification matrix JSON")
    sp.add_argument("--value", type=int, default=1)

    sp = sub.add_parser("policy-value", help="sequential g-formula for a regime or policy")
    common(sp, graph=True, data=True, seed=True)
    boot(sp)
    sp.add_argument("--outcome", "-Y")
    sp.add_argument("--phases", help='e.g. "A0:L0;A1:L1"')
    sp.add_argument("--regime", help="static values, e.g. 1,1")
    sp.add_argument("--policy", help="policy JSON")
    sp.add_argument("--outcome-model", default="saturated", choices=("saturated", "linear", "logistic"))

    sp = sub.add_parser("discover", help="PC structure learning on categorical data")
    common(sp, data=True)
    sp.add_argument("--alpha", type=float, default=0.05)
    sp.add_argument("--max-cond", type=int)
    sp.add_argument("--variables", help="restrict to these columns")

    sp = sub.add_parser("simulate", help="sample a structural model to CSV")
    common(sp, seed=True)
    sp.add_argument("--model", required=True, help=f"model JSON or a bundled name ({', '.join(FIXTURES)})")
    sp.add_argument("--n", type=int, default=1000)
    sp.add_argument("--schema-out", help="also write the schema JSON here")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = AnalysisConfig.from_args(args)
        return COMMANDS[args.command](cfg)
    except CausalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return InputError.exit_code
    except (np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 5


if __name__ == "__main__":
    sys.exit(main())
