"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data error, 3 reproduction failure.
Output is TSV (default) or JSON; TSV warnings go to stderr, JSON carries
them in the envelope.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__, agreement, audit, meta, plotting, reproduce, simulation, vqr
from .agreement import AgreementError
from .audit import AuditError
from .meta import MetaError
from .simulation import SimulationError
from .vqr import DataError

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_FIXTURE = 0, 1, 2, 3
DATA_ERRORS = (DataError, AgreementError, MetaError, AuditError, SimulationError)



class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# --------------------------------------------------------------------------
# output


@dataclass
class Envelope:
    command: str
    columns: list[str]
    rows: list[dict[str, Any]]
    warnings: list[dict[str, str]] = field(default_factory=list)
    extra: dict[str, Any] = field(default_factory=dict)

    def warn(self, code: str, message: str):
        self.warnings.append({"code": code, "message": message})


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "yes" if v else "no"
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if v != 0 and abs(v) < 1e-3:
            return f"{v:.4e}"
        return f"{v:.4f}"
    return str(v).replace("\t", " ").replace("\n", " ")


def _jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None if math.isnan(v) else ("inf" if v > 0 else "-inf")
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


def emit(env: Envelope, fmt: str, out=None, err=None) -> None:
    out = out or sys.stdout
    err = err or sys.stderr
    if fmt == "json":
        doc = {
            "command": env.command,
            "format": "json",
            "warnings": env.warnings,
            "payload": {"columns": env.columns, "rows": env.rows, **env.extra},
        }
        out.write(json.dumps(_jsonable(doc), indent=2, ensure_ascii=False, allow_nan=False) + "\n")
        return
    for w in env.warnings:
        err.write(f"warning[{w['code']}]: {w['message']}\n")
    out.write("\t".join(env.columns) + "\n")
    for r in env.rows:
        out.write("\t".join(_cell(r.get(c)) for c in env.columns) + "\n")


# --------------------------------------------------------------------------
# kappa


def _weights(args, k: int) -> agreement.WeightScheme:
    if args.weights_file:
        rows = [
            [float(x) for x in ln.split()]
            for ln in Path(args.weights_file).read_text(encoding="utf-8").splitlines()
            if ln.strip()
        ]
        return agreement.weights_from_matrix(rows, name=f"file:{Path(args.weights_file).name}")
    if args.weights == "linear":
        return agreement.linear_weights(k, rounded=args.rounded_weights)
    if args.weights == "vqr":
        if k != 4:
            raise AgreementError(f"VQR weights need 4 categories, got {k}")
        return agreement.vqr_weights()
    return agreement.unweighted(k)


def cmd_kappa(args) -> tuple[Envelope, int]:
    cats = agreement.CategorySet.from_labels(args.categories.split(",")) if args.categories else None
    with open(args.ratings, encoding="utf-8", newline="") as f:
        data = vqr.parse_ratings_csv(f, cats)
    w = _weights(args, data.cats.k)
    guidelines = args.guideline or list(agreement.GUIDELINES)
    cols = ["group", "subgroup", "n", "weights", "kappa", "p_o", "p_e", "se", "ci_lo", "ci_hi",
            "se_null", "z", "p_value"] + guidelines
    env = Envelope("kappa", cols, [])
    for (grp, sub), pairs in data.groups.items():
        table = agreement.build_table(pairs, data.cats)
        row: dict[str, Any] = {"group": grp, "subgroup": sub, "n": table.n, "weights": w.name}
        try:
            est = agreement.weighted_kappa(table, w)
        except agreement.DegenerateMarginalsError as e:
            env.warn("degenerate", f"group {grp!r}/{sub!r}: {e}")
            row["kappa"] = float("nan")
            env.rows.append(row)
            continue
        lo, hi = agreement.confidence_interval(est, args.level)
        row.update(kappa=est.kappa, p_o=est.p_o_w, p_e=est.p_e_w, se=est.se, ci_lo=lo, ci_hi=hi,
                   se_null=est.se_null)
        for flag in est.clamped:
            env.warn("se-clamped", f"group {grp!r}/{sub!r}: {flag}")
        if est.se_null > 0:
            sig = agreement.significance_test(est, args.sided)
            row.update(z=sig.z, p_value=sig.p_value)
        for g in guidelines:
            row[g] = agreement.interpret(est.kappa, g)
        env.rows.append(row)
    env.warn("significance", "a significant z test shows agreement beyond chance, not useful agreement")
    return env, EXIT_OK


# --------------------------------------------------------------------------
# meta / funnel


def _dataset(args) -> vqr.EmbeddedDataset:
    if args.kappa_csv:
        with open(args.kappa_csv, encoding="utf-8", newline="") as f:
            recs = vqr.parse_kappa_csv(f)
        return vqr.dataset_from_records(recs, args.kappa_csv)
    return vqr.load_embedded()


def _analysis(args, ds) -> reproduce.FunnelAnalysis:
    tests = args.test
    if tests is None:
        tests = [reproduce.AREA13] if not args.kappa_csv else []
    units = args.units
    if units == "auto":
        units = "subareas" if any(ds.find(t).parent is not None for t in tests) else "areas"
    return reproduce.funnel_analysis(ds, args.weighting, units, tests, args.level)


def _note_dataset(env: Envelope, ds: vqr.EmbeddedDataset, fa: reproduce.FunnelAnalysis):
    for lab in fa.excluded:
        env.warn("excluded", f"{lab}: kappa unavailable, left out of the fit")
    if ds.source == "embedded":
        for note in ds.notes:
            env.warn("variant", note)


META_COLS = ["record", "held_out", "label", "parent", "m", "kappa", "n_groups", "mu_hat", "sigma2_hat",
             "total_m", "df", "t", "p_value", "stars", "position"]


def cmd_meta(args) -> tuple[Envelope, int]:
    ds = _dataset(args)
    fa = _analysis(args, ds)
    mdl = fa.model
    env = Envelope("meta", META_COLS, [])
    _note_dataset(env, ds, fa)
    env.rows.append({"record": "model", "label": f"{fa.units}/{fa.weighting}", "mu_hat": mdl.mu_hat,
                     "sigma2_hat": mdl.sigma2_hat, "total_m": mdl.total_m, "df": mdl.df, "n_groups": mdl.n_groups})
    tests = fa.tests_one if args.sided == "one" else fa.tests_two
    for t, t2 in zip(tests, fa.tests_two):
        env.rows.append({"record": "test", "label": t.label, "parent": t.parent, "m": t.m, "kappa": t.kappa,
                         "df": t.df, "t": t.t_stat, "p_value": t.p_value,
                         "stars": meta.significance_stars(t.p_value), "position": t2.position})
    if args.loo:
        if not any(ds.subareas(a.label) for a in ds.areas()):
            env.warn("loo", "no sub-areas in dataset; leave-one-out covers areas only")
        for rep in meta.leave_one_out(ds.area_groups(args.weighting), args.level):
            for t in (rep.area_test, *rep.subarea_tests):
                env.rows.append({"record": "loo", "held_out": rep.area, "label": t.label, "parent": t.parent,
                                 "m": t.m, "kappa": t.kappa, "df": t.df, "t": t.t_stat, "p_value": t.p_value,
                                 "stars": meta.significance_stars(t.p_value), "position": t.position})
    return env, EXIT_OK


def cmd_funnel(args) -> tuple[Envelope, int]:
    ds = _dataset(args)
    fa = _analysis(args, ds)
    title = f"{'Areas' if fa.units == 'areas' else 'Sub-areas'}, {fa.weighting} weights"
    fig = plotting.funnel_figure([fa.panel(title)])
    data = plotting.svg_bytes(fig)
    try:
        Path(args.out).write_bytes(data)
    except OSError as e:
        raise DataError(f"cannot write {args.out}: {e.strerror or e}") from None
    env = Envelope("funnel", ["role", "label", "parent", "m", "kappa", "lo", "hi", "position"], [])
    _note_dataset(env, ds, fa)
    for g in fa.fitted:
        lo, hi = meta.prediction_interval(fa.model, g.m, args.level)
        pos = "inside" if lo <= g.kappa <= hi else ("above" if g.kappa > hi else "below")
        env.rows.append({"role": "fitted", "label": g.label, "parent": g.parent, "m": g.m, "kappa": g.kappa,
                         "lo": lo, "hi": hi, "position": pos})
    for g, t in zip(fa.tested, fa.tests_two):
        lo, hi = meta.prediction_interval(fa.model, g.m, args.level)
        env.rows.append({"role": "tested", "label": g.label, "parent": g.parent, "m": g.m, "kappa": g.kappa,
                         "lo": lo, "hi": hi, "position": t.position})
    env.extra["svg"] = str(args.out)
    env.extra["mu_hat"] = fa.model.mu_hat
    env.extra["sigma2_hat"] = fa.model.sigma2_hat
    return env, EXIT_OK


# --------------------------------------------------------------------------
# audit


def _counts(text: str, name: str) -> tuple[int, ...]:
    try:
        vals = tuple(int(x) for x in text.split(","))
    except ValueError:
        raise UsageError(f"--{name}: expected comma-separated integers, got {text!r}") from None
    return vals


def cmd_audit(args) -> tuple[Envelope, int]:
    vectors = [args.biblio, args.ir, args.concordant_peers, args.concordant_biblio_ir]
    env = Envelope("audit", ["row", "A", "B", "C", "D", "total"], [])
    if args.embedded or all(v is None for v in vectors):
        a1 = vqr.AREA13_AUDIT
        inputs = (a1["biblio"], a1["ir"], a1["concordant_peers"], a1["concordant_biblio_ir"])
        embedded = True
    elif any(v is None for v in vectors):
        raise UsageError("give all four of --biblio, --ir, --concordant-peers, --concordant-biblio-ir")
    else:
        names = ("biblio", "ir", "concordant-peers", "concordant-biblio-ir")
        inputs = tuple(_counts(v, n) for v, n in zip(vectors, names))
        embedded = False
    labels = tuple(args.classes.split(",")) if args.classes else ("A", "B", "C", "D")
    if not embedded and labels != ("A", "B", "C", "D"):
        env.columns = ["row", *labels, "total"]
    table = audit.consensus_estimate(*inputs, labels=labels)
    for name, cells in table.rows():
        env.rows.append(dict(zip(env.columns, [name, *cells])))
    for h in table.assumptions:
        env.warn("assumption", h)
    env.warn("lower-bound", table.note)
    if embedded:
        for key, (c, n, printed) in vqr.CONCORDANT_D.items():
            rate = audit.concordance_rate(c, n)
            msg = rate.mismatch(printed)
            if msg:
                env.warn("published-mismatch", f"concordant-D rate ({key}): {msg}")
        env.extra["concordant_d"] = {
            key: {"concordant": c, "total": n, "percent": audit.concordance_rate(c, n).percent, "published": pr}
            for key, (c, n, pr) in vqr.CONCORDANT_D.items()
        }
    return env, EXIT_OK


# --------------------------------------------------------------------------
# reproduce


def cmd_reproduce(args) -> tuple[Envelope, int]:
    chosen = [
        name
        for name, flag in (
            ("table2", args.table2_check),
            ("table3", args.table3),
            ("figure2", args.figure2),
            ("binomial", args.binomial),
            ("tableA1", args.tableA1),
        )
        if flag
    ]
    if args.all or not chosen:
        chosen = list(reproduce.SECTIONS)
    outdir = Path(args.outdir)
    checks = reproduce.run_sections(chosen, outdir=outdir)
    cols = ["section", "name", "expected", "observed", "tolerance", "passed", "note"]
    env = Envelope("reproduce", cols, [c.as_dict() for c in checks])
    misses = [c for c in checks if not c.passed]
    for c in checks:
        if c.note and c.passed and c.section in ("tableA1", "binomial"):
            env.warn("published-mismatch", f"{c.name}: {c.note}")
    for c in misses:
        env.warn("fixture-miss", f"{c.section}: {c.name}: expected {c.expected}, got {c.observed}")
    env.extra["summary"] = {"checks": len(checks), "failed": len(misses), "sections": chosen}
    outdir.mkdir(parents=True, exist_ok=True)
    with open(outdir / f"reproduce.{'json' if args.format == 'json' else 'tsv'}", "w", encoding="utf-8") as f:
        emit(env, args.format, out=f, err=_Null())
    return env, EXIT_FIXTURE if misses else EXIT_OK


class _Null:
    def write(self, _):
        pass


# --------------------------------------------------------------------------
# simulate / exceed


def _parse_joint(text: str) -> simulation.JointDistribution:
    if text in simulation.PRESET_JOINTS:
        return simulation.JointDistribution(simulation.PRESET_JOINTS[text])
    try:
        rows = [[float(x) for x in r.split(",")] for r in text.split(";")]
    except ValueError:
        raise UsageError(f"--joint: expected a preset name or rows like 'a,b;c,d', got {text!r}") from None
    return simulation.JointDistribution.from_counts(np.array(rows))


def cmd_simulate(args) -> tuple[Envelope, int]:
    cfg = simulation.SimConfig(args.seed, args.replications, args.n, args.workers)
    if args.study == "se":
        joint = _parse_joint(args.joint)
        w = _weights(args, joint.k)
        r = simulation.se_calibration(joint, w, cfg)
        cols = ["weights", "replications", "n_per_table", "kappa_true", "empirical_sd", "mean_se",
                "relative_gap", "flagged", "undefined_draws"]
        env = Envelope("simulate-se", cols, [{
            "weights": r.weights, "replications": r.replications, "n_per_table": r.n_per_table,
            "kappa_true": r.kappa_true, "empirical_sd": r.empirical_sd, "mean_se": r.mean_se,
            "relative_gap": r.relative_gap, "flagged": r.flagged, "undefined_draws": r.undefined_draws}])
        if r.flagged:
            env.warn("se-gap", f"relative gap {r.relative_gap:.4f} exceeds 5%")
    else:
        if args.m:
            try:
                m_list = [int(x) for x in args.m.split(",")]
            except ValueError:
                raise UsageError(f"--m: expected comma-separated integers, got {args.m!r}") from None
        else:
            m_list = [a.m for a in vqr.load_embedded().areas() if not a.label.startswith(reproduce.AREA13)]
        heldout = (args.heldout_m, args.shift) if args.heldout_m else None
        r = simulation.coverage_study(args.mu, args.sigma2, m_list, cfg, args.level, heldout)
        cols = ["replications", "rejections", "rejection_rate", "coverage", "level"]
        env = Envelope("simulate-coverage", cols, [{
            "replications": r.replications, "rejections": r.rejections, "rejection_rate": r.rejection_rate,
            "coverage": r.coverage, "level": r.level}])
    env.extra["seed"] = args.seed
    return env, EXIT_OK


def cmd_exceed(args) -> tuple[Envelope, int]:
    p = meta.multi_exceedance_probability(args.trials, args.exceed, args.p_single)
    env = Envelope("exceed", ["trials", "exceed", "p_single", "probability"], [
        {"trials": args.trials, "exceed": args.exceed, "p_single": args.p_single, "probability": p}])
    if args.bound is not None and p >= args.bound:
        env.warn("bound", f"P = {p:.4e} is not below the bound {args.bound:.4e} with p_single = {args.p_single}")
    return env, EXIT_OK


# --------------------------------------------------------------------------


def _add_format(p):
    p.add_argument("--format", choices=("tsv", "json"), default="tsv")


def _add_weights(p):
    p.add_argument("--weights", choices=("linear", "vqr", "unweighted"), default="linear")
    p.add_argument("--weights-file", help="k lines of k whitespace-separated disagreement weights")
    p.add_argument("--rounded-weights", action="store_true",
                   help="linear weights rounded to 2 decimals (0, 0.33, 0.67, 1)")


def _add_dataset(p):
    src = p.add_mutually_exclusive_group()
    src.add_argument("kappa_csv", nargs="?", help="label,parent,m,kappa_linear,kappa_vqr table")
    src.add_argument("--embedded", action="store_true", help="use the published VQR data (default)")
    p.add_argument("--weighting", choices=("linear", "vqr"), default="linear")
    p.add_argument("--units", choices=("auto", "areas", "subareas"), default="auto")
    p.add_argument("--test", action="append", metavar="LABEL",
                   help="group to test against the rest (repeatable); 'Area 9/Informatics' disambiguates")
    p.add_argument("--level", type=float, default=0.95)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="concord", description="Inter-rater agreement and funnel-plot meta-analysis of kappas.")
    ap.add_argument("--version", action="version", version=f"concord {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("kappa", help="weighted kappa per group from a ratings CSV")
    p.add_argument("ratings")
    _add_weights(p)
    p.add_argument("--categories", help="comma-separated ladder, best first (default A,B,C,D)")
    p.add_argument("--guideline", action="append", choices=list(agreement.GUIDELINES))
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--sided", choices=("one", "two"), default="two")
    _add_format(p)
    p.set_defaults(func=cmd_kappa)

    p = sub.add_parser("meta", help="fit the funnel model and test groups")
    _add_dataset(p)
    p.add_argument("--sided", choices=("one", "two"), default="one")
    p.add_argument("--loo", action="store_true", help="leave each area out in turn")
    _add_format(p)
    p.set_defaults(func=cmd_meta)

    p = sub.add_parser("funnel", help="render a funnel plot as SVG")
    _add_dataset(p)
    p.add_argument("--out", required=True)
    _add_format(p)
    p.set_defaults(func=cmd_funnel)

    p = sub.add_parser("audit", help="consensus-group audit table")
    p.add_argument("--embedded", action="store_true")
    p.add_argument("--biblio")
    p.add_argument("--ir")
    p.add_argument("--concordant-peers")
    p.add_argument("--concordant-biblio-ir")
    p.add_argument("--classes", help="class labels (default A,B,C,D)")
    _add_format(p)
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("reproduce", help="recompute published results and compare with fixtures")
    p.add_argument("--all", action="store_true")
    p.add_argument("--table2-check", action="store_true")
    p.add_argument("--table3", action="store_true")
    p.add_argument("--figure2", action="store_true")
    p.add_argument("--binomial", action="store_true")
    p.add_argument("--tableA1", action="store_true")
    p.add_argument("--outdir", default="reproduction")
    _add_format(p)
    p.set_defaults(func=cmd_reproduce)

    p = sub.add_parser("simulate", help="Monte Carlo calibration studies")
    p.add_argument("study", choices=("se", "coverage"))
    p.add_argument("--seed", type=int, default=20160323)
    p.add_argument("--replications", type=int, default=10_000)
    p.add_argument("--n", type=int, default=1000, help="units per simulated table")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--joint", default="area13", help=f"preset ({', '.join(simulation.PRESET_JOINTS)}) or 'a,b;c,d'")
    _add_weights(p)
    p.add_argument("--mu", type=float, default=0.26)
    p.add_argument("--sigma2", type=float, default=3.3)
    p.add_argument("--m", help="comma-separated group sizes (default: the 9 bibliometric areas)")
    p.add_argument("--heldout-m", type=int)
    p.add_argument("--shift", type=float, default=0.0)
    p.add_argument("--level", type=float, default=0.95)
    _add_format(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("exceed", help="binomial probability that several groups exceed a band")
    p.add_argument("--trials", type=int, default=4)
    p.add_argument("--exceed", type=int, default=3)
    p.add_argument("--p-single", type=float, default=0.025)
    p.add_argument("--bound", type=float, default=1.2e-4)
    _add_format(p)
    p.set_defaults(func=cmd_exceed)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        env, code = args.func(args)
    except UsageError as e:
        sys.stderr.write(f"concord {args.command}: error: {e}\n")
        return EXIT_USAGE
    except DATA_ERRORS as e:
        sys.stderr.write(f"concord {args.command}: error: {e}\n")
        return EXIT_DATA
    except OSError as e:
        sys.stderr.write(f"concord {args.command}: error: {e}\n")
        return EXIT_DATA
    emit(env, args.format)
    return code


if __name__ == "__main__":
    sys.exit(main())
