"""Command-line front end: ``katolab {exponents,odi,simulate,sweep}``.

Exit codes: 0 when every verdict is PASS or VACUOUS, 1 when any verdict is
FAIL, 2 for usage or domain errors.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from . import exponents as ex
from . import lifespan as ll
from . import odi
from .config import ExperimentConfig, dump_config, load_config, output_root
from .errors import DomainError, NoBlowupError
from .records import (RunRecord, append_jsonl, append_record, clean, now_iso, read_jsonl,
                      write_csv, write_json)
from .wave import Caps, GridSpec, WaveProblem, simulate
from .wave import checks as wc
from .wave import estimate_lifespan

log = logging.getLogger("katolab")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

TRACE_COLUMNS = ("t", "F", "Fpp", "sup_u")
SNAPSHOT_COLUMNS = ("t", "x", "u")
PLOT_COLUMNS = ("eps", "T_lo", "T_hi", "T_extrap", "a_of_eps", "theory_curve")


class UsageError(Exception):
    pass


def _csv_floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _n_arg(text: str):
    """Single dimension "3" or inclusive range "2..6"."""
    if ".." in text:
        lo, hi = text.split("..", 1)
        return (int(lo), int(hi))
    return int(text)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="katolab", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="YAML experiment config; flags override its values")
        sp.add_argument("--out", help="output root (overrides $KATOLAB_OUTPUT_ROOT and the config)")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--json", action="store_true", help="print the report as JSON")
        sp.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    sp = sub.add_parser("exponents", help="critical exponent, regime and lifespan exponents")
    common(sp)
    sp.add_argument("--n", type=_n_arg, help="dimension, or a range like 2..6 with --table")
    sp.add_argument("--p", type=float)
    sp.add_argument("--table", action="store_true", default=None, help="p0(n) over a range of n")
    sp.add_argument("--a-of-eps", type=float, dest="a_of_eps")

    sp = sub.add_parser("odi", help="certify a differential inequality and check it on the extremal ODE")
    common(sp)
    sp.add_argument("--lemma2", action="store_true", help="F'(0) = 0 variant (needs t0 or derives it)")
    for name in ("p", "a", "q", "A", "B", "R", "T0", "F0", "F0p", "t0"):
        sp.add_argument(f"--{name}", type=float)
    sp.add_argument("--random", type=int, help="sample this many random admissible problems")
    sp.add_argument("--bracket-tol", type=float, dest="bracket_tol")

    sp = sub.add_parser("simulate", help="run the wave solver and the proof-inequality checks")
    common(sp)
    sp.add_argument("--n", type=int)
    sp.add_argument("--p", type=float)
    sp.add_argument("--eps", type=float)
    sp.add_argument("--f-profile", dest="f_profile", choices=("zero", "bump"))
    sp.add_argument("--g-profile", dest="g_profile", choices=("zero", "bump"))
    sp.add_argument("--R", type=float)
    sp.add_argument("--dx", type=float)
    sp.add_argument("--cfl", type=float)
    sp.add_argument("--L", type=float)
    sp.add_argument("--U-max", type=float, dest="U_max")
    sp.add_argument("--t-horizon", type=float, dest="t_horizon")
    sp.add_argument("--levels", type=int)
    sp.add_argument("--linear", action="store_const", const=False, dest="nonlinear",
                    help="switch the source term off")
    sp.add_argument("--snapshot-times", type=_csv_floats, dest="snapshot_times")
    sp.add_argument("--check", action="append", dest="checks",
                    choices=("convexity", "identity", "odi", "support", "step0",
                             "condition_F", "pointwise_2d"))
    sp.add_argument("--check-eps", type=_csv_floats, dest="check_eps",
                    help="extra amplitudes for the step0/condition_F stability test")

    sp = sub.add_parser("sweep", help="lifespan sweep over eps with power-law fit")
    common(sp)
    sp.add_argument("--scenario", choices=[s.value for s in ll.Scenario])
    sp.add_argument("--n", type=int)
    sp.add_argument("--p", type=float)
    sp.add_argument("--eps-hi", type=float, dest="eps_hi")
    sp.add_argument("--eps-lo", type=float, dest="eps_lo")
    sp.add_argument("--count", type=int)
    sp.add_argument("--dx", type=float)
    sp.add_argument("--t-horizon", type=float, dest="t_horizon")
    sp.add_argument("--levels", type=int)
    sp.add_argument("--workers", type=int)
    sp.add_argument("--n-boot", type=int, dest="n_boot")
    sp.add_argument("--tol", type=float, help="relative slope tolerance")
    sp.add_argument("--synthetic", type=float, metavar="C",
                    help="inject T = C eps^-kappa (or C a(eps)) instead of solving the PDE")
    sp.add_argument("--synthetic-form", choices=("power", "a_of_eps"), dest="synthetic_form")
    sp.add_argument("--synthetic-kappa", type=float, dest="synthetic_kappa")
    sp.add_argument("--fresh", action="store_true", help="ignore finished points from an earlier run")
    return ap


_BLOCK_SKIP = {"command", "verbose", "config", "out", "seed", "json", "fresh", "tol",
               "synthetic", "synthetic_form", "synthetic_kappa", "lemma2", "random"}


def make_config(args: argparse.Namespace) -> ExperimentConfig:
    """Config file values overlaid with every flag given on the command line."""
    data = {}
    if args.config:
        data = load_config(args.config).to_dict()
        if data["command"] != args.command:
            raise UsageError(f"config is for '{data['command']}', not '{args.command}'")
    data["command"] = args.command
    if args.seed is not None:
        data["seed"] = args.seed
    block = dict(data.get(args.command) or {})
    for k, v in vars(args).items():
        if k in _BLOCK_SKIP or v is None:
            continue
        block[k] = v
    if args.command == "exponents":
        n = block.get("n")
        if isinstance(n, tuple):
            if not block.get("table"):
                raise UsageError("a range of n needs --table")
            block["n_range"], block["n"] = n, None
    elif args.command == "odi":
        if args.lemma2:
            block["lemma"] = "lemma2"
        if args.random is not None:
            block["random"] = args.random
    elif args.command == "sweep":
        if args.synthetic is not None or args.synthetic_form or args.synthetic_kappa is not None:
            syn = dict(block.get("synthetic") or {})
            if args.synthetic is not None:
                syn["C"] = args.synthetic
            if args.synthetic_form:
                syn["form"] = args.synthetic_form
            if args.synthetic_kappa is not None:
                syn["kappa"] = args.synthetic_kappa
            block["synthetic"] = syn
        if args.tol is not None:
            tol = dict(data.get("tolerances") or {})
            tol["fit_tol"] = args.tol
            data["tolerances"] = tol
    if args.command == "simulate" and "checks" in block:
        block["checks"] = tuple(block["checks"])
    data[args.command] = block
    return ExperimentConfig.from_dict(data)


class Session:
    """Artifact directory named by the config hash plus the run record."""

    def __init__(self, cfg: ExperimentConfig, out: str | None):
        self.cfg = cfg
        self.hash = cfg.hash()
        self.root = output_root(cfg, out)
        self.dir = self.root / f"{cfg.command}-{self.hash[:12]}"
        self.record = RunRecord(self.hash, cfg.command, artifact_dir=str(self.dir))
        self.verdicts: dict[str, str] = {}

    def verdict(self, name: str, v) -> None:
        self.verdicts[name] = v.value if hasattr(v, "value") else str(v)

    def output(self, name: str, path: Path) -> Path:
        # the directory appears with the first artifact, so failed runs leave nothing behind
        if not self.record.outputs:
            self.dir.mkdir(parents=True, exist_ok=True)
            (self.dir / "config.yaml").write_text(dump_config(self.cfg))
            self.record.outputs["config"] = "config.yaml"
        self.record.outputs[name] = path.name
        return path

    def finish(self) -> int:
        code = EXIT_FAIL if any(v == "FAIL" for v in self.verdicts.values()) else EXIT_OK
        self.record.verdicts = dict(self.verdicts)
        self.record.finished = now_iso()
        self.record.exit_code = code
        append_record(self.root, self.record)
        return code


def _emit(args, text: str, payload) -> None:
    if args.json:
        print(json.dumps(clean(payload), indent=2, sort_keys=True))
    else:
        print(text)


# ---------------------------------------------------------------- exponents

def cmd_exponents(cfg: ExperimentConfig, args, ses: Session) -> None:
    b = cfg.exponents
    payload = {"config_hash": ses.hash}
    lines = []
    if b.table:
        lo, hi = b.n_range
        if hi < lo:
            raise DomainError(f"empty n range {lo}..{hi}")
        rows = [{"n": n, "p0": ex.p0(n)} for n in range(lo, hi + 1)]
        payload["table"] = rows
        payload["p0_strictly_decreasing"] = all(a["p0"] > b_["p0"] for a, b_ in zip(rows, rows[1:]))
        lines.append("n   p0(n)")
        lines += [f"{r['n']:<3} {r['p0']:.15g}" for r in rows]
    if b.p is not None or b.n is not None:
        if b.p is None or b.n is None:
            raise DomainError("a report needs both --n and --p")
        rep = ex.exponent_report(b.p, b.n)
        payload["report"] = rep.to_dict()
        lines.append(f"n={rep.n} p={rep.p:g}: gamma={rep.gamma:.15g} regime={rep.regime.value}"
                     + (f" p0={rep.p0:.15g}" if rep.p0 is not None else ""))
        for k, v in rep.case_exponents.items():
            lines.append(f"  kappa[{k}] = {v:.15g}")
    if b.a_of_eps is not None:
        a = ex.solve_a_of_eps(b.a_of_eps)
        e = b.a_of_eps
        res = a * a * e * e * math.log1p(a) - 1.0
        payload["a_of_eps"] = {"eps": e, "a": a, "residual": res}
        lines.append(f"a({e:g}) = {a:.15g}  (residual {res:.2e})")
    if len(payload) == 1:
        raise UsageError("exponents needs --n/--p, --table or --a-of-eps")
    write_json(ses.output("report", ses.dir / "report.json"), payload)
    _emit(args, "\n".join(lines), payload)


# --------------------------------------------------------------------- odi

def _odi_entry(prob: odi.OdiProblem, ctl: odi.ExtremalControls) -> dict:
    cert = odi.certify(prob)
    try:
        ode = odi.integrate_extremal(prob, ctl)
    except NoBlowupError as exc:
        return {"problem": prob.to_dict(), "certificate": cert.to_dict(),
                "ode": None, "verdict": "FAIL" if cert.hypothesis_ok else "VACUOUS",
                "detail": str(exc)}
    v = odi.verify_certificate(cert, ode)
    return {"problem": prob.to_dict(), "certificate": cert.to_dict(), "ode": ode.to_dict(),
            "verdict": v.value, "A_threshold": odi.a_threshold(cert)}


def _explicit_problem(b) -> odi.OdiProblem:
    base = dict(p=b.p, a=b.a, q=b.q, A=b.A, B=b.B, R=b.R, T0=b.T0, F0=b.F0, F0p=b.F0p)
    if b.lemma == "lemma1":
        if b.t0 is not None:
            raise DomainError("t0 belongs to the F'(0) = 0 variant; add --lemma2")
        return odi.OdiProblem(**base)
    if b.F0p != 0:
        raise DomainError(f"--lemma2 needs F'(0) = 0, got F0p={b.F0p}")
    if b.t0 is not None:
        return odi.OdiProblem(**base, t0=b.t0)
    # derive t0 as the first time the extremal solution doubles F(0)
    if not b.F0 > 0:
        raise DomainError(f"--lemma2 needs F(0) > 0, got {b.F0}")
    probe = odi.integrate_extremal(odi.OdiProblem(**base, t0=1.0))
    traj = probe.trajectory
    idx = np.nonzero(traj[:, 1] >= 2.0 * b.F0)[0]
    if not len(idx):
        raise DomainError("extremal solution never reaches 2 F(0)")
    return odi.OdiProblem(**base, t0=float(traj[idx[0], 0]))


def cmd_odi(cfg: ExperimentConfig, args, ses: Session) -> None:
    b = cfg.odi
    ctl = odi.ExtremalControls(rtol=b.rtol, atol=b.atol, F_max=b.F_max, bracket_tol=b.bracket_tol)
    if b.random > 0:
        rng = np.random.default_rng(cfg.seed)
        probs = odi.sample_problems(rng, b.random, b.lemma, ctl)
    else:
        probs = [_explicit_problem(b)]
    entries = [_odi_entry(pr, ctl) for pr in probs]
    for i, e in enumerate(entries):
        ses.verdict(f"odi[{i}]", e["verdict"])
    payload = {"config_hash": ses.hash, "lemma": b.lemma, "problems": entries}
    write_json(ses.output("report", ses.dir / "report.json"), payload)
    counts = {k: sum(e["verdict"] == k for e in entries) for k in ("PASS", "VACUOUS", "FAIL")}
    lines = [f"{len(entries)} problem(s): " + ", ".join(f"{k}={v}" for k, v in counts.items())]
    if len(entries) == 1:
        e = entries[0]
        c = e["certificate"]
        lines.append(f"M={c['M']:.6g} delta={c['delta']:.6g} C0={c['C0']:.6g} T_ref={c['T_ref']:.6g} "
                     f"bound={c['bound']:.6g} hypothesis_ok={c['hypothesis_ok']}")
        if e["ode"]:
            o = e["ode"]
            lines.append(f"extremal blow-up in [{o['T_blow_lo']:.10g}, {o['T_blow_hi']:.10g}]")
        lines.append(f"verdict: {e['verdict']}")
    payload["counts"] = counts
    _emit(args, "\n".join(lines), payload)


# ---------------------------------------------------------------- simulate

def _wave_problem(b, eps: float | None = None) -> WaveProblem:
    return WaveProblem(
        n=b.n, p=b.p, eps=b.eps if eps is None else eps, f_profile=b.f_profile,
        g_profile=b.g_profile, R=b.R, grid=GridSpec(dx=b.dx, cfl=b.cfl, L=b.L),
        caps=Caps(U_max=b.U_max, t_horizon=b.t_horizon), nonlinear=b.nonlinear,
        snapshot_times=b.snapshot_times,
    )


def _support_margin(prob: WaveProblem) -> int:
    exact_cone = prob.n == 1 and prob.grid.cfl is not None and prob.grid.cfl == 1.0
    return 2 if exact_cone else 24


def cmd_simulate(cfg: ExperimentConfig, args, ses: Session) -> None:
    b = cfg.simulate
    tol = cfg.tolerances
    wanted = list(b.checks)
    prob = _wave_problem(b)
    if "pointwise_2d" in wanted and not prob.snapshot_times:
        prob = prob.with_(snapshot_times=(4 * prob.R, 6 * prob.R, 8 * prob.R))
    run = simulate(prob)
    est = None
    if b.levels > 1:
        _, est = estimate_lifespan(prob, b.levels)
    trace = run.trace

    reports = []
    reports.append(wc.check_convexity_and_positivity(trace))
    reports.append(wc.check_F_second_identity(trace, rtol=tol.identity_rtol))
    if prob.nonneg_data:
        reports.append(wc.check_odi_consistency(trace, prob, rtol=tol.odi_rtol))
    if run.snapshots and ("support" in wanted or not wanted):
        reports.append(wc.check_support(run.snapshots, prob, tol.support_atol, _support_margin(prob)))
    if "step0" in wanted or "condition_F" in wanted:
        runs = [(trace, prob)]
        for e in b.check_eps:
            extra = prob.with_(eps=e, snapshot_times=())
            runs.append((simulate(extra).trace, extra))
        if "step0" in wanted:
            reports.append(wc.check_step0(runs, tuple(tol.band)))
        if "condition_F" in wanted:
            reports.append(wc.check_condition_F(runs, tuple(tol.band)))
    if "pointwise_2d" in wanted:
        reports.append(wc.check_pointwise_2d(run.snapshots, prob, tol.pointwise_tol))

    for r in reports:
        ses.verdict(r.name, "PASS" if r.passed else "FAIL")
    write_csv(ses.output("trace", ses.dir / "trace.csv"), TRACE_COLUMNS, trace.csv_rows())
    if run.snapshots:
        rows = ((s.t, x, u) for s in run.snapshots for x, u in zip(s.x, s.u))
        write_csv(ses.output("snapshots", ses.dir / "snapshots.csv"), SNAPSHOT_COLUMNS, rows)
    meta = {
        "config_hash": ses.hash, "problem": prob.to_dict(), "trace": trace.meta(),
        "blew_up": run.blew_up, "reason": run.reason, "T_lo": run.T_lo, "T_hi": run.T_hi,
        "T_est": run.T_est, "estimate": est.to_dict() if est else None,
    }
    write_json(ses.output("meta", ses.dir / "meta.json"), meta)
    checks = {"config_hash": ses.hash, "checks": [r.to_dict() for r in reports]}
    write_json(ses.output("checks", ses.dir / "checks.json"), checks)
    lines = [f"n={prob.n} p={prob.p:g} eps={prob.eps:g}: "
             + (f"blow-up at t~{run.T_est:.6g} ({run.reason})" if run.blew_up
                else f"no blow-up before t={run.T_lo:.6g}")]
    if est:
        lines.append(f"Richardson: T={est.extrapolated:.6g} converged={est.converged}")
    for r in reports:
        lines.append(f"  {r.name:<22} {'PASS' if r.passed else 'FAIL'}")
    lines.append(f"artifacts: {ses.dir}")
    _emit(args, "\n".join(lines), {**meta, **checks})


# ------------------------------------------------------------------- sweep

def _plan(cfg: ExperimentConfig) -> ll.SweepPlan:
    b = cfg.sweep
    over = {}
    for k in ("eps_hi", "eps_lo", "dx", "t_horizon"):
        v = getattr(b, k)
        if v is not None:
            over[k] = v
    plan = ll.default_plan(b.scenario, p=b.p, n=b.n, count=b.count, levels=b.levels, **over)
    if b.synthetic is not None:
        from dataclasses import replace
        plan = replace(plan, synthetic=(b.synthetic.C, b.synthetic.form),
                       synthetic_kappa=b.synthetic.kappa)
    return plan


def cmd_sweep(cfg: ExperimentConfig, args, ses: Session) -> None:
    b = cfg.sweep
    tol = cfg.tolerances
    plan = _plan(cfg)
    pts_path = ses.output("points", ses.dir / "points.jsonl")
    done = {}
    if args.fresh and pts_path.exists():
        pts_path.unlink()
    for rec in read_jsonl(pts_path):
        if rec.get("config_hash") == ses.hash and rec["eps"] in plan.eps_list:
            done[rec["eps"]] = ll.SweepPoint.from_dict(rec)
    if done:
        log.info("resuming: %d of %d eps values already finished", len(done), len(plan.eps_list))

    def on_point(pt):
        append_jsonl(pts_path, {"config_hash": ses.hash, "scenario": plan.scenario.value,
                                **pt.to_dict()})

    pred = plan.prediction
    summary = {"config_hash": ses.hash, "scenario": plan.scenario.value,
               "prediction": pred.to_dict(), "resumed": len(done),
               "note": "theorems bound T(eps) from above; with the matching lower bounds "
                       "the measured lifespan should share the predicted slope, which is "
                       "what is compared"}
    try:
        res = ll.run_sweep(plan, b.workers, done, on_point)
    except DomainError as exc:
        summary["status"] = "aborted"
        summary["error"] = str(exc)
        ses.verdict("sweep", "FAIL")
        write_json(ses.output("summary", ses.dir / "summary.json"), summary)
        _emit(args, f"sweep aborted: {exc}", summary)
        return
    fit = ll.fit_power_law(res, pred, tol.fit_tol, b.n_boot, cfg.seed)
    tv = ll.compare_to_theory(fit, pred, tol.fit_tol)
    Ts = [pt.T_extrap for pt in res.converged_points]
    monotone = all(a <= b_ for a, b_ in zip(Ts, Ts[1:]))
    summary.update(status="ok", fit=fit.to_dict(), theory=tv.to_dict(),
                   monotone_T=monotone, failures=[pt.to_dict() for pt in res.failures])
    if pred.special_form == "a_of_eps":
        # log-corrected law: a pure power fit only has to come out shallower
        # than the unlogged exponent; the ratio test below carries the verdict
        shallower = fit.slope > pred.slope
        summary["slope_shallower_than_theory"] = shallower
        ses.verdict("slope_shallower", "PASS" if shallower else "FAIL")
    else:
        ses.verdict("slope", tv.verdict)
    ses.verdict("monotone_T", "PASS" if monotone else "FAIL")
    if plan.scenario is ll.Scenario.TWO_D_P2_F_ZERO:
        ra = ll.check_a_scaling(res, "a_of_eps", tol.ratio_spread, tol.drift_tol)
        ri = ll.check_a_scaling(res, "inverse_eps", tol.ratio_spread, tol.drift_tol)
        summary["ratio_a_of_eps"] = ra.to_dict()
        summary["ratio_inverse_eps"] = ri.to_dict()
        ses.verdict("ratio_a_of_eps", "PASS" if ra.passed else "FAIL")
    write_json(ses.output("summary", ses.dir / "summary.json"), summary)
    write_csv(ses.output("plot", ses.dir / "plot.csv"), PLOT_COLUMNS, ll.plot_rows(res))
    head = (f"{plan.scenario.value}: slope {fit.slope:.4f} "
            f"[{fit.slope_ci[0]:.4f}, {fit.slope_ci[1]:.4f}] vs theory {tv.theory_slope:.4f} ")
    if pred.special_form == "a_of_eps":
        head += f"(law C a(eps): shallower slope expected) -> {ses.verdicts['slope_shallower']}"
    else:
        head += f"(rel err {tv.rel_err:.3f}, tol {tv.tol}) -> {tv.verdict.value}"
    lines = [head]
    if tv.alt_slope is not None:
        lines.append(f"  general-n exponent slope {tv.alt_slope:.4f} (rel err {tv.alt_rel_err:.3f})")
    if "ratio_a_of_eps" in summary:
        lines.append(f"  T/a(eps) spread {summary['ratio_a_of_eps']['spread']:.3f}, "
                     f"T*eps spread {summary['ratio_inverse_eps']['spread']:.3f}")
    lines.append(f"artifacts: {ses.dir}")
    _emit(args, "\n".join(lines), summary)


COMMANDS = {"exponents": cmd_exponents, "odi": cmd_odi, "simulate": cmd_simulate,
            "sweep": cmd_sweep}


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = make_config(args)
        ses = Session(cfg, args.out)
        COMMANDS[args.command](cfg, args, ses)
    except (DomainError, UsageError, ValidationError, NoBlowupError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return ses.finish()


if __name__ == "__main__":
    sys.exit(main())
