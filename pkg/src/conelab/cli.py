"""Command-line front end.

Subcommands map one-to-one onto the verification routines; each run produces
a VerificationReport whose records are name-sorted and whose stability hash
is the sha256 of the canonical report JSON with the timestamp stripped, so
identical configurations hash identically across runs.

Exit codes: 0 all checks passed, 1 at least one failed, 2 invalid input or
configuration, 3 internal error.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import hashlib
import json
import math
import sys
import time
from dataclasses import asdict, dataclass, field as dc_field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from . import verifier as V
from .currents import PowerU, current_general, current_to_csv
from .errors import ConelabError, InvalidInput
from .fields import GridSpec, ScalarField, field_to_csv, from_expr, materialize
from .geometry import AdmissibleRegion
from .solver import (
    CauchyData,
    counterexample_build,
    exact_spherical_wave,
    solve,
    spherical_wave_data,
    static_multipole,
)
from .verifier import CheckRecord
from .weights import Potential, PowerLog, SplitWeightParams

COMMANDS = (
    "verify-identity",
    "verify-carleman",
    "verify-nl",
    "limits",
    "counterexample",
    "solve",
    "pipeline",
)

DEFAULT_REGION = dict(rho=0.1, omega=10.0, sigma=0.1, tau=10.0)


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass
class RunConfig:
    """Validated run configuration (file contents merged over defaults)."""

    command: str
    params: dict = dc_field(default_factory=dict)

    @classmethod
    def load(cls, command: str, path: Optional[str]) -> "RunConfig":
        params = {}
        if path is not None:
            try:
                raw = json.loads(Path(path).read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise InvalidInput(f"cannot read config {path}: {exc}") from exc
            if not isinstance(raw, dict):
                raise InvalidInput("config must be a JSON object")
            schema = raw.pop("schema", None)
            if schema != 1:
                raise InvalidInput(f"unsupported config schema {schema!r} (need 1)")
            conf_cmd = raw.pop("command", None)
            if conf_cmd is not None and conf_cmd != command:
                raise InvalidInput(
                    f"config is for {conf_cmd!r} but the {command!r} subcommand was invoked")
            params = raw
        if command not in COMMANDS:
            raise InvalidInput(f"unknown command {command!r}")
        return cls(command=command, params=params)

    def region(self) -> AdmissibleRegion:
        vals = dict(DEFAULT_REGION)
        vals.update(self.params.get("region", {}))
        try:
            return AdmissibleRegion(**vals)
        except TypeError as exc:
            raise InvalidInput(f"bad region spec: {exc}") from exc

    def get(self, key, default=None):
        return self.params.get(key, default)


def _json_safe(obj):
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(x) for x in obj]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return [_json_safe(x) for x in obj.tolist()]
    if isinstance(obj, float) and (math.isnan(obj) or math.isinf(obj)):
        return repr(obj)
    return obj


def _record_dict(rec: CheckRecord) -> dict:
    return _json_safe(asdict(rec))


def build_report(command: str, records, seed: Optional[int]) -> dict:
    records = sorted(records, key=lambda r: r.name)
    body = {
        "schema": 1,
        "package": "conelab",
        "version": __version__,
        "command": command,
        "seed": seed,
        "passed": all(r.passed for r in records),
        "records": [_record_dict(r) for r in records],
    }
    canonical = json.dumps(body, sort_keys=True, separators=(",", ":"))
    body["stability_hash"] = hashlib.sha256(canonical.encode()).hexdigest()
    body["timestamp"] = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
    return body


def _fan_out(jobs, max_workers: int = 4):
    """Run (name, callable) jobs on a thread pool; exceptions propagate."""
    out = []
    with concurrent.futures.ThreadPoolExecutor(max_workers=max_workers) as ex:
        futs = {ex.submit(fn): name for name, fn in jobs}
        for fut in concurrent.futures.as_completed(futs):
            res = fut.result()
            out.extend(res if isinstance(res, list) else [res])
    return out


# ---------------------------------------------------------------------------
# subcommand runners (each returns a list of CheckRecords plus csv payloads)
# ---------------------------------------------------------------------------

def _battery_u_choices():
    return [("free", None),
            ("power-u", PowerU(sign=1, p=1, V=Potential.constant(1.0)))]


def run_verify_identity(cfg: RunConfig, refine: bool):
    reg = cfg.region()
    n = int(cfg.get("n", 3))
    levels = tuple(cfg.get("levels", (64, 128, 256)))
    if cfg.get("preset") == "battery":
        levels = (128, 256, 512)
    params = SplitWeightParams(a=1.0, b=0.1, p=0.5)

    jobs = []
    for fname, src, ell in V.battery_fields():
        for wname, rep in V.battery_weights(params):
            for uname, U in _battery_u_choices():
                tag = f"{fname}/{wname}/{uname}"

                def job(src=src, rep=rep, U=U, ell=ell, tag=tag):
                    recs = []
                    conv = V.identity_convergence(src, rep, U, reg, n=n,
                                                  ell=ell, levels=levels)
                    recs.append(CheckRecord(
                        name=f"identity-order[{tag}]", passed=conv.passed,
                        value=conv.value, tolerance=conv.tolerance,
                        details=conv.details))
                    grid = GridSpec(region=reg, n_s=levels[-1], n_y=levels[-1],
                                    n=n, ell=ell)
                    fld = materialize(src, grid)
                    ana = V.identity_residual(fld, rep, U,
                                              derivative_mode="analytic")
                    recs.append(CheckRecord(
                        name=f"identity-analytic[{tag}]",
                        passed=ana.rel_residual < 1e-9,
                        value=ana.rel_residual, tolerance=1e-9, details={}))
                    pw = V.pointwise_inequality(fld, rep, U,
                                                derivative_mode="analytic")
                    recs.append(CheckRecord(
                        name=f"pointwise-margin[{tag}]", passed=pw.passed,
                        value=pw.margin_min,
                        tolerance=2.0 * pw.identity_residual,
                        details={"identity_residual": pw.identity_residual}))
                    return recs

                jobs.append((tag, job))
    return _fan_out(jobs), {}


def run_verify_carleman(cfg: RunConfig, refine: bool):
    n = int(cfg.get("n", 3))
    nodes = int(cfg.get("nodes", 160))
    params = SplitWeightParams(**cfg.get("weight", dict(a=1.0, b=0.1, p=0.5)))
    base = cfg.region()
    reg_lo = AdmissibleRegion(rho=base.rho, omega=1.0, sigma=base.sigma, tau=base.tau)
    reg_hi = AdmissibleRegion(rho=1.0, omega=base.omega, sigma=base.sigma, tau=base.tau)
    m = int(cfg.get("grid", 96))

    def chain_records(nodes_, m_, suffix=""):
        recs = []
        cs, ks = [], []
        flo = fhi = None
        for fname, src, ell in V.battery_fields():
            glo = GridSpec(region=reg_lo, n_s=m_, n_y=m_, n=n, ell=ell)
            ghi = GridSpec(region=reg_hi, n_s=m_, n_y=m_, n=n, ell=ell)
            f_lo = materialize(src, glo)
            f_hi = materialize(src, ghi)
            if fname == "spherical-wave":
                flo, fhi = f_lo, f_hi
            for fld, br in ((f_lo, "low"), (f_hi, "high")):
                rep = V.carleman_split_check(fld, params, br, nodes=nodes_)
                recs.append(CheckRecord(
                    name=f"split-chain[{fname}/{br}]{suffix}", passed=rep.passed,
                    value=rep.margin, tolerance=0.0,
                    details={"lhs_bulk": rep.lhs_bulk, "rhs_bulk": rep.rhs_bulk,
                             "boundary": rep.boundary.as_dict(),
                             "c_cal": rep.c_cal, "k_cal": rep.k_cal}))
                if rep.c_cal is not None:
                    cs.append(rep.c_cal)
                if rep.k_cal is not None:
                    ks.append(rep.k_cal)
        canc = V.split_cancellation(flo, fhi, params, nodes=nodes_)
        recs.append(CheckRecord(name=f"split-seam-cancellation{suffix}",
                                passed=canc.passed, value=canc.value,
                                tolerance=canc.tolerance, details=canc.details))
        return recs, min(cs), max(ks)

    records, cmin, kmax = chain_records(nodes, m)
    records.append(CheckRecord(
        name="battery-constants", passed=cmin >= 1.0 and kmax <= V.E2_OVER_4,
        value=cmin / kmax, tolerance=0.0,
        details={"c_min": cmin, "k_max": kmax, "k_bound": V.E2_OVER_4}))
    for level in range(1, int(refine) + 1):
        scale = 2**level
        _, cmin2, kmax2 = chain_records(scale * nodes, scale * (m - 1) + 1,
                                        suffix=f"@refined-{level}")
        drift = max(abs(cmin2 - cmin) / cmin, abs(kmax2 - kmax) / kmax)
        records.append(CheckRecord(
            name=f"battery-constants-stability[{level}]", passed=drift <= 0.10,
            value=drift, tolerance=0.10,
            details={"c_min": [cmin, cmin2], "k_max": [kmax, kmax2]}))
    return records, {}


def _nl_combos(cfg: RunConfig):
    default = [[1, 1, "constant"], [1, 2, "power"], [-1, 3, "constant"]]
    out = []
    for sgn, p, kind in cfg.get("combos", default):
        if kind == "constant":
            pot = Potential.constant(1.0)
        elif kind == "power":
            pot = Potential.power_of_f(0.25, amplitude=1.0)
        else:
            raise InvalidInput(f"unknown potential kind {kind!r}")
        out.append((int(sgn), int(p), pot, kind))
    return out


def run_verify_nl(cfg: RunConfig, refine: bool):
    n = int(cfg.get("n", 3))
    a = float(cfg.get("a", 0.1))
    nodes = int(cfg.get("nodes", 160))
    m = int(cfg.get("grid", 96))
    reg = cfg.region()
    grid = GridSpec(region=reg, n_s=m, n_y=m, n=n)
    fld = materialize(exact_spherical_wave(width=1.0, power=8), grid)
    records = []
    for sgn, p, pot, kind in _nl_combos(cfg):
        U = PowerU(sign=sgn, p=p, V=pot)
        rep = V.carleman_nl_check(fld, a, U, nodes=nodes)
        sign_word = "focusing" if sgn > 0 else "defocusing"
        gamma_ok = (rep.gamma_min > 0) if sgn > 0 else (rep.gamma_max < 0)
        records.append(CheckRecord(
            name=f"nl-chain[{sign_word}/p={p}/{kind}]",
            passed=rep.passed and gamma_ok, value=rep.margin, tolerance=0.0,
            details={"lhs_bulk": rep.lhs_bulk, "rhs_bulk": rep.rhs_bulk,
                     "boundary": rep.boundary.as_dict(),
                     "gamma": [rep.gamma_min, rep.gamma_max]}))
    return records, {}


def run_limits(cfg: RunConfig, refine: bool):
    n = int(cfg.get("n", 3))
    nodes = int(cfg.get("nodes", 192))
    count = int(cfg.get("count", 6))
    delta = float(cfg.get("delta", 1.0))
    alpha = float(cfg.get("alpha", 0.25))
    beta = float(cfg.get("beta", 0.25))
    records = []
    series = {}
    for kind in ("cone_tau", "cone_sigma", "hyperboloid_rho", "hyperboloid_omega"):
        rec = V.boundary_limit_experiment(kind, n=n, delta=delta, alpha=alpha,
                                          beta=beta, count=count, nodes=nodes)
        records.append(CheckRecord(
            name=f"limit-slope[{kind}]", passed=rec.passed, value=rec.slope,
            tolerance=0.10,
            details={"target": rec.target, "rel_err": rec.rel_err,
                     "levels": list(rec.levels), "values": list(rec.values)}))
        series[kind] = list(zip(rec.levels, rec.values))
    return records, {"series": series}


def run_counterexample(cfg: RunConfig, refine: bool):
    n = int(cfg.get("n", 3))
    a = float(cfg.get("a", 6.0))
    bundle = counterexample_build(n=n, a=a)
    r = np.linspace(0.05, 40.0, 4000)
    res = bundle.residual(r)
    res_max = float(np.max(np.abs(res)))
    umax = float(np.max(np.abs(bundle.potential(r))))
    outside = ~((r > bundle.support[0] - 1e-9) & (r < bundle.support[1] + 1e-9))
    u_out = float(np.max(np.abs(bundle.potential(r[outside]))))
    tail = np.logspace(1, 3, 31)
    slope = float(np.polyfit(np.log(tail), np.log(bundle.beta(tail)), 1)[0])
    records = [
        CheckRecord(name="counterexample-exponents",
                    passed=bundle.ell >= 0, value=bundle.q_plus, tolerance=0.0,
                    details={"q_plus": bundle.q_plus, "q_minus": bundle.q_minus,
                             "ell": bundle.ell, "a": a}),
        CheckRecord(name="counterexample-residual", passed=res_max < 1e-10,
                    value=res_max, tolerance=1e-10, details={}),
        CheckRecord(name="counterexample-tail-slope",
                    passed=abs(slope - bundle.q_minus) <= 0.01 * abs(bundle.q_minus),
                    value=slope, tolerance=0.01,
                    details={"expected": bundle.q_minus}),
        CheckRecord(name="counterexample-potential-support",
                    passed=bool(u_out == 0.0 and np.isfinite(umax)),
                    value=umax, tolerance=0.0,
                    details={"support": list(bundle.support),
                             "outside_max": u_out}),
    ]
    rr = np.linspace(0.1, 10.0, 512)
    series = {"beta": list(zip(rr, bundle.beta(rr))),
              "potential": list(zip(rr, bundle.potential(rr)))}
    return records, {"series": series}


def _potential_from_config(spec) -> Optional[Potential]:
    if spec is None:
        return None
    kind = spec.get("kind")
    if kind == "constant":
        return Potential.constant(float(spec.get("c", 1.0)))
    if kind == "power":
        return Potential.power_of_f(float(spec.get("c", 0.25)),
                                    amplitude=float(spec.get("amplitude", 1.0)))
    if kind == "saturating":
        return Potential.saturating(float(spec.get("B", 1.0)),
                                    float(spec.get("beta", 2.0)),
                                    float(spec.get("p", 1.0)))
    raise InvalidInput(f"unknown potential kind {kind!r}")


def run_solve(cfg: RunConfig, refine: bool):
    n = int(cfg.get("n", 3))
    profile = cfg.get("profile", "spherical-wave")
    T = float(cfg.get("T", 1.0))
    R = float(cfg.get("R", 6.0))
    dr = float(cfg.get("dr", 0.02))
    ell = int(cfg.get("ell", 0))
    U = None
    nl = cfg.get("nonlinearity")
    if nl is not None:
        pot = _potential_from_config(nl.get("potential",
                                            {"kind": "constant", "c": 1.0}))
        U = PowerU(sign=int(nl.get("sign", 1)), p=float(nl.get("p", 1)), V=pot)
    if profile == "spherical-wave":
        base = spherical_wave_data(width=float(cfg.get("width", 1.0)),
                                   power=int(cfg.get("power", 6)))
        data = CauchyData(profile=base.profile, velocity=base.velocity,
                          ell=ell, label="spherical-wave")
    elif profile == "gaussian":
        w = float(cfg.get("width", 0.5))
        data = CauchyData(profile=lambda r: np.exp(-(r / w) ** 2),
                          velocity=lambda r: np.zeros_like(r), ell=ell,
                          label="gaussian")
    else:
        raise InvalidInput(f"unknown profile {profile!r}")
    result = solve(data, T=T, R=R, dr=dr, n=n, U=U)
    records = [
        CheckRecord(name="solve-completed", passed=True,
                    value=float(result.times[-1]), tolerance=0.0,
                    details={"slices": len(result.times), "dr": result.dr,
                             "dt": result.dt, "label": data.label}),
    ]
    if U is None:
        records.append(CheckRecord(
            name="solve-energy-drift", passed=result.energy_drift < 0.01,
            value=result.energy_drift, tolerance=0.01, details={}))
    payload = {"evolution": result}
    if cfg.get("sample", True):
        reg = cfg.region()
        m = int(cfg.get("grid", 96))
        try:
            grid = GridSpec(region=reg, n_s=m, n_y=m, n=n, ell=ell)
            payload["field"] = result.field_on(grid)
            covered = True
        except ConelabError:
            covered = False  # sample window outside the evolved domain
        records.append(CheckRecord(
            name="solve-exterior-sample", passed=True, value=float(covered),
            tolerance=0.0, details={"covered": covered,
                                    "region": asdict(reg)}))
    return records, payload


def _pipeline_field(cfg: RunConfig, n: int):
    case = cfg.get("case", "zero")
    reg = cfg.region()
    m = int(cfg.get("grid", 64))
    potential = None
    ell = int(cfg.get("ell", 0))
    if case == "zero":
        grid = GridSpec(region=reg, n_s=m, n_y=m, n=n, ell=ell)
        fld = ScalarField.zeros(grid)
    elif case == "multipole":
        ell = max(ell, 1)
        grid = GridSpec(region=reg, n_s=m, n_y=m, n=n, ell=ell)
        fld = materialize(static_multipole(ell, n), grid)
    elif case == "counterexample":
        bundle = counterexample_build(n=n, a=float(cfg.get("a", 6.0)))
        grid = GridSpec(region=reg, n_s=m, n_y=m, n=n, ell=bundle.ell)
        fld = ScalarField.from_function(
            grid, lambda u, v: bundle.beta(v - u), name="counterexample")
        potential = lambda u, v: bundle.potential(v - u)
    elif case == "wave":
        grid = GridSpec(region=reg, n_s=m, n_y=m, n=n, ell=ell)
        fld = materialize(exact_spherical_wave(width=1.0, power=8), grid)
    elif case == "expr":
        grid = GridSpec(region=reg, n_s=m, n_y=m, n=n, ell=ell)
        fld = materialize(from_expr(cfg.get("expr", "0*u"), label="expr"), grid)
    else:
        raise InvalidInput(f"unknown pipeline case {case!r}")
    return fld, potential


def run_pipeline(cfg: RunConfig, refine: bool):
    n = int(cfg.get("n", 3))
    beta = float(cfg.get("beta", 2.0))
    p = float(cfg.get("p", 1.0))
    nodes = int(cfg.get("nodes", 96))
    fld, potential = _pipeline_field(cfg, n)
    rep = V.uniqueness_pipeline(fld, beta=beta, p=p, potential=potential,
                                nodes=nodes)
    records = [CheckRecord(
        name="pipeline-verdict", passed=True, value=rep.b_required,
        tolerance=rep.b_admissible,
        details={"verdict": rep.verdict, "a": rep.a, "b": rep.b,
                 "terms": [{"name": t.name, "slope": t.slope,
                            "classification": t.classification}
                           for t in rep.terms]})]
    series = {f"term-{t.name}": list(zip(t.levels, t.values)) for t in rep.terms}
    for level in range(1, int(refine) + 1):
        rep2 = V.uniqueness_pipeline(fld, beta=beta, p=p, potential=potential,
                                     nodes=2**level * nodes)
        stable = rep2.verdict.split(":")[0] == rep.verdict.split(":")[0]
        records.append(CheckRecord(
            name=f"pipeline-verdict-stability[{level}]", passed=stable,
            value=float(stable), tolerance=0.0,
            details={"verdict": rep.verdict, "refined_verdict": rep2.verdict}))
    return records, {"series": series}


RUNNERS = {
    "verify-identity": run_verify_identity,
    "verify-carleman": run_verify_carleman,
    "verify-nl": run_verify_nl,
    "limits": run_limits,
    "counterexample": run_counterexample,
    "solve": run_solve,
    "pipeline": run_pipeline,
}


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

def _write_series_csv(path: Path, series: dict) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["name", "param", "value"])
        for name, rows in series.items():
            for param, value in rows:
                w.writerow([name, repr(float(param)), repr(float(value))])


def emit(report: dict, payload: dict, out: Optional[str], fmt: str) -> None:
    text = json.dumps(report, indent=2)
    if fmt == "json":
        if out:
            Path(out).write_text(text + "\n")
        else:
            print(text)
        return
    if fmt == "csv-bundle":
        if not out:
            raise InvalidInput("--format csv-bundle needs --out DIRECTORY")
        outdir = Path(out)
        outdir.mkdir(parents=True, exist_ok=True)
        (outdir / "report.json").write_text(text + "\n")
        if payload.get("series"):
            _write_series_csv(outdir / "series.csv", payload["series"])
        fld = payload.get("field")
        if fld is not None:
            field_to_csv(fld, outdir / "field.csv")
            cur = current_general(fld, PowerLog(1.0))
            current_to_csv(cur, outdir / "current.csv")
        return
    raise InvalidInput(f"unknown format {fmt!r}")


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="conelab",
        description="Numerical verification lab for weighted energy estimates "
                    "on the exterior of the light cone.")
    parser.add_argument("--version", action="version",
                        version=f"conelab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for cmd in COMMANDS:
        sp = sub.add_parser(cmd)
        sp.add_argument("--config", default=None,
                        help="JSON config file (schema 1)")
        sp.add_argument("--out", default=None,
                        help="output path (file for json, directory for csv-bundle)")
        sp.add_argument("--format", default="json",
                        choices=("json", "csv-bundle"))
        sp.add_argument("--preset", default=None, choices=("battery",),
                        help="use the full acceptance-scale configuration")
        sp.add_argument("--refine", type=int, nargs="?", const=1, default=0,
                        metavar="LEVELS",
                        help="re-run at doubled resolution LEVELS times "
                             "(default once) and check stability")
        sp.add_argument("--seed", type=int, default=None)
    return parser


def main(argv: Optional[list] = None) -> int:
    args = make_parser().parse_args(argv)
    try:
        cfg = RunConfig.load(args.command, args.config)
        if args.preset:
            cfg.params["preset"] = args.preset
        records, payload = RUNNERS[args.command](cfg, args.refine)
        report = build_report(args.command, records, args.seed)
        emit(report, payload, args.out, args.format)
        return 0 if report["passed"] else 1
    except ConelabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
