"""Command-line front end: run the tasks of a manifest and emit a report."""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import time
from fractions import Fraction
from typing import Any

import numpy as np

from . import expr as E
from .algebra import (FoamElement, InternalInconsistency, apply_operator, delta_integral, eq,
                      is_generalized_solution, mollifier_net, zero)
from .certs import (CertificateError, check_pointwise, neutrix_check, neutrix_witness)
from .collapse import (bad_points_near, brute_force_membership, collapse, grid_points, net_values,
                       synthesize_certificate)
from .descriptors import is_residual_in
from .manifest import (DEFAULTS, ManifestError, ManifestSyntaxError, Workspace, build, load)
from .nets import is_countably_cofinal
from .verdict import Verdict, jsonable

FORMAT_VERSION = "1"
EXIT_OK, EXIT_NEGATIVE, EXIT_PARSE, EXIT_INVALID, EXIT_INTERNAL = 0, 1, 2, 3, 4


def decimal(v) -> str:
    """Decimal rendering with 12 significant digits (for CSV cells)."""
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return f"{float(v):.12g}"


def table(columns: list[str], rows) -> dict:
    return {"columns": columns, "rows": [[decimal(v) for v in r] for r in rows]}


# ---------------------------------------------------------------------------
# tasks


class _Settings:
    def __init__(self, task: dict, flags: dict):
        def pick(key):
            if flags.get(key) is not None:
                return flags[key]
            return task.get(key, DEFAULTS[key])
        self.depth = int(pick("depth"))
        self.grid = Fraction(str(pick("grid")))
        self.order = int(pick("order"))
        self.seed = int(pick("seed"))

    def json(self) -> dict:
        return {"depth": self.depth, "grid": jsonable(self.grid), "order": self.order, "seed": self.seed}


def _certificate(ws: Workspace, task: dict, net, family, depth: int, where: str):
    name = task.get("cert", "auto")
    if name == "auto":
        return synthesize_certificate(net, family, depth)
    if name not in ws.certs:
        raise ManifestError(where, f"unknown certificate {name!r}")
    return ws.certs[name][1]


def _task_check(ws, task, s, where):
    net = ws.net(task.get("net", ""), where)
    family = ws.family_named(task.get("family"), where)
    cert = _certificate(ws, task, net, family, s.depth, where)
    if cert is None:
        return Verdict("Unknown", s.depth, detail="no certificate could be synthesized"), {}
    v = check_pointwise(net, cert, s.depth, s.order, s.seed)
    return v, {"certificate": cert.summary(s.depth)}


def _task_eq(ws, task, s, where):
    family = ws.family_named(task.get("family"), where)
    ctx = ws.context(family)
    a = FoamElement(ws.net(task.get("lhs", ""), where), ctx)
    b = FoamElement(ws.net(task.get("rhs", ""), where), ctx) if "rhs" in task else zero(ctx)
    v = eq(a, b, s.depth, s.order)
    extra = {}
    if v.payload is not None:
        extra["certificate"] = v.payload.summary(s.depth)
    return v, extra


def _task_collapse(ws, task, s, where):
    net = ws.net(task.get("net", ""), where)
    family = ws.family_named(task.get("family", "BAIRE_I"), where)
    cert = _certificate(ws, task, net, family, s.depth, where)
    if cert is None:
        return Verdict("Unknown", s.depth, detail="no pointwise certificate could be synthesized"), {}
    rep = collapse(net, cert, s.depth, s.order)
    extra = {"collapse": rep.to_json()}
    if task.get("oracle", True):
        res = brute_force_membership(net, family, s.grid, s.depth, s.order)
        outside = bad_points_near(rep.gamma, res)
        extra["oracle"] = {"verdict": res.verdict.kind, "bad_points": int(res.bad.sum()),
                           "bad_outside_gamma": len(outside)}
        extra["table"] = table([f"x{j + 1}" for j in range(ws.omega.n)] + ["min_index"], res.rows())
    v = rep.uniform
    if not rep.nowhere_dense:
        v = Verdict("Refuted", s.depth, {"gamma": rep.gamma}, "gamma is not nowhere dense")
    return v, extra


def _task_solve(ws, task, s, where):
    op_name = task.get("operator", "")
    if op_name not in ws.operators:
        raise ManifestError(where, f"unknown operator {op_name!r}")
    T = ws.operators[op_name]
    family = ws.family_named(task.get("family"), where)
    ctx = ws.context(family)
    u = FoamElement(ws.net(task.get("net", ""), where), ctx)
    v = is_generalized_solution(T, u, s.depth)
    extra: dict[str, Any] = {"operator": T.text}
    if v.payload is not None:
        extra["certificate"] = v.payload.summary(s.depth)
    if ws.omega.n >= 2 and "slice" in task:
        extra["table"] = _residual_samples(ws, apply_operator(T, u).rep, task, s)
    return v, extra


def _residual_samples(ws, residual, task, s) -> dict:
    """Residual values on the grid line where the last coordinate equals ``slice``."""
    n = ws.omega.n
    t = Fraction(str(task["slice"]))
    J, _ = grid_points(ws.omega, s.grid)
    on_line = J[n - 1] * s.grid.numerator * t.denominator == t.numerator * s.grid.denominator
    J = J[:, on_line]
    X = J.astype(float) * float(s.grid)
    rows = []
    for pos in task.get("positions", [8, 16, 32]):
        if pos > s.depth:
            continue
        vals = net_values(residual, pos, J, X, s.grid)
        k = residual.index_set.label(pos)
        for j in range(J.shape[1]):
            rows.append([pos, str(k), *[Fraction(int(c)) * s.grid for c in J[:, j]], vals[j]])
    return table(["position", "label"] + [f"x{j + 1}" for j in range(n)] + ["residual"], rows)


def _task_neutrix(ws, task, s, where):
    """Membership of the constant net psi: refuted unless psi is literally zero."""
    net = ws.net(task.get("net", ""), where)
    if net.diagonal is None:
        raise ManifestError(where, "neutrix tasks need a diagonal net")
    family = ws.family_named(task.get("family"), where)
    psi = net.diagonal
    if psi.is_literal_zero():
        return Verdict("Verified", s.depth, detail="zero net is the zero class"), {}
    if neutrix_check(psi, family, s.depth):
        x = neutrix_witness(psi, s.seed)
        return Verdict("Refuted", s.depth, {"x": list(x), "value": psi.evaluate(x)},
                       "index-independent net is nonzero on an open set"), {}
    return Verdict("Unknown", s.depth), {}


def _task_demo(ws, task, s, where):
    name = task.get("demo", "mollifier")
    if name == "mollifier":
        ctx = ws.context(ws.family_named(task.get("family"), where))
        delta = mollifier_net("delta", ctx, int(task.get("axis", 1)) - 1)
        v = eq(delta, zero(ctx), s.depth, s.order)
        ks = task.get("integrals", [4, 8, 16])
        extra = {"integrals": [{"k": k, "value": delta_integral(k)} for k in ks]}
        if v.payload is not None:
            extra["certificate"] = v.payload.summary(s.depth)
        return v, extra
    if name == "cofinal":
        return is_countably_cofinal(ws.index_set, s.depth), {}
    raise ManifestError(where, f"unknown demo {name!r}")


def _task_residual(ws, task, s, where):
    set_name = task.get("set", "")
    if set_name not in ws.sets:
        raise ManifestError(where, f"unknown set {set_name!r}")
    U = ws.region(str(task.get("open", "all")), where + ".open")
    try:
        return is_residual_in(ws.sets[set_name], U, s.depth), {}
    except ValueError as exc:
        raise ManifestError(where, str(exc)) from exc


def _task_oracle(ws, task, s, where):
    net = ws.net(task.get("net", ""), where)
    family = ws.family_named(task.get("family"), where)
    res = brute_force_membership(net, family, s.grid, s.depth, s.order)
    return res.verdict, {"table": table([f"x{j + 1}" for j in range(ws.omega.n)] + ["min_index"], res.rows())}


RUNNERS = {"check": _task_check, "eq": _task_eq, "collapse": _task_collapse, "solve": _task_solve,
           "neutrix": _task_neutrix, "demo": _task_demo, "residual": _task_residual, "oracle": _task_oracle}


def run_workspace(ws: Workspace, flags: dict, source: str = "") -> tuple[dict, int]:
    tasks_out = []
    timings = {}
    exit_code = EXIT_OK
    for i, task in enumerate(ws.manifest.data["task"]):
        where = f"task[{i + 1}]"
        s = _Settings(task, flags)
        expect = "negative" if flags.get("expect") == "negative" else task.get("expect", "positive")
        start = time.perf_counter()
        try:
            verdict, extra = RUNNERS[task["kind"]](ws, task, s, where)
        except (CertificateError, E.DomainError) as exc:
            raise ManifestError(where, str(exc)) from exc
        timings[task["name"]] = round(time.perf_counter() - start, 3)
        ok = not verdict.negative or expect == "negative"
        if not ok:
            exit_code = EXIT_NEGATIVE
        entry = {"name": task["name"], "kind": task["kind"], "expect": expect, "ok": ok,
                 "settings": s.json(), **verdict.to_json()}
        entry.update(jsonable(extra))
        tasks_out.append(entry)
    report = {"format_version": FORMAT_VERSION, "manifest": os.path.basename(source),
              "space": {"dimension": ws.omega.n, "omega": ws.omega.text(), "index": ws.index_set.text(),
                        "family": ws.family.text()},
              "tasks": tasks_out, "exit_code": exit_code, "timings": timings}
    return report, exit_code


def structured(report: dict) -> str:
    """Canonical JSON of the report without timings (the determinism scope)."""
    body = {k: v for k, v in report.items() if k != "timings"}
    return json.dumps(body, sort_keys=True, indent=2)


def render_json(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2)


def render_human(report: dict) -> str:
    lines = [f"manifest {report['manifest']}  (format {report['format_version']})",
             f"space: n={report['space']['dimension']} omega={report['space']['omega']} "
             f"index={report['space']['index']} family={report['space']['family']}"]
    for t in report["tasks"]:
        mark = "ok " if t["ok"] else "FAIL"
        depth = f"({t['depth']})" if "depth" in t else ""
        lines.append(f"[{mark}] {t['name']} <{t['kind']}>: {t['verdict']}{depth}"
                     + ("  expect=negative" if t["expect"] == "negative" else ""))
        if "witness" in t:
            lines.append(f"       witness: {json.dumps(t['witness'], sort_keys=True)}")
        if "detail" in t:
            lines.append(f"       {t['detail']}")
        if "certificate" in t:
            c = t["certificate"]
            lines.append(f"       certificate: {c.get('kind')} family={c.get('family')} "
                         f"sigma={c.get('sigma', c.get('gamma'))}")
        if "collapse" in t:
            c = t["collapse"]
            lines.append(f"       gamma = {c['gamma']}  nowhere dense: {c['gamma_nowhere_dense']}  "
                         f"patches: {len(c['patches'])}")
        if "oracle" in t:
            o = t["oracle"]
            lines.append(f"       oracle: {o['verdict']}, {o['bad_points']} bad points, "
                         f"{o['bad_outside_gamma']} outside gamma")
        if "integrals" in t:
            vals = ", ".join(f"k={d['k']}: {d['value']}" for d in t["integrals"])
            lines.append(f"       integrals {vals}")
        if "table" in t:
            lines.append(f"       table: {len(t['table']['rows'])} rows ({', '.join(t['table']['columns'])})")
        lines.append(f"       time {report['timings'].get(t['name'], 0)} s")
    lines.append(f"exit code {report['exit_code']}")
    return "\n".join(lines) + "\n"


def emit_csv(section: dict, path=None) -> str:
    """RFC 4180 CSV of a task's table; header only when there are no rows."""
    tab = section.get("table", {"columns": [], "rows": []})
    buf = io.StringIO(newline="")
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(tab["columns"])
    writer.writerows(tab["rows"])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text


def render_csv(report: dict) -> str:
    out = []
    for t in report["tasks"]:
        if "table" in t:
            rows = [[t["name"], *r] for r in t["table"]["rows"]]
            out.append(emit_csv({"table": {"columns": ["task", *t["table"]["columns"]], "rows": rows}}))
    return "".join(out)


# ---------------------------------------------------------------------------
# entry point


def parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="foamlab", description="Run a foam-algebra manifest.")
    p.add_argument("manifest")
    p.add_argument("--depth", type=int, help="chain depth M (default 64)")
    p.add_argument("--grid", help="oracle grid step h as a rational (default 1/128)")
    p.add_argument("--order", type=int, help="derivative order P (default 3)")
    p.add_argument("--seed", type=int, help="sampling seed (default 0)")
    p.add_argument("--out", help="write the JSON report to this path")
    p.add_argument("--format", choices=("human", "json", "csv"), default="human")
    p.add_argument("--expect", choices=("negative",), help="accept negative verdicts for every task")
    return p


def run(path, flags: dict | None = None) -> tuple[dict | None, int, str]:
    """Run a manifest; returns (report, exit code, error message)."""
    flags = flags or {}
    try:
        ws = build(load(path))
        report, code = run_workspace(ws, flags, str(path))
    except ManifestSyntaxError as exc:
        return None, EXIT_PARSE, f"parse error: {exc}"
    except OSError as exc:
        return None, EXIT_PARSE, f"cannot read manifest: {exc}"
    except ManifestError as exc:
        return None, EXIT_INVALID, f"invalid manifest: {exc}"
    except InternalInconsistency as exc:
        return None, EXIT_INTERNAL, f"internal inconsistency: {exc}"
    return report, code, ""


def main(argv=None) -> int:
    args = parser().parse_args(argv)
    if args.grid is not None:
        try:
            Fraction(args.grid)
        except (ValueError, ZeroDivisionError):
            print(f"invalid grid step {args.grid!r}", file=sys.stderr)
            return EXIT_INVALID
    flags = {"depth": args.depth, "grid": args.grid, "order": args.order, "seed": args.seed,
             "expect": args.expect}
    report, code, err = run(args.manifest, flags)
    if report is None:
        print(err, file=sys.stderr)
        return code
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(render_json(report))
    if args.format == "json":
        sys.stdout.write(render_json(report))
    elif args.format == "csv":
        sys.stdout.write(render_csv(report))
    else:
        sys.stdout.write(render_human(report))
    return code


if __name__ == "__main__":
    sys.exit(main())
