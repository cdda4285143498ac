"""Batch front end: read a JSON job file, run the pipeline, emit a report.

One job per invocation (``--jobs`` fans a directory of job files out across
worker processes).  Reports are deterministic for identical (job, seed):
coefficients travel as decimal strings, keys are sorted, and no timestamps or
environment data are embedded.  Exit codes: 0 success, 1 malformed input,
2 typed domain error.
"""

import argparse
import json
import sys
from pathlib import Path

from .errors import JetError, ParseError
from .jets import CONSTRAINED, QUASI, SYMPLECTIC, Jet, VariableSpace
from . import acceptance
from . import moduli
from .normal_forms import (
    check_glancing,
    normalize_constrained_pair,
    normalize_diffeomorphism,
    parametrize_symplectic_form,
    to_implicit_form,
)
from .serialize import (
    form_from_json,
    form_to_json,
    fraction_to_json,
    jet_from_json,
    jet_to_json,
    map_from_json,
    map_to_json,
    space_from_json,
    space_to_json,
)

COMMANDS = ("normalize-diffeo", "normalize-pair", "glancing-check",
            "parametrize-form", "km-form", "poincare", "selftest")


def load_job(path, order_override=None, seed_override=None):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ParseError(f"cannot read job file: {exc}")
    except json.JSONDecodeError as exc:
        raise ParseError(f"job file is not valid JSON: {exc}")
    if not isinstance(data, dict):
        raise ParseError("job must be a JSON object")
    command = data.get("command")
    if command not in COMMANDS:
        raise ParseError(f"unknown command {command!r}", field="command")
    if order_override is not None:
        data["order"] = order_override
    if seed_override is not None:
        data["seed"] = seed_override
    return data


def _job_space(job):
    if "space" not in job:
        raise ParseError("job needs a 'space' object", field="space")
    return space_from_json(job["space"])


def _job_order(job, space=None):
    order = job.get("order")
    if not isinstance(order, int) or order < 1:
        raise ParseError("job needs a positive integer 'order'", field="order")
    return order


def _inputs(job):
    inputs = job.get("inputs")
    if not isinstance(inputs, dict):
        raise ParseError("job needs an 'inputs' object", field="inputs")
    return inputs


def run_job(job):
    """Execute a parsed job; returns the report dict."""
    command = job["command"]
    report = {
        "command": command,
        "job": job,
        "status": "success",
        "outputs": {},
        "residuals": {},
        "warnings": [],
    }
    handler = _HANDLERS[command]
    handler(job, report)
    return report


def _residual_entry(report, name, obj, serializer):
    zero = obj.is_zero()
    report["residuals"][name] = {
        "zero": zero,
        "value": serializer(obj),
    }
    if not zero:
        report["status"] = "residual-nonzero"


def _handle_normalize_diffeo(job, report):
    space = _job_space(job)
    if space.kind != SYMPLECTIC:
        raise ParseError("normalize-diffeo expects a symplectic space",
                         field="space.kind")
    order = _job_order(job)
    m = map_from_json(_inputs(job).get("map"), space, order, field="inputs.map")
    nf = normalize_diffeomorphism(m)
    report["outputs"] = {
        "normalizer": map_to_json(nf.normalizer),
        "normalized": map_to_json(nf.normalized),
        "invariants": {
            **{f"Q{i + 1}": jet_to_json(q) for i, q in enumerate(nf.q_invariants)},
            **{f"P{i + 2}": jet_to_json(p) for i, p in enumerate(nf.p_invariants)},
        },
        "coefficient_split": {
            f"{label}/{gen}": jet_to_json(jet)
            for (label, gen), jet in sorted(nf.coefficient_split.items())
        },
        "relabeling": {"permutation": nf.relabeling["permutation"],
                       "twists": nf.relabeling["twists"]},
    }
    report["certified_order"] = nf.certified_order
    _residual_entry(report, "symplectomorphism", nf.certification.residual,
                    form_to_json)


def _check_pair_order(job, space, order):
    if order < 2 * space.n + 2:
        raise ParseError(
            f"normalize-pair needs order >= 2n+2 = {2 * space.n + 2}",
            field="order")


def _handle_normalize_pair(job, report):
    space = _job_space(job)
    if space.kind != CONSTRAINED:
        raise ParseError("normalize-pair expects a constrained space",
                         field="space.kind")
    order = _job_order(job)
    _check_pair_order(job, space, order)
    inputs = _inputs(job)
    f = jet_from_json(inputs.get("f"), space, order, field="inputs.f")
    h = jet_from_json(inputs.get("h"), space, order, field="inputs.h")
    nf = normalize_constrained_pair(f, h)
    report["outputs"] = {
        "normalizer": map_to_json(nf.normalizer),
        "r": jet_to_json(nf.r),
        "invariants": {
            **{f"Q{i + 1}": jet_to_json(q) for i, q in enumerate(nf.q_invariants)},
            **{f"P{i + 2}": jet_to_json(p) for i, p in enumerate(nf.p_invariants)},
        },
        "phi": jet_to_json(nf.phi),
        "defining_jet": jet_to_json(nf.defining_jet),
        "unit": jet_to_json(nf.unit),
        "glancing": _glancing_json(nf.glancing),
    }
    report["certified_order"] = nf.certified_order
    report["warnings"].extend(nf.warnings)
    _residual_entry(report, "symplectomorphism", nf.certification.residual,
                    form_to_json)
    _residual_entry(report, "f_pullback", nf.f_residual, jet_to_json)
    _residual_entry(report, "h_ideal", nf.h_residual, jet_to_json)


def _glancing_json(rep):
    return {
        "bracket_fh": fraction_to_json(rep.bracket_fh),
        "bracket_ffh": fraction_to_json(rep.bracket_ffh),
        "bracket_hfh": fraction_to_json(rep.bracket_hfh),
        "wedge_values": [[list(idx), fraction_to_json(v)]
                         for idx, v in sorted(rep.wedge_values.items())],
        "in_s1": rep.in_s1,
        "failing_condition": rep.failing_condition(),
    }


def _handle_glancing(job, report):
    space = _job_space(job)
    if space.kind != CONSTRAINED:
        raise ParseError("glancing-check expects a constrained space",
                         field="space.kind")
    order = _job_order(job)
    inputs = _inputs(job)
    f = jet_from_json(inputs.get("f"), space, order, field="inputs.f")
    h = jet_from_json(inputs.get("h"), space, order, field="inputs.h")
    rep = check_glancing(f, h)
    report["outputs"] = {"glancing": _glancing_json(rep)}
    report["certified_order"] = order


def _handle_parametrize(job, report):
    space = _job_space(job)
    if space.kind != SYMPLECTIC:
        raise ParseError("parametrize-form expects a symplectic space",
                         field="space.kind")
    order = _job_order(job)
    form = form_from_json(_inputs(job).get("form"), space, order,
                          field="inputs.form")
    par = parametrize_symplectic_form(form)
    report["outputs"] = {
        "Q_bars": [jet_to_json(q) for q in par.q_bars],
        "P_bars": [jet_to_json(p) for p in par.p_bars],
        "reconstruction": form_to_json(par.reconstruction),
    }
    report["certified_order"] = par.certified_order
    _residual_entry(report, "reconstruction", par.residual, form_to_json)


def _handle_km(job, report):
    space = _job_space(job)
    if space.kind != CONSTRAINED:
        raise ParseError("km-form expects a constrained space",
                         field="space.kind")
    order = _job_order(job)
    _check_pair_order(job, space, order)
    inputs = _inputs(job)
    f = jet_from_json(inputs.get("f"), space, order, field="inputs.f")
    h = jet_from_json(inputs.get("h"), space, order, field="inputs.h")
    nf = normalize_constrained_pair(f, h)
    km = to_implicit_form(nf)
    report["outputs"] = {
        "r": jet_to_json(nf.r),
        "implicit_form": {
            "f_hat": jet_to_json(km.f_hat),
            "r_hat": jet_to_json(km.r_hat),
            "psi": jet_to_json(km.psi),
            "shape_residual": jet_to_json(km.shape_residual),
            "omega_tilde": form_to_json(km.omega_tilde)
            if km.omega_tilde is not None else None,
            "base_parametrization": {
                "Q_bars": [jet_to_json(q)
                           for q in km.base_parametrization["q_bars"]],
                "P_bars": [jet_to_json(p)
                           for p in km.base_parametrization["p_bars"]],
            },
        },
    }
    report["certified_order"] = km.certified_order
    report["warnings"].extend(km.warnings)
    _residual_entry(report, "symplectomorphism", nf.certification.residual,
                    form_to_json)


def _handle_poincare(job, report):
    n = job.get("n")
    if not isinstance(n, int) or n < 1:
        raise ParseError("poincare job needs integer n >= 1", field="n")
    kmax = job.get("max_order", 4)
    if not isinstance(kmax, int) or kmax < 1:
        raise ParseError("poincare job needs integer max_order >= 1",
                         field="max_order")
    seed = job.get("seed", 0)
    series = moduli.poincare_series(n, kmax, seed=seed)
    report["outputs"] = {
        "n": n,
        "max_order": kmax,
        "dims": series.dims,
        "increments": series.increments,
        "closed_form_dims": series.paper_dims,
        "agreement": series.agreement,
        "rank_checked": {str(k): v for k, v in series.rank_checked.items()},
        "rows": list(series.rows()),
    }
    report["warnings"].extend(series.warnings)
    report["certified_order"] = kmax


def _handle_selftest(job, report):
    selection = job.get("criteria")
    results = acceptance.run_all(set(selection) if selection else None)
    report["outputs"] = {
        "criteria": results,
        "table": acceptance.format_table(results),
    }
    report["certified_order"] = 0
    if not all(r["passed"] for r in results):
        report["status"] = "criteria-failed"


_HANDLERS = {
    "normalize-diffeo": _handle_normalize_diffeo,
    "normalize-pair": _handle_normalize_pair,
    "glancing-check": _handle_glancing,
    "parametrize-form": _handle_parametrize,
    "km-form": _handle_km,
    "poincare": _handle_poincare,
    "selftest": _handle_selftest,
}


def render_text(report):
    lines = [f"command: {report['command']}",
             f"status: {report['status']}"]
    if "certified_order" in report:
        lines.append(f"certified order: {report['certified_order']}")
    if report.get("error"):
        err = report["error"]
        lines.append(f"error: {err['type']}: {err['message']}")
        if err.get("condition"):
            lines.append(f"failed condition: {err['condition']}")
    for w in report.get("warnings", []):
        lines.append(f"warning: {w}")
    outputs = report.get("outputs", {})
    if isinstance(outputs.get("table"), str):
        lines.append(outputs["table"])
    elif "rows" in outputs:
        lines.append("k  dim  closed-form  agree")
        for row in outputs["rows"]:
            lines.append(f"{row['k']}  {row['dim']}  {row['paper']}  "
                         f"{row['agree']}")
    else:
        for key, value in sorted(outputs.items()):
            lines.append(f"{key}: {json.dumps(value, sort_keys=True)}")
    for name, res in sorted(report.get("residuals", {}).items()):
        status = "zero" if res["zero"] else "NONZERO"
        lines.append(f"residual {name}: {status}")
        if not res["zero"]:
            lines.append(f"  value: {json.dumps(res['value'], sort_keys=True)}")
    return "\n".join(lines) + "\n"


_CONDITION_ERRORS = ("NotGlancing", "GenericityViolation",
                     "TransversalityFailure", "DegenerateForm", "NotClosed",
                     "PivotFailure", "DegenerateDirection")


def error_report(exc, command=None):
    message = str(exc)
    name = type(exc).__name__
    # surface the violated hypothesis for the typed domain errors
    condition = message if name in _CONDITION_ERRORS else None
    return {
        "command": command,
        "status": "error",
        "error": {
            "type": name,
            "message": message,
            "condition": condition,
        },
        "outputs": {},
        "residuals": {},
        "warnings": [],
    }


def run_file(input_path, order=None, seed=None):
    """Returns (report, exit_code)."""
    try:
        job = load_job(input_path, order, seed)
    except ParseError as exc:
        return error_report(exc), 1
    try:
        report = run_job(job)
    except ParseError as exc:
        rep = error_report(exc, job.get("command"))
        rep["job"] = job
        return rep, 1
    except JetError as exc:
        rep = error_report(exc, job.get("command"))
        rep["job"] = job
        return rep, 2
    if report["status"] in ("criteria-failed", "residual-nonzero"):
        return report, 2
    return report, 0


def _emit(report, output, fmt):
    payload = (json.dumps(report, sort_keys=True, separators=(",", ":"))
               + "\n") if fmt == "json" else render_text(report)
    if output:
        Path(output).write_text(payload, encoding="utf-8")
    else:
        sys.stdout.write(payload)


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="jetnf",
        description="Exact jet-order normal forms in symplectic space")
    parser.add_argument("--input", help="path to a JSON job file")
    parser.add_argument("--output", help="write the report here (default stdout)")
    parser.add_argument("--format", choices=("json", "text"), default="json")
    parser.add_argument("--order", type=int, help="override the job's order")
    parser.add_argument("--seed", type=int, help="override the job's seed")
    parser.add_argument("--jobs", help="directory of job files to fan out")
    parser.add_argument("--workers", type=int, default=2,
                        help="worker processes for --jobs")
    args = parser.parse_args(argv)

    if args.jobs:
        return _run_directory(args)
    if not args.input:
        parser.error("--input is required (or --jobs)")
    report, code = run_file(args.input, args.order, args.seed)
    _emit(report, args.output, args.format)
    return code


def _run_one(task):
    path, order, seed = task
    report, code = run_file(path, order, seed)
    return path, report, code


def _run_directory(args):
    import concurrent.futures

    jobs = sorted(Path(args.jobs).glob("*.json"))
    if not jobs:
        sys.stderr.write("no job files found\n")
        return 1
    outdir = Path(args.output) if args.output else None
    if outdir:
        outdir.mkdir(parents=True, exist_ok=True)
    worst = 0
    tasks = [(str(p), args.order, args.seed) for p in jobs]
    with concurrent.futures.ProcessPoolExecutor(max_workers=args.workers) as pool:
        for path, report, code in pool.map(_run_one, tasks):
            worst = max(worst, code)
            if outdir:
                name = Path(path).stem + ".report.json"
                payload = (json.dumps(report, sort_keys=True,
                                      separators=(",", ":")) + "\n"
                           if args.format == "json" else render_text(report))
                (outdir / name).write_text(payload, encoding="utf-8")
            else:
                sys.stdout.write(f"{path}: exit {code}\n")
    return worst


if __name__ == "__main__":
    sys.exit(main())
