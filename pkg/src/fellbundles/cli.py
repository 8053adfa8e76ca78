"""Command-line front end.

Subcommands: validate, construct, norm, algebra, check-expectation, morita,
selftest.  Exit codes: 0 all checks passed, 1 a mathematical check failed
(the report carries a witness), 2 input or usage error.

JSON reports are canonical (sorted keys) and contain no wall-clock data, so
identical inputs and seed produce byte-identical output; timings go to the
human-readable text rendering only.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from .algebra import (
    algebra_image,
    check_expectation,
    l2_norm,
    operator_norm,
    sup_norm,
)
from .bundle import (
    compacts_bundle,
    from_bimodule,
    from_cocycle,
    pullback,
    semidirect,
    spot_check,
    validate_fell_bundle,
)
from .bimodule import star_algebra
from .errors import FellBundleError
from .groupoid import delta, is_full_morphism
from .matrixcore import EPS, NORM_EPS, Tolerance
from .selftest import CheckResult, RunConfig, check, check_equal, check_flag, run_selftest
from .serialize import (
    bundle_from_dict,
    bundle_to_dict,
    canonical_dumps,
    certificate_to_dict,
    cocycle_from_dict,
    decode_matrix,
    digest,
    groupoid_from_dict,
    morphism_from_dict,
    section_from_dict,
    verify_certificate_dict,
    action_from_dict,
)

EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _load_json(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _make_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=float, default=EPS,
                        help="subspace/axiom tolerance (default 1e-9)")
    common.add_argument("--norm-tol", type=float, default=NORM_EPS,
                        help="norm-comparison tolerance (default 1e-8)")
    common.add_argument("--seed", type=int, default=2024, help="random seed")
    common.add_argument("--samples", type=int, default=100,
                        help="random samples per randomized check")
    common.add_argument("--json", action="store_true",
                        help="emit the report as JSON")

    p = argparse.ArgumentParser(
        prog="fellbundle",
        description="Finite Fell bundles, their reduced C*-algebras, and "
                    "Morita-equivalence certificates.")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("validate", parents=[common],
                        help="validate a groupoid or bundle file")
    sp.add_argument("file")

    sp = sub.add_parser("construct", parents=[common],
                        help="build a bundle and write it out")
    sp.add_argument("kind", choices=["bimodule", "cocycle", "semidirect",
                                     "compacts", "pullback"])
    sp.add_argument("--input", help="constructor input file (bimodule/cocycle/semidirect)")
    sp.add_argument("--dims", help="comma-separated Hilbert dimensions (compacts)")
    sp.add_argument("--bundle", help="bundle file (pullback)")
    sp.add_argument("--morphism", help="morphism file (pullback)")
    sp.add_argument("--out", help="where to write the constructed bundle")

    sp = sub.add_parser("norm", parents=[common], help="norms of a section file")
    sp.add_argument("file")

    sp = sub.add_parser("algebra", parents=[common],
                        help="reduced algebra of a bundle file")
    sp.add_argument("file")
    sp.add_argument("--report", default="dims,center",
                    help="comma list from {dims, center}")

    sp = sub.add_parser("check-expectation", parents=[common],
                        help="randomized conditional-expectation suite")
    sp.add_argument("file")

    sp = sub.add_parser("morita", help="Morita certificates")
    msub = sp.add_subparsers(dest="morita_command", required=True)
    mp = msub.add_parser("theorem42", parents=[common],
                         help="corner certificate from a full morphism")
    mp.add_argument("bundle")
    mp.add_argument("morphism")
    mp.add_argument("--out", help="where to write the certificate")
    mp = msub.add_parser("stabilize", parents=[common],
                         help="stabilization certificate")
    mp.add_argument("bundle")
    mp.add_argument("--out", help="where to write the certificate")
    mp = msub.add_parser("check", parents=[common],
                         help="re-verify a stored certificate")
    mp.add_argument("certificate")

    sub.add_parser("selftest", parents=[common],
                   help="run every invariant suite on the built-in corpus")
    return p


def _report(command: str, inputs_digest: str, config: dict,
            checks: list[CheckResult]) -> dict:
    return {
        "command": command,
        "inputs_digest": inputs_digest,
        "config": config,
        "checks": [c.to_dict() for c in checks],
        "passed": all(c.passed for c in checks),
    }


def _config_dict(args) -> dict:
    return {"tol": args.tol, "norm_tol": args.norm_tol, "seed": args.seed,
            "samples": args.samples,
            "output": "json" if getattr(args, "json", False) else "text"}


def _digest_files(*paths: str) -> str:
    h = []
    for path in paths:
        with open(path, "rb") as fh:
            h.append(digest(fh.read()))
    return digest("".join(h))


# -- subcommand implementations -------------------------------------------------


def _cmd_validate(args) -> dict:
    data = _load_json(args.file)
    checks: list[CheckResult] = []
    if "fibers" in data or "unit_dims" in data:
        bundle = bundle_from_dict(data, eps=args.tol, validate=False)
        rep = validate_fell_bundle(bundle, args.tol)
        checks.append(check("closure", rep.closure_residual, args.tol, EPS))
        checks.append(check("involution", rep.involution_residual, args.tol, EPS))
        rng = np.random.default_rng(args.seed)
        spots = spot_check(bundle, rng, samples=args.samples, eps=args.tol)
        checks.append(check("spot.cstar_identity", spots.cstar_identity_residual,
                            args.tol, EPS))
        checks.append(check_flag("spot.positivity", spots.positivity_failures == 0,
                                 {"failures": spots.positivity_failures}))
        checks.append(check_flag("unit_fibers", True,
                                 {"dims": {str(x): (0 if bundle.unit_algebra(x) is None
                                                    else bundle.unit_algebra(x).dim)
                                           for x in bundle.groupoid.units}}))
    else:
        g = groupoid_from_dict(data)
        checks.append(check_flag("groupoid_axioms", True,
                                 {"arrows": g.n_arrows, "units": len(g.units)}))
    return _report("validate", _digest_files(args.file), _config_dict(args), checks)


def _cmd_construct(args) -> dict:
    checks: list[CheckResult] = []
    digests = []
    if args.kind == "compacts":
        if not args.dims:
            raise ValueError("construct compacts needs --dims")
        bundle = compacts_bundle([int(v) for v in args.dims.split(",")])
        source = f"dims={args.dims}"
    elif args.kind == "pullback":
        if not (args.bundle and args.morphism):
            raise ValueError("construct pullback needs --bundle and --morphism")
        base = bundle_from_dict(_load_json(args.bundle), eps=args.tol)
        j = morphism_from_dict(_load_json(args.morphism))
        bundle = pullback(j, base, args.tol)
        digests.extend([args.bundle, args.morphism])
        source = "pullback"
    else:
        if not args.input:
            raise ValueError(f"construct {args.kind} needs --input")
        data = _load_json(args.input)
        digests.append(args.input)
        if args.kind == "bimodule":
            a = _decode_algebra(data["A"])
            b = _decode_algebra(data["B"])
            c = [decode_matrix(m, (b.ambient, a.ambient)) for m in data["C"]["basis"]]
            bundle = from_bimodule(a, b, c, args.tol)
        elif args.kind == "cocycle":
            g = groupoid_from_dict(data["groupoid"])
            sigma = cocycle_from_dict(data["cocycle"], g)
            bundle = from_cocycle(g, sigma, args.tol)
        else:
            g, action = action_from_dict(data)
            bundle = semidirect(g, action, args.tol)
        source = args.kind
    rep = validate_fell_bundle(bundle, args.tol)
    checks.append(check("closure", rep.closure_residual, args.tol, EPS))
    checks.append(check("involution", rep.involution_residual, args.tol, EPS))
    checks.append(check_flag("constructed", True,
                             {"kind": source,
                              "total_fiber_dim": bundle.total_fiber_dim()}))
    if args.out:
        Path(args.out).write_text(canonical_dumps(bundle_to_dict(bundle)),
                                  encoding="utf-8")
    inputs = _digest_files(*digests) if digests else digest(source)
    return _report("construct", inputs, _config_dict(args), checks)


def _decode_algebra(desc: dict):
    n = int(desc["dim"])
    mats = [decode_matrix(m, (n, n)) for m in desc["basis"]]
    return star_algebra(mats, ambient=n)


def _cmd_norm(args) -> dict:
    data = _load_json(args.file)
    bundle = None
    if isinstance(data.get("bundle"), str):
        bundle_path = Path(args.file).parent / data["bundle"]
        bundle = bundle_from_dict(_load_json(str(bundle_path)), eps=args.tol)
        data = dict(data)
        data.pop("bundle")
    section, bundle = section_from_dict(data, bundle, eps=args.tol)
    checks = [
        check_flag("norms", True, {
            "operator": operator_norm(section),
            "l2": l2_norm(section),
            "sup": sup_norm(section),
        }),
    ]
    return _report("norm", _digest_files(args.file), _config_dict(args), checks)


def _cmd_algebra(args) -> dict:
    bundle = bundle_from_dict(_load_json(args.file), eps=args.tol)
    wanted = {w.strip() for w in args.report.split(",") if w.strip()}
    img = algebra_image(bundle, args.tol)
    info: dict = {}
    if "dims" in wanted or not wanted:
        info["dim"] = img.dim
        info["module_heights"] = {str(x): img.heights[x] for x in img.units}
    if "center" in wanted:
        info["center_dim"] = img.center_dim(args.tol)
    checks = [check_flag("algebra", True, info),
              check_equal("faithful", img.dim, bundle.total_fiber_dim())]
    return _report("algebra", _digest_files(args.file), _config_dict(args), checks)


def _cmd_check_expectation(args) -> dict:
    bundle = bundle_from_dict(_load_json(args.file), eps=args.tol)
    rng = np.random.default_rng(args.seed)
    er = check_expectation(bundle, rng, samples=args.samples, eps=args.tol,
                           norm_eps=args.norm_tol)
    checks = [
        check_flag("psd", er.psd_failures == 0, {"failures": er.psd_failures}),
        check_flag("pointwise_domination", er.pointwise_domination_failures == 0,
                   {"failures": er.pointwise_domination_failures}),
        check("contraction", er.contraction_gap, args.norm_tol, NORM_EPS),
        check_flag("faithful", er.min_faithfulness_ratio > 10 * args.norm_tol,
                   {"min_ratio": er.min_faithfulness_ratio}),
        check("bimodule", er.bimodule_residual, args.norm_tol, NORM_EPS),
        check("normalizer", er.normalizer_residual, args.norm_tol, NORM_EPS),
    ]
    return _report("check-expectation", _digest_files(args.file),
                   _config_dict(args), checks)


def _cmd_morita(args) -> dict:
    from .morita import morita_via_full_morphism, stabilization_equivalence

    checks: list[CheckResult] = []
    if args.morita_command == "check":
        rep = verify_certificate_dict(_load_json(args.certificate), eps=args.tol)
        for name, res in rep["checks"].items():
            checks.append(check_flag(name, res["passed"], res))
        return _report("morita.check", _digest_files(args.certificate),
                       _config_dict(args), checks)
    if args.morita_command == "theorem42":
        bundle = bundle_from_dict(_load_json(args.bundle), eps=args.tol)
        phi = morphism_from_dict(_load_json(args.morphism))
        rng = np.random.default_rng(args.seed)
        cert = morita_via_full_morphism(phi, bundle, args.tol, args.norm_tol,
                                        rng, samples=max(5, args.samples // 10))
        inputs = _digest_files(args.bundle, args.morphism)
        command = "morita.theorem42"
    else:
        bundle = bundle_from_dict(_load_json(args.bundle), eps=args.tol)
        rng = np.random.default_rng(args.seed)
        res = stabilization_equivalence(bundle, args.tol, args.norm_tol, rng,
                                        samples=max(5, args.samples // 10))
        cert = res.certificate
        checks.append(check_flag("compacts_isomorphic_to_semidirect",
                                 res.compacts_iso.ok(args.norm_tol)))
        inputs = _digest_files(args.bundle)
        command = "morita.stabilize"
    checks.append(check("projections", cert.projection_residual(),
                        args.tol * 100, EPS * 100))
    checks.append(check_flag("corners_full", True,
                             {"corner_dims": list(cert.corner_dims),
                              "ambient_dim": cert.ambient.dim}))
    for key, val in sorted(cert.residuals.items()):
        tol = args.norm_tol if "isometry" in key or "iso" in key else args.tol * 100
        checks.append(check(f"residual.{key}", val, tol,
                            NORM_EPS if "isometry" in key or "iso" in key
                            else EPS * 100))
    if args.out:
        Path(args.out).write_text(canonical_dumps(certificate_to_dict(cert)),
                                  encoding="utf-8")
    return _report(command, inputs, _config_dict(args), checks)


def _cmd_selftest(args) -> dict:
    config = RunConfig(tolerance=Tolerance(eps=args.tol, norm_eps=args.norm_tol),
                       seed=args.seed, samples=args.samples,
                       isometry_samples=max(10, args.samples // 2))
    checks = run_selftest(config)
    inputs = {k: v for k, v in _config_dict(args).items() if k != "output"}
    return _report("selftest", digest(canonical_dumps(inputs)),
                   _config_dict(args), checks)


_DISPATCH = {
    "validate": _cmd_validate,
    "construct": _cmd_construct,
    "norm": _cmd_norm,
    "algebra": _cmd_algebra,
    "check-expectation": _cmd_check_expectation,
    "morita": _cmd_morita,
    "selftest": _cmd_selftest,
}


def _render_text(report: dict, elapsed: float) -> str:
    lines = [f"fellbundle {report['command']}  "
             f"(inputs {report['inputs_digest'][:12]})"]
    for c in report["checks"]:
        mark = "PASS" if c["passed"] else ("TOL " if c["status"] == "tolerance-induced"
                                           else "FAIL")
        extra = ""
        if c["residual"] is not None:
            extra = f"  residual {c['residual']:.3e} vs tol {c['tolerance']:.1e}"
        elif c["witness"]:
            extra = f"  {json.dumps(c['witness'], sort_keys=True, default=str)}"
        lines.append(f"[{mark}] {c['name']}{extra}")
    total = len(report["checks"])
    good = sum(1 for c in report["checks"] if c["passed"])
    lines.append(f"{good}/{total} checks passed in {elapsed:.2f}s")
    return "\n".join(lines)


def run(argv=None) -> tuple[int, dict | None]:
    """Parse, dispatch, and return (exit code, report)."""
    parser = _make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return (EXIT_USAGE if exc.code not in (0,) else EXIT_PASS), None
    started = time.perf_counter()
    try:
        report = _DISPATCH[args.command](args)
    except FellBundleError as exc:
        report = _report(args.command, "", _config_dict(args),
                         [CheckResult(type(exc).__name__, False, "fail",
                                      witness=exc.witness())])
        report["elapsed"] = time.perf_counter() - started
        return EXIT_FAIL, report
    except (OSError, json.JSONDecodeError, KeyError, ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE, None
    report["elapsed"] = time.perf_counter() - started
    return (EXIT_PASS if report["passed"] else EXIT_FAIL), report


def main(argv=None) -> int:
    code, report = run(argv)
    if report is None:
        return code
    elapsed = report.pop("elapsed", 0.0)
    if report.get("config", {}).get("output") == "json":
        sys.stdout.write(canonical_dumps(report))
    else:
        print(_render_text(report, elapsed))
    return code


if __name__ == "__main__":
    raise SystemExit(main())
