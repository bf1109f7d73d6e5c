"""Command-line pipeline: fixtures, certificates, minimization, sweeps.

stdout carries a single JSON report; human diagnostics go to stderr.  Exit
codes: 0 success, 1 input problem, 2 mathematical failure (position or
coercivity), 3 no convergence.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys

import numpy as np

from . import contact, isotropy, rfamily
from .blockmat import EPoint
from .errors import (DivergingIterates, FJohnError, InfeasibleWeights, NotConverged,
                     NotJohnPosition, NotProper)
from .logconcave import LogConcaveFn, eval_h_many, check_proper, make_log_concave
from .profiles import (ConvolutionProfile, PiecewiseLinear, ProfilePair, canonical_pair,
                       validate_profiles)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_MATH = 2
EXIT_NOT_CONVERGED = 3

SCHEMA_VERSION = 1


class InputError(Exception):
    pass


def _to_jsonable(obj):
    if isinstance(obj, dict):
        return {k: _to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _to_jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else repr(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def _dumps(payload: dict) -> str:
    return json.dumps(_to_jsonable(payload), sort_keys=True, separators=(",", ":"))


def instance_hash(instance: dict) -> str:
    return hashlib.sha256(_dumps(instance).encode()).hexdigest()


def _report(command: str, instance: dict | None, result: dict) -> str:
    payload = {
        "version": SCHEMA_VERSION,
        "command": command,
        "instance_hash": instance_hash(instance) if instance is not None else None,
        "result": result,
    }
    return _dumps(payload)


def _epoint_dict(p: EPoint | None) -> dict | None:
    if p is None:
        return None
    return {"diag": p.mat.diag, "corner": p.mat.corner, "shift": p.shift}


def load_instance(path: str) -> dict:
    try:
        with open(path) as fh:
            inst = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read instance: {exc}")
    for key in ("version", "n", "s", "h"):
        if key not in inst:
            raise InputError(f"instance missing required key '{key}'")
    if inst["version"] != SCHEMA_VERSION:
        raise InputError(f"unsupported instance version {inst['version']}")
    return inst


def build_h(inst: dict) -> LogConcaveFn:
    desc = inst["h"]
    if desc.get("type") != "psi":
        raise InputError(f"unsupported h type {desc.get('type')!r}")
    pieces = desc.get("pieces", [])
    if not pieces:
        raise InputError("h.pieces is empty")
    a = np.array([p["a"] for p in pieces], dtype=float)
    b = np.array([p["b"] for p in pieces], dtype=float)
    if a.shape[1] != inst["n"]:
        raise InputError("piece dimension does not match n")
    h = make_log_concave(a, b, inst["s"], desc.get("domain_radius"))
    try:
        check_proper(h)
    except NotProper as exc:
        raise InputError(f"instance h is not proper: {exc}")
    return h


def build_profile(inst: dict) -> ProfilePair:
    prof = inst.get("profile", "canonical")
    if prof == "canonical":
        return canonical_pair()
    if isinstance(prof, dict):
        def pl(desc):
            return PiecewiseLinear.from_knots(
                np.asarray(desc["xs"], dtype=float), np.asarray(desc["ys"], dtype=float),
                left_slope=float(desc.get("left_slope", 0.0)),
                right_slope=float(desc.get("right_slope", 0.0)))
        return ProfilePair(f=pl(prof["f"]), g=pl(prof["g"]), name="custom")
    raise InputError(f"unsupported profile {prof!r}")


def contact_points(inst: dict, h: LogConcaveFn):
    c = inst.get("contacts")
    if c and "points" in c:
        return np.array(c["points"], dtype=float), c.get("weights")
    cs = contact.detect_contacts(h, inst["s"],
                                 grid_per_axis=inst.get("tolerances", {}).get("grid_per_axis", 201),
                                 gap_tol=inst.get("tolerances", {}).get("gap_tol", 1e-8))
    if cs.continuum:
        raise InputError("continuum contact set detected; supply nu atoms explicitly")
    return cs.points, None


def build_nu(inst: dict, h: LogConcaveFn) -> isotropy.DiscreteMeasure:
    nu = inst.get("nu", "counting")
    if nu == "counting":
        pts, _ = contact_points(inst, h)
        return isotropy.counting_measure(pts)
    if nu == "calibrated":
        pts, weights = contact_points(inst, h)
        if weights is None:
            raise InputError("calibrated nu needs construction weights in contacts.weights")
        return isotropy.calibrated_measure(pts, np.array(weights, dtype=float), h, inst["s"])
    if isinstance(nu, dict) and "atoms" in nu:
        pts = np.array([a["x"] for a in nu["atoms"]], dtype=float)
        m = np.array([a["m"] for a in nu["atoms"]], dtype=float)
        return isotropy.DiscreteMeasure(pts, m)
    raise InputError(f"unsupported nu {nu!r}")


def build_quad(inst: dict) -> rfamily.QuadratureSpec:
    q = inst.get("quadrature", {})
    return rfamily.QuadratureSpec(
        x_nodes_per_axis=int(q.get("x_nodes_per_axis", 960)),
        t_nodes=int(q.get("t_nodes", 4)),
        domain_radius=q.get("domain_radius"),
        tol=float(q.get("tol", 1e-6)))


def _pieces_json(h: LogConcaveFn) -> dict:
    form = h.form
    return {
        "type": "psi",
        "pieces": [{"a": list(map(float, a)), "b": float(b)}
                   for a, b in zip(form.a, form.b)],
        "domain_radius": form.domain_radius,
    }


def cmd_fixture(args) -> int:
    n, s = args.n, args.s
    if args.name == "cross":
        h, cs, weights = contact.cross_fixture(n, s)
        params = {}
    elif args.name == "two-level-cross":
        h, cs, weights = contact.two_level_cross_fixture(n, s, args.rho1_sq, args.rho2_sq)
        params = {"rho1_sq": args.rho1_sq, "rho2_sq": args.rho2_sq}
    elif args.name == "tangent":
        if not args.points:
            raise InputError("tangent fixture needs --points")
        pts = np.array([[float(v) for v in chunk.split(",")]
                        for chunk in args.points.split(";")])
        radius = args.domain_radius if args.domain_radius else 8.0
        h = contact.make_tangent_instance(pts, s, domain_radius=radius)
        vals = eval_h_many(h, pts) ** (1.0 / s)
        cs = contact.ContactSet(points=pts, gap_tol=1e-10, h_values=vals)
        weights = None
        params = {"points": pts, "domain_radius": radius}
    else:
        raise InputError(f"unknown fixture {args.name!r}")

    inst = {
        "version": SCHEMA_VERSION,
        "n": n,
        "s": s,
        "h": _pieces_json(h),
        "contacts": {"points": cs.points,
                     **({"weights": weights} if weights is not None else {})},
        "nu": args.nu,
        "profile": "canonical",
        "r_schedule": [0.8, 0.9, 0.95, 0.99],
        "quadrature": {"x_nodes_per_axis": 960, "t_nodes": 4, "tol": 1e-6,
                       "domain_radius": None},
        "tolerances": {"gap_tol": 1e-8, "minimize_tol": 1e-10,
                       "decomposition_tol": 1e-8, "grid_per_axis": 201},
        "seed": args.seed,
        "fixture": {"name": args.name, "params": params},
    }
    text = _dumps(inst)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
        print(_report("fixture", inst, {"written": args.out}))
    else:
        print(text)
    return EXIT_OK


def cmd_verify(args) -> int:
    inst = load_instance(args.instance)
    h = build_h(inst)
    pts, weights = contact_points(inst, h)
    if weights is None:
        raise InputError("verify needs contacts.weights in the instance")
    tol = inst.get("tolerances", {}).get("decomposition_tol", 1e-8)
    rep = contact.verify_decomposition(pts, np.array(weights, dtype=float), h, inst["s"], tol)
    print(_report("verify", inst, rep.as_dict()))
    return EXIT_OK if rep.ok else EXIT_MATH


def cmd_contacts(args) -> int:
    inst = load_instance(args.instance)
    h = build_h(inst)
    tols = inst.get("tolerances", {})
    cs = contact.detect_contacts(h, inst["s"],
                                 grid_per_axis=args.grid or tols.get("grid_per_axis", 201),
                                 gap_tol=tols.get("gap_tol", 1e-8))
    print(_report("contacts", inst, {
        "points": cs.points, "h_values": cs.h_values,
        "continuum": cs.continuum, "gap_tol": cs.gap_tol,
    }))
    return EXIT_OK


def cmd_minimize_i1(args) -> int:
    inst = load_instance(args.instance)
    h = build_h(inst)
    nu = build_nu(inst, h)
    F = ConvolutionProfile(build_profile(inst))
    tol = inst.get("tolerances", {}).get("minimize_tol", 1e-10)
    seed = args.seed if args.seed is not None else inst.get("seed", 0)
    res = isotropy.minimize_functional(h, inst["s"], nu, F, tol=tol, seed=seed)
    mu = isotropy.extract_measure(res, h, inst["s"], nu, F)
    iso = isotropy.check_isotropy(mu, inst["s"])
    print(_report("minimize-i1", inst, {
        "minimizer": _epoint_dict(res.point),
        "value": res.value,
        "projected_grad_norm": res.projected_grad_norm,
        "lambda": res.lam,
        "lambda_gap": res.lambda_gap,
        "iterations": res.iterations,
        "converged": res.converged,
        "extracted": {"points": mu.points, "masses": mu.masses},
        "isotropy": iso.as_dict(),
    }))
    return EXIT_OK


def cmd_coercivity(args) -> int:
    inst = load_instance(args.instance)
    h = build_h(inst)
    nu = build_nu(inst, h)
    seed = args.seed if args.seed is not None else inst.get("seed", 0)
    wit = isotropy.coercivity_witness(h, inst["s"], nu, n_dirs=args.dirs, seed=seed)
    print(_report("coercivity", inst, {
        "margin": wit.margin,
        "n_checked": wit.n_checked,
        "ok": wit.ok,
        "failures": [{"label": lbl, "direction": _epoint_dict(d), "max_expression": val}
                     for lbl, d, val in wit.failures],
    }))
    if not wit.ok:
        flat = wit.failures[0][0]
        print(f"coercivity failed on direction {flat}", file=sys.stderr)
        return EXIT_MATH
    return EXIT_OK


def cmd_sweep_r(args) -> int:
    inst = load_instance(args.instance)
    h = build_h(inst)
    nu = build_nu(inst, h)
    pair = build_profile(inst)
    F = ConvolutionProfile(pair)
    quad = build_quad(inst)
    s = inst["s"]
    tol = inst.get("tolerances", {}).get("minimize_tol", 1e-10)
    seed = args.seed if args.seed is not None else inst.get("seed", 0)
    ref = isotropy.minimize_functional(h, s, nu, F, tol=tol, seed=seed)
    mu0 = isotropy.extract_measure(ref, h, s, nu, F)
    schedule = inst.get("r_schedule", [0.8, 0.9, 0.95, 0.99])
    sweep = rfamily.r_sweep(h, s, pair, schedule, quad, ref, mu0)
    rows = []
    for e in sweep.entries:
        rows.append({
            "r": e.r,
            "minimizer": _epoint_dict(e.point),
            "rescaled": _epoint_dict(e.rescaled),
            "lambda_r": e.lambda_r,
            "value": e.value,
            "dist_to_identity": e.dist_to_identity,
            "normalized_s_trace": e.normalized_s_trace,
            "secant_to_M0": e.secant_to_reference,
            "mu_integrals": e.mu_integrals,
            "mu_reference": e.mu_reference,
        })
    if args.out:
        with open(args.out, "w", newline="") as fh:
            writer = csv.writer(fh)
            k = len(sweep.entries[0].mu_integrals) if sweep.entries else 0
            writer.writerow(["r", "dist_to_identity", "normalized_s_trace", "secant_to_M0"]
                            + [f"mu_{i+1}" for i in range(k)]
                            + [f"mu_ref_{i+1}" for i in range(k)])
            for e in sweep.entries:
                writer.writerow([e.r, e.dist_to_identity, e.normalized_s_trace,
                                 e.secant_to_reference]
                                + list(e.mu_integrals) + list(e.mu_reference))
    print(_report("sweep-r", inst, {
        "reference": {"minimizer": _epoint_dict(ref.point), "lambda": ref.lam},
        "entries": rows,
        "csv": args.out,
    }))
    return EXIT_OK


def cmd_profiles_check(args) -> int:
    if args.instance:
        inst = load_instance(args.instance)
        pair = build_profile(inst)
    else:
        inst = None
        pair = canonical_pair()
    rep = validate_profiles(pair)
    F = ConvolutionProfile(pair)
    xs = np.linspace(-3.0, 3.0, 601)
    Fv = np.asarray(F(xs), dtype=float)
    result = {
        "profile_properties": {c.name: c.ok for c in rep.checks},
        "all_ok": rep.ok,
        "F_nonnegative": bool(np.all(Fv >= -1e-12)),
        "F_nondecreasing": bool(np.all(np.diff(Fv) >= -1e-12)),
        "F_convex": bool(np.all(Fv[2:] - 2 * Fv[1:-1] + Fv[:-2] >= -1e-10)),
        "F_prime_at_zero": float(F.deriv(0.0)),
    }
    print(_report("profiles-check", inst, result))
    return EXIT_OK if rep.ok else EXIT_MATH


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="fjohn",
        description="Decomposition-of-identity measures for log-concave functions "
                    "in John position")
    sub = parser.add_subparsers(dest="command", required=True)

    p_fix = sub.add_parser("fixture", help="emit a fixture instance as JSON")
    p_fix.add_argument("name", choices=["cross", "two-level-cross", "tangent"])
    p_fix.add_argument("--n", type=int, required=True)
    p_fix.add_argument("--s", type=float, required=True)
    p_fix.add_argument("--rho1-sq", "--rho1sq", dest="rho1_sq", type=float, default=0.4)
    p_fix.add_argument("--rho2-sq", "--rho2sq", dest="rho2_sq", type=float, default=0.8)
    p_fix.add_argument("--points", help="semicolon-separated comma vectors, e.g. '0.5;-0.25'")
    p_fix.add_argument("--domain-radius", dest="domain_radius", type=float)
    p_fix.add_argument("--nu", default="counting", choices=["counting", "calibrated"])
    p_fix.add_argument("--seed", type=int, default=0)
    p_fix.add_argument("--out")
    p_fix.set_defaults(func=cmd_fixture)

    for name, fn, extra in [
        ("verify", cmd_verify, []),
        ("contacts", cmd_contacts, ["grid"]),
        ("minimize-i1", cmd_minimize_i1, ["seed"]),
        ("coercivity", cmd_coercivity, ["dirs", "seed"]),
        ("sweep-r", cmd_sweep_r, ["out", "seed"]),
        ("profiles-check", cmd_profiles_check, ["optional-instance"]),
    ]:
        p = sub.add_parser(name)
        if "optional-instance" in extra:
            p.add_argument("--instance")
        else:
            p.add_argument("--instance", required=True)
        if "grid" in extra:
            p.add_argument("--grid", type=int)
        if "dirs" in extra:
            p.add_argument("--dirs", type=int, default=1000)
        if "out" in extra:
            p.add_argument("--out")
        if "seed" in extra:
            p.add_argument("--seed", type=int, default=None)
        p.set_defaults(func=fn)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InputError, InfeasibleWeights) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (NotJohnPosition, DivergingIterates) as exc:
        print(f"math failure: {exc}", file=sys.stderr)
        return EXIT_MATH
    except NotConverged as exc:
        print(f"not converged: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    except FJohnError as exc:
        print(f"math failure: {exc}", file=sys.stderr)
        return EXIT_MATH


if __name__ == "__main__":
    sys.exit(main())
