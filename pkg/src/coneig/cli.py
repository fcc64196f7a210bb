"""Command-line front end: each pipeline as a subcommand emitting a JSON report.

Exit codes: 0 when every check in the report passes, 1 on a mathematical
failure (a failing check, an unsolvable closure system, a construction
that found no admissible plane), 2 on malformed input (bad flags, broken
JSON, maps outside the supported family).

The report always goes to standard output; ``-o`` mirrors it to a file.
Reports are byte-stable for fixed inputs and seed; ``--timing`` prints the
wall time to stderr so it never perturbs the report bytes.  Numerical
parallelism is whatever the BLAS layer does; cap it with the usual
``OMP_NUM_THREADS``.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time

import numpy as np

from .algebra import PoleError, TwistedRational, from_json, to_json
from .catalog import rotsym_extra, rotsym_family, sqrt_family
from .metric import (
    ConicalMetric,
    EigenCandidate,
    UnsupportedMapError,
    grid_from_spec,
    verify_on_grid,
)
from .monodromy import GermFitError, NonRotationError, classify
from .quaddiff import QuadratureError, basis, basis_for_metric, find_admissible, integer_cone_residues
from .report import Report, file_digest, jsonable
from .twistor import ConstructionError, DegenerateFamilyError, run_algorithm
from .weierstrass import (
    ClosureError,
    IntegrationUnresolved,
    boundedness_probe,
    closure_solve,
    from_quadratic_differential,
    support_function,
)

MATH_ERRORS = (
    ClosureError,
    ConstructionError,
    DegenerateFamilyError,
    GermFitError,
    IntegrationUnresolved,
    NonRotationError,
    PoleError,
    QuadratureError,
)


class InputError(Exception):
    """Malformed file or flag combination; maps to exit code 2."""


def _digest(path) -> str:
    try:
        return file_digest(path)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc


def _load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc}") from exc


def _load_map(path) -> TwistedRational:
    data = _load_json(path)
    try:
        return from_json(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"{path} does not hold a map in the expected schema: {exc}") from exc


def _metric_for(f) -> ConicalMetric:
    try:
        return ConicalMetric(f)
    except UnsupportedMapError as exc:
        raise InputError(str(exc)) from exc


def _params(args, skip=("func", "command", "output", "timing")) -> dict:
    return {k: v for k, v in vars(args).items() if k not in skip and not k.startswith("_")}


def _grid_for(metric: ConicalMetric, spec: str, h: float, exclusion_radius: float | None = None):
    excl = [c.position for c in metric.cones if not c.at_infinity]
    radius = exclusion_radius if exclusion_radius is not None else max(0.05, 10 * h)
    try:
        return grid_from_spec(spec, exclude=excl, exclusion_radius=radius)
    except ValueError as exc:
        raise InputError(str(exc)) from exc


# ----------------------------------------------------------------------
# plain subcommands


def cmd_cones(args):
    f = _load_map(args.map)
    rep = Report("cones", params=_params(args), inputs={"map": _digest(args.map)})
    metric = _metric_for(f)
    rep.extra("cones", [c.to_json() for c in metric.cones])
    rep.extra("total_angle_over_2pi", sum(c.beta for c in metric.cones))
    return rep


def cmd_monodromy(args):
    f = _load_map(args.map)
    rep = Report("monodromy", params=_params(args), inputs={"map": _digest(args.map)})
    base = _parse_point(args.base) if args.base else None
    cls = classify(f, base=base, tol=args.tol)
    rep.extra("classification", cls.to_json())
    for elem in cls.elements:
        R = elem.so3
        name = "inf" if elem.around is None else f"{elem.around:.6g}"
        rep.add_check(f"orthogonality_defect@{name}", np.max(np.abs(R.T @ R - np.eye(3))), args.tol)
    return rep


def cmd_residues(args):
    f = _load_map(args.map)
    rep = Report("residues", params=_params(args), inputs={"map": _digest(args.map)})
    metric = _metric_for(f)
    sigma = None
    if args.sigma_index is not None:
        bas = basis_for_metric(metric)
        if not 0 <= args.sigma_index < len(bas):
            raise InputError(
                f"sigma index {args.sigma_index} out of range; admissible space has dimension {len(bas)}"
            )
        sigma = bas[args.sigma_index]
    try:
        result = integer_cone_residues(f, sigma)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    sig = result["sigma"]
    rep.extra("sigma", {"numerator": list(sig.numerator), "poles": list(sig.poles)})
    rep.extra(
        "residues",
        [
            {"point": r["point"], "residue": r["residue"], "abs": abs(r["residue"])}
            for r in result["residues"]
        ],
    )
    if args.tol is not None:
        worst = max((abs(r["residue"]) for r in result["residues"]), default=0.0)
        rep.add_check("max_abs_residue", worst, args.tol)
    return rep


def cmd_scan(args):
    if args.bmin >= args.bmax:
        raise InputError(f"empty scan range [{args.bmin}, {args.bmax}]")
    rep = Report("scan", params=_params(args))
    family = sqrt_family
    hits, data = find_admissible(
        family, (args.bmin, args.bmax), samples=args.samples, accept=args.accept, full_output=True
    )
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["b", "abs_residue"])
            for b, v in zip(data["grid"], data["values"]):
                writer.writerow([f"{b:.12g}", "nan" if not np.isfinite(v) else f"{v:.12g}"])
        rep.extra("csv", args.csv)
    rep.extra("admissible", [float(b) for b in hits])
    rep.extra("minima", data["minima"])
    for record in data["minima"]:
        if record["accepted"]:
            rep.add_check(
                f"residues_at_b={record['b']:.8g}", max(record["residuals"]), args.accept
            )
    return rep


def cmd_verify(args):
    f = _load_map(args.map)
    inputs = {"map": _digest(args.map), "eigenfunction": _digest(args.eigen)}
    rep = Report("verify", params=_params(args), inputs=inputs)
    try:
        cand = EigenCandidate.from_json(_load_json(args.eigen))
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"{args.eigen} does not hold an eigenfunction: {exc}") from exc
    metric = _metric_for(f)
    grid = _grid_for(metric, args.grid, args.h)
    result = verify_on_grid(cand, metric, grid, h=args.h, tol=args.tol, branch=args.branch)
    rep.extra("grid", {"spec": args.grid, "n_points": result["n_points"]})
    rep.extra("verification", result)
    rep.add_check("max_residual", result["max_residual"], result["bound"])
    if cand.single_valued:
        zs = np.asarray(grid[:: max(1, len(grid) // 16)])
        gap = float(np.max(np.abs(cand.evaluate(zs, 0) - cand.evaluate(zs, 1))))
        rep.add_check("branch_gap", gap, 1e-9 * (1.0 + result["sup_u"]))
    return rep


def cmd_weierstrass(args):
    f = _load_map(args.map)
    rep = Report("weierstrass", params=_params(args), inputs={"map": _digest(args.map)})
    metric = _metric_for(f)
    bas = basis_for_metric(metric)
    if not bas:
        rep.fail("the admissible space of quadratic differentials is empty")
        return rep
    if not 0 <= args.sigma_index < len(bas):
        raise InputError(
            f"sigma index {args.sigma_index} out of range; admissible space has dimension {len(bas)}"
        )
    sigma = bas[args.sigma_index]
    rep.extra("sigma", {"numerator": list(sigma.numerator), "poles": list(sigma.poles)})
    data = from_quadratic_differential(f, sigma)
    closure = closure_solve(data)
    rep.extra("X0", closure["X0"])
    rep.extra(
        "loops",
        [
            {"winding": r["winding"], "period": r["v"], "residual": r["residual"]}
            for r in closure["loops"]
        ],
    )
    rep.add_check("closure_residual", closure["residual"], args.closure_tol)
    if not rep.passed:
        return rep
    u = support_function(data)
    grid = _grid_for(metric, args.grid, args.h, exclusion_radius=0.15)
    result = verify_on_grid(u, metric, grid, h=args.h, tol=args.eigen_tol)
    rep.extra("eigen", result)
    rep.add_check("eigen_max_residual", result["max_residual"], result["bound"])
    probes = []
    for cone in metric.cones:
        if cone.at_infinity:
            probe = boundedness_probe(u, r0=4.0, levels=8, at_infinity=True)
            name = "inf"
        else:
            others = [
                c.position for c in metric.cones if not c.at_infinity and c.position != cone.position
            ]
            r0 = min(0.1, min((abs(cone.position - q) for q in others), default=1.0) / 2)
            probe = boundedness_probe(u, center=cone.position, r0=r0, levels=8)
            name = f"{cone.position:.6g}"
        probes.append(probe)
        rep.add_check(f"bounded_slope@{name}", probe["slope"], args.slope_tol, op=">=")
    rep.extra("boundedness", probes)
    return rep


def cmd_construct(args):
    rep = Report("construct", params=_params(args))
    try:
        res = run_algorithm(
            args.m,
            args.k,
            args.alpha,
            Lprime_strategy=args.strategy,
            seed=args.seed,
            residual_tol=args.residual_tol,
            h=args.h,
        )
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    rep.extra("map", to_json(res.f))
    rep.extra("coefficients", dict(res.curve.coefficients))
    rep.extra("plane", res.diagnostics.get("plane"))
    rep.extra("v_basis", res.plane.v_basis)
    eigen = []
    for j, (gnum, den) in enumerate(zip(res.special.G_num, res.special.dens), start=1):
        eigen.append(
            {
                "label": f"extra-{j}",
                "components": [to_json(c) for c in gnum.comps],
                "denominator": to_json(den),
            }
        )
    rep.extra("eigenfunctions", eigen)
    rep.extra("verification", res.diagnostics)
    _construction_checks(rep, res.diagnostics, args.residual_tol)
    return rep


def _construction_checks(rep: Report, diag: dict, residual_tol: float) -> None:
    rep.add_check("isotropy_worst_coefficient", diag["isotropy_worst"], 1e-12)
    for entry in diag["candidates"]:
        label = entry["label"]
        for part in ("re", "im"):
            rep.add_check(
                f"{label}.{part}_max_residual",
                entry["residuals"][part],
                entry["bounds"][part],
            )
            rep.add_check(f"{label}.{part}_remainder", entry["remainders"][part], 0.1, op=">=")
        sup = 1.0 + max(entry["residuals"].values())
        rep.add_check(f"{label}_branch_gap", entry["branch_gap"], 1e-8 * sup)
        rep.add_check(
            f"{label}_bounded", 1.0 if entry["bounded"] else 0.0, 1.0, op="=="
        )


# ----------------------------------------------------------------------
# reproduce


def cmd_reproduce(args):
    handler = {
        "ex1": _reproduce_ex1,
        "intro": _reproduce_intro,
        "construct-m2": _reproduce_construct_m2,
        "construct-m3": _reproduce_construct_m3,
        "noextra": _reproduce_noextra,
    }[args.name]
    return handler(args)


def _reproduce_ex1(args):
    rep = Report("reproduce ex1", params=_params(args))
    hits = find_admissible(sqrt_family, (args.bmin, args.bmax), accept=args.residue_tol)
    rep.extra("admissible", [float(b) for b in hits])
    rep.add_check("admissible_count", len(hits), 1, op="==")
    if hits:
        b = hits[0]
        rep.add_check("b_offset_from_4", abs(b - 4.0), args.b_tol)
        result = integer_cone_residues(sqrt_family(b))
        rep.extra(
            "residues",
            [{"point": r["point"], "abs": abs(r["residue"])} for r in result["residues"]],
        )
        for i, r in enumerate(result["residues"]):
            rep.add_check(f"residue_{i}", abs(r["residue"]), args.residue_tol)
    return rep


def _reproduce_intro(args):
    if not 0 < args.beta < args.k:
        raise InputError(f"need 0 < beta < k, got beta={args.beta}, k={args.k}")
    rep = Report("reproduce intro", params=_params(args))
    f = rotsym_family(args.beta, args.k)
    cand = rotsym_extra(args.beta, args.k)
    metric = _metric_for(f)
    grid = _grid_for(metric, args.grid, args.h, exclusion_radius=0.1)
    rep.extra("grid", {"spec": args.grid, "n_points": int(len(grid))})
    worst = 0.0
    for name, part in (("re", cand.real()), ("im", cand.imag())):
        result = verify_on_grid(part, metric, grid, h=args.h, tol=args.tol)
        worst = max(worst, result["max_residual"])
        rep.add_check(f"{name}_max_residual", result["max_residual"], result["bound"])
    rep.extra("max_residual", worst)
    return rep


def _reproduce_construct_m2(args):
    rep = Report("reproduce construct-m2", params=_params(args))
    k, alpha = args.k, args.alpha
    res = run_algorithm(2, k, alpha, seed=args.seed)
    _construction_checks(rep, res.diagnostics, 1e-4)
    lam = ((k - alpha) / (np.sqrt(2.0) * (2 * k - alpha))) ** (1.0 / k)
    ref = rotsym_family(k - alpha, k)
    zs = 1.2 * np.exp(1j * np.linspace(-2.9, 2.9, args.points))
    mine = np.array([complex(res.f.evaluate(lam * z, 0)) for z in zs])
    target = np.array([complex(ref.evaluate(z, 0)) for z in zs])
    scale = mine[0] / target[0]
    dev = float(np.max(np.abs(mine - scale * target)) / np.max(np.abs(mine)))
    rep.extra("rescale_lambda", float(lam))
    rep.extra("normalization", scale)
    rep.add_check("family_match", dev, args.match_tol)
    rep.extra("map", to_json(res.f))
    return rep


def _reproduce_construct_m3(args):
    rep = Report("reproduce construct-m3", params=_params(args))
    res = run_algorithm(3, args.k, args.alpha, seed=args.seed, residual_tol=args.residual_tol)
    _construction_checks(rep, res.diagnostics, args.residual_tol)
    verified = 0
    for entry in res.diagnostics["candidates"]:
        for part in ("re", "im"):
            ok = (
                entry["single_valued"]
                and entry["bounded"]
                and entry["residuals"][part] <= entry["bounds"][part]
                and entry["remainders"][part] >= 0.1
            )
            verified += int(ok)
    rep.add_check("verified_real_eigenfunctions", verified, 4, op="==")
    rep.extra("map", to_json(res.f))
    return rep


def _reproduce_noextra(args):
    rep = Report("reproduce noextra", params=_params(args))
    rng = np.random.default_rng(args.seed)
    sizes = {}
    for k in range(1, 9):
        worst_dev = 0
        for _ in range(args.configs):
            inf_cone = bool(rng.integers(0, 2)) if k > 1 else True
            n_finite = k - (1 if inf_cone else 0)
            pts = rng.normal(size=n_finite) + 1j * rng.normal(size=n_finite)
            got = len(basis(list(pts), inf_cone))
            worst_dev = max(worst_dev, abs(got - max(k - 3, 0)))
        sizes[k] = worst_dev
        rep.add_check(f"basis_size_deviation_k{k}", worst_dev, 0, op="==")
    rep.extra("configs_per_k", args.configs)
    return rep


# ----------------------------------------------------------------------
# parser


def _parse_point(text: str) -> complex:
    try:
        re_s, im_s = text.split(",")
        return complex(float(re_s), float(im_s))
    except ValueError as exc:
        raise InputError(f"expected a point as re,im, got {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coneig",
        description="Spherical conical metrics, their extra eigenfunctions, and the pipelines that find them.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help):
        p = sub.add_parser(name, help=help)
        p.set_defaults(func=func)
        p.add_argument("-o", "--output", default=None, help="also write the report to this file")
        p.add_argument(
            "--timing", action="store_true", help="print wall time to stderr (report stays byte-stable)"
        )
        return p

    p = add("cones", cmd_cones, "cone points of the metric defined by a map")
    p.add_argument("-f", "--map", required=True, help="map JSON file")

    p = add("monodromy", cmd_monodromy, "monodromy generators and classification")
    p.add_argument("-f", "--map", required=True)
    p.add_argument("--base", default=None, help="base point as re,im")
    p.add_argument("--tol", type=float, default=1e-9, help="axis/orthogonality tolerance")

    p = add("residues", cmd_residues, "residues of sigma/df at the integer cones")
    p.add_argument("-f", "--map", required=True)
    p.add_argument("--sigma-index", type=int, default=None, help="basis element to use")
    p.add_argument("--tol", type=float, default=None, help="if set, check max |residue| <= tol")

    p = add("scan", cmd_scan, "scan the square-root family for admissible parameters")
    p.add_argument("--bmin", type=float, default=1.0)
    p.add_argument("--bmax", type=float, default=7.0)
    p.add_argument("--samples", type=int, default=241)
    p.add_argument("--accept", type=float, default=1e-9, help="residue acceptance tolerance")
    p.add_argument("--csv", default=None, help="write the (b, |residue|) scan table here")

    p = add("verify", cmd_verify, "eigen-equation residual of a candidate on a grid")
    p.add_argument("-f", "--map", required=True)
    p.add_argument("-e", "--eigen", required=True, help="eigenfunction JSON file")
    p.add_argument("--grid", default="annulus:0.3:1.7:64", help="annulus:rmin:rmax:n")
    p.add_argument("--h", type=float, default=1e-3, help="finite-difference step")
    p.add_argument("--tol", type=float, default=1e-5, help="residual tolerance (relative to 1+sup)")
    p.add_argument("--branch", type=int, default=0)

    p = add("weierstrass", cmd_weierstrass, "closure system, support function, boundedness")
    p.add_argument("-f", "--map", required=True)
    p.add_argument("--sigma-index", type=int, default=0)
    p.add_argument("--closure-tol", type=float, default=1e-6)
    p.add_argument("--eigen-tol", type=float, default=1e-4)
    p.add_argument("--slope-tol", type=float, default=-0.05)
    p.add_argument("--grid", default="annulus:0.35:1.8:10")
    p.add_argument("--h", type=float, default=1e-3)

    p = add("construct", cmd_construct, "run the isotropic-curve construction")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--strategy", choices=("default", "random"), default="default")
    p.add_argument("--residual-tol", type=float, default=1e-4)
    p.add_argument("--h", type=float, default=1e-3)

    p = add("reproduce", cmd_reproduce, "rerun a named computation and check its known result")
    p.add_argument("name", choices=("ex1", "intro", "construct-m2", "construct-m3", "noextra"))
    p.add_argument("--beta", type=float, default=0.5, help="intro: symmetry exponent")
    p.add_argument("--k", type=int, default=2, help="intro/construct: rotation order")
    p.add_argument("--alpha", type=float, default=1.5, help="construct: twist exponent")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--configs", type=int, default=20, help="noextra: configurations per size")
    p.add_argument("--points", type=int, default=20, help="construct-m2: comparison points")
    p.add_argument("--grid", default="annulus:0.3:1.7:64")
    p.add_argument("--h", type=float, default=1e-3)
    p.add_argument("--tol", type=float, default=1e-5, help="intro: residual tolerance")
    p.add_argument("--residual-tol", type=float, default=1e-4, help="construct: residual tolerance")
    p.add_argument("--match-tol", type=float, default=1e-8, help="construct-m2: family match tolerance")
    p.add_argument("--b-tol", type=float, default=1e-8, help="ex1: admissible parameter tolerance")
    p.add_argument("--residue-tol", type=float, default=1e-9, help="ex1: residue tolerance")
    p.add_argument("--bmin", type=float, default=1.0)
    p.add_argument("--bmax", type=float, default=7.0)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    t0 = time.monotonic()
    try:
        try:
            rep = args.func(args)
        except MATH_ERRORS as exc:
            rep = Report(args.command, params=_params(args))
            rep.fail(str(exc))
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    rep.emit(output=args.output)
    if args.timing:
        print(f"wall time: {time.monotonic() - t0:.3f} s", file=sys.stderr)
    return 0 if rep.passed else 1
