"""Command line interface.

Subcommands: tensor, geodesic, distance, relax, axis, classify, diverge,
proper, masur, expansion, experiment.  Exit codes: 0 pass, 1 assertion
failure, 2 inconclusive, 3 usage or configuration error.  CSV output uses
'.' decimals, newline line endings and a header row.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .actions import (
    SearchBudget,
    axis as compute_axis,
    classify,
    divergence_profile,
    isometry_from_json,
    properness_probe,
)
from .asymptotics import (
    AnnulusSpec,
    DifferentialModel,
    cometric_pairing,
    scaling_fit,
    substitution_check,
)
from .errors import BasinError, HornlabError
from .experiments import (
    EXPERIMENT_NAMES,
    ExperimentConfig,
    run_experiment,
    _write_csv,
)
from .geometry import (
    SpaceSpec,
    distance,
    geodesic_connect,
    geodesic_shoot,
    metric_tensor,
    point_from_json,
    point_to_json,
    space_from_json,
    tangent_from_chart,
)
from .paths import (
    equivariant_seed,
    flow_report_json,
    heat_flow,
    path_from_csv,
    path_to_csv,
)

PASS, FAIL, INCONCLUSIVE, USAGE = 0, 1, 2, 3


def _load_json_arg(value: str):
    """Accept a file path or an inline JSON document."""
    text = value
    p = Path(value)
    if p.exists():
        text = p.read_text()
    return json.loads(text)


def _load_space(value: str) -> SpaceSpec:
    return space_from_json(_load_json_arg(value))


def _out_dir(args) -> Path | None:
    if args.out is None:
        return None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _emit(doc: dict, out: Path | None, name: str) -> None:
    text = json.dumps(doc, sort_keys=True, indent=2) + "\n"
    if out is not None:
        (out / name).write_text(text)
    sys.stdout.write(text)


def _segment_rows(space, seg):
    from .geometry import BoundaryPoint, is_horn_like

    header = ["x"]
    for i, factor in enumerate(space.factors):
        if is_horn_like(factor):
            header += [f"f{i}_theta", f"f{i}_xi", f"f{i}_boundary"]
        else:
            header += [f"f{i}_c{j}" for j in range(factor.dim)]
    rows = []
    for x, pt in seg.samples:
        row = [float(x)]
        for factor, blk in zip(space.factors, pt.blocks):
            if is_horn_like(factor):
                if isinstance(blk, BoundaryPoint):
                    row += ["", "", 1]
                else:
                    row += [blk.theta, blk.xi, 0]
            else:
                row += list(blk)
        rows.append(tuple(row))
    return header, rows


def cmd_tensor(args) -> int:
    space = _load_space(args.space)
    point = point_from_json(space, _load_json_arg(args.point))
    g = metric_tensor(space, point)
    _emit({"metric": [[float(v) for v in row] for row in g]}, _out_dir(args), "tensor.json")
    return PASS


def cmd_geodesic(args) -> int:
    space = _load_space(args.space)
    p = point_from_json(space, _load_json_arg(getattr(args, "from")))
    out = _out_dir(args)
    if args.velocity is not None:
        vel = tangent_from_chart(space, json.loads(args.velocity))
        seg = geodesic_shoot(space, p, vel, args.length)
    else:
        if args.to is None:
            raise HornlabError("geodesic needs --to or --velocity/--length")
        q = point_from_json(space, _load_json_arg(args.to))
        seg = geodesic_connect(space, p, q, samples=args.samples)
    if out is not None:
        header, rows = _segment_rows(space, seg)
        _write_csv(out / "segment.csv", header, rows)
    _emit({
        "length": seg.length,
        "hit_stratum": seg.hit_stratum,
        "endpoint": point_to_json(seg.end),
    }, out, "geodesic.json")
    return PASS


def cmd_distance(args) -> int:
    space = _load_space(args.space)
    p = point_from_json(space, _load_json_arg(getattr(args, "from")))
    q = point_from_json(space, _load_json_arg(args.to))
    _emit({"distance": distance(space, p, q)}, _out_dir(args), "distance.json")
    return PASS


def cmd_relax(args) -> int:
    space = _load_space(args.space)
    iso = None
    if args.iso:
        iso = isometry_from_json(space, _load_json_arg(args.iso))
    path = path_from_csv(space, Path(args.path).read_text(), periodic_shift=iso)
    flowed, report = heat_flow(path, max_iter=args.max_iter, tol=args.tol)
    out = _out_dir(args)
    if out is not None:
        (out / "flowed.csv").write_text(path_to_csv(flowed))
        (out / "flow.json").write_text(flow_report_json(report) + "\n")
    sys.stdout.write(flow_report_json(report) + "\n")
    return PASS if not report.escaped else INCONCLUSIVE


def cmd_axis(args) -> int:
    space = _load_space(args.space)
    iso = isometry_from_json(space, _load_json_arg(args.iso))
    base = point_from_json(space, _load_json_arg(args.base))
    seed_path = equivariant_seed(space, iso, base, args.nodes)
    try:
        ax = compute_axis(iso, seed_path, tol=args.tol)
    except BasinError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return INCONCLUSIVE
    out = _out_dir(args)
    if out is not None:
        (out / "axis.csv").write_text(path_to_csv(ax.path))
    _emit({"period_length": ax.period_length}, out, "axis.json")
    return PASS


def cmd_classify(args) -> int:
    space = _load_space(args.space)
    iso = isometry_from_json(space, _load_json_arg(args.iso))
    res = classify(iso, SearchBudget(seed=args.seed))
    _emit(res.to_json(), _out_dir(args), "classification.json")
    return PASS if res.status == "ok" else INCONCLUSIVE


def cmd_diverge(args) -> int:
    space = _load_space(args.space)
    iso1 = isometry_from_json(space, _load_json_arg(args.iso))
    iso2 = isometry_from_json(space, _load_json_arg(args.iso2))
    base = point_from_json(space, _load_json_arg(args.base))
    r_grid = [float(v) for v in args.rgrid.split(",")]
    ax1 = compute_axis(iso1, equivariant_seed(space, iso1, base, args.nodes))
    ax2 = compute_axis(iso2, equivariant_seed(space, iso2, base, args.nodes))
    prof = divergence_profile(ax1, ax2, r_grid)
    out = _out_dir(args)
    if out is not None:
        _write_csv(out / "divergence.csv", ["R", "m"],
                   list(zip(prof.R_grid, prof.m_values)))
    _emit({"R": prof.R_grid, "m": prof.m_values,
           "strictly_increasing_from": prof.strictly_increasing_from}, out,
          "divergence.json")
    return PASS


def cmd_proper(args) -> int:
    space = _load_space(args.space)
    isos = [isometry_from_json(space, doc) for doc in _load_json_arg(args.isos)]
    m_grid = [float(v) for v in args.mgrid.split(",")]
    rep = properness_probe(isos, m_grid, args.budget, seed=args.seed)
    out = _out_dir(args)
    if out is not None:
        _write_csv(out / "properness.csv", ["M", "radius", "unbounded", "samples"],
                   [(e.M, e.radius, int(e.unbounded_evidence), e.samples)
                    for e in rep.entries])
    _emit({"entries": [{"M": e.M, "radius": e.radius,
                        "unbounded": e.unbounded_evidence, "samples": e.samples}
                       for e in rep.entries]}, out, "properness.json")
    return PASS


_PAIR_NAMES = {
    "normal": DifferentialModel.NORMAL,
    "tangential": DifferentialModel.TANGENTIAL,
    "tangential_deformed": DifferentialModel.TANGENTIAL_DEFORMED,
    "regular": DifferentialModel.REGULAR,
}


def cmd_masur(args) -> int:
    ts = list(np.geomspace(args.tmax, args.tmin, args.num))
    pairs = []
    for token in args.pairs.split(";"):
        i_name, j_name = token.split(",")
        pairs.append((_PAIR_NAMES[i_name.strip()], _PAIR_NAMES[j_name.strip()]))
    columns = {f"pairing_{i.value}_{j.value}": [] for i, j in pairs}
    for t in ts:
        spec = AnnulusSpec(t=t, n_r=args.n_r, n_phi=args.n_phi)
        for i, j in pairs:
            columns[f"pairing_{i.value}_{j.value}"].append(
                cometric_pairing(i, j, t, spec))
    fits = {}
    for key, vals in columns.items():
        fits[key] = scaling_fit(ts, vals).to_json()
    out = _out_dir(args)
    if out is not None:
        header = ["t"] + list(columns)
        rows = [tuple([float(t)] + [columns[k][i] for k in columns])
                for i, t in enumerate(ts)]
        _write_csv(out / "pairings.csv", header, rows)
    _emit({"fits": fits}, out, "scaling.json")
    return PASS


def cmd_expansion(args) -> int:
    s_values = [float(v) for v in args.svalues.split(",")]
    rep = substitution_check([math.exp(-s) for s in s_values],
                             n_r=args.n_r, n_phi=args.n_phi)
    out = _out_dir(args)
    if out is not None:
        _write_csv(out / "expansion.csv",
                   ["t", "xi", "ratio_xixi", "ratio_thth"],
                   list(zip(rep.t_grid, rep.xi, rep.ratio_xixi, rep.ratio_thth)))
    _emit({"xi": rep.xi, "ratio_xixi": rep.ratio_xixi,
           "ratio_thth": rep.ratio_thth, "rate_xixi": rep.rate_xixi,
           "rate_thth": rep.rate_thth}, out, "expansion.json")
    return PASS


def cmd_experiment(args) -> int:
    params = {}
    if args.config:
        params = _load_json_arg(args.config)
    space = _load_space(args.space) if args.space else None
    config = ExperimentConfig(
        name=args.name, space=space, parameters=params, seed=args.seed,
        out_dir=args.out,
    )
    report = run_experiment(config)
    sys.stdout.write(json.dumps(report.to_json(), sort_keys=True, indent=2) + "\n")
    sys.stdout.write(f"# runtime: {report.runtime:.3f}s\n")
    if report.inconclusive:
        return INCONCLUSIVE
    return PASS if report.passed else FAIL


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="hornlab",
        description="numerical laboratory for horn-model geometry",
    )
    ap.add_argument("--version", action="version", version=f"hornlab {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, space=True):
        if space:
            p.add_argument("--space", required=True, help="space JSON (file or inline)")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--tol", type=float, default=1e-10)

    p = sub.add_parser("tensor", help="metric tensor at a point")
    common(p)
    p.add_argument("--point", required=True)
    p.set_defaults(fn=cmd_tensor)

    p = sub.add_parser("geodesic", help="connect two points or shoot a ray")
    common(p)
    p.add_argument("--from", required=True)
    p.add_argument("--to", default=None)
    p.add_argument("--velocity", default=None, help="chart velocity JSON array")
    p.add_argument("--length", type=float, default=1.0)
    p.add_argument("--samples", type=int, default=33)
    p.set_defaults(fn=cmd_geodesic)

    p = sub.add_parser("distance", help="distance between two points")
    common(p)
    p.add_argument("--from", required=True)
    p.add_argument("--to", required=True)
    p.set_defaults(fn=cmd_distance)

    p = sub.add_parser("relax", help="midpoint heat flow on a CSV path")
    common(p)
    p.add_argument("--path", required=True)
    p.add_argument("--iso", default=None, help="equivariant shift isometry JSON")
    p.add_argument("--max-iter", type=int, default=10**6)
    p.set_defaults(fn=cmd_relax)

    p = sub.add_parser("axis", help="equivariant axis by heat flow")
    common(p)
    p.add_argument("--iso", required=True)
    p.add_argument("--base", required=True, help="seed base point JSON")
    p.add_argument("--nodes", type=int, default=16)
    p.set_defaults(fn=cmd_axis)

    p = sub.add_parser("classify", help="translation-length classification")
    common(p)
    p.add_argument("--iso", required=True)
    p.set_defaults(fn=cmd_classify)

    p = sub.add_parser("diverge", help="divergence profile of two axes")
    common(p)
    p.add_argument("--iso", required=True)
    p.add_argument("--iso2", required=True)
    p.add_argument("--base", required=True)
    p.add_argument("--nodes", type=int, default=16)
    p.add_argument("--rgrid", default="2,3,4,5,6,7,8,9,10")
    p.set_defaults(fn=cmd_diverge)

    p = sub.add_parser("proper", help="sublevel boundedness of a generating set")
    common(p)
    p.add_argument("--isos", required=True, help="JSON list of isometries")
    p.add_argument("--mgrid", default="2,3,4")
    p.add_argument("--budget", type=int, default=3000)
    p.set_defaults(fn=cmd_proper)

    p = sub.add_parser("masur", help="cometric pairings over a t grid")
    common(p, space=False)
    p.add_argument("--tmin", type=float, default=1e-8)
    p.add_argument("--tmax", type=float, default=1e-2)
    p.add_argument("--num", type=int, default=13)
    p.add_argument("--pairs", default="normal,normal;normal,tangential")
    p.add_argument("--n-r", type=int, default=256)
    p.add_argument("--n-phi", type=int, default=64)
    p.set_defaults(fn=cmd_masur)

    p = sub.add_parser("expansion", help="horn-coefficient substitution check")
    common(p, space=False)
    p.add_argument("--svalues", default="25,30,36,43,52,64",
                   help="comma list of s = -log t")
    p.add_argument("--n-r", type=int, default=256)
    p.add_argument("--n-phi", type=int, default=64)
    p.set_defaults(fn=cmd_expansion)

    p = sub.add_parser("experiment", help="run a named experiment")
    p.add_argument("name", choices=EXPERIMENT_NAMES)
    p.add_argument("--space", default=None)
    p.add_argument("--config", default=None, help="parameters JSON")
    p.add_argument("--out", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_experiment)

    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; remap to the documented code
        if exc.code not in (0, None):
            return USAGE
        return 0
    try:
        return args.fn(args)
    except (HornlabError, ValueError, OSError, json.JSONDecodeError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return USAGE


if __name__ == "__main__":
    sys.exit(main())
