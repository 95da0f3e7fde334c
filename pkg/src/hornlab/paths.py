"""Discrete paths: length and energy functionals, midpoint heat flow.

A path is a list of N+1 completion points on the uniform grid x_i = i/N.
An optional shift isometry gamma makes it equivariant: node N is glued to
gamma applied to node 0, and the flow wraps through that gluing.

The flow itself is Jacobi midpoint smoothing: every updatable node is
replaced by the geodesic midpoint of its two neighbors, all reads coming
from the previous iterate.  Fixed points are discrete geodesics, energy
never increases, and sweeps are order-independent so node updates can be
evaluated in any order or in parallel.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass

from .geometry import (
    XI_SNAP,
    BoundaryPoint,
    CompletionPoint,
    HornPoint,
    SpaceSpec,
    distance,
    is_horn_like,
    make_point,
    midpoint,
    points_equal,
)


@dataclass(frozen=True)
class DiscretePath:
    """N+1 nodes on the uniform unit grid, optionally gamma-periodic."""

    space: SpaceSpec
    nodes: tuple[CompletionPoint, ...]
    periodic_shift: object | None = None  # Isometry, avoids a module cycle

    def __post_init__(self):
        if len(self.nodes) < 3:
            raise ValueError("a discrete path needs at least N = 2 segments")
        if self.periodic_shift is not None:
            glued = self.periodic_shift.apply(self.nodes[0])
            if distance(self.space, self.nodes[-1], glued) > 1e-9:
                raise ValueError("equivariant gluing violated: d(node_N, g node_0) > 1e-9")

    @property
    def n_segments(self) -> int:
        return len(self.nodes) - 1

    def segment_endpoints(self) -> list[tuple[CompletionPoint, CompletionPoint]]:
        """The N consecutive node pairs, wrapping through gamma if set."""
        pairs = list(zip(self.nodes[:-2], self.nodes[1:-1]))
        if self.periodic_shift is not None:
            pairs.append((self.nodes[-2], self.periodic_shift.apply(self.nodes[0])))
        else:
            pairs.append((self.nodes[-2], self.nodes[-1]))
        return pairs


@dataclass
class FlowReport:
    iterations: int
    final_length: float
    final_energy: float
    energy_series: list[float]
    converged: bool
    escaped: bool
    max_displacement: float

    def to_json(self) -> dict:
        return {
            "iterations": self.iterations,
            "final_length": self.final_length,
            "final_energy": self.final_energy,
            "energy_series": self.energy_series,
            "converged": self.converged,
            "escaped": self.escaped,
            "max_displacement": self.max_displacement,
        }


def path_length(path: DiscretePath) -> float:
    """Sum of segment distances over one period."""
    return sum(distance(path.space, a, b) for a, b in path.segment_endpoints())


def path_energy(path: DiscretePath) -> float:
    """Riemann sum N * sum d(node_i, node_{i+1})^2 of the squared speed."""
    n = path.n_segments
    return n * sum(distance(path.space, a, b) ** 2 for a, b in path.segment_endpoints())


def _min_horn_xi(space: SpaceSpec, nodes) -> float | None:
    vals = []
    for pt in nodes:
        for i in space.horn_indices:
            blk = pt.blocks[i]
            if isinstance(blk, HornPoint):
                vals.append(blk.xi)
    return min(vals) if vals else None


def heat_flow(path: DiscretePath, max_iter: int = 10**6, tol: float = 1e-10,
              on_iterate=None) -> tuple[DiscretePath, FlowReport]:
    """Jacobi midpoint smoothing until the sup node displacement per sweep
    falls below ``tol`` or the iteration budget runs out.

    Fixed-endpoint paths update interior nodes only; equivariant paths
    update every node with neighbors read through the gluing.  The
    equivariant sweep is damped: a node moves to the midpoint of itself
    and its neighbors' midpoint, because the undamped update leaves the
    alternating mode of a periodic chain spinning with eigenvalue -1.
    The damping is itself a midpoint call, and the fixed points (discrete
    geodesics) are the same.

    Escape is flagged when a node crosses the snap threshold toward a
    stratum, or when the flow fails to converge while the smallest horn
    coordinate drifts monotonically down (the compactness hypothesis of
    long-time existence has no analogue then).  ``on_iterate`` is called
    with the node list after every sweep.
    """
    space = path.space
    gamma = path.periodic_shift
    nodes = list(path.nodes)
    n = len(nodes) - 1
    energies = [path_energy(path)]
    escaped = False
    converged = False
    max_disp = math.inf
    min_xi_series: list[float] = []
    boundary_declared = any(
        isinstance(b, BoundaryPoint)
        for pt in (path.nodes[0], path.nodes[-1])
        for b in pt.blocks
    )
    it = 0
    for it in range(1, max_iter + 1):
        if gamma is None:
            new_nodes = [nodes[0]]
            for i in range(1, n):
                new_nodes.append(midpoint(space, nodes[i - 1], nodes[i + 1]))
            new_nodes.append(nodes[n])
        else:
            ginv = gamma.inverse()
            new_nodes = []
            for i in range(n):
                left = nodes[i - 1] if i > 0 else ginv.apply(nodes[n - 1])
                right = nodes[i + 1]
                new_nodes.append(
                    midpoint(space, nodes[i], midpoint(space, left, right))
                )
            new_nodes.append(gamma.apply(new_nodes[0]))
        max_disp = max(
            distance(space, a, b) for a, b in zip(nodes, new_nodes)
        )
        nodes = new_nodes
        flowed = DiscretePath(space, tuple(nodes), periodic_shift=gamma)
        energies.append(path_energy(flowed))
        if on_iterate is not None:
            on_iterate(nodes)
        updatable = nodes[1:-1] if gamma is None else nodes
        if not boundary_declared and any(pt.stratum() for pt in updatable):
            escaped = True
            break
        mx = _min_horn_xi(space, nodes)
        if mx is not None:
            min_xi_series.append(mx)
            if mx <= XI_SNAP * (1.0 + 1e-9) and not boundary_declared:
                escaped = True
                break
        if max_disp < tol:
            converged = True
            break
    if not converged and not escaped and len(min_xi_series) >= 10:
        tail = min_xi_series[len(min_xi_series) // 2:]
        if all(b < a for a, b in zip(tail[:-1], tail[1:])):
            escaped = True
    flowed = DiscretePath(space, tuple(nodes), periodic_shift=gamma)
    report = FlowReport(
        iterations=it,
        final_length=path_length(flowed),
        final_energy=energies[-1],
        energy_series=energies,
        converged=converged,
        escaped=escaped,
        max_displacement=max_disp,
    )
    return flowed, report


@dataclass
class CompetitorReport:
    energy_u: float
    energy_w: float
    energy_mid: float
    quadratic_term: float
    slack: float
    holds: bool


def midpoint_competitor_test(u: DiscretePath, w: DiscretePath,
                             tol: float = 1e-7) -> CompetitorReport:
    """Check the quadrilateral comparison satisfied by pointwise midpoints.

    With m_i = midpoint(u_i, w_i) the NPC inequality reads
    ``2 E(m) <= E(u) + E(w) - (1/2) sum N (d(u_i, w_i) - d(u_{i+1}, w_{i+1}))^2``;
    the report carries the slack (RHS - LHS).
    """
    if u.space is not w.space and u.space != w.space:
        raise ValueError("paths live in different spaces")
    if u.n_segments != w.n_segments:
        raise ValueError("mismatched grids")
    if (u.periodic_shift is None) != (w.periodic_shift is None):
        raise ValueError("mismatched equivariance")
    space = u.space
    n = u.n_segments
    mid_nodes = tuple(
        midpoint(space, a, b) for a, b in zip(u.nodes, w.nodes)
    )
    m = DiscretePath(space, mid_nodes, periodic_shift=u.periodic_shift)
    eu, ew, em = path_energy(u), path_energy(w), path_energy(m)
    du = [distance(space, a, b) for a, b in zip(u.nodes, w.nodes)]
    quad = 0.5 * n * sum((du[i] - du[i + 1]) ** 2 for i in range(n))
    rhs = eu + ew - quad
    slack = rhs - 2.0 * em
    return CompetitorReport(
        energy_u=eu,
        energy_w=ew,
        energy_mid=em,
        quadratic_term=quad,
        slack=slack,
        holds=slack >= -tol,
    )


def geodesic_nodes(space: SpaceSpec, p: CompletionPoint, q: CompletionPoint,
                   n: int) -> DiscretePath:
    """Discretize the geodesic from p to q on n segments."""
    from .geometry import point_along

    pts = [p] + [point_along(space, p, q, i / n) for i in range(1, n)] + [q]
    return DiscretePath(space, tuple(pts))


def equivariant_seed(space: SpaceSpec, iso, base: CompletionPoint, n: int) -> DiscretePath:
    """Chord seed: the geodesic from a base point to its image, discretized."""
    from .geometry import point_along

    image = iso.apply(base)
    if points_equal(base, image):
        raise ValueError("base point is fixed by the isometry")
    pts = [base] + [point_along(space, base, image, i / n) for i in range(1, n)] + [image]
    return DiscretePath(space, tuple(pts), periodic_shift=iso)


def refine_flow(path: DiscretePath, *, tol: float = 1e-10, max_iter: int = 10**6,
                length_tol: float = 1e-6, max_doublings: int = 4
                ) -> tuple[DiscretePath, FlowReport]:
    """Flow, then double the node count until the length settles.

    Starts from the given path (N typically 16) and stops when one
    doubling changes the converged length by less than ``length_tol``.
    """
    flowed, report = heat_flow(path, max_iter=max_iter, tol=tol)
    for _ in range(max_doublings):
        if report.escaped:
            break
        prev_len = report.final_length
        flowed = _double_nodes(flowed)
        flowed, report = heat_flow(flowed, max_iter=max_iter, tol=tol)
        if abs(report.final_length - prev_len) < length_tol:
            break
    return flowed, report


def _double_nodes(path: DiscretePath) -> DiscretePath:
    space = path.space
    out: list[CompletionPoint] = []
    pairs = path.segment_endpoints()
    for a, b in pairs:
        out.append(a)
        out.append(a if points_equal(a, b) else midpoint(space, a, b))
    out.append(path.nodes[-1])
    return DiscretePath(space, tuple(out), periodic_shift=path.periodic_shift)


# ---------------------------------------------------------------------------
# CSV wire format: x column, per-block coordinates, boundary indicator per
# horn factor; undefined coordinates of boundary rows stay empty


def _csv_header(space: SpaceSpec) -> list[str]:
    cols = ["x"]
    for i, factor in enumerate(space.factors):
        if is_horn_like(factor):
            cols += [f"f{i}_theta", f"f{i}_xi", f"f{i}_boundary"]
        else:
            cols += [f"f{i}_c{j}" for j in range(factor.dim)]
    return cols


def path_to_csv(path: DiscretePath) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(_csv_header(path.space))
    n = path.n_segments
    for i, pt in enumerate(path.nodes):
        row: list[str] = [repr(i / n)]
        for factor, blk in zip(path.space.factors, pt.blocks):
            if is_horn_like(factor):
                if isinstance(blk, BoundaryPoint):
                    row += ["", "", "1"]
                else:
                    row += [repr(blk.theta), repr(blk.xi), "0"]
            else:
                row += [repr(c) for c in blk]
        writer.writerow(row)
    return buf.getvalue()


def path_from_csv(space: SpaceSpec, text: str, periodic_shift=None) -> DiscretePath:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != _csv_header(space):
        raise ValueError("CSV header does not match the space layout")
    nodes = []
    for row in rows[1:]:
        k = 1
        blocks = []
        for factor in space.factors:
            if is_horn_like(factor):
                theta_s, xi_s, bnd = row[k], row[k + 1], row[k + 2]
                k += 3
                blocks.append(None if bnd == "1" else (float(theta_s), float(xi_s)))
            else:
                blocks.append(tuple(float(c) for c in row[k:k + factor.dim]))
                k += factor.dim
        nodes.append(make_point(space, blocks))
    return DiscretePath(space, tuple(nodes), periodic_shift=periodic_shift)


def flow_report_json(report: FlowReport) -> str:
    return json.dumps(report.to_json(), sort_keys=True)
