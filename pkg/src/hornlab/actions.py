"""Isometries of model spaces and their translation-length geometry.

Per-factor actions (angle translations and reflections on horn-type
blocks, real Moebius maps on hyperbolic planes, rigid motions on
Euclidean blocks) combine with a permutation of mutually isomorphic
factors.  On top of the group structure this module provides the
displacement functional, a certified translation-length search, the
four-cell classifier, equivariant axes through the midpoint flow, and
the divergence / properness probes.

Classification is by the sign of the translation length estimate and
whether the infimum is attained: an interior certified minimizer gives
the semisimple column, an escaping minimizing sequence (horn coordinate
collapsing, or coordinates running off every box while the displacement
decreases) gives the non-semisimple one.  A search that can do neither
reports inconclusive rather than guessing a cell.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from .errors import BasinError
from .geometry import (
    XI_SNAP,
    BoundaryPoint,
    CompletionPoint,
    Euclidean,
    Horn,
    HornPoint,
    HyperbolicPlane,
    SpaceSpec,
    distance,
    is_horn_like,
    make_point,
    metric_tensor,
    point_along,
)
from .paths import DiscretePath, heat_flow, refine_flow

#: Translation lengths below this count as zero for classification.
L_TOL = 1e-6

#: Interior certificates additionally require all horn coordinates to sit
#: at least this far from the snap threshold.
XI_ATTAIN = 10.0 * XI_SNAP


# ---------------------------------------------------------------------------
# factor actions


@dataclass(frozen=True)
class HornAction:
    """theta -> a + theta, or a - theta when reflecting; xi is preserved."""

    a: float = 0.0
    reflect: bool = False

    def apply_block(self, block):
        if isinstance(block, BoundaryPoint):
            return None
        theta = -block.theta if self.reflect else block.theta
        return (self.a + theta, block.xi)

    def apply_tangent(self, block, vec):
        s = -1.0 if self.reflect else 1.0
        return (s * vec[0], vec[1])

    def compose(self, other: "HornAction") -> "HornAction":
        s = -1.0 if self.reflect else 1.0
        return HornAction(a=self.a + s * other.a, reflect=self.reflect ^ other.reflect)

    def inverse(self) -> "HornAction":
        s = -1.0 if self.reflect else 1.0
        return HornAction(a=-s * self.a, reflect=self.reflect)


@dataclass(frozen=True)
class MobiusAction:
    """Real 2x2 matrix of determinant one acting on the upper half plane."""

    m: tuple[tuple[float, float], tuple[float, float]]

    def __init__(self, m):
        m = np.asarray(m, dtype=float)
        det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
        if det <= 0:
            raise ValueError("Moebius matrix needs positive determinant")
        m = m / math.sqrt(det)
        object.__setattr__(self, "m", ((m[0, 0], m[0, 1]), (m[1, 0], m[1, 1])))

    @property
    def trace(self) -> float:
        return self.m[0][0] + self.m[1][1]

    def _w(self, z: complex) -> complex:
        (a, b), (c, d) = self.m
        return (a * z + b) / (c * z + d)

    def apply_block(self, block):
        z = complex(block[0], block[1])
        w = self._w(z)
        return (w.real, w.imag)

    def apply_tangent(self, block, vec):
        (a, b), (c, d) = self.m
        z = complex(block[0], block[1])
        dw = 1.0 / (c * z + d) ** 2
        out = dw * complex(vec[0], vec[1])
        return (out.real, out.imag)

    def compose(self, other: "MobiusAction") -> "MobiusAction":
        return MobiusAction(np.array(self.m) @ np.array(other.m))

    def inverse(self) -> "MobiusAction":
        (a, b), (c, d) = self.m
        return MobiusAction(((d, -b), (-c, a)))


@dataclass(frozen=True)
class EuclideanAction:
    """x -> Q x + t with orthogonal Q."""

    Q: tuple
    t: tuple

    def __init__(self, Q, t):
        Q = np.asarray(Q, dtype=float)
        t = np.asarray(t, dtype=float)
        if Q.shape[0] != Q.shape[1] or Q.shape[0] != t.shape[0]:
            raise ValueError("shape mismatch in Euclidean action")
        if not np.allclose(Q.T @ Q, np.eye(len(t)), atol=1e-12):
            raise ValueError("Q must be orthogonal")
        object.__setattr__(self, "Q", tuple(map(tuple, Q)))
        object.__setattr__(self, "t", tuple(t))

    def apply_block(self, block):
        Q = np.array(self.Q)
        return tuple(Q @ np.asarray(block) + np.asarray(self.t))

    def apply_tangent(self, block, vec):
        return tuple(np.array(self.Q) @ np.asarray(vec))

    def compose(self, other: "EuclideanAction") -> "EuclideanAction":
        Q1, t1 = np.array(self.Q), np.array(self.t)
        Q2, t2 = np.array(other.Q), np.array(other.t)
        return EuclideanAction(Q1 @ Q2, Q1 @ t2 + t1)

    def inverse(self) -> "EuclideanAction":
        Q, t = np.array(self.Q), np.array(self.t)
        return EuclideanAction(Q.T, -Q.T @ t)


def _action_matches(factor, action) -> bool:
    if is_horn_like(factor):
        return isinstance(action, HornAction)
    if isinstance(factor, HyperbolicPlane):
        return isinstance(action, MobiusAction)
    if isinstance(factor, Euclidean):
        return isinstance(action, EuclideanAction) and len(action.t) == factor.dim
    return False


@dataclass(frozen=True)
class Isometry:
    """Product isometry: per-factor action followed by a slot permutation.

    ``permutation[i]`` is the target slot of source factor ``i``; permuted
    slots must carry equal factor specifications.
    """

    space: SpaceSpec
    actions: tuple
    permutation: tuple[int, ...] = None

    def __init__(self, space, actions, permutation=None, validate=True):
        actions = tuple(actions)
        if permutation is None:
            permutation = tuple(range(len(space.factors)))
        permutation = tuple(int(i) for i in permutation)
        if len(actions) != len(space.factors):
            raise ValueError("one action per factor required")
        if sorted(permutation) != list(range(len(space.factors))):
            raise ValueError("invalid permutation")
        for i, tgt in enumerate(permutation):
            if space.factors[i] != space.factors[tgt]:
                raise ValueError("permutation mixes non-isomorphic factors")
            if not _action_matches(space.factors[i], actions[i]):
                raise ValueError(f"action {i} does not match its factor")
        object.__setattr__(self, "space", space)
        object.__setattr__(self, "actions", actions)
        object.__setattr__(self, "permutation", permutation)
        if validate:
            self._check_metric_preservation()

    def _check_metric_preservation(self, tol: float = 1e-9):
        rng = np.random.default_rng(12345)
        for _ in range(3):
            p = random_point(self.space, rng, box=1.5)
            g = metric_tensor(self.space, p)
            q = self.apply(p)
            gq = metric_tensor(self.space, q)
            d = self.space.dim
            for _ in range(2):
                v = rng.standard_normal(d)
                w = rng.standard_normal(d)
                dv = self._push_chart_tangent(p, v)
                dw = self._push_chart_tangent(p, w)
                lhs = float(dv @ gq @ dw)
                rhs = float(v @ g @ w)
                if abs(lhs - rhs) > tol * (1.0 + abs(rhs)):
                    raise ValueError("factor action does not preserve the metric")

    def _push_chart_tangent(self, p: CompletionPoint, vec: np.ndarray) -> np.ndarray:
        slices = self.space.chart_slices()
        out = np.zeros_like(vec)
        for i, (action, sl) in enumerate(zip(self.actions, slices)):
            blk = p.blocks[i]
            b = (blk.theta, blk.xi) if isinstance(blk, HornPoint) else blk
            dv = action.apply_tangent(b, tuple(vec[sl]))
            out[slices[self.permutation[i]]] = dv
        return out

    def apply(self, point: CompletionPoint) -> CompletionPoint:
        raw = [None] * len(self.space.factors)
        for i, action in enumerate(self.actions):
            blk = point.blocks[i]
            if isinstance(blk, BoundaryPoint):
                moved = None
            elif isinstance(blk, HornPoint):
                moved = action.apply_block(blk)
            else:
                moved = action.apply_block(blk)
            raw[self.permutation[i]] = moved
        return make_point(self.space, raw)

    def compose(self, other: "Isometry") -> "Isometry":
        """self after other."""
        if self.space != other.space:
            raise ValueError("isometries live on different spaces")
        perm = tuple(self.permutation[other.permutation[i]]
                     for i in range(len(self.permutation)))
        actions = tuple(
            self.actions[other.permutation[i]].compose(other.actions[i])
            for i in range(len(self.actions))
        )
        return Isometry(self.space, actions, perm, validate=False)

    def inverse(self) -> "Isometry":
        inv_perm = [0] * len(self.permutation)
        for i, tgt in enumerate(self.permutation):
            inv_perm[tgt] = i
        actions = tuple(
            self.actions[inv_perm[j]].inverse() for j in range(len(self.actions))
        )
        return Isometry(self.space, actions, tuple(inv_perm), validate=False)

    def power(self, k: int) -> "Isometry":
        if k == 0:
            return identity(self.space)
        base = self if k > 0 else self.inverse()
        out = base
        for _ in range(abs(k) - 1):
            out = out.compose(base)
        return out


def identity(space: SpaceSpec) -> Isometry:
    actions = []
    for f in space.factors:
        if is_horn_like(f):
            actions.append(HornAction())
        elif isinstance(f, HyperbolicPlane):
            actions.append(MobiusAction(((1.0, 0.0), (0.0, 1.0))))
        else:
            actions.append(EuclideanAction(np.eye(f.dim), np.zeros(f.dim)))
    return Isometry(space, tuple(actions), validate=False)


# ---------------------------------------------------------------------------
# JSON wire format


def isometry_to_json(iso: Isometry) -> dict:
    acts = []
    for a in iso.actions:
        if isinstance(a, HornAction):
            kind = "horn_reflect" if a.reflect else "horn_translate"
            acts.append({"kind": kind, "a": a.a})
        elif isinstance(a, MobiusAction):
            acts.append({"kind": "mobius", "m": [list(r) for r in a.m]})
        else:
            acts.append({"kind": "euclid", "Q": [list(r) for r in a.Q], "t": list(a.t)})
    return {"factor_actions": acts, "permutation": list(iso.permutation)}


def isometry_from_json(space: SpaceSpec, doc) -> Isometry:
    import json as _json

    if isinstance(doc, str):
        doc = _json.loads(doc)
    actions = []
    for entry in doc["factor_actions"]:
        kind = entry["kind"]
        if kind == "horn_translate":
            actions.append(HornAction(a=float(entry.get("a", 0.0))))
        elif kind == "horn_reflect":
            actions.append(HornAction(a=float(entry.get("a", 0.0)), reflect=True))
        elif kind == "mobius":
            actions.append(MobiusAction(entry["m"]))
        elif kind == "euclid":
            actions.append(EuclideanAction(entry["Q"], entry["t"]))
        else:
            raise ValueError(f"unknown action kind {kind!r}")
    perm = doc.get("permutation")
    return Isometry(space, tuple(actions), tuple(perm) if perm else None)


# ---------------------------------------------------------------------------
# displacement and the translation-length search


def displacement(iso: Isometry, point: CompletionPoint) -> float:
    """d(p, gamma p)."""
    return distance(iso.space, point, iso.apply(point))


def random_point(space: SpaceSpec, rng: np.random.Generator, box: float = 2.0
                 ) -> CompletionPoint:
    """Random interior point with coordinates on a moderate scale."""
    blocks = []
    for f in space.factors:
        if is_horn_like(f):
            blocks.append((rng.uniform(-box, box), math.exp(rng.uniform(-2.5, 0.7))))
        elif isinstance(f, HyperbolicPlane):
            blocks.append((rng.uniform(-box, box), math.exp(rng.uniform(-1.5, 1.5))))
        else:
            blocks.append(tuple(rng.uniform(-box, box, f.dim)))
    return make_point(space, blocks)


def base_point(space: SpaceSpec) -> CompletionPoint:
    blocks = []
    for f in space.factors:
        if is_horn_like(f) or isinstance(f, HyperbolicPlane):
            blocks.append((0.0, 1.0))
        else:
            blocks.append((0.0,) * f.dim)
    return make_point(space, blocks)


# optimization runs in a transformed chart: horn and hyperbolic second
# coordinates go through log so boundary escape shows up as a coordinate
# running to -infinity


def _opt_dim(space: SpaceSpec) -> int:
    return space.dim


def _to_opt(space: SpaceSpec, p: CompletionPoint) -> np.ndarray:
    u = []
    for f, b in zip(space.factors, p.blocks):
        if is_horn_like(f):
            u += [b.theta, math.log(b.xi)]
        elif isinstance(f, HyperbolicPlane):
            u += [b[0], math.log(b[1])]
        else:
            u += list(b)
    return np.array(u)


def _from_opt(space: SpaceSpec, u: np.ndarray) -> CompletionPoint:
    # log coordinates clamp to ranges that keep every downstream power
    # and product inside double range
    blocks = []
    k = 0
    for f in space.factors:
        if is_horn_like(f):
            xi = max(math.exp(min(u[k + 1], 30.0)), XI_SNAP)
            blocks.append((u[k], xi))
            k += 2
        elif isinstance(f, HyperbolicPlane):
            y = math.exp(min(max(u[k + 1], -80.0), 80.0))
            blocks.append((u[k], y))
            k += 2
        else:
            blocks.append(tuple(u[k:k + f.dim]))
            k += f.dim
    return make_point(space, blocks)


@dataclass(frozen=True)
class SearchBudget:
    starts: int = 32
    box_levels: int = 10
    nm_maxiter: int = 160
    probe_radius: float = 1e-4
    improve_tol: float = 1e-8
    ray_halvings: int = 44
    growth_steps: int = 24
    seed: int = 0


@dataclass
class EscapeWitness:
    """Minimizing sequence summary for a non-attained infimum."""

    points: list[CompletionPoint]
    displacements: list[float]
    collapsing_horns: tuple[int, ...]
    unbounded: bool

    def describe(self) -> str:
        if self.collapsing_horns:
            return f"xi -> 0 escape on horn factors {list(self.collapsing_horns)}"
        return "coordinates -> infinity escape"


@dataclass
class TranslationLengthResult:
    L_estimate: float
    attained: bool
    witness: CompletionPoint | EscapeWitness | None
    status: str  # "ok" or "inconclusive"
    evaluations: int = 0


def _interiority(space: SpaceSpec, u: np.ndarray) -> float:
    p = _from_opt(space, u)
    xis = [b.xi for b in p.blocks if isinstance(b, HornPoint)]
    return min(xis) if xis else math.inf


def _is_interior_candidate(space: SpaceSpec, u: np.ndarray) -> bool:
    """True when the point sits strictly inside every search clamp."""
    p = _from_opt(space, u)
    if p.stratum():
        return False
    for blk, f in zip(p.blocks, space.factors):
        if isinstance(blk, HornPoint) and not (XI_ATTAIN <= blk.xi < math.exp(29.5)):
            return False
        if isinstance(f, HyperbolicPlane) and abs(math.log(blk[1])) >= 59.0:
            return False
    return True


def _fixed_point_search(iso: Isometry, rng: np.random.Generator):
    """Gauss-Newton on the transformed-chart displacement residual.

    Finds exact interior fixed points (the periodic cell) when they
    exist; returns (point, displacement) or None.
    """
    space = iso.space
    d = _opt_dim(space)

    def residual(u):
        p = _from_opt(space, u)
        q = iso.apply(p)
        if q.stratum():
            return None
        return _to_opt(space, q) - u

    starts = [_to_opt(space, base_point(space))]
    for _ in range(4):
        starts.append(rng.uniform(-2.0, 2.0, d))
    for u0 in starts:
        u = u0.copy()
        for _ in range(25):
            r = residual(u)
            if r is None:
                break
            if float(np.max(np.abs(r))) < 1e-11:
                if _is_interior_candidate(space, u):
                    p = _from_opt(space, u)
                    f = displacement(iso, p)
                    if f < 1e-12:
                        return p, f
                break
            delta = 1e-7
            J = np.empty((d, d))
            ok = True
            for k in range(d):
                uu = u.copy()
                uu[k] += delta
                rk = residual(uu)
                if rk is None:
                    ok = False
                    break
                J[:, k] = (rk - r) / delta
            if not ok:
                break
            step, *_ = np.linalg.lstsq(J, -r, rcond=None)
            if float(np.max(np.abs(step))) < 1e-14:
                break
            u = u + step
    return None


def translation_length(iso: Isometry, budget: SearchBudget = SearchBudget()
                       ) -> TranslationLengthResult:
    """Infimum of the displacement over interior points.

    A Gauss-Newton fixed-point search settles the periodic cell exactly.
    Otherwise multi-start Nelder-Mead over expanding boxes in the
    transformed chart produces candidates; collapse rays (driving every
    horn coordinate down while watching the per-factor distances, since
    the total can sit flat at double precision when another factor
    dominates) and coordinate rays to infinity look for escaping
    minimizing sequences, and a trust-region no-improvement certificate
    backs any attainment claim.  Returns status "inconclusive" when
    neither a certificate nor escape evidence materializes in budget.
    """
    from .geometry import factor_distances

    space = iso.space
    rng = np.random.default_rng(budget.seed)
    evals = 0

    def F(u: np.ndarray) -> float:
        nonlocal evals
        evals += 1
        return displacement(iso, _from_opt(space, u))

    fixed = _fixed_point_search(iso, rng)
    if fixed is not None:
        return TranslationLengthResult(
            L_estimate=fixed[1], attained=True, witness=fixed[0],
            status="ok", evaluations=evals,
        )

    d = _opt_dim(space)
    starts = [_to_opt(space, base_point(space))]
    for s in range(budget.starts - 1):
        j = s % (budget.box_levels + 1)
        starts.append(rng.uniform(-(2.0**j), 2.0**j, d))

    # coarse phase on every start, then polish the most promising few;
    # ties at equal displacement break toward interior candidates so a
    # flat horn direction cannot shadow an attained minimum
    coarse = []
    for u0 in starts:
        res = minimize(
            F, u0, method="Nelder-Mead",
            options={"maxiter": 50 * d, "xatol": 1e-6, "fatol": 1e-10},
        )
        coarse.append((float(res.fun), res.x.copy()))
    coarse.sort(key=lambda t: t[0])
    best_u, best_val = None, math.inf
    int_u, int_val = None, math.inf
    polish = coarse[:6] + [t for t in coarse[6:] if _is_interior_candidate(space, t[1])][:2]
    for _, u0 in polish:
        res = minimize(
            F, u0, method="Nelder-Mead",
            options={"maxiter": budget.nm_maxiter * d, "xatol": 1e-9, "fatol": 1e-13},
        )
        val = float(res.fun)
        if best_u is None or val < best_val - 1e-12:
            best_val, best_u = val, res.x.copy()
        elif val < best_val + 1e-12 and _interiority(space, res.x) > _interiority(space, best_u):
            best_val, best_u = min(val, best_val), res.x.copy()
        if _is_interior_candidate(space, res.x) and val < int_val:
            int_val, int_u = val, res.x.copy()
    # interior candidates only count when they compete with the optimum
    if int_u is not None and int_val > best_val + max(budget.improve_tol, 1e-6 * best_val):
        int_u, int_val = None, math.inf

    horn_log_slots = []
    slot_kinds = []
    for f in space.factors:
        if is_horn_like(f):
            slot_kinds += ["horn_theta", "horn_log"]
        elif isinstance(f, HyperbolicPlane):
            slot_kinds += ["hyp_x", "hyp_log"]
        else:
            slot_kinds += ["euclid"] * f.dim
    horn_log_slots = [k for k, kind in enumerate(slot_kinds) if kind == "horn_log"]

    def horn_part(u: np.ndarray) -> float:
        p = _from_opt(space, u)
        parts = factor_distances(space, p, iso.apply(p))
        if parts is None:
            return 0.0
        vals = [parts[i] for i in space.horn_indices]
        return max(vals) if vals else 0.0

    def collapse_probe(u_src, v_src):
        """Drive all horn coordinates down; evidence needs the total to
        never increase while the horn contribution strictly collapses."""
        u = _to_opt(space, _from_opt(space, u_src))  # canonical through clamps
        h0 = horn_part(u)
        if h0 <= 0.0:
            return None
        pts, vals = [], []
        val_prev = F(u)
        tol_up = 1e-12 * (1.0 + abs(v_src))
        for _ in range(budget.ray_halvings):
            u = u.copy()
            for slot in horn_log_slots:
                u[slot] -= 2.0
            v = F(u)
            if v > val_prev + tol_up:
                return None
            val_prev = v
            pts.append(_from_opt(space, u))
            vals.append(v)
        if horn_part(u) > 1e-3 * h0:
            return None
        return pts, vals

    escape_val, escape_seq = math.inf, None
    if horn_log_slots:
        sources = [(best_u, best_val)]
        if int_u is not None and not np.array_equal(int_u, best_u):
            sources.append((int_u, int_val))
        for u_src, v_src in sources:
            hit = collapse_probe(u_src, v_src)
            if hit is not None and hit[1][-1] < escape_val:
                pts, vals = hit
                escape_val = vals[-1]
                escape_seq = EscapeWitness(
                    points=pts[-4:], displacements=vals[-4:],
                    collapsing_horns=tuple(space.horn_indices), unbounded=False,
                )
    ref_val = min(best_val, int_val)
    if escape_seq is not None and escape_val <= ref_val + 1e-12 * (1.0 + abs(ref_val)):
        return TranslationLengthResult(
            L_estimate=min(best_val, escape_val),
            attained=False, witness=escape_seq, status="ok", evaluations=evals,
        )

    if int_u is None:
        # every competitive candidate hugs a search clamp
        best_point = _from_opt(space, best_u)
        at_floor = any(
            isinstance(b, HornPoint) and b.xi < XI_ATTAIN for b in best_point.blocks
        )
        return TranslationLengthResult(
            L_estimate=best_val, attained=False,
            witness=EscapeWitness(
                points=[best_point], displacements=[best_val],
                collapsing_horns=tuple(space.horn_indices) if at_floor else (),
                unbounded=not at_floor,
            ),
            status="ok", evaluations=evals,
        )

    def infinity_probe(slot, sgn):
        u = int_u.copy()
        pts, vals = [], []
        val_prev = int_val
        any_strict = False
        tol_up = 1e-12 * (1.0 + abs(int_val))
        for step in range(1, budget.growth_steps + 1):
            u = u.copy()
            u[slot] += sgn * 2.0 ** (step / 2.0)
            v = F(u)
            if v > val_prev + tol_up:
                return None
            if v < val_prev:
                any_strict = True
            val_prev = v
            pts.append(_from_opt(space, u))
            vals.append(v)
        if not any_strict:
            return None
        return pts, vals

    # rays to infinity: every direction except driving a horn level down,
    # which the collapse probe owns
    inf_val, inf_seq = math.inf, None
    for slot, kind in enumerate(slot_kinds):
        signs = (1.0,) if kind == "horn_log" else (1.0, -1.0)
        for sgn in signs:
            hit = infinity_probe(slot, sgn)
            if hit is not None and hit[1][-1] < inf_val:
                pts, vals = hit
                inf_val = vals[-1]
                inf_seq = EscapeWitness(
                    points=pts[-4:], displacements=vals[-4:],
                    collapsing_horns=(), unbounded=True,
                )
    if inf_seq is not None and inf_val < max(0.5 * int_val, int_val - 1e-10):
        return TranslationLengthResult(
            L_estimate=min(best_val, inf_val), attained=False, witness=inf_seq,
            status="ok", evaluations=evals,
        )

    # trust-region certificate at the interior candidate
    improved = None
    for r in (budget.probe_radius, budget.probe_radius / 10.0):
        for slot in range(d):
            for sgn in (1.0, -1.0):
                u = int_u.copy()
                u[slot] += sgn * r
                if F(u) < int_val - budget.improve_tol:
                    improved = u
                    break
        for _ in range(8):
            u = int_u + rng.standard_normal(d) * r
            if F(u) < int_val - budget.improve_tol:
                improved = u
                break
    if improved is not None:
        res = minimize(
            F, improved, method="Nelder-Mead",
            options={"maxiter": budget.nm_maxiter * d, "xatol": 1e-9, "fatol": 1e-13},
        )
        if res.fun < int_val - budget.improve_tol:
            return TranslationLengthResult(
                L_estimate=float(res.fun), attained=False, witness=None,
                status="inconclusive", evaluations=evals,
            )
    return TranslationLengthResult(
        L_estimate=int_val, attained=True, witness=_from_opt(space, int_u),
        status="ok", evaluations=evals,
    )


# ---------------------------------------------------------------------------
# classification


PERIODIC = "periodic-analog"
STRICTLY_PSEUDOPERIODIC = "strictly-pseudoperiodic-analog"
PSEUDO_ANOSOV = "pseudoAnosov-analog"
REDUCIBLE = "reducible-not-pseudoperiodic-analog"
INCONCLUSIVE = "inconclusive"

CLASS_LABELS = (PERIODIC, STRICTLY_PSEUDOPERIODIC, PSEUDO_ANOSOV, REDUCIBLE)


@dataclass
class ClassificationResult:
    label: str
    L_estimate: float
    attained: bool
    witness: CompletionPoint | EscapeWitness | None
    status: str

    def to_json(self) -> dict:
        if isinstance(self.witness, EscapeWitness):
            witness = {"kind": "escape", "note": self.witness.describe(),
                       "displacements": self.witness.displacements}
        elif isinstance(self.witness, CompletionPoint):
            from .geometry import point_to_json

            witness = {"kind": "minimizer", "point": point_to_json(self.witness)}
        else:
            witness = None
        return {
            "class": self.label,
            "L_estimate": self.L_estimate,
            "attained": self.attained,
            "status": self.status,
            "witness": witness,
        }


def classify(iso: Isometry, budget: SearchBudget = SearchBudget()) -> ClassificationResult:
    """Place an isometry in one of the four translation-length cells."""
    res = translation_length(iso, budget)
    if res.status != "ok":
        return ClassificationResult(INCONCLUSIVE, res.L_estimate, res.attained,
                                    res.witness, "inconclusive")
    zero = res.L_estimate < L_TOL
    if zero and res.attained:
        label = PERIODIC
    elif zero:
        label = STRICTLY_PSEUDOPERIODIC
    elif res.attained:
        label = PSEUDO_ANOSOV
    else:
        label = REDUCIBLE
    return ClassificationResult(label, res.L_estimate, res.attained, res.witness, "ok")


# ---------------------------------------------------------------------------
# axes


@dataclass
class Axis:
    """Converged equivariant discrete geodesic with its shift isometry."""

    path: DiscretePath
    shift: Isometry
    period_length: float
    hartman_ok: bool | None = None
    _powers: dict = field(default_factory=dict, repr=False)
    _cum: np.ndarray | None = field(default=None, repr=False)
    _pairs: list | None = field(default=None, repr=False)

    def _shift_power(self, k: int) -> Isometry:
        if k not in self._powers:
            self._powers[k] = self.shift.power(k)
        return self._powers[k]

    def _segments(self):
        if self._cum is None:
            space = self.path.space
            self._pairs = self.path.segment_endpoints()
            lens = [distance(space, a, b) for a, b in self._pairs]
            self._cum = np.concatenate([[0.0], np.cumsum(lens)])
        return self._cum, self._pairs

    def point_at(self, t: float) -> CompletionPoint:
        """Point at arclength t along the axis (t in R, wraps by the shift)."""
        cum, pairs = self._segments()
        total = cum[-1]
        k = math.floor(t / total)
        r = t - k * total
        i = int(np.searchsorted(cum, r))
        i = min(max(i, 1), len(cum) - 1)
        seg_len = cum[i] - cum[i - 1]
        w = 0.0 if seg_len == 0 else (r - cum[i - 1]) / seg_len
        a, b = pairs[i - 1]
        base = point_along(self.path.space, a, b, w)
        if k == 0:
            return base
        return self._shift_power(k).apply(base)


def axis(iso: Isometry, seed_path: DiscretePath, tol: float = 1e-10,
         *, max_iter: int = 200_000, reference_distance=None,
         length_tol: float = 1e-6) -> Axis:
    """Flow an equivariant seed to the axis of a positive-translation
    isometry.

    Raises BasinError when the flow escapes toward a stratum (seed too
    far out for the contraction to hold).  ``reference_distance`` maps a
    point to its distance from a known axis; when given, the sup of it
    over the nodes is checked to be non-increasing along the flow.
    """
    sups: list[float] = []

    def watch(nodes):
        sups.append(max(reference_distance(p) for p in nodes))

    flowed, report = refine_flow(
        seed_path, tol=tol, max_iter=max_iter, length_tol=length_tol,
    ) if reference_distance is None else heat_flow(
        seed_path, max_iter=max_iter, tol=tol, on_iterate=watch,
    )
    if report.escaped:
        raise BasinError("flow escaped toward a stratum: seed outside the basin")
    hartman = None
    if reference_distance is not None and len(sups) > 1:
        hartman = all(b <= a + 1e-10 for a, b in zip(sups[:-1], sups[1:]))
    return Axis(
        path=flowed,
        shift=iso,
        period_length=report.final_length,
        hartman_ok=hartman,
    )


# ---------------------------------------------------------------------------
# displacement growth off an axis


@dataclass
class GrowthReport:
    D_grid: list[float]
    values: list[float]
    eps: float
    t0: float
    convex_ok: bool
    increasing_ok: bool


def _perpendicular_direction(space: SpaceSpec, p: CompletionPoint, tangent: np.ndarray
                             ) -> np.ndarray:
    """Unit vector metric-orthogonal to the tangent at p."""
    g = metric_tensor(space, p)
    t_norm = math.sqrt(tangent @ g @ tangent)
    t_unit = tangent / t_norm
    best, best_res = None, -1.0
    for k in range(space.dim):
        e = np.zeros(space.dim)
        e[k] = 1.0
        w = e - (e @ g @ t_unit) * t_unit
        res = math.sqrt(max(w @ g @ w, 0.0))
        if res > best_res:
            best, best_res = w, res
    return best / best_res


def displacement_growth(iso: Isometry, ax: Axis, D_grid) -> GrowthReport:
    """Displacement at points a prescribed distance off the axis.

    Sampled along the perpendicular geodesic through an axis node;
    reports the least-squares slope eps and the shift t0 making
    ``f(D) >= eps (D - t0)`` hold on the whole grid.
    """
    from .geometry import (
        geodesic_connect,
        geodesic_shoot,
        tangent_chart_vector,
        tangent_from_chart,
    )

    space = iso.space
    p0 = ax.path.nodes[0]
    seg = geodesic_connect(space, p0, ax.path.nodes[1])
    tangent = tangent_chart_vector(space, seg.velocity)
    perp = _perpendicular_direction(space, p0, tangent)
    values = []
    for D in D_grid:
        if D == 0:
            values.append(displacement(iso, p0))
            continue
        off = geodesic_shoot(space, p0, tangent_from_chart(space, perp), float(D))
        values.append(displacement(iso, off.end))
    D_arr = np.asarray(list(D_grid), dtype=float)
    v_arr = np.asarray(values)
    A = np.vstack([D_arr, np.ones_like(D_arr)]).T
    (eps, intercept), *_ = np.linalg.lstsq(A, v_arr, rcond=None)
    t0 = float(np.max(D_arr - v_arr / eps)) if eps > 0 else math.inf
    # convexity via divided differences (the grid need not be uniform)
    slopes = np.diff(v_arr) / np.diff(D_arr)
    convex_ok = bool(np.all(np.diff(slopes) >= -1e-6)) if len(slopes) > 1 else True
    increasing_ok = bool(np.all(np.diff(v_arr) > 0))
    return GrowthReport(
        D_grid=list(map(float, D_grid)),
        values=list(map(float, values)),
        eps=float(eps),
        t0=t0,
        convex_ok=convex_ok,
        increasing_ok=increasing_ok,
    )


# ---------------------------------------------------------------------------
# axis divergence


@dataclass
class DivergenceReport:
    R_grid: list[float]
    m_values: list[float]
    strictly_increasing_from: float | None
    center_distance: float


def divergence_profile(axis1: Axis, axis2: Axis, R_grid,
                       *, grid_points: int = 65) -> DivergenceReport:
    """m(R) = min of d(A1(t), A2(s)) over |t| + |s| = R.

    Both parameterizations are recentered at the mutual closest approach
    so the profile starts at the minimum gap; the properness proxy is
    m(R) strictly increasing beyond some R0.
    """
    space = axis1.path.space
    L1, L2 = axis1.period_length, axis2.period_length

    ts = np.linspace(0.0, L1, 17)
    ss = np.linspace(-2.0 * L2, 2.0 * L2, 65)
    best = (math.inf, 0.0, 0.0)
    for t in ts:
        p1 = axis1.point_at(float(t))
        for s in ss:
            d = distance(space, p1, axis2.point_at(float(s)))
            if d < best[0]:
                best = (d, float(t), float(s))
    res = minimize(
        lambda u: distance(space, axis1.point_at(u[0]), axis2.point_at(u[1])),
        np.array(best[1:]), method="Nelder-Mead",
        options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 400},
    )
    t_c, s_c = float(res.x[0]), float(res.x[1])
    center_d = float(res.fun)

    def gap(t, s):
        return distance(space, axis1.point_at(t_c + t), axis2.point_at(s_c + s))

    m_values = []
    for R in R_grid:
        best_m = math.inf
        for sgn_t in (1.0, -1.0):
            for sgn_s in (1.0, -1.0):
                a_grid = np.linspace(0.0, R, grid_points)
                vals = [gap(sgn_t * (R - a), sgn_s * a) for a in a_grid]
                i = int(np.argmin(vals))
                lo = a_grid[max(i - 1, 0)]
                hi = a_grid[min(i + 1, grid_points - 1)]
                if hi > lo:
                    r = minimize_scalar(
                        lambda a: gap(sgn_t * (R - a), sgn_s * a),
                        bounds=(lo, hi), method="bounded",
                        options={"xatol": 1e-9},
                    )
                    best_m = min(best_m, float(r.fun))
                best_m = min(best_m, float(vals[i]))
        m_values.append(best_m)
    inc_from = None
    for i in range(len(m_values) - 1):
        if all(b > a for a, b in zip(m_values[i:-1], m_values[i + 1:])):
            inc_from = float(list(R_grid)[i])
            break
    return DivergenceReport(
        R_grid=list(map(float, R_grid)),
        m_values=m_values,
        strictly_increasing_from=inc_from,
        center_distance=center_d,
    )


# ---------------------------------------------------------------------------
# properness of a generating set


@dataclass
class SublevelEstimate:
    M: float
    admissible_found: bool
    radius: float
    unbounded_evidence: bool
    samples: int


@dataclass
class PropernessReport:
    entries: list[SublevelEstimate]

    def unbounded_any(self) -> bool:
        return any(e.unbounded_evidence for e in self.entries)


def properness_probe(generators: list[Isometry], M_grid, sample_budget: int = 3000,
                     *, seed: int = 0, escape_radius: float = 64.0,
                     base: CompletionPoint | None = None) -> PropernessReport:
    """Estimate sup d(p0, p) over the sublevel {max_i d(p, g_i p) <= M}.

    Randomized box sampling (boundary-biased via the log chart) plus hill
    climbing away from the base point; a sublevel reaching past
    ``escape_radius`` counts as unbounded evidence.
    """
    if not generators:
        raise ValueError("at least one generator required")
    space = generators[0].space
    for g in generators[1:]:
        if g.space != space:
            raise ValueError("generators live on different spaces")
    p0 = base if base is not None else base_point(space)
    rng = np.random.default_rng(seed)
    d = _opt_dim(space)

    def delta(point: CompletionPoint) -> float:
        return max(displacement(g, point) for g in generators)

    entries = []
    for M in M_grid:
        used = 0
        radius = 0.0
        found = False
        unbounded = False
        frontier: list[np.ndarray] = []
        levels = list(range(9))
        per_level = max(sample_budget // (2 * len(levels)), 8)
        for j in levels:
            for _ in range(per_level):
                u = rng.uniform(-(2.0**j), 2.0**j, d)
                used += 1
                p = _from_opt(space, u)
                if delta(p) <= M:
                    found = True
                    r = distance(space, p0, p)
                    radius = max(radius, r)
                    frontier.append(u)
                    if r > escape_radius:
                        unbounded = True
                        break
            if unbounded:
                break
        # hill climb from the farthest admissible points
        if found and not unbounded:
            frontier.sort(key=lambda u: -distance(space, p0, _from_opt(space, u)))
            for u in frontier[:4]:
                cur = u.copy()
                cur_r = distance(space, p0, _from_opt(space, cur))
                step = 0.5
                stalls = 0
                while used < sample_budget and stalls < 24 and not unbounded:
                    cand = cur + rng.standard_normal(d) * step
                    used += 1
                    p = _from_opt(space, cand)
                    if delta(p) <= M:
                        r = distance(space, p0, p)
                        if r > cur_r:
                            cur, cur_r = cand, r
                            step = min(step * 1.6, 16.0)
                            stalls = 0
                            radius = max(radius, r)
                            if r > escape_radius:
                                unbounded = True
                            continue
                    step = max(step * 0.6, 1e-3)
                    stalls += 1
        entries.append(SublevelEstimate(
            M=float(M), admissible_found=found, radius=float(radius),
            unbounded_evidence=bool(unbounded), samples=used,
        ))
    return PropernessReport(entries=entries)
