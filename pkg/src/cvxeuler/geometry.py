"""Decomposition of matrices near the identity into lattice projections.

For a lattice shell ``{|k| = lambda0}`` we look for eight disjoint symmetric
families of directions together with smooth positive weights ``gamma_k(R)``
such that, for every symmetric ``R`` with ``|R - Id| < r0`` (operator norm),

    R = 1/2 sum_{k in family} gamma_k(R)^2 (Id - khat khat^T).

Each family carries a *chart*: six matrices ``A_i`` in the convex hull of its
projections, each written as a short positive combination of projections.
Because every projection has trace 2, the ``A_i`` are chosen linearly
independent inside the trace-2 hyperplane, and the chart coordinates are the
unique solution of ``sum_i beta_i A_i = X`` over all symmetric ``X``.  Around
``(2/3) Id`` all coordinates are positive, which makes the weights positive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import cKDTree

from .beltrami import canonical, lattice_shell

__all__ = [
    "ALPHA",
    "GeometryError",
    "OutOfDomainError",
    "ProjectionMatrix",
    "projection_matrix",
    "sym_to_vec",
    "vec_to_sym",
    "SimplexChart",
    "DirectionSystem",
    "rational_sphere_points",
    "covering_radius",
    "hull_margin",
    "find_direction_system",
    "gamma",
    "compute_eta",
    "load_direction_system",
    "dump_direction_system",
    "default_direction_system",
]

ALPHA = 2.0 / 3.0
"""The only multiple of the identity with trace 2."""

_IU = np.triu_indices(3)


class GeometryError(RuntimeError):
    """No admissible direction system was found; ``reasons`` maps lambda0 to a message."""

    def __init__(self, reasons: dict[int, str]):
        self.reasons = dict(reasons)
        lines = [f"lambda0={k}: {v}" for k, v in sorted(reasons.items())]
        super().__init__("no direction system found\n" + "\n".join(lines))


class OutOfDomainError(ValueError):
    """Raised when a matrix lies outside the ball where the weights are defined."""


def sym_to_vec(M: np.ndarray) -> np.ndarray:
    """Upper-triangle entries ``(m11, m12, m13, m22, m23, m33)`` along the last axis."""
    M = np.asarray(M)
    return M[..., _IU[0], _IU[1]]


def vec_to_sym(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v)
    out = np.zeros(v.shape[:-1] + (3, 3), dtype=v.dtype)
    out[..., _IU[0], _IU[1]] = v
    out[..., _IU[1], _IU[0]] = v
    return out


@dataclass(frozen=True)
class ProjectionMatrix:
    """``M_k = Id - khat khat^T`` for an integer direction ``k``."""

    direction: tuple[int, int, int]
    value: np.ndarray


def projection_matrix(k: Sequence[int]) -> np.ndarray:
    kk = np.asarray(k, dtype=float)
    u = kk / np.linalg.norm(kk)
    return np.eye(3) - np.outer(u, u)


def _projection_vectors(pairs: Sequence[tuple[int, int, int]]) -> np.ndarray:
    return np.array([sym_to_vec(projection_matrix(k)) for k in pairs])


# ---------------------------------------------------------------------------
# rational points on the sphere


def rational_sphere_points(denominator_bound: int) -> list[tuple[Fraction, Fraction, Fraction]]:
    """Exact rational points of the unit sphere.

    Images of ``s(u, v) = (2v, 2u, u^2 + v^2 - 1) / (u^2 + v^2 + 1)`` for all
    rationals ``u, v`` with denominator at most the bound and absolute value at
    most the bound, plus the pole ``(0, 0, 1)`` that the map misses.
    """
    B = int(denominator_bound)
    if B < 1:
        raise ValueError("denominator bound must be at least 1")
    values = sorted({Fraction(p, q) for q in range(1, B + 1) for p in range(-B * q, B * q + 1)})
    pts = {(Fraction(0), Fraction(0), Fraction(1))}
    for u in values:
        for v in values:
            d = u * u + v * v + 1
            pts.add((2 * v / d, 2 * u / d, (u * u + v * v - 1) / d))
    return sorted(pts)


def covering_radius(points: Iterable[Sequence], probes: int = 20000, seed: int = 0) -> float:
    """Largest distance from a random probe on the sphere to the nearest point."""
    P = np.array([[float(c) for c in p] for p in points])
    rng = np.random.default_rng(seed)
    Z = rng.standard_normal((probes, 3))
    Z /= np.linalg.norm(Z, axis=1, keepdims=True)
    d, _ = cKDTree(P).query(Z)
    return float(d.max())


# ---------------------------------------------------------------------------
# linear programs


def hull_margin(pairs: Sequence[tuple[int, int, int]]) -> float:
    """Largest ``s`` with ``sum c_k M_k = (2/3) Id``, ``sum c_k = 1``, ``c_k >= s``.

    A positive value certifies that ``(2/3) Id`` is in the relative interior of
    the convex hull of the projections.  Returns ``-inf`` when the program is
    infeasible or the projections do not span the trace-2 hyperplane.
    """
    m = len(pairs)
    if m < 6:
        return -math.inf
    V = _projection_vectors(pairs)
    if np.linalg.matrix_rank(np.hstack([V, np.ones((m, 1))]), tol=1e-9) < 6:
        return -math.inf
    A_eq = np.zeros((7, m + 1))
    A_eq[:6, :m] = V.T
    A_eq[6, :m] = 1.0
    b_eq = np.r_[sym_to_vec(ALPHA * np.eye(3)), 1.0]
    A_ub = np.hstack([-np.eye(m), np.ones((m, 1))])
    res = linprog(
        np.r_[np.zeros(m), -1.0],
        A_ub=A_ub,
        b_ub=np.zeros(m),
        A_eq=A_eq,
        b_eq=b_eq,
        bounds=[(None, None)] * (m + 1),
        method="highs",
    )
    return float(res.x[-1]) if res.status == 0 else -math.inf


def _max_step(V: np.ndarray, direction: np.ndarray) -> float:
    """Largest ``t`` with ``(2/3) Id + t D`` in the convex hull of the rows of ``V``."""
    m = len(V)
    A_eq = np.zeros((7, m + 1))
    A_eq[:6, :m] = V.T
    A_eq[:6, m] = -sym_to_vec(direction)
    A_eq[6, :m] = 1.0
    b_eq = np.r_[sym_to_vec(ALPHA * np.eye(3)), 1.0]
    res = linprog(
        np.r_[np.zeros(m), -1.0], A_eq=A_eq, b_eq=b_eq, bounds=[(0, None)] * m + [(0, None)], method="highs"
    )
    return float(res.x[-1]) if res.status == 0 else 0.0


def _convex_weights(V: np.ndarray, target: np.ndarray) -> np.ndarray:
    """A basic (hence sparse) solution of ``sum c_k V_k = target``, ``sum c = 1``, ``c >= 0``."""
    m = len(V)
    A_eq = np.vstack([V.T, np.ones((1, m))])
    b_eq = np.r_[target, 1.0]
    res = linprog(np.zeros(m), A_eq=A_eq, b_eq=b_eq, bounds=[(0, None)] * m, method="highs-ds")
    if res.status != 0:
        raise GeometryError({0: "vertex outside the hull"})
    return res.x


# ---------------------------------------------------------------------------
# charts


def _tracefree_basis() -> np.ndarray:
    """Frobenius-orthonormal basis of trace-free symmetric matrices, shape (5, 3, 3)."""
    E = []
    for a, b in [(0, 1), (0, 2), (1, 2)]:
        M = np.zeros((3, 3))
        M[a, b] = M[b, a] = 1.0 / np.sqrt(2.0)
        E.append(M)
    E.append(np.diag([1.0, -1.0, 0.0]) / np.sqrt(2.0))
    E.append(np.diag([1.0, 1.0, -2.0]) / np.sqrt(6.0))
    return np.array(E)


def _simplex_directions(rotation: np.ndarray) -> np.ndarray:
    """Six unit trace-free directions forming a regular simplex, shape (6, 3, 3)."""
    I6 = np.eye(6) - 1.0 / 6.0
    # orthonormal basis of the sum-zero subspace of R^6
    U, _, _ = np.linalg.svd(I6)
    coords = I6 @ U[:, :5]
    coords /= np.linalg.norm(coords, axis=1, keepdims=True)
    coords = coords @ rotation.T
    return np.einsum("ia,abc->ibc", coords, _tracefree_basis())


def _random_rotation(rng: np.random.Generator) -> np.ndarray:
    Q, R = np.linalg.qr(rng.standard_normal((5, 5)))
    return Q * np.sign(np.diag(R))


@dataclass(frozen=True, eq=False)
class SimplexChart:
    """Chart of one family.

    Attributes
    ----------
    vertices : ndarray, shape (6, 3, 3)
        Linearly independent matrices of trace 2 in the hull of the family.
    caratheodory : list of list of (direction, weight)
        Positive weights with ``A_i = sum weight * M_direction``.
    pairs : list of direction
        Canonical representatives of the directions used by the chart.
    alpha_center : float
        ``2/3``; ``alpha_center * Id`` is the centroid of the vertices.
    theta : float
        Operator-norm radius around ``alpha_center * Id`` on which all chart
        coordinates stay positive.
    """

    vertices: np.ndarray
    caratheodory: list
    pairs: list
    alpha_center: float = ALPHA
    theta: float = field(init=False)
    coordinate_map: np.ndarray = field(init=False, repr=False)
    weight_map: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        G = sym_to_vec(self.vertices).T  # columns are vertices
        Ginv = np.linalg.inv(G)
        # Frobenius representers of the coordinate functionals
        reps = vec_to_sym(Ginv)
        reps = np.where(np.eye(3, dtype=bool), reps, 0.5 * reps)
        nuclear = np.abs(np.linalg.eigvalsh(reps)).sum(axis=1)
        beta_c = Ginv @ sym_to_vec(self.alpha_center * np.eye(3))
        theta = float(np.min(beta_c / nuclear))
        index = {k: n for n, k in enumerate(self.pairs)}
        L = np.zeros((6, len(self.pairs)))
        for i, terms in enumerate(self.caratheodory):
            for k, w in terms:
                L[i, index[tuple(k)]] += w
        # gamma^2(R) = (1/alpha) sum_i beta_i(alpha R) L_i = L^T Ginv vec(R)
        H = L.T @ Ginv
        for name, arr in (("theta", theta), ("coordinate_map", Ginv), ("weight_map", H)):
            if isinstance(arr, np.ndarray):
                arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def r0(self) -> float:
        """Radius in R-space: half the positivity radius, rescaled by ``1/alpha``."""
        return self.theta / (2.0 * self.alpha_center)

    def coordinates(self, X: np.ndarray) -> np.ndarray:
        """Chart coordinates ``beta(X)`` along the last axis."""
        return sym_to_vec(X) @ self.coordinate_map.T

    def gamma_squared(self, R: np.ndarray) -> np.ndarray:
        """``gamma_k(R)^2`` for every pair, along the last axis."""
        return sym_to_vec(R) @ self.weight_map.T

    def vertex_residual(self) -> float:
        worst = 0.0
        for A, terms in zip(self.vertices, self.caratheodory):
            recon = sum(w * projection_matrix(k) for k, w in terms)
            worst = max(worst, float(np.abs(recon - A).max()))
        return worst


def _build_chart(pairs: Sequence[tuple[int, int, int]], rotation: np.ndarray, shrink: float) -> SimplexChart | None:
    V = _projection_vectors(pairs)
    D = _simplex_directions(rotation)
    steps = [_max_step(V, Di) for Di in D]
    t = shrink * min(steps)
    if t <= 0:
        return None
    vertices = ALPHA * np.eye(3) + t * D
    carath = []
    used: set[tuple[int, int, int]] = set()
    for A in vertices:
        c = _convex_weights(V, sym_to_vec(A))
        support = np.nonzero(c > 1e-12)[0]
        # re-solve on the support to remove LP tolerance from the weights
        Vs = np.vstack([V[support].T, np.ones((1, len(support)))])
        w, *_ = np.linalg.lstsq(Vs, np.r_[sym_to_vec(A), 1.0], rcond=None)
        if np.any(w <= 0):
            w = c[support]
        terms = [(tuple(int(x) for x in pairs[n]), float(wi)) for n, wi in zip(support, w)]
        carath.append(terms)
        used.update(k for k, _ in terms)
    chart_pairs = [k for k in pairs if k in used]
    return SimplexChart(vertices, carath, chart_pairs)


# ---------------------------------------------------------------------------
# direction systems


@dataclass(frozen=True, eq=False)
class DirectionSystem:
    """Eight disjoint symmetric families on one shell, with their charts.

    ``families[j]`` lists every wavevector of family ``j`` (both signs);
    ``charts[j].pairs`` lists one canonical representative per pair, which is
    the order used by :meth:`gamma_family`.
    """

    lambda0: int
    r0: float
    families: list
    charts: list
    margins: list = field(default_factory=list)

    def __post_init__(self):
        owner = {}
        for j, fam in enumerate(self.families):
            for k in fam:
                owner[tuple(int(x) for x in k)] = j
        object.__setattr__(self, "_owner", owner)

    def family_of(self, k) -> int:
        return self._owner[tuple(int(x) for x in k)]  # type: ignore[attr-defined]

    def pairs(self, j: int) -> list:
        return self.charts[j].pairs

    def gamma_family(self, j: int, R: np.ndarray, check: bool = True) -> np.ndarray:
        """``gamma_k(R)`` for the canonical pairs of family ``j`` (last axis).

        ``R`` may be a stack of matrices with shape ``(..., 3, 3)``.
        """
        R = np.asarray(R, dtype=float)
        if check:
            dev = np.abs(np.linalg.eigvalsh(R - np.eye(3))).max(axis=-1)
            if np.any(dev >= self.r0):
                raise OutOfDomainError(
                    f"|R - Id| = {float(np.max(dev)):.6g} is not below r0 = {self.r0:.6g}"
                )
        g2 = self.charts[j].gamma_squared(R)
        return np.sqrt(np.maximum(g2, 0.0))

    def reconstruct(self, j: int, R: np.ndarray) -> np.ndarray:
        """``1/2 sum_k gamma_k^2 M_k`` over the whole family (both signs)."""
        g = self.gamma_family(j, R)
        Ms = np.array([projection_matrix(k) for k in self.charts[j].pairs])
        return np.einsum("...n,nab->...ab", g**2, Ms)

    def family_sizes(self) -> list[int]:
        return [len(f) for f in self.families]


def gamma(system: DirectionSystem, j: int, k: Sequence[int], R: np.ndarray) -> float:
    """Weight of direction ``k`` of family ``j`` (0-based) at the matrix ``R``."""
    kc = canonical(k)
    pairs = system.pairs(j)
    if kc not in pairs:
        raise KeyError(f"direction {tuple(k)} is not in family {j}")
    return float(system.gamma_family(j, R)[..., pairs.index(kc)])


def compute_eta(system: DirectionSystem, energy_min: float) -> float:
    """Admissible Reynolds-stress threshold ``r0 * min e / (24 (2 pi)^3)``."""
    if energy_min <= 0:
        raise ValueError("energy_min must be positive")
    return system.r0 * energy_min / (24.0 * (2.0 * np.pi) ** 3)


def _spiral_order(pairs: list[tuple[int, int, int]]) -> list[tuple[int, int, int]]:
    """Order directions by their nearest point on a golden-angle spiral."""
    P = np.array(pairs, dtype=float)
    P /= np.linalg.norm(P, axis=1, keepdims=True)
    P[P[:, 2] < 0] *= -1.0
    n = len(pairs)
    i = np.arange(n) + 0.5
    z = 1.0 - i / n
    r = np.sqrt(1.0 - z * z)
    ang = np.pi * (3.0 - np.sqrt(5.0)) * i
    spiral = np.stack([r * np.cos(ang), r * np.sin(ang), z], axis=1)
    _, nearest = cKDTree(spiral).query(P)
    order = sorted(range(n), key=lambda m: (int(nearest[m]), pairs[m]))
    return [pairs[m] for m in order]


def _margins(assign: np.ndarray, pairs: list, nfam: int) -> list[float]:
    return [hull_margin([pairs[i] for i in np.nonzero(assign == j)[0]]) for j in range(nfam)]


def _partition(pairs: list, nfam: int, rng: np.random.Generator, iterations: int, goal: float):
    """Round-robin deal over the spiral order, then swap-based annealing."""
    ordered = _spiral_order(pairs)
    pos = {k: n for n, k in enumerate(pairs)}
    best_assign, best_marg = None, None
    for offset in range(nfam):
        assign = np.empty(len(pairs), dtype=int)
        for r, k in enumerate(ordered):
            assign[pos[k]] = (r + offset) % nfam
        marg = _margins(assign, pairs, nfam)
        if best_marg is None or _score(marg) > _score(best_marg):
            best_assign, best_marg = assign.copy(), marg
        if min(marg) >= goal:
            return best_assign, best_marg
    assign, marg = best_assign.copy(), list(best_marg)
    temperature = 0.01
    for _ in range(iterations):
        i, m = rng.integers(len(pairs), size=2)
        a, b = assign[i], assign[m]
        if a == b:
            continue
        assign[i], assign[m] = b, a
        trial = list(marg)
        trial[a] = _margins_single(assign, pairs, a)
        trial[b] = _margins_single(assign, pairs, b)
        gain = _score(trial) - _score(marg)
        if gain >= 0 or rng.random() < math.exp(gain / temperature):
            marg = trial
            if _score(marg) > _score(best_marg):
                best_assign, best_marg = assign.copy(), list(marg)
                if min(best_marg) >= goal:
                    break
        else:
            assign[i], assign[m] = a, b
        temperature *= 0.999
    return best_assign, best_marg


def _score(marg: list[float]) -> float:
    low = min(marg)
    return low if math.isfinite(low) else -1.0 - sum(1 for x in marg if not math.isfinite(x))


def _margins_single(assign: np.ndarray, pairs: list, j: int) -> float:
    return hull_margin([pairs[i] for i in np.nonzero(assign == j)[0]])


def find_direction_system(
    search_bound: int,
    seed: int = 0,
    iterations: int = 8000,
    margin_goal: float = 0.05,
    chart_trials: int = 8,
    shrink: float = 0.9,
) -> DirectionSystem:
    """Search shells of radius up to ``search_bound`` for an admissible system.

    For each radius the pairs ``{k, -k}`` are dealt round-robin into eight
    families along a spiral ordering; if some family fails the interior test,
    a seeded local search swaps pairs between families to maximize the
    smallest hull margin.  Each family's chart is then built from a regular
    simplex of directions (best of ``chart_trials`` orientations).
    """
    reasons: dict[int, str] = {}
    nfam = 8
    for lambda0 in range(1, int(search_bound) + 1):
        ks = lattice_shell(lambda0)
        pairs = sorted({canonical(k) for k in ks})
        if len(pairs) < 6 * nfam:
            reasons[lambda0] = f"{len(pairs)} direction pairs; eight families need at least {6 * nfam}"
            continue
        rng = np.random.default_rng([seed, lambda0])
        assign, marg = _partition(pairs, nfam, rng, iterations, margin_goal)
        if min(marg) <= 0:
            reasons[lambda0] = f"best partition has smallest hull margin {min(marg):.4g}"
            continue
        charts = []
        for j in range(nfam):
            fam_pairs = [pairs[i] for i in np.nonzero(assign == j)[0]]
            best = None
            for trial in range(chart_trials):
                rot = np.eye(5) if trial == 0 else _random_rotation(rng)
                chart = _build_chart(fam_pairs, rot, shrink)
                if chart is not None and (best is None or chart.theta > best.theta):
                    best = chart
            if best is None or best.theta <= 0:
                reasons[lambda0] = f"family {j} admits no chart"
                break
            charts.append(best)
        else:
            families = [_with_negatives(c.pairs) for c in charts]
            r0 = min(c.r0 for c in charts)
            return DirectionSystem(lambda0, r0, families, charts, [float(m) for m in marg])
    raise GeometryError(reasons)


def _with_negatives(pairs: Iterable[tuple[int, int, int]]) -> list[tuple[int, int, int]]:
    out = []
    for k in pairs:
        out.append(tuple(k))
        out.append(tuple(-x for x in k))
    return sorted(out)


# ---------------------------------------------------------------------------
# text serialization


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def dump_direction_system(system: DirectionSystem) -> str:
    """Plain-text document describing a system; loads back bit-exactly."""
    lines = [
        "# direction system",
        f"lambda0 {system.lambda0}",
        f"r0 {_fmt(system.r0)}",
        f"families {len(system.charts)}",
    ]
    for j, chart in enumerate(system.charts):
        margin = system.margins[j] if j < len(system.margins) else float("nan")
        lines.append(f"family {j} pairs {len(chart.pairs)} margin {_fmt(margin)} theta {_fmt(chart.theta)}")
        for k in chart.pairs:
            lines.append("pair {} {} {}".format(*k))
        for i, (A, terms) in enumerate(zip(chart.vertices, chart.caratheodory)):
            lines.append("vertex {} {}".format(i, " ".join(_fmt(x) for x in sym_to_vec(A))))
            for k, w in terms:
                lines.append("term {} {} {} {}".format(*k, _fmt(w)))
    return "\n".join(lines) + "\n"


def load_direction_system(text: str) -> DirectionSystem:
    """Parse a document written by :func:`dump_direction_system`."""
    lambda0 = None
    charts_raw: list[dict] = []
    margins: list[float] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tok = line.split()
        try:
            if tok[0] == "lambda0":
                lambda0 = int(tok[1])
            elif tok[0] in ("r0", "families"):
                pass
            elif tok[0] == "family":
                charts_raw.append({"pairs": [], "vertices": [], "terms": []})
                margins.append(float(tok[5]) if len(tok) > 5 else float("nan"))
            elif tok[0] == "pair":
                charts_raw[-1]["pairs"].append(tuple(int(x) for x in tok[1:4]))
            elif tok[0] == "vertex":
                charts_raw[-1]["vertices"].append([float(x) for x in tok[2:8]])
                charts_raw[-1]["terms"].append([])
            elif tok[0] == "term":
                charts_raw[-1]["terms"][-1].append((tuple(int(x) for x in tok[1:4]), float(tok[4])))
            else:
                raise ValueError(f"unknown keyword {tok[0]!r}")
        except (IndexError, ValueError) as exc:
            raise ValueError(f"line {lineno}: {exc}") from exc
    if lambda0 is None or not charts_raw:
        raise ValueError("document does not describe a direction system")
    charts = [
        SimplexChart(vec_to_sym(np.array(c["vertices"])), c["terms"], c["pairs"]) for c in charts_raw
    ]
    families = [_with_negatives(c.pairs) for c in charts]
    r0 = min(c.r0 for c in charts)
    return DirectionSystem(lambda0, r0, families, charts, margins)


def default_direction_system() -> DirectionSystem:
    """The system shipped with the package (shell radius 9)."""
    path = Path(__file__).with_name("data") / "direction_system.txt"
    return load_direction_system(path.read_text())
