"""Graph model of a constant-perimeter triangular truss with roller actuation.

Vertices live in d-dimensional space (everything shipped uses d = 2). Edges are
inflated tube segments whose lengths change only by rollers shuttling tube
material between the two edges adjacent to the roller, so the perimeter of each
triangular module is constant by construction.

Conventions used throughout the package:

* configurations are flat vectors ``x`` of length ``N * d`` ordered
  ``[p0_x, p0_y, p1_x, ...]``,
* the rigidity matrix ``R`` maps vertex velocities to edge-length rates,
* the actuation matrix ``B`` (one row per roller, +1/-1 on its two edges) maps
  roller rates to edge-length rates through ``B.T``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateEdge,
    InfeasibleEdgeRates,
    TopologyError,
    UnknownRoller,
    UnknownVertex,
)

# Degenerate-edge threshold (m) and loop-closure residual tolerance (m/s).
EPS_LEN = 1e-6
EPS_LOOP = 1e-7

# Relative singular-value cutoff for the actuation pseudo-inverse.
PINV_RCOND = 1e-10


@dataclass(frozen=True)
class Roller:
    """An active roller: moves tube from ``edge_minus`` to ``edge_plus``.

    Positive roller rate grows ``edge_plus`` and shrinks ``edge_minus`` at the
    same rate, which is what keeps each triangle's perimeter constant.
    """

    triangle: int
    edge_plus: int
    edge_minus: int
    active: bool = True


@dataclass
class Configuration:
    """Stacked vertex positions (meters) with a timestamp (seconds)."""

    positions: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float).ravel()
        if not np.all(np.isfinite(self.positions)):
            raise ValueError("configuration contains non-finite entries")

    def copy(self) -> "Configuration":
        return Configuration(self.positions.copy(), self.time)


@dataclass
class EdgeLengths:
    """Current edge lengths together with the nominal (rest) lengths."""

    lengths: np.ndarray
    nominal: np.ndarray

    @property
    def deviation(self) -> np.ndarray:
        return self.lengths - self.nominal


def as_flat(x) -> np.ndarray:
    """Accept a Configuration or any array-like, return a flat float vector."""
    if isinstance(x, Configuration):
        return x.positions
    return np.asarray(x, dtype=float).ravel()


class TrussTopology:
    """Immutable truss graph: vertices, edges, triangle modules, rollers.

    Validates the structural invariants on construction and precomputes the
    index machinery used by the kinematics (edge incidence arrays, actuation
    matrix, fixed-DOF selector, triangle membership).
    """

    def __init__(self, dimension, vertex_count, edges, triangles, rollers, fixed_dofs):
        self.dimension = int(dimension)
        self.vertex_count = int(vertex_count)
        self.edges = tuple((int(i), int(j)) for i, j in edges)
        self.triangles = tuple(tuple(int(e) for e in tri) for tri in triangles)
        self.rollers = tuple(
            r if isinstance(r, Roller) else Roller(**r) for r in rollers
        )
        self.fixed_dofs = tuple((int(v), int(ax)) for v, ax in fixed_dofs)
        self._validate()
        self._build_caches()

    # -- sizes ------------------------------------------------------------

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    @property
    def roller_count(self) -> int:
        return len(self.rollers)

    @property
    def dof_count(self) -> int:
        return self.vertex_count * self.dimension

    def dof_index(self, vertex: int, axis: int) -> int:
        return vertex * self.dimension + axis

    def edge_vertices(self, k: int) -> tuple[int, int]:
        return self.edges[k]

    def triangle_vertices(self, t: int) -> tuple[int, ...]:
        verts = set()
        for e in self.triangles[t]:
            verts.update(self.edges[e])
        return tuple(sorted(verts))

    def roller_vertex(self, r: int) -> int:
        """The vertex a roller sits on: the one its two edges share."""
        rol = self.rollers[r]
        shared = set(self.edges[rol.edge_plus]) & set(self.edges[rol.edge_minus])
        return next(iter(shared))

    # -- validation --------------------------------------------------------

    def _validate(self):
        d, n = self.dimension, self.vertex_count
        if d < 2:
            raise TopologyError("dimension must be at least 2")
        if n < 3:
            raise TopologyError("need at least three vertices")
        for k, (i, j) in enumerate(self.edges):
            if i == j:
                raise TopologyError(f"edge {k} is a self-loop")
            if not (0 <= i < n and 0 <= j < n):
                raise TopologyError(f"edge {k} references an unknown vertex")

        seen_edges: set[int] = set()
        for t, tri in enumerate(self.triangles):
            if len(tri) != 3:
                raise TopologyError(f"triangle {t} must list exactly 3 edges")
            if any(not (0 <= e < len(self.edges)) for e in tri):
                raise TopologyError(f"triangle {t} references an unknown edge")
            if seen_edges & set(tri):
                raise TopologyError(
                    f"triangle {t} shares an edge with another triangle"
                )
            seen_edges.update(tri)
            verts = set()
            for e in tri:
                verts.update(self.edges[e])
            if len(verts) != 3:
                raise TopologyError(
                    f"triangle {t} edges do not form a 3-cycle on 3 vertices"
                )
            # every vertex of the cycle must touch exactly two of the edges
            for v in verts:
                deg = sum(1 for e in tri if v in self.edges[e])
                if deg != 2:
                    raise TopologyError(f"triangle {t} edges do not close a cycle")

        per_tri_active: dict[int, int] = {t: 0 for t in range(len(self.triangles))}
        for r, rol in enumerate(self.rollers):
            if not (0 <= rol.triangle < len(self.triangles)):
                raise TopologyError(f"roller {r} references an unknown triangle")
            tri = self.triangles[rol.triangle]
            if rol.edge_plus not in tri or rol.edge_minus not in tri:
                raise TopologyError(f"roller {r} edges are not in its triangle")
            if rol.edge_plus == rol.edge_minus:
                raise TopologyError(f"roller {r} must join two distinct edges")
            shared = set(self.edges[rol.edge_plus]) & set(self.edges[rol.edge_minus])
            if len(shared) != 1:
                raise TopologyError(f"roller {r} edges do not meet at one vertex")
            if rol.active:
                per_tri_active[rol.triangle] += 1
        for t, count in per_tri_active.items():
            if count != 2:
                raise TopologyError(
                    f"triangle {t} has {count} active rollers, expected 2"
                )

        expected_fixed = d * (d + 1) // 2
        if len(self.fixed_dofs) != expected_fixed:
            raise TopologyError(
                f"expected {expected_fixed} fixed DOFs in {d}D, "
                f"got {len(self.fixed_dofs)}"
            )
        seen_dofs = set()
        for v, ax in self.fixed_dofs:
            if not (0 <= v < n):
                raise TopologyError("fixed DOF references an unknown vertex")
            if not (0 <= ax < d):
                raise TopologyError("fixed DOF axis out of range")
            if (v, ax) in seen_dofs:
                raise TopologyError("duplicate fixed DOF")
            seen_dofs.add((v, ax))

    # -- precomputed machinery ----------------------------------------------

    def _build_caches(self):
        d = self.dimension
        n_l = self.edge_count
        i_idx = np.array([e[0] for e in self.edges], dtype=int)
        j_idx = np.array([e[1] for e in self.edges], dtype=int)
        self._i_idx = i_idx
        self._j_idx = j_idx
        # column index blocks for vectorized rigidity assembly
        axes = np.arange(d)
        self._i_cols = i_idx[:, None] * d + axes[None, :]
        self._j_cols = j_idx[:, None] * d + axes[None, :]
        self._rows = np.repeat(np.arange(n_l)[:, None], d, axis=1)

        B = np.zeros((self.roller_count, n_l))
        for r, rol in enumerate(self.rollers):
            if rol.active:
                B[r, rol.edge_plus] = 1.0
                B[r, rol.edge_minus] = -1.0
        self._B = B
        self._BT = B.T.copy()
        self._BT_pinv = np.linalg.pinv(self._BT, rcond=PINV_RCOND)

        A_fixed = np.zeros((len(self.fixed_dofs), self.dof_count))
        for row, (v, ax) in enumerate(self.fixed_dofs):
            A_fixed[row, self.dof_index(v, ax)] = 1.0
        self._A_fixed = A_fixed
        self._fixed_cols = np.array(
            [self.dof_index(v, ax) for v, ax in self.fixed_dofs], dtype=int
        )

        tri_rows = np.zeros((len(self.triangles), n_l))
        for t, tri in enumerate(self.triangles):
            tri_rows[t, list(tri)] = 1.0
        self._triangle_indicator = tri_rows

    @property
    def fixed_dof_columns(self) -> np.ndarray:
        return self._fixed_cols.copy()

    @property
    def fixed_dof_rows(self) -> np.ndarray:
        """Selector matrix picking the fixed degrees of freedom."""
        return self._A_fixed.copy()

    @property
    def triangle_indicator(self) -> np.ndarray:
        """(n_triangles, n_edges) 0/1 membership matrix."""
        return self._triangle_indicator.copy()


# -- kinematic operators ----------------------------------------------------


def _edge_vectors(topo: TrussTopology, x: np.ndarray) -> np.ndarray:
    pts = x.reshape(topo.vertex_count, topo.dimension)
    return pts[topo._i_idx] - pts[topo._j_idx]


def edge_length_vector(topo: TrussTopology, x) -> np.ndarray:
    """Edge lengths as a bare vector; raises DegenerateEdge on collapse."""
    diffs = _edge_vectors(topo, as_flat(x))
    lengths = np.linalg.norm(diffs, axis=1)
    if np.any(lengths < EPS_LEN):
        k = int(np.argmin(lengths))
        raise DegenerateEdge(f"edge {k} has length {lengths[k]:.3e} m")
    return lengths


def edge_lengths(topo: TrussTopology, x, nominal=None) -> EdgeLengths:
    """Current edge lengths; ``nominal`` defaults to the current lengths."""
    lengths = edge_length_vector(topo, x)
    if nominal is None:
        nominal = lengths.copy()
    else:
        nominal = np.asarray(nominal, dtype=float).ravel()
    return EdgeLengths(lengths=lengths, nominal=nominal)


def lengths_and_rigidity(topo: TrussTopology, x) -> tuple[np.ndarray, np.ndarray]:
    """Edge lengths and the rigidity matrix from one pass over the geometry."""
    xf = as_flat(x)
    diffs = _edge_vectors(topo, xf)
    lengths = np.linalg.norm(diffs, axis=1)
    if np.any(lengths < EPS_LEN):
        k = int(np.argmin(lengths))
        raise DegenerateEdge(f"edge {k} has length {lengths[k]:.3e} m")
    units = diffs / lengths[:, None]
    R = np.zeros((topo.edge_count, topo.dof_count))
    R[topo._rows, topo._i_cols] = units
    R[topo._rows, topo._j_cols] = -units
    return lengths, R


def rigidity_matrix(topo: TrussTopology, x) -> np.ndarray:
    """Jacobian of edge lengths w.r.t. vertex positions.

    Row k carries the unit vector of edge k in the columns of its first
    endpoint and the negated unit vector in the columns of the second, so that
    ``edge rates = R @ xdot``. Rigid-body motions are in its null space.
    """
    xf = as_flat(x)
    diffs = _edge_vectors(topo, xf)
    lengths = np.linalg.norm(diffs, axis=1)
    if np.any(lengths < EPS_LEN):
        k = int(np.argmin(lengths))
        raise DegenerateEdge(f"edge {k} has length {lengths[k]:.3e} m")
    units = diffs / lengths[:, None]
    R = np.zeros((topo.edge_count, topo.dof_count))
    R[topo._rows, topo._i_cols] = units
    R[topo._rows, topo._j_cols] = -units
    return R


def actuation_matrix(topo: TrussTopology) -> np.ndarray:
    """Signed roller-to-edge transfer matrix B (+1 grows, -1 shrinks)."""
    return topo._B.copy()


def roller_rates_to_edge_rates(topo: TrussTopology, ddot) -> np.ndarray:
    """Edge-length rates produced by roller rates: ``B.T @ ddot``."""
    return topo._BT @ np.asarray(ddot, dtype=float).ravel()


def inverse_kinematics(topo: TrussTopology, x, xdot, residual_tol=EPS_LOOP) -> np.ndarray:
    """Roller rates realizing the requested vertex velocities.

    Least-squares solve of ``B.T @ ddot = R @ xdot`` through the actuation
    pseudo-inverse. Raises InfeasibleEdgeRates when the requested motion would
    change some triangle's perimeter (the residual cannot be driven below
    ``residual_tol``).
    """
    R = rigidity_matrix(topo, x)
    edge_rates = R @ np.asarray(xdot, dtype=float).ravel()
    ddot = topo._BT_pinv @ edge_rates
    residual = np.linalg.norm(topo._BT @ ddot - edge_rates)
    if residual > residual_tol:
        raise InfeasibleEdgeRates(
            f"loop-closure residual {residual:.3e} m/s exceeds {residual_tol:.1e}"
        )
    return ddot


def project_to_roller_rates(topo: TrussTopology, R: np.ndarray, xdot) -> np.ndarray:
    """Unchecked least-squares IK used by integrators and barrier prediction."""
    return topo._BT_pinv @ (R @ np.asarray(xdot, dtype=float).ravel())


@dataclass
class ConstraintSet:
    """Stacked equality rows for one control solve.

    ``move`` pins the target vertex's velocity to ``move_rhs``; ``fixed`` pins
    anchored DOFs to zero; ``loop`` pins each triangle's perimeter rate to
    zero; ``broken`` pins each failed roller's rate to zero (expressed in
    vertex-velocity space through the actuation pseudo-inverse).
    """

    move: np.ndarray
    move_rhs: np.ndarray
    fixed: np.ndarray
    loop: np.ndarray
    broken: np.ndarray

    def stacked(self) -> tuple[np.ndarray, np.ndarray]:
        A = np.vstack([self.move, self.fixed, self.loop, self.broken])
        b = np.concatenate(
            [
                self.move_rhs,
                np.zeros(self.fixed.shape[0]),
                np.zeros(self.loop.shape[0]),
                np.zeros(self.broken.shape[0]),
            ]
        )
        return A, b

    def residuals(self, xdot) -> dict[str, float]:
        v = np.asarray(xdot, dtype=float).ravel()

        def fam(A, rhs=None):
            if A.shape[0] == 0:
                return 0.0
            r = A @ v if rhs is None else A @ v - rhs
            return float(np.max(np.abs(r)))

        return {
            "move": fam(self.move, self.move_rhs),
            "fixed": fam(self.fixed),
            "loop": fam(self.loop),
            "broken": fam(self.broken),
        }


def constraint_rows(
    topo: TrussTopology, x, target_vertex: int, b_move, broken_rollers=()
) -> ConstraintSet:
    """Build the equality constraint families at configuration ``x``."""
    if not (0 <= target_vertex < topo.vertex_count):
        raise UnknownVertex(f"target vertex {target_vertex} out of range")
    broken = sorted(set(int(r) for r in broken_rollers))
    for r in broken:
        if not (0 <= r < topo.roller_count):
            raise UnknownRoller(f"roller {r} out of range")

    d = topo.dimension
    R = rigidity_matrix(topo, x)

    move = np.zeros((d, topo.dof_count))
    for ax in range(d):
        move[ax, topo.dof_index(target_vertex, ax)] = 1.0
    move_rhs = np.asarray(b_move, dtype=float).ravel()
    if move_rhs.shape != (d,):
        raise ValueError(f"b_move must have {d} entries")

    loop = topo._triangle_indicator @ R

    ik_rows = topo._BT_pinv @ R
    broken_rows = ik_rows[broken, :] if broken else np.zeros((0, topo.dof_count))

    return ConstraintSet(
        move=move,
        move_rhs=move_rhs,
        fixed=topo.fixed_dof_rows,
        loop=loop,
        broken=broken_rows,
    )


# -- default testbed ----------------------------------------------------------


def triforce(side: float = 1.0) -> tuple[TrussTopology, np.ndarray]:
    """Planar three-module testbed: corner triangles of an equilateral outline.

    Six vertices (three outer corners of an equilateral triangle with edge
    ``2 * side`` plus the three midpoints), nine edges, three corner modules of
    edge ``side``. The two active rollers of each module sit on its midpoint
    vertices; the outer corner anchors the tube ends. The bottom-left corner is
    pinned in x and y and the bottom-right corner in y, which removes the three
    planar rigid-body modes. Vertex 2 (the apex) is the usual target.

    Returns the topology and the nominal flat configuration.
    """
    s = float(side)
    if s <= 0:
        raise ValueError("side must be positive")
    h = s * np.sqrt(3.0)
    pts = np.array(
        [
            [0.0, 0.0],        # 0 bottom-left corner
            [2 * s, 0.0],      # 1 bottom-right corner
            [s, h],            # 2 apex (default target)
            [s, 0.0],          # 3 bottom midpoint
            [1.5 * s, h / 2],  # 4 right midpoint
            [0.5 * s, h / 2],  # 5 left midpoint
        ]
    )
    edges = [
        (0, 3), (3, 5), (0, 5),   # module 0 (bottom-left)
        (1, 4), (3, 4), (1, 3),   # module 1 (bottom-right)
        (2, 5), (4, 5), (2, 4),   # module 2 (top)
    ]
    triangles = [(0, 1, 2), (3, 4, 5), (6, 7, 8)]
    # two rollers per module, sitting on the midpoint vertices; positive rate
    # feeds the lower-indexed adjacent edge
    rollers = [
        Roller(triangle=0, edge_plus=0, edge_minus=1),  # at vertex 3
        Roller(triangle=0, edge_plus=1, edge_minus=2),  # at vertex 5
        Roller(triangle=1, edge_plus=3, edge_minus=4),  # at vertex 4
        Roller(triangle=1, edge_plus=4, edge_minus=5),  # at vertex 3
        Roller(triangle=2, edge_plus=6, edge_minus=7),  # at vertex 5
        Roller(triangle=2, edge_plus=7, edge_minus=8),  # at vertex 4
    ]
    fixed_dofs = [(0, 0), (0, 1), (1, 1)]
    topo = TrussTopology(
        dimension=2,
        vertex_count=6,
        edges=edges,
        triangles=triangles,
        rollers=rollers,
        fixed_dofs=fixed_dofs,
    )
    return topo, pts.ravel()


DEFAULT_TARGET_VERTEX = 2
