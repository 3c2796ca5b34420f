"""Protograph-based spatially coupled LDPC code construction.

A coupled code is described by w+1 component base matrices B_0 .. B_w of
size n_c x n_v.  Tiling them over L chain positions gives the coupled base
matrix with (L+w)*n_c proto check rows and L*n_v proto variable columns:
block (r, u) equals B_{r-u} for 0 <= r-u <= w and is zero otherwise.
Lifting every proto edge by a circulant permutation of size z yields the
final Tanner graph.

Positions are 1-based in all public interfaces (variable positions run
1..L, check positions 1..L+w); array indices inside the module are 0-based.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class CodeConstructionError(ValueError):
    """Raised when code parameters violate a structural precondition."""


def _as_int_matrix(m) -> np.ndarray:
    a = np.asarray(m, dtype=np.int64)
    if a.ndim != 2:
        raise CodeConstructionError(f"base matrix must be 2-D, got shape {a.shape}")
    if (a < 0).any():
        raise CodeConstructionError("base matrix entries must be non-negative")
    return a


@dataclass(frozen=True)
class ComponentBases:
    """The w+1 component matrices of an edge-spread block code.

    ``matrices[i]`` holds B_i; all share the shape (n_c, n_v) and their
    element-wise sum is the base matrix of the uncoupled block code.
    """

    matrices: tuple
    w: int

    def __post_init__(self):
        if len(self.matrices) != self.w + 1:
            raise CodeConstructionError(
                f"expected {self.w + 1} component matrices, got {len(self.matrices)}"
            )
        shape = self.matrices[0].shape
        for m in self.matrices:
            if m.shape != shape:
                raise CodeConstructionError("component matrices must share one shape")

    @property
    def n_c(self) -> int:
        return self.matrices[0].shape[0]

    @property
    def n_v(self) -> int:
        return self.matrices[0].shape[1]

    @property
    def block_base(self) -> np.ndarray:
        """Element-wise sum of the components (the uncoupled base matrix)."""
        return np.sum(self.matrices, axis=0)


def uniform_edge_spread(block_base, w: int) -> ComponentBases:
    """Spread a block base matrix uniformly over w+1 components.

    Every entry must be divisible by w+1; each component is then
    block_base / (w+1) and the components sum back to the block base.
    """
    base = _as_int_matrix(block_base)
    if w < 0:
        raise CodeConstructionError("coupling width must be >= 0")
    rem = base % (w + 1)
    if rem.any():
        r, c = np.argwhere(rem)[0]
        raise CodeConstructionError(
            f"entry {base[r, c]} at ({r}, {c}) is not divisible by w+1={w + 1}"
        )
    comp = base // (w + 1)
    return ComponentBases(tuple(comp.copy() for _ in range(w + 1)), w)


def regular_block_base(dv: int, dc: int) -> np.ndarray:
    """Single-row base matrix of a (dv, dc)-regular code: dv * ones(1, dc/dv)."""
    if dv < 1 or dc < 1 or dc % dv != 0:
        raise CodeConstructionError(f"({dv},{dc}) regular base needs dc divisible by dv")
    return np.full((1, dc // dv), dv, dtype=np.int64)


@dataclass(frozen=True)
class CoupledBaseMatrix:
    """Coupled base matrix: components tiled over L chain positions."""

    components: ComponentBases
    L: int

    def __post_init__(self):
        if self.L < 1:
            raise CodeConstructionError("chain length L must be >= 1")

    @property
    def w(self) -> int:
        return self.components.w

    @property
    def n_c(self) -> int:
        return self.components.n_c

    @property
    def n_v(self) -> int:
        return self.components.n_v

    @property
    def n_rows(self) -> int:
        return (self.L + self.w) * self.n_c

    @property
    def n_cols(self) -> int:
        return self.L * self.n_v

    @property
    def design_rate(self) -> float:
        ratio = self.n_c / self.n_v
        return (1.0 - ratio) - ratio * self.w / self.L

    def block(self, r: int, u: int) -> np.ndarray:
        """Block at row position r, column position u (0-based blocks)."""
        i = r - u
        if 0 <= i <= self.w:
            return self.components.matrices[i]
        return np.zeros((self.n_c, self.n_v), dtype=np.int64)

    @property
    def matrix(self) -> np.ndarray:
        """Dense integer matrix of shape (n_rows, n_cols)."""
        out = np.zeros((self.n_rows, self.n_cols), dtype=np.int64)
        for u in range(self.L):
            for i in range(self.w + 1):
                r = u + i
                out[
                    r * self.n_c : (r + 1) * self.n_c,
                    u * self.n_v : (u + 1) * self.n_v,
                ] = self.components.matrices[i]
        return out

    def dump(self) -> str:
        """Canonical textual dump: one row of space-separated integers per line."""
        return "\n".join(" ".join(str(x) for x in row) for row in self.matrix) + "\n"

    def cn_degrees_by_position(self) -> np.ndarray:
        """Total proto CN degree (sum over the block row) per check position."""
        m = self.matrix
        deg = m.sum(axis=1)
        return deg.reshape(self.L + self.w, self.n_c).sum(axis=1)


def build_coupled_base(components: ComponentBases, L: int) -> CoupledBaseMatrix:
    """Tile component matrices into the coupled base matrix for L positions."""
    return CoupledBaseMatrix(components, L)


@dataclass(frozen=True)
class WindowView:
    """Index sets of one window stage over a lifted chain.

    VN positions cover t .. min(t+W-1, L); CN positions cover
    t .. min(t+W-1, L+w).  The boundary set holds the already decoded
    VN positions max(1, t-w) .. t-1, all of which feed in-window CNs.
    The target set is the VN block at position t.
    """

    graph: "LiftedTannerGraph"
    t: int
    W: int

    def __post_init__(self):
        g = self.graph
        if not 1 <= self.t <= g.L:
            raise CodeConstructionError(f"stage t={self.t} outside 1..{g.L}")
        if self.W < g.w + 1:
            raise CodeConstructionError(f"window size {self.W} must be >= w+1={g.w + 1}")

    @property
    def vn_positions(self) -> range:
        return range(self.t, min(self.t + self.W - 1, self.graph.L) + 1)

    @property
    def cn_positions(self) -> range:
        return range(self.t, min(self.t + self.W - 1, self.graph.L + self.graph.w) + 1)

    @property
    def boundary_positions(self) -> range:
        return range(max(1, self.t - self.graph.w), self.t)

    @property
    def target_positions(self) -> range:
        return range(self.t, self.t + 1)

    def vn_indices(self) -> np.ndarray:
        """Global lifted VN ids, ordered by position then index within position."""
        return self.graph.vn_block(self.vn_positions.start, self.vn_positions.stop)

    def cn_indices(self) -> np.ndarray:
        return self.graph.cn_block(self.cn_positions.start, self.cn_positions.stop)

    def boundary_indices(self) -> np.ndarray:
        bp = self.boundary_positions
        return self.graph.vn_block(bp.start, bp.stop)

    def target_indices(self) -> np.ndarray:
        return self.graph.vn_block(self.t, self.t + 1)

    @property
    def n_vn(self) -> int:
        return len(self.vn_positions) * self.graph.base.n_v * self.graph.z

    @property
    def n_boundary(self) -> int:
        return len(self.boundary_positions) * self.graph.base.n_v * self.graph.z


@dataclass
class LiftedTannerGraph:
    """Circulant lift of a coupled base matrix.

    Every proto edge (one unit of multiplicity in the coupled base matrix)
    becomes z lifted edges: VN copy a of proto VN j attaches to CN copy
    (a + shift) mod z of proto CN i, with one independent seeded shift per
    proto edge.  Edge arrays are sorted by (cn, vn).
    """

    base: CoupledBaseMatrix
    z: int
    seed: int
    edge_vn: np.ndarray
    edge_cn: np.ndarray
    edge_proto: np.ndarray
    proto_edges: np.ndarray  # (n_proto_edges, 3): proto_cn, proto_vn, shift
    _window_cache: dict = field(default_factory=dict, repr=False)
    _cn_adjacency_cache: dict = field(default_factory=dict, repr=False)

    @property
    def L(self) -> int:
        return self.base.L

    @property
    def w(self) -> int:
        return self.base.w

    @property
    def N_v(self) -> int:
        """Lifted VNs per position."""
        return self.base.n_v * self.z

    @property
    def N_c(self) -> int:
        """Lifted CNs per position."""
        return self.base.n_c * self.z

    @property
    def n_vn_total(self) -> int:
        return self.L * self.N_v

    @property
    def n_cn_total(self) -> int:
        return (self.L + self.w) * self.N_c

    def vn_position(self, v) -> np.ndarray:
        """1-based chain position of lifted VN index v."""
        return np.asarray(v) // self.N_v + 1

    def cn_position(self, c) -> np.ndarray:
        return np.asarray(c) // self.N_c + 1

    def vn_block(self, p_start: int, p_stop: int) -> np.ndarray:
        """Lifted VN ids at positions p_start .. p_stop-1 (1-based, half-open)."""
        return np.arange((p_start - 1) * self.N_v, (p_stop - 1) * self.N_v)

    def cn_block(self, p_start: int, p_stop: int) -> np.ndarray:
        return np.arange((p_start - 1) * self.N_c, (p_stop - 1) * self.N_c)

    def window(self, t: int, W: int) -> WindowView:
        return WindowView(self, t, W)

    def vn_degrees(self) -> np.ndarray:
        return np.bincount(self.edge_vn, minlength=self.n_vn_total)

    def cn_degrees(self) -> np.ndarray:
        return np.bincount(self.edge_cn, minlength=self.n_cn_total)

    def cn_block_adjacency(self, p: int):
        """CSR-style (ptr, vn) arrays over the CN block at position p.

        Used for parity checks of a fully decided block: the neighbors of
        position-p CNs all lie at VN positions p-w .. p.
        """
        if p not in self._cn_adjacency_cache:
            lo = (p - 1) * self.N_c
            hi = p * self.N_c
            sel = (self.edge_cn >= lo) & (self.edge_cn < hi)
            cn = self.edge_cn[sel] - lo
            vn = self.edge_vn[sel]
            order = np.argsort(cn, kind="stable")
            cn = cn[order]
            vn = vn[order]
            ptr = np.searchsorted(cn, np.arange(self.N_c + 1))
            self._cn_adjacency_cache[p] = (ptr.astype(np.int64), vn.astype(np.int64))
        return self._cn_adjacency_cache[p]


def _has_lifted_4cycle(proto: np.ndarray, z: int) -> bool:
    """Check whether any pair of proto edges induces a length-4 cycle.

    Two proto edges (c1, v1, s1), (c2, v2, s2) with c1 == c2, v1 == v2 give
    4-cycles iff 2*(s1 - s2) == 0 mod z; two edge pairs forming a proto
    2x2 pattern give 4-cycles iff s11 - s12 - s21 + s22 == 0 mod z.
    """
    by_cell: dict = {}
    for c, v, s in proto:
        by_cell.setdefault((int(c), int(v)), []).append(int(s))
    for shifts in by_cell.values():
        for i in range(len(shifts)):
            for j in range(i + 1, len(shifts)):
                if (2 * (shifts[i] - shifts[j])) % z == 0:
                    return True
    by_cn: dict = {}
    for (c, v), shifts in by_cell.items():
        by_cn.setdefault(c, []).append((v, shifts))
    cns = sorted(by_cn)
    for i in range(len(cns)):
        for j in range(i + 1, len(cns)):
            cells_i = dict(by_cn[cns[i]])
            for v, sj in by_cn[cns[j]]:
                if v not in cells_i:
                    continue
                si = cells_i[v]
                for v2, sj2 in by_cn[cns[j]]:
                    if v2 <= v or v2 not in cells_i:
                        continue
                    si2 = cells_i[v2]
                    for a in si:
                        for b in sj:
                            for a2 in si2:
                                for b2 in sj2:
                                    if (a - b - a2 + b2) % z == 0:
                                        return True
    return False


def lift(
    base: CoupledBaseMatrix,
    z: int,
    seed: int,
    reject_4cycles: bool = False,
    max_attempts: int = 200,
) -> LiftedTannerGraph:
    """Lift a coupled base matrix with seeded circulant permutations.

    Deterministic for a fixed seed.  With ``reject_4cycles`` the shifts are
    resampled (bounded attempts) until the lifted graph has no length-4
    cycles; the default leaves the lift unconditioned.
    """
    if z < 1:
        raise CodeConstructionError("lifting factor z must be >= 1")
    n_c, n_v, w, L = base.n_c, base.n_v, base.w, base.L

    cells = []
    for u in range(L):
        for i in range(w + 1):
            r = u + i
            comp = base.components.matrices[i]
            for ci in range(n_c):
                for vj in range(n_v):
                    for _ in range(int(comp[ci, vj])):
                        cells.append((r * n_c + ci, u * n_v + vj))
    cells = np.array(cells, dtype=np.int64).reshape(-1, 2)

    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    for attempt in range(max_attempts):
        shifts = rng.integers(0, z, size=len(cells), dtype=np.int64)
        proto = np.column_stack([cells, shifts])
        if not reject_4cycles or not _has_lifted_4cycle(proto, z):
            break
    else:
        raise CodeConstructionError(
            f"could not find a 4-cycle-free lift in {max_attempts} attempts (z={z})"
        )

    copies = np.arange(z, dtype=np.int64)
    edge_vn = (proto[:, 1:2] * z + copies[None, :]).ravel()
    edge_cn = (proto[:, 0:1] * z + (copies[None, :] + proto[:, 2:3]) % z).ravel()
    edge_proto = np.repeat(np.arange(len(cells), dtype=np.int64), z)

    order = np.lexsort((edge_vn, edge_cn))
    return LiftedTannerGraph(
        base=base,
        z=z,
        seed=seed,
        edge_vn=edge_vn[order].astype(np.int64),
        edge_cn=edge_cn[order].astype(np.int64),
        edge_proto=edge_proto[order],
        proto_edges=proto,
    )


def window_view(graph: LiftedTannerGraph, t: int, W: int) -> WindowView:
    """Window of size W whose first (target) position is t."""
    return graph.window(t, W)
