import numpy as np
import pytest

from scnwd import (
    CodeConstructionError,
    build_coupled_base,
    lift,
    regular_block_base,
    uniform_edge_spread,
    window_view,
)
from conftest import make_code

FIG_BASE_DUMP = """\
1 1 0 0 0 0 0 0
1 1 1 1 0 0 0 0
1 1 1 1 1 1 0 0
0 0 1 1 1 1 1 1
0 0 0 0 1 1 1 1
0 0 0 0 0 0 1 1
"""


def test_uniform_spread_36():
    comps = uniform_edge_spread(np.array([[3, 3]]), 2)
    assert len(comps.matrices) == 3
    for m in comps.matrices:
        assert m.tolist() == [[1, 1]]
    assert comps.block_base.tolist() == [[3, 3]]


def test_uniform_spread_identity_w0():
    comps = uniform_edge_spread(np.array([[2, 2]]), 0)
    assert len(comps.matrices) == 1
    assert comps.matrices[0].tolist() == [[2, 2]]


def test_uniform_spread_rejects_non_divisible():
    with pytest.raises(CodeConstructionError, match=r"\(0, 0\)"):
        uniform_edge_spread(np.array([[3, 3]]), 1)


def test_coupled_base_matches_figure():
    comps = uniform_edge_spread(regular_block_base(3, 6), 2)
    cb = build_coupled_base(comps, 4)
    assert cb.matrix.shape == (6, 8)
    assert cb.dump() == FIG_BASE_DUMP
    assert cb.cn_degrees_by_position().tolist() == [2, 4, 6, 6, 4, 2]


def test_coupled_base_l1_w0_is_block_base():
    comps = uniform_edge_spread(np.array([[2, 4], [1, 3]]), 0)
    cb = build_coupled_base(comps, 1)
    assert cb.matrix.tolist() == [[2, 4], [1, 3]]


def test_design_rate():
    comps = uniform_edge_spread(regular_block_base(3, 6), 2)
    assert build_coupled_base(comps, 100).design_rate == pytest.approx(0.49)


def test_sum_reconstruction_random_bases(rng):
    for _ in range(10):
        w = int(rng.integers(0, 4))
        n_c = int(rng.integers(1, 3))
        n_v = int(rng.integers(n_c + 1, 5))
        block = rng.integers(0, 3, (n_c, n_v)) * (w + 1)
        if block.sum() == 0:
            block[0, 0] = w + 1
        comps = uniform_edge_spread(block, w)
        L = int(rng.integers(1, 6))
        cb = build_coupled_base(comps, L)
        m = cb.matrix
        for u in range(L):
            col = m[:, u * n_v : (u + 1) * n_v]
            total = col.reshape(-1, n_c, n_v).sum(axis=0)
            assert (total == block).all()


def test_lift_counts_and_degrees(toy_code):
    g = toy_code
    assert g.edge_vn.size == g.base.matrix.sum() * g.z
    assert (g.vn_degrees() == 3).all()
    deg = g.cn_degrees().reshape(g.L + g.w, g.N_c)
    per_pos = deg.sum(axis=1) / g.N_c
    assert per_pos.tolist() == [2, 4] + [6] * (g.L - 2) + [4, 2]
    assert (deg == deg[:, :1]).all()  # each lifted copy keeps the proto degree


def test_lift_formula_sizes():
    g = make_code(L=100, z=100, seed=1)
    assert g.n_vn_total == 20000
    assert g.n_cn_total == 10200


def test_lift_deterministic():
    a = make_code(seed=42)
    b = make_code(seed=42)
    assert np.array_equal(a.edge_vn, b.edge_vn)
    assert np.array_equal(a.edge_cn, b.edge_cn)
    c = make_code(seed=43)
    assert not (np.array_equal(a.edge_cn, c.edge_cn) and np.array_equal(a.edge_vn, c.edge_vn))


def test_lift_z1_is_protograph(proto_code):
    # z=1: edge multiset equals the base matrix support with multiplicity
    g = proto_code
    m = np.zeros_like(g.base.matrix)
    for c, v in zip(g.edge_cn, g.edge_vn):
        m[c, v] += 1
    assert (m == g.base.matrix).all()


def test_lift_permutation_property(toy_code):
    g = toy_code
    for pe in range(g.proto_edges.shape[0]):
        sel = g.edge_proto == pe
        vns = g.edge_vn[sel] % g.z
        cns = g.edge_cn[sel] % g.z
        assert len(set(vns)) == g.z
        assert len(set(cns)) == g.z


def test_lift_positions(toy_code):
    g = toy_code
    vpos = g.vn_position(g.edge_vn)
    cpos = g.cn_position(g.edge_cn)
    assert ((cpos - vpos >= 0) & (cpos - vpos <= g.w)).all()


def test_reject_4cycles_hook():
    comps = uniform_edge_spread(regular_block_base(3, 6), 2)
    g = lift(build_coupled_base(comps, 6), 7, seed=5, reject_4cycles=True)
    # a 4-cycle means two VNs sharing two CNs
    by_vn = {}
    for c, v in zip(g.edge_cn, g.edge_vn):
        by_vn.setdefault(v, []).append(c)
    seen = {}
    for v, cs in by_vn.items():
        cs = sorted(cs)
        assert len(set(cs)) == len(cs), f"parallel edges at VN {v}"
        for i in range(len(cs)):
            for j in range(i + 1, len(cs)):
                key = (cs[i], cs[j])
                assert key not in seen, f"4-cycle between VN {seen.get(key)} and {v}"
                seen[key] = v


def test_window_views(toy_code):
    g = make_code(L=4, z=1)
    v = window_view(g, 1, 6)
    assert list(v.vn_positions) == [1, 2, 3, 4]
    assert list(v.cn_positions) == [1, 2, 3, 4, 5, 6]
    assert list(v.boundary_positions) == []
    v3 = window_view(g, 3, 6)
    assert list(v3.boundary_positions) == [1, 2]
    vL = window_view(toy_code, toy_code.L, 10)
    assert list(vL.vn_positions) == [toy_code.L]
    assert list(vL.cn_positions) == [toy_code.L, toy_code.L + 1, toy_code.L + 2]


def test_window_view_validation(toy_code):
    with pytest.raises(CodeConstructionError):
        window_view(toy_code, 0, 5)
    with pytest.raises(CodeConstructionError):
        window_view(toy_code, 1, 2)  # W < w+1
