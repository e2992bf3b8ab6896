import math
from collections import Counter

import numpy as np
import pytest

from frilab import rng as R
from frilab.lattice import Box, canonical_edge
from frilab.sampler import (FriConfig, ResourceError, batch_statistics, padded_margin,
                            padding_margin, run_replicates, sample_fri, sample_fri_box_exact,
                            sample_fri_box_padded)
from frilab.walks import KilledWalkParams, Trajectory, estimate_escape_probability

from oracles import geometric_tail_margin

BOX5 = Box.cube(3, 5)


def config(u=0.5, T=2.0, box=BOX5, **kw):
    return FriConfig(box.dim, u, T, box, **kw)


def stream(i=0, seed=7):
    return R.RngStream(seed, (R.TEST, i, 0))


# ---------------------------------------------------------------- margins


@pytest.mark.parametrize("T,tol,m", [(2.0, 1e-6, 35), (50.0, 1e-6, 698)])
def test_padding_margin_fixtures(T, tol, m):
    assert padding_margin(T, tol) == m
    assert geometric_tail_margin(T, tol) == m


def test_padding_margin_tol_one():
    assert padding_margin(3.0, 1.0) == 0
    assert padding_margin(3.0, 5.0) == 0


@pytest.mark.parametrize("T", [0.1, 0.5, 1.0, 2.2, 7.0, 30.0])
@pytest.mark.parametrize("tol", [0.5, 1e-2, 1e-4, 1e-9])
def test_padding_margin_matches_scan(T, tol):
    assert padding_margin(T, tol) == geometric_tail_margin(T, tol)


def test_padded_margin_union_bound():
    c = config(padding_tol=1e-3)
    m = padded_margin(c)
    vol = c.box.padded(m).n_vertices
    assert c.q ** m <= 1e-3 / vol


def test_config_validation():
    with pytest.raises(ValueError):
        config(u=0.0)
    with pytest.raises(ValueError):
        config(T=-1.0)
    with pytest.raises(ValueError):
        config(mode="nope")
    with pytest.raises(ValueError):
        config(padding_tol=1.0)
    with pytest.raises(ValueError):
        FriConfig(2, 1.0, 1.0, BOX5)


# ---------------------------------------------------------------- structure


def trajectory_edges(sample, box):
    """Per-fiber sets of in-box edges recomputed from the stored trajectories."""
    out = []
    for start, codes in sample.trajectories:
        verts = Trajectory(start, codes).vertices()
        edges = set()
        for a, b in zip(verts[:-1], verts[1:]):
            a, b = tuple(int(x) for x in a), tuple(int(x) for x in b)
            if box.contains(a) and box.contains(b):
                edges.add(canonical_edge(a, b))
        out.append(edges)
    return out


@pytest.mark.parametrize("mode", ["exact", "padded"])
def test_trajectories_account_for_every_edge(mode):
    c = config(mode=mode, keep_multiplicity=True, keep_trajectories=True)
    for i in range(5):
        s = sample_fri(c, stream(i))
        s.edges.check()
        per_fiber = trajectory_edges(s, c.box)
        counts = Counter(e for edges in per_fiber for e in edges)
        assert set(counts) == set(s.edges.edges())
        for e, n in counts.items():
            assert s.edges.multiplicity[c.box.edge_index(e)] == n
        assert len(s.trajectories) == s.fiber_count


def test_fiber_count_is_sum_of_starts():
    s = sample_fri_box_exact(config(), stream(1))
    assert s.fiber_count == s.starts.sum()
    assert sum(s.per_vertex_starts().values()) == s.fiber_count
    p = sample_fri_box_padded(config(mode="padded"), stream(1))
    assert p.fiber_count == p.starts.sum() + p.outside_fibers


def test_exact_fibers_start_in_box():
    c = config(keep_trajectories=True)
    s = sample_fri(c, stream(2))
    assert all(c.box.contains(start) for start, _ in s.trajectories)
    assert 0 < s.accepted <= s.proposals


def test_tiny_u_gives_empty_sample():
    for mode in ("exact", "padded"):
        s = sample_fri(config(u=1e-9, mode=mode), stream(3))
        assert len(s.edges) == 0 and s.fiber_count == 0


def test_sample_is_reproducible():
    a = sample_fri(config(), stream(4))
    b = sample_fri(config(), stream(4))
    assert np.array_equal(a.edges.occupancy, b.edges.occupancy)
    c = sample_fri(config(), stream(5))
    assert not np.array_equal(a.edges.occupancy, c.edges.occupancy)


def test_padded_resource_guard():
    big = config(u=50.0, box=Box.cube(3, 400), T=50.0, mode="padded", padding_tol=1e-9)
    with pytest.raises(ResourceError):
        sample_fri(big, stream())


# ---------------------------------------------------------------- laws


def test_padded_starts_are_poisson():
    n = 10_000
    c = config(mode="padded", master_seed=3)
    st = batch_statistics(c, n)
    N = n * c.box.n_vertices
    mean = st.start_sum.sum() / N
    var = st.start_sq.sum() / N - mean ** 2
    assert abs(mean - 1.0) < 3 * math.sqrt(1.0 / N)
    # Var(sample variance) = (mu4 - sigma^4)/N = 3/N for Poisson(1)
    assert abs(var / mean - 1.0) < 4 * (math.sqrt(3.0 / N) + math.sqrt(1.0 / N))


def test_interior_rate_is_du_at_T1():
    n = 4000
    c = config(u=0.7, T=1.0, box=Box.cube(3, 8), master_seed=5)
    st = batch_statistics(c, n)
    inner = c.box.interior_mask()
    N = n * int(inner.sum())
    mean = st.start_sum[inner].sum() / N
    assert abs(mean - 0.7 * 3) < 3 * math.sqrt(2.1 / N)


def test_boundary_acceptance_rates():
    n = 20_000
    c = config(master_seed=9)
    st = batch_statistics(c, n)
    rate = 2 * c.d * c.u

    def accept(p):
        i = c.box.index(p)
        est = st.start_sum[i] / (n * rate)
        se = math.sqrt(st.start_sum[i]) / (n * rate)
        return est, se

    corner, se_c = accept((0, 0, 0))
    face, se_f = accept((0, 2, 3))
    assert corner - 3 * se_c > 1 / 3
    assert face - 3 * se_f >= 1 / 3
    assert corner > face
    walk = estimate_escape_probability(R.RngStream(9, (R.WALK, 0, 0)), (0, 0, 0), c.box,
                                       KilledWalkParams(3, 2.0), 200_000)
    assert abs(corner - walk.value) < 4 * math.hypot(se_c, walk.stderr)


def test_samplers_agree_on_five_edges():
    n = 20_000
    edges = [canonical_edge((2, 2, 2), (3, 2, 2)), canonical_edge((2, 2, 2), (2, 3, 2)),
             canonical_edge((0, 0, 0), (1, 0, 0)), canonical_edge((5, 5, 4), (5, 5, 5)),
             canonical_edge((0, 3, 5), (1, 3, 5))]
    idx = [BOX5.edge_index(e) for e in edges]
    a = batch_statistics(config(master_seed=21), n).occupied[idx] / n
    b = batch_statistics(config(mode="padded", master_seed=22), n).occupied[idx] / n
    se = np.sqrt(a * (1 - a) / n + b * (1 - b) / n)
    assert np.all(np.abs(a - b) < 3 * se)


# ---------------------------------------------------------------- replication


def occupancy(sample):
    return sample.edges.occupancy.copy()


def test_single_replicate_equals_direct_call():
    c = config(master_seed=13)
    [rep] = run_replicates(c, 1, occupancy)
    direct = sample_fri(c, R.RngStream(13, (R.FRI, 0, 0)).state(0))
    assert np.array_equal(rep, direct.edges.occupancy)


def fingerprint(sample):
    return sample.fiber_count, len(sample.edges), int(sample.edges.occupancy.sum())


@pytest.mark.parametrize("mode", ["exact", "padded"])
def test_workers_do_not_change_results(mode):
    c = config(mode=mode, master_seed=17)
    one = run_replicates(c, 40, fingerprint, workers=1, chunk=7)
    two = run_replicates(c, 40, fingerprint, workers=2, chunk=3)
    assert one == two


def test_batch_statistics_match_replicates():
    c = config(master_seed=19)
    occ = run_replicates(c, 30, occupancy)
    st = batch_statistics(c, 30, chunk=7, workers=2)
    assert np.array_equal(st.occupied, np.sum(occ, axis=0))


def largest_size(sample):
    from frilab.clusters import cluster_report
    rep = cluster_report(sample.edges)
    return 0 if rep.largest is None else rep.largest.size_vertices


def test_largest_cluster_is_macroscopic_at_2_2():
    box = Box.cube(3, 50)
    sub = run_replicates(FriConfig(3, 1 / 6, 1.4, box, master_seed=1), 100, largest_size,
                         key=(R.FRI, 0, 0))
    sup = run_replicates(FriConfig(3, 1 / 6, 2.2, box, master_seed=1), 100, largest_size,
                         key=(R.FRI, 0, 1))
    assert np.mean(sup) >= 10 * np.mean(sub)
