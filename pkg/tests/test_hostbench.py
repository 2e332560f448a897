"""Pointer-chase chains, sweeps, bandwidth and the in-runtime chase."""

import functools
import io
import json

import pytest

from codeflow.errors import BadGeometry, BenchPreconditionError
from codeflow.hostbench import (
    CSV_COLUMNS,
    SplitMix64,
    build_chain,
    check_geometry,
    measure_bandwidth,
    measure_chase,
    prng_next,
    sattolo,
    size_ladder,
    sweep,
    walk,
    write_csv,
    write_json,
)
from codeflow.hostbench.prng import GOLDEN_GAMMA, MASK64
from codeflow.hostbench.wasm import run_wasm_chase

KIB = 1 << 10
MIB = 1 << 20


def cycle_length(buf) -> int:
    """Hops from the start slot back to itself, or -1 if it never returns."""
    values = buf.slots.tolist()
    idx = values[0]
    for hops in range(1, buf.n + 1):
        if idx == 0:
            return hops
        idx = values[idx]
    return -1


class TestPrng:
    def test_reference_outputs(self):
        rng = SplitMix64(0)
        assert [rng.next() for _ in range(3)] == [0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F]

    def test_step_function_matches_generator(self):
        rng = SplitMix64(99)
        state = 99
        for _ in range(10):
            value, state = prng_next(state)
            assert rng.next() == value


class TestChain:
    def test_two_slots(self):
        assert sattolo(2, 0) == [1, 0]

    @staticmethod
    def assert_single_cycle(n, seed):
        order = sattolo(n, seed)
        assert sorted(order) == list(range(n))
        seen = {0}
        k = order[0]
        while k != 0:
            seen.add(k)
            k = order[k]
        assert len(seen) == n, (n, seed)

    @pytest.mark.parametrize("n", range(2, 257))
    def test_single_cycle_every_small_n(self, n):
        for seed in range(100):
            self.assert_single_cycle(n, seed)

    @pytest.mark.parametrize("n", [511, 1000, 2048, 3001, 4095, 4096])
    def test_single_cycle_large_n(self, n):
        for seed in range(100):
            self.assert_single_cycle(n, seed)

    @pytest.mark.parametrize("size, stride", [(4 * KIB, 8), (4 * KIB, 64), (64 * KIB, 64), (48 * KIB, 4 * KIB)])
    def test_buffer_is_one_cycle_over_strided_slots(self, size, stride):
        buf = build_chain(size, stride, seed=11)
        assert buf.n == size // stride
        assert cycle_length(buf) == buf.n
        participating = buf.slots[::buf.step].tolist()
        assert all(v % buf.step == 0 for v in participating)
        if buf.step > 1:
            assert not buf.slots[1::buf.step].any()

    def test_walk_returns_to_start(self):
        buf = build_chain(16 * KIB, 64, seed=5)
        assert walk(buf, buf.n) == 0
        assert walk(buf, 2 * buf.n + 3) == walk(buf, 3)

    def test_seed_determinism(self):
        a = build_chain(32 * KIB, 64, seed=42)
        b = build_chain(32 * KIB, 64, seed=42)
        c = build_chain(32 * KIB, 64, seed=43)
        assert (a.slots == b.slots).all()
        assert not (a.slots == c.slots).all()

    @pytest.mark.parametrize("size, stride", [
        (4 * KIB, 4),
        (4 * KIB, 12),
        (4 * KIB + 8, 64),
        (64, 64),
        (0, 64),
    ])
    def test_bad_geometry(self, size, stride):
        with pytest.raises(BadGeometry):
            check_geometry(size, stride)
        with pytest.raises(BadGeometry):
            build_chain(size, stride)


class TestMeasure:
    def test_loads_must_cover_the_chain(self):
        buf = build_chain(4 * KIB, 64)
        with pytest.raises(BenchPreconditionError):
            measure_chase(buf, loads=buf.n - 1, repeats=1)
        with pytest.raises(BenchPreconditionError):
            measure_chase(buf, loads=buf.n, repeats=0)

    def test_row(self):
        buf = build_chain(4 * KIB, 64, seed=9)
        row = measure_chase(buf, loads=1000, repeats=2)
        assert (row.size_bytes, row.stride_bytes, row.loads, row.repeats, row.seed) == (4 * KIB, 64, 1000, 2, 9)
        assert row.ns_per_load > 0
        assert row.stddev_ns >= 0
        # warmup traversal, then every timed load
        assert row.final_index == walk(buf, buf.n + 2 * 1000)

    @pytest.mark.parametrize("lo, hi, factor, expected", [
        (16 * KIB, 128 * KIB, 2, 4),
        (4 * KIB, 256 * MIB, 2, 17),
        (1000, 2000, 1.5, 2),
        (4096, 4096, 2, 1),
    ])
    def test_size_ladder(self, lo, hi, factor, expected):
        sizes = size_ladder(lo, hi, factor)
        assert len(sizes) == expected
        assert sizes[0] == lo and sizes[-1] <= hi

    @pytest.mark.parametrize("lo, hi, factor", [(0, 10, 2), (20, 10, 2), (10, 20, 1)])
    def test_bad_ladder(self, lo, hi, factor):
        with pytest.raises(BenchPreconditionError):
            size_ladder(lo, hi, factor)

    def test_result_files(self):
        rows = sweep(4 * KIB, 16 * KIB, 2, 64, seed=1, loads=256, repeats=1)
        assert [r.size_bytes for r in rows] == [4 * KIB, 8 * KIB, 16 * KIB]

        out = io.StringIO()
        write_csv(rows, out)
        lines = out.getvalue().splitlines()
        assert lines[0] == ",".join(CSV_COLUMNS)
        assert len(lines) == 4
        assert lines[1].startswith("4096,64,256,1,")

        out = io.StringIO()
        write_json(rows, out)
        doc = json.loads(out.getvalue())
        assert doc[0]["seed"] == 1
        assert set(doc[0]) == set(CSV_COLUMNS) | {"seed", "final_index"}


class TestBandwidth:
    def test_checksum(self):
        result = measure_bandwidth(MIB, repeats=1)
        words = MIB // 8
        expected = functools.reduce(lambda acc, i: acc ^ ((i * GOLDEN_GAMMA) & MASK64), range(words), 0)
        assert result.checksum == expected
        assert result.gbps > 0
        assert result.size_bytes == MIB

    @pytest.mark.parametrize("size, repeats", [(512 * KIB, 1), (MIB + 4, 1), (MIB, 0)])
    def test_preconditions(self, size, repeats):
        with pytest.raises(BenchPreconditionError):
            measure_bandwidth(size, repeats)


class TestWasmChase:
    def test_matches_host_walk(self, small_topology):
        result = run_wasm_chase(small_topology, 4 * KIB, 64, 1000, seed=3, region="slow")
        assert result.final_index == walk(build_chain(4 * KIB, 64, 3), 1000)
        assert (result.region, result.device) == ("slow", "cpu0")
        # one load of the count, then one per hop
        assert result.memory_stall_ns_per_load == pytest.approx(1001 * 400.1 / 1000)

    def test_region_changes_modeled_cost(self, small_topology):
        fast = run_wasm_chase(small_topology, 4 * KIB, 64, 500, region="fast")
        slow = run_wasm_chase(small_topology, 4 * KIB, 64, 500, region="slow")
        assert fast.final_index == slow.final_index
        assert slow.modeled_ns_per_load - fast.modeled_ns_per_load == pytest.approx(501 * 300 / 500)

    def test_chain_must_fit_memory(self, small_topology):
        with pytest.raises(BenchPreconditionError):
            run_wasm_chase(small_topology, 2 * MIB, 64, 100)

    def test_needs_loads(self, small_topology):
        with pytest.raises(BenchPreconditionError):
            run_wasm_chase(small_topology, 4 * KIB, 64, 0)


@pytest.mark.hostbench
@pytest.mark.slow
def test_latency_grows_past_the_caches():
    small = measure_chase(build_chain(16 * KIB, 64, seed=1), loads=1 << 20, repeats=5)
    big_chain = build_chain(256 * MIB, 64, seed=1)
    big = measure_chase(big_chain, loads=big_chain.n, repeats=5)
    assert big.ns_per_load >= 2 * small.ns_per_load
