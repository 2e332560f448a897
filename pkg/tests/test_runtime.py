"""Scheduling, compile costs, round-robin runs and page migration."""

import copy
import json
import random

import pytest

from codeflow.analysis import AffinityDecision, analyze_module
from codeflow.cft import parse_module
from codeflow.config import settings
from codeflow.engine import HostEnv, Placement
from codeflow.engine.memory import AccessStats
from codeflow.enums import DeviceClass
from codeflow.errors import ConfigError, NoSchedulableDevice
from codeflow.runtime import (
    FALLBACK_CPU,
    CompileMode,
    MigrationPolicy,
    Runner,
    compile_cost,
    epoch_migrate,
    find_program,
    list_programs,
    load_program,
    load_run_config,
    make_run_config,
    run,
    schedule,
)
from codeflow.runtime import report as rpt
from codeflow.topology import load_topology

MASK32 = 0xFFFFFFFF

DEADLOCK = """
(module
  (memory shared 1 1)
  (import "codeflow" "spawn" (func $spawn (param i32 i32) (result i32)))
  (import "codeflow" "join" (func $join (param i32) (result i32)))
  (func $waiter (param i32) (result i32) (call $join (i32.const 0)))
  (func $main (export "main") (param i32) (result i32)
    (call $join (call $spawn (i32.const 0) (i32.const 0))))
  (threads $waiter)
)
"""

EXIT_EARLY = """
(module
  (memory shared 1 1)
  (import "codeflow" "spawn" (func $spawn (param i32 i32) (result i32)))
  (import "wasi" "proc_exit" (func $exit (param i32)))
  (func $idle (param i32) (result i32) (local.get 0))
  (func $main (export "main") (param i32) (result i32)
    (drop (call $spawn (i32.const 0) (i32.const 0)))
    (call $exit (i32.const CODE))
    (i32.const 0))
  (threads $idle)
)
"""


def plan_for(m, t, r_threshold=2.0):
    return schedule(m, t, {a.function: a.decision for a in analyze_module(m, r_threshold)})


def fnv1a(data: bytes) -> int:
    h = 2166136261
    for byte in data:
        h = ((h ^ byte) * 16777619) & MASK32
    return h


def compute_loop_checksum() -> int:
    total = 0
    for i in range(100):
        total += (((i * i + i) ^ (i << 3)) * 2654435761) & MASK32
    return total & MASK32


class TestSchedule:
    def test_decided_class_maps_to_device(self, reference_topology):
        plan = plan_for(load_program("file_reader"), reference_topology)
        (entry,) = plan.entries.values()
        assert (entry.device, entry.rationale) == ("csd0", "FILE_IO")

    def test_missing_class_falls_back_to_cpu(self, small_topology):
        plan = plan_for(load_program("compute_loop"), small_topology)
        (entry,) = plan.entries.values()
        assert entry.device == "cpu0"
        assert entry.device_class == DeviceClass.PARALLEL_ACCELERATOR
        assert entry.rationale == FALLBACK_CPU

    def test_smallest_device_id_wins(self, source, small_topology_doc):
        t = load_topology({
            "devices": [
                {"id": "cpu0", "class": "cpu", "compute_ns_per_instr": 1.0},
                {"id": "acc1", "class": "parallel_accelerator", "compute_ns_per_instr": 0.5},
                {"id": "acc0", "class": "parallel_accelerator", "compute_ns_per_instr": 0.5},
            ],
            "regions": small_topology_doc["regions"],
        })
        m = parse_module(source("i32.const 0"))
        decision = AffinityDecision(DeviceClass.PARALLEL_ACCELERATOR, "rule", "COMPUTE_INTENSITY")
        assert schedule(m, t, {0: decision}).device_of(0) == "acc0"

    def test_no_cpu(self, source, small_topology_doc):
        t = load_topology({
            "devices": [{"id": "nic0", "class": "network_processor", "compute_ns_per_instr": 2.0}],
            "regions": small_topology_doc["regions"],
        })
        with pytest.raises(NoSchedulableDevice):
            plan_for(parse_module(source("i32.const 0")), t)

    def test_mixed_io_threads(self, reference_topology):
        m = load_program("mixed_io")
        devices = {m.func_name(idx): dev for idx, dev in plan_for(m, reference_topology).devices().items()}
        assert devices == {"main": "cpu0", "reader": "csd0", "echo": "dpu0"}

    @pytest.mark.parametrize("scale", [0.5, 3.0, 10.0])
    def test_plan_ignores_latencies(self, reference_topology_path, reference_topology, scale):
        doc = json.loads(reference_topology_path.read_text())
        for item in doc["regions"] + doc["access_overrides"]:
            item["read_latency_ns"] *= scale
            item["write_latency_ns"] *= scale
        scaled = load_topology(doc)
        for name in ("mixed_io", "compute_loop", "hot_page", "atomic_counter"):
            m = load_program(name)
            assert plan_for(m, scaled) == plan_for(m, reference_topology)


class TestCompileCost:
    def test_cost_is_instructions_times_rate(self, small_topology, source):
        m = parse_module(source("nop " * 499 + "i32.const 0"))
        sched = compile_cost(m, plan_for(m, small_topology), small_topology, CompileMode.JIT)
        assert sched.costs == {(0, "cpu0"): 5000.0}
        assert sched.charge(0, "cpu0") == 5000.0
        assert sched.charge(0, "cpu0") == 0.0
        assert sched.aot_compile_ns == 0.0

    def test_aot_charges_nothing_on_path(self, small_topology, source):
        m = parse_module(source("nop " * 499 + "i32.const 0"))
        sched = compile_cost(m, plan_for(m, small_topology), small_topology, CompileMode.AOT)
        assert sched.charge(0, "cpu0") == 0.0
        assert sched.aot_compile_ns == 5000.0

    def test_jit_twins_charge_once(self, reference_topology):
        report = run(load_program("jit_twins"), reference_topology, make_run_config(mode="jit"))
        main, first, second = report.threads
        assert (first.compile_ns, second.compile_ns) == (100.0, 0.0)
        assert main.compile_ns == 260.0
        assert report.jit_compile_ns == 360.0
        assert report.aot_compile_ns == 0.0

    def test_aot_and_jit_agree_on_results(self, reference_topology):
        for name in ("jit_twins", "atomic_counter", "compute_loop"):
            m = load_program(name)
            jit = run(m, reference_topology, make_run_config(mode="jit"))
            aot = run(m, reference_topology, make_run_config(mode="aot"))
            assert aot.memory_digest == jit.memory_digest
            assert [t.result for t in aot.threads] == [t.result for t in jit.threads]
            assert all(t.compile_ns == 0.0 for t in aot.threads)
            assert aot.aot_compile_ns == pytest.approx(jit.jit_compile_ns)


class TestRun:
    def test_straight_line_time(self, small_topology, source):
        m = parse_module(source("nop " * 999 + "i32.const 0"))
        report = run(m, small_topology, make_run_config(mode="aot"))
        assert report.exit_status == rpt.OK
        assert report.total_simulated_ns == pytest.approx(1000.0)
        assert report.aot_compile_ns == pytest.approx(10000.0)

    def test_jit_time_includes_compile(self, small_topology, source):
        m = parse_module(source("nop " * 999 + "i32.const 0"))
        report = run(m, small_topology, make_run_config(mode="jit"))
        assert report.threads[0].compile_ns == pytest.approx(10000.0)
        assert report.total_simulated_ns == pytest.approx(11000.0)

    def test_stall_difference_follows_latency(self, small_topology):
        m = load_program("load50")
        fast = run(m, small_topology, make_run_config(initial_placement="fast"))
        slow = run(m, small_topology, make_run_config(initial_placement="slow"))
        assert slow.total_memory_stall_ns - fast.total_memory_stall_ns == pytest.approx(15000.0, rel=1e-9)
        assert slow.total_compute_ns == fast.total_compute_ns

    @pytest.mark.parametrize("name", list_programs())
    def test_conservation(self, reference_topology, name):
        cfg = make_run_config(migration={"epoch_instructions": 1000}, quantum=97)
        runner = Runner(load_program(name), reference_topology, cfg, HostEnv({3: b"conservation"}), log_accesses=True)
        report = runner.run()
        assert report.total_memory_stall_ns == pytest.approx(sum(rec.cost_ns for rec in runner.access_log))
        assert report.total_compute_ns == pytest.approx(sum(s.outcome.compute_ns for s in runner.steps))
        assert report.jit_compile_ns == pytest.approx(sum(s.compile_ns for s in runner.steps))
        for thread in report.threads:
            steps = [s for s in runner.steps if s.tid == thread.tid]
            assert thread.instructions == sum(s.outcome.executed for s in steps)
            assert thread.memory_stall_ns == pytest.approx(sum(s.outcome.memory_stall_ns for s in steps))

    @pytest.mark.parametrize("name", list_programs())
    def test_repeated_runs_are_identical(self, reference_topology, name):
        cfg = make_run_config(migration={"epoch_instructions": 2000})
        env = HostEnv({3: b"the same bytes every time"})
        reports = {run(load_program(name), reference_topology, cfg, env).to_json() for _ in range(5)}
        assert len(reports) == 1

    def test_deadlock(self, small_topology):
        report = run(parse_module(DEADLOCK), small_topology)
        assert report.exit_status == rpt.DEADLOCK
        assert report.exit_code == 1
        assert [t.status for t in report.threads] == ["blocked", "blocked"]

    def test_instruction_limit(self, small_topology, source):
        m = parse_module(source("loop $spin (br $spin) end i32.const 0"))
        report = run(m, small_topology, make_run_config(max_instructions=500, quantum=100))
        assert report.exit_status == rpt.INSTRUCTION_LIMIT
        assert report.exit_code == 1
        assert report.threads[0].instructions == 500

    @pytest.mark.parametrize("code, exit_code", [(0, 0), (3, 1)])
    def test_proc_exit(self, small_topology, code, exit_code):
        report = run(parse_module(EXIT_EARLY.replace("CODE", str(code))), small_topology)
        assert report.exit_status == rpt.EXITED
        assert (report.exit_code, report.guest_exit_code) == (exit_code, code)
        assert [t.status for t in report.threads] == ["finished", "killed"]

    def test_trap(self, small_topology, source):
        report = run(parse_module(source("unreachable")), small_topology)
        assert report.exit_status == rpt.TRAPPED
        assert report.exit_code == 1
        assert (report.trap.tid, report.trap.kind) == (0, "unreachable")

    def test_report_json_key_order(self, small_topology, source):
        report = run(parse_module(source("i32.const 0")), small_topology)
        keys = list(json.loads(report.to_json()))
        assert keys[:5] == ["mode", "quantum", "seed", "exit_status", "exit_code"]
        assert keys[-2:] == ["memory_digest", "outputs"]


class TestShippedPrograms:
    @pytest.mark.parametrize("name, files, expected", [
        ("plain", {}, 42),
        ("atomic_counter", {}, 4000),
        ("jit_twins", {}, 92),
        ("socket_echo", {}, 4),
        ("mixed_io", {3: b"abcdef"}, 10),
        ("file_reader", {3: bytes(range(200))}, 200),
        ("chase", {}, 0),
    ])
    def test_main_result(self, reference_topology, name, files, expected):
        report = run(load_program(name), reference_topology, env=HostEnv(files))
        assert report.exit_status == rpt.OK
        assert report.threads[0].result == expected

    def test_file_reader_copies_to_stdout(self, reference_topology):
        report = run(load_program("file_reader"), reference_topology, env=HostEnv({3: b"hello, world\n" * 10}))
        assert report.outputs == {"1": "hello, world\n" * 10}

    def test_compute_loop_checksum(self, reference_topology):
        report = run(load_program("compute_loop"), reference_topology)
        assert report.threads[0].device == "gpu0"
        assert report.threads[0].result == compute_loop_checksum()

    def test_pipeline(self, repo_root, reference_topology):
        rng = random.Random(7)
        data = bytes(rng.randrange(256) for _ in range(1000))
        m = load_program(str(repo_root / "programs" / "pipeline.cft"))
        report = run(m, reference_topology, env=HostEnv({3: data}))
        assert report.exit_status == rpt.OK
        main, ingest, transform, publish = report.threads
        assert (ingest.device, transform.device, publish.device) == ("csd0", "gpu0", "dpu0")
        assert ingest.result == 1000
        assert transform.result == fnv1a(data)
        assert main.result == 4


class TestMigration:
    POLICY = MigrationPolicy(epoch_instructions=100, hot_threshold=64, migration_fixed_overhead_ns=1000.0)

    def _stats(self, counts):
        stats = AccessStats()
        for (page, device), n in counts.items():
            for _ in range(n):
                stats.record(page, device)
        return stats

    def test_hot_page_moves_to_fastest_region(self, small_topology):
        stats = self._stats({(3, "cpu0"): 100})
        new, records = epoch_migrate(stats, Placement.uniform(16, "slow"), small_topology, self.POLICY, epoch=2)
        assert new.region_of(3) == "fast"
        assert new.region_of(4) == "slow"
        (rec,) = records
        assert (rec.epoch, rec.page, rec.device, rec.from_region, rec.to_region) == (2, 3, "cpu0", "slow", "fast")
        assert rec.cost_ns == pytest.approx(4096 / 40 + 1000)
        assert stats.total() == 0

    def test_cold_page_stays(self, small_topology):
        stats = self._stats({(3, "cpu0"): 10})
        new, records = epoch_migrate(stats, Placement.uniform(16, "slow"), small_topology, self.POLICY)
        assert records == []
        assert new == Placement.uniform(16, "slow")

    def test_page_already_on_best_region(self, small_topology):
        stats = self._stats({(0, "cpu0"): 500})
        _, records = epoch_migrate(stats, Placement.uniform(16, "fast"), small_topology, self.POLICY)
        assert records == []

    def test_input_placement_untouched(self, small_topology):
        placement = Placement.uniform(16, "slow")
        epoch_migrate(self._stats({(0, "cpu0"): 100}), placement, small_topology, self.POLICY)
        assert placement == Placement.uniform(16, "slow")

    def test_full_region_takes_hottest_page_first(self, small_topology):
        # fast holds 256 pages; one slot is free
        placement = Placement(["fast"] * 255 + ["slow", "slow"])
        stats = self._stats({(255, "cpu0"): 70, (256, "cpu0"): 90})
        new, records = epoch_migrate(stats, placement, small_topology, self.POLICY)
        assert [rec.page for rec in records] == [256]
        assert new.region_of(255) == "slow"
        new.check_capacity(small_topology)

    def test_dominant_device_decides(self, reference_topology):
        stats = self._stats({(2, "gpu0"): 80, (2, "cpu0"): 30})
        new, (rec,) = epoch_migrate(stats, Placement.uniform(16, "cxl1"), reference_topology, self.POLICY)
        assert (rec.device, rec.to_region) == ("gpu0", "gpu0-hbm")
        assert new.region_of(2) == "gpu0-hbm"

    def test_hot_page_program(self, reference_topology):
        m = load_program("hot_page")
        without = run(m, reference_topology)
        with_migration = run(m, reference_topology, make_run_config(migration={"epoch_instructions": 1000}))
        assert without.migrations == []
        assert with_migration.total_memory_stall_ns < without.total_memory_stall_ns
        first = with_migration.migrations[0]
        assert (first.page, first.device, first.from_region, first.to_region) == (2, "gpu0", "dram0", "gpu0-hbm")
        assert first.cost_ns == pytest.approx(1010.24)
        assert with_migration.total_migration_ns == pytest.approx(sum(r.cost_ns for r in with_migration.migrations))
        assert with_migration.epochs >= 1
        assert [t.result for t in with_migration.threads] == [t.result for t in without.threads]


class TestRunConfig:
    def test_defaults_follow_settings(self):
        cfg = make_run_config()
        assert cfg.mode == CompileMode.JIT
        assert cfg.quantum == settings.quantum
        assert cfg.migration is None

    def test_yaml_file(self, tmp_path):
        path = tmp_path / "run.yaml"
        path.write_text("mode: aot\nquantum: 50\nmigration:\n  hot_threshold: 8\n")
        cfg = load_run_config(path)
        assert (cfg.mode, cfg.quantum) == (CompileMode.AOT, 50)
        assert cfg.migration.hot_threshold == 8
        assert cfg.migration.epoch_instructions == settings.epoch_instructions

    def test_overrides_win(self, tmp_path):
        path = tmp_path / "run.yaml"
        path.write_text("quantum: 50\n")
        assert load_run_config(path, quantum=7, mode=None).quantum == 7

    @pytest.mark.parametrize("text", ["quantum: 0\n", "colour: blue\n", "quantum: [1, 2", "- 1\n",
                                      "migration:\n  hot_threshold: -1\n"])
    def test_bad_files(self, tmp_path, text):
        path = tmp_path / "run.yaml"
        path.write_text(text)
        with pytest.raises(ConfigError):
            load_run_config(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_run_config(tmp_path / "absent.yaml")

    def test_unknown_initial_region(self, small_topology):
        with pytest.raises(ConfigError):
            Runner(load_program("plain"), small_topology, make_run_config(initial_placement="nvm0"))

    def test_region_too_small(self, small_topology_doc):
        doc = copy.deepcopy(small_topology_doc)
        doc["regions"][0]["capacity_bytes"] = 8 * 4096
        with pytest.raises(ConfigError):
            Runner(load_program("plain"), load_topology(doc))


class TestPrograms:
    def test_builtin_corpus(self):
        names = list_programs()
        for name in ("file_reader", "socket_echo", "compute_loop", "annotated_override", "mixed_io", "plain",
                     "atomic_counter", "load50", "jit_twins", "hot_page", "chase"):
            assert name in names

    def test_deployment_programs_shadow_builtins(self, tmp_path, monkeypatch):
        (tmp_path / "plain.cft").write_text(find_program("plain").read_text())
        (tmp_path / "extra.cft").write_text(find_program("plain").read_text())
        monkeypatch.setattr(settings, "programs_dir", str(tmp_path))
        assert find_program("plain") == tmp_path / "plain.cft"
        assert list_programs()[:2] == ["extra", "plain"]
        assert list_programs().count("plain") == 1

    @pytest.mark.parametrize("name", ["no_such_program", "missing/path.cft"])
    def test_not_found(self, name):
        with pytest.raises(ConfigError):
            find_program(name)
