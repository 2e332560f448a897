"""Call graph, capability profiles and affinity rules."""

import itertools
import random

import pytest

from codeflow.analysis import (
    CapabilityProfile,
    analyze_module,
    build_call_graph,
    closure,
    detect_affinity,
    entry_functions,
    profile_function,
)
from codeflow.cft import AffinityHint, parse_module
from codeflow.enums import DeviceClass
from codeflow.runtime import load_program

FD_READ = '(import "wasi" "fd_read" (func $fd_read (param i32 i32 i32 i32) (result i32)))'


class TestCallGraph:
    def test_mutual_recursion_is_a_cycle(self, source):
        m = parse_module(source("(call $a (local.get $arg))", extra="""
            (func $a (param i32) (result i32) (call $b (local.get 0)))
            (func $b (param i32) (result i32) (call $a (local.get 0)))"""))
        g = build_call_graph(m)
        assert g.has_edge(0, 1) and g.has_edge(1, 0)
        assert closure(g, 2) == {0, 1, 2}

    def test_no_calls(self, source):
        g = build_call_graph(parse_module(source("i32.const 0")))
        assert g.number_of_edges() == 0
        assert list(g.nodes) == [0]

    def test_import_is_a_leaf(self, source):
        m = parse_module(source("(call $fd_read (i32.const 3) (i32.const 0) (i32.const 1) (i32.const 8))",
                                extra=FD_READ))
        g = build_call_graph(m)
        assert g.has_edge(1, 0)
        assert g.nodes[0] == {"host": True, "namespace": "wasi", "name": "fd_read"}
        assert g.out_degree(0) == 0


class TestProfile:
    def test_straight_line_counts(self, source):
        m = parse_module(source("i32.const 1 i32.const 2 i32.add"))
        p = profile_function(m, 0)
        assert (p.arith_ops, p.mem_ops, p.instr_count) == (1, 0, 3)

    def test_closure_counted_once(self, source):
        m = parse_module(source("(drop (call $g (i32.const 0))) (call $g (i32.const 1))", extra=FD_READ + """
            (func $g (param i32) (result i32)
              (call $fd_read (i32.const 3) (local.get 0) (i32.const 1) (i32.const 8)))"""))
        p = profile_function(m, m.export("main"))
        assert p.file_ops == 1
        assert p.net_ops == 0

    def test_nested_loops(self, source):
        m = parse_module(source("""
            loop
              loop
                (drop (i32.load (i32.const 0)))
              end
            end
            i32.const 0"""))
        p = profile_function(m, 0)
        assert p.max_loop_depth == 2
        assert p.mem_ops == 1

    def test_markers_not_counted(self, source):
        m = parse_module(source("block nop end i32.const 0"))
        assert profile_function(m, 0).instr_count == 3

    def test_atomics_are_their_own_category(self):
        m = load_program("atomic_counter")
        worker = m.threads[0]
        p = profile_function(m, worker)
        assert p.atomic_ops == 1
        assert p.mem_ops == 0


class TestProfileClosureProperty:
    """profile_function against a brute-force oracle on random modules."""

    IMPORTS = FD_READ + '(import "wasi" "sock_send" (func $send (param i32 i32) (result i32)))'
    # gadget -> (text, instr_count, arith, mem, atomic, file, net)
    GADGETS = {
        "arith": ("(drop (i32.add (i32.const 1) (i32.const 2)))", 4, 1, 0, 0, 0, 0),
        "load": ("(drop (i32.load (i32.const 0)))", 3, 0, 1, 0, 0, 0),
        "store": ("(i32.store (i32.const 0) (i32.const 1))", 3, 0, 1, 0, 0, 0),
        "atomic": ("(drop (i32.atomic.rmw.add (i32.const 0) (i32.const 1)))", 4, 0, 0, 1, 0, 0),
        "file": ("(drop (call $fd_read (i32.const 3) (i32.const 0) (i32.const 1) (i32.const 8)))", 6, 0, 0, 0, 1, 0),
        "net": ("(drop (call $send (i32.const 0) (i32.const 1)))", 4, 0, 0, 0, 0, 1),
    }
    FIELDS = ("instr_count", "arith_ops", "mem_ops", "atomic_ops", "file_ops", "net_ops")

    def body(self, rng, n_funcs, counts, callees, depth):
        """Random statements; returns (text, deepest loop nesting)."""
        parts, deepest = [], depth
        for _ in range(rng.randint(0, 4)):
            kind = rng.randrange(10)
            if kind < 6:
                text, *numbers = self.GADGETS[rng.choice(list(self.GADGETS))]
                for name, value in zip(self.FIELDS, numbers):
                    counts[name] += value
                parts.append(text)
            elif kind < 8:
                target = rng.randrange(n_funcs)
                callees.add(target)
                counts["instr_count"] += 3
                parts.append(f"(drop (call $f{target} (i32.const 0)))")
            elif depth < 3:
                counts["instr_count"] += 1
                inner, inner_depth = self.body(rng, n_funcs, counts, callees, depth + 1)
                deepest = max(deepest, inner_depth)
                parts.append(f"loop {inner} end")
        return " ".join(parts), deepest

    def random_module(self, rng):
        n_funcs = rng.randint(1, 8)
        funcs, own, calls = [], [], []
        for k in range(n_funcs):
            counts = dict.fromkeys(self.FIELDS, 0)
            callees = set()
            text, depth = self.body(rng, n_funcs, counts, callees, 0)
            counts["instr_count"] += 1
            export = '(export "main") ' if k == 0 else ""
            funcs.append(f"(func $f{k} {export}(param i32) (result i32) {text} i32.const 0)")
            own.append((counts, depth))
            calls.append(callees)
        src = f"(module (memory shared 1 1) {self.IMPORTS} {' '.join(funcs)})"
        return parse_module(src), own, calls

    @staticmethod
    def reachable(calls, start):
        seen, todo = {start}, [start]
        while todo:
            for nxt in calls[todo.pop()]:
                if nxt not in seen:
                    seen.add(nxt)
                    todo.append(nxt)
        return seen

    @pytest.mark.parametrize("seed", range(100))
    def test_matches_oracle(self, seed):
        m, own, calls = self.random_module(random.Random(seed))
        g = build_call_graph(m)
        for k in range(len(own)):
            reach = self.reachable(calls, k)
            expected = {name: sum(own[j][0][name] for j in reach) for name in self.FIELDS}
            expected["max_loop_depth"] = max(own[j][1] for j in reach)
            assert profile_function(m, m.num_imports + k, g) == CapabilityProfile(**expected)


class TestAnnotationDominance:
    @pytest.mark.parametrize("seed", range(50))
    def test_hint_fixes_the_decision(self, seed):
        rng = random.Random(seed)
        for _ in range(20):
            p = CapabilityProfile(
                file_ops=rng.randint(0, 5), net_ops=rng.randint(0, 5), atomic_ops=rng.randint(0, 5),
                mem_ops=rng.randint(0, 20), arith_ops=rng.randint(0, 50), max_loop_depth=rng.randint(0, 3),
                instr_count=rng.randint(0, 200),
            )
            hint = AffinityHint(rng.choice(list(DeviceClass)))
            decision = detect_affinity(p, hint, r_threshold=rng.uniform(0.5, 8.0))
            assert decision.device_class == hint.device_class
            assert (decision.source, decision.rationale) == ("annotation", "ANNOTATION")


class TestAffinity:
    @pytest.mark.parametrize("profile, hint, expected, rationale", [
        (CapabilityProfile(file_ops=3), None, DeviceClass.STORAGE_PROCESSOR, "FILE_IO"),
        (CapabilityProfile(net_ops=2), None, DeviceClass.NETWORK_PROCESSOR, "NET_IO"),
        (CapabilityProfile(net_ops=5), AffinityHint(DeviceClass.CPU), DeviceClass.CPU, "ANNOTATION"),
        (CapabilityProfile(max_loop_depth=1, arith_ops=8, mem_ops=2), None,
         DeviceClass.PARALLEL_ACCELERATOR, "COMPUTE_INTENSITY"),
        (CapabilityProfile(file_ops=2, net_ops=2), None, DeviceClass.STORAGE_PROCESSOR, "FILE_IO"),
        (CapabilityProfile(max_loop_depth=0, arith_ops=8, mem_ops=2), None, DeviceClass.CPU, "DEFAULT_CPU"),
        (CapabilityProfile(max_loop_depth=1, arith_ops=8, mem_ops=0), None, DeviceClass.CPU, "DEFAULT_CPU"),
        (CapabilityProfile(max_loop_depth=1, arith_ops=3, mem_ops=2), None, DeviceClass.CPU, "DEFAULT_CPU"),
    ])
    def test_rules(self, profile, hint, expected, rationale):
        decision = detect_affinity(profile, hint, r_threshold=2.0)
        assert decision.device_class == expected
        assert decision.rationale == rationale
        assert decision.source == ("annotation" if hint else "rule")

    def test_threshold_is_configurable(self):
        p = CapabilityProfile(max_loop_depth=1, arith_ops=3, mem_ops=2)
        assert detect_affinity(p, r_threshold=1.5).device_class == DeviceClass.PARALLEL_ACCELERATOR

    def test_matches_rule_table_exhaustively(self):
        # Small profiles against a direct transcription of the rule order
        for f, n, loops, arith, mem in itertools.product(range(3), range(3), range(2), range(5), range(3)):
            p = CapabilityProfile(file_ops=f, net_ops=n, max_loop_depth=loops, arith_ops=arith, mem_ops=mem)
            if f > 0 and f >= n:
                want = DeviceClass.STORAGE_PROCESSOR
            elif n > 0:
                want = DeviceClass.NETWORK_PROCESSOR
            elif loops >= 1 and mem > 0 and arith >= 2 * mem:
                want = DeviceClass.PARALLEL_ACCELERATOR
            else:
                want = DeviceClass.CPU
            assert detect_affinity(p, r_threshold=2.0).device_class == want, p


class TestAnalyzeModule:
    @pytest.mark.parametrize("name, expected", [
        ("file_reader", DeviceClass.STORAGE_PROCESSOR),
        ("socket_echo", DeviceClass.NETWORK_PROCESSOR),
        ("compute_loop", DeviceClass.PARALLEL_ACCELERATOR),
        ("annotated_override", DeviceClass.CPU),
        ("plain", DeviceClass.CPU),
    ])
    def test_shipped_programs(self, name, expected):
        (main,) = analyze_module(load_program(name), 2.0)
        assert main.decision.device_class == expected

    def test_thread_table_entries(self):
        results = analyze_module(load_program("mixed_io"), 2.0)
        assert [(a.name, a.decision.device_class) for a in results] == [
            ("main", DeviceClass.CPU),
            ("reader", DeviceClass.STORAGE_PROCESSOR),
            ("echo", DeviceClass.NETWORK_PROCESSOR),
        ]

    def test_entries_deduplicated(self, source):
        m = parse_module(source("i32.const 0", extra="(threads $main $main)"))
        assert entry_functions(m) == [0]

    def test_to_dict(self):
        (main,) = analyze_module(load_program("annotated_override"), 2.0)
        d = main.to_dict()
        assert d["decision"] == "cpu"
        assert d["source"] == "annotation"
        assert d["profile"]["net_ops"] == 5
