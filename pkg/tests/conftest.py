"""Shared fixtures: topologies, program sources and instance builders."""

import copy
from pathlib import Path

import pytest

from codeflow.cft import parse_module
from codeflow.engine import HostEnv, Placement, instantiate
from codeflow.engine.memory import PAGES_PER_WASM_PAGE
from codeflow.topology import load_topology

REPO_ROOT = Path(__file__).resolve().parent.parent
REFERENCE_TOPOLOGY = REPO_ROOT / "topologies" / "paper-shape.json"

MIB = 1 << 20

SMALL_TOPOLOGY = {
    "devices": [
        {"id": "cpu0", "class": "cpu", "compute_ns_per_instr": 1.0, "jit_ns_per_instr": 10.0},
    ],
    "regions": [
        {"id": "fast", "kind": "dram_local", "read_latency_ns": 100.0, "write_latency_ns": 100.0,
         "bandwidth_gbps": 40.0, "capacity_bytes": MIB},
        {"id": "slow", "kind": "cxl_remote", "read_latency_ns": 400.0, "write_latency_ns": 400.0,
         "bandwidth_gbps": 40.0, "capacity_bytes": MIB},
    ],
}


def module_source(body: str, extra: str = "", params: str = "(param $arg i32)", locals_: str = "") -> str:
    """A one-page module whose main runs body."""
    return f"""
    (module
      (memory shared 1 1)
      {extra}
      (func $main (export "main") {params} (result i32) {locals_}
        {body}
      )
    )
    """


@pytest.fixture
def repo_root() -> Path:
    return REPO_ROOT


@pytest.fixture
def reference_topology_path() -> Path:
    return REFERENCE_TOPOLOGY


@pytest.fixture
def reference_topology():
    return load_topology(REFERENCE_TOPOLOGY)


@pytest.fixture
def small_topology_doc() -> dict:
    """One cpu, a fast and a slow region with equal bandwidth."""
    return copy.deepcopy(SMALL_TOPOLOGY)


@pytest.fixture
def small_topology(small_topology_doc):
    return load_topology(small_topology_doc)


@pytest.fixture
def source():
    return module_source


@pytest.fixture
def make_instance(small_topology):
    """Parse source and instantiate it with every page in one region."""
    def build(src: str, topology=None, region: str = "", env: HostEnv = None, devices=None,
              log_accesses: bool = False):
        t = topology or small_topology
        m = parse_module(src)
        pages = m.memory.min_pages * PAGES_PER_WASM_PAGE
        placement = Placement.uniform(pages, region or t.regions[0].id)
        return instantiate(m, t, placement, env, devices=devices, log_accesses=log_accesses)
    return build
