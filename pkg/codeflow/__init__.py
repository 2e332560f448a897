"""codeflow - Heterogeneous Thread Runtime over a CXL Memory Model.

Laid out by concern:
- cft/ = Program text format (parse, print, validate)
- analysis/ = Static thread profiling and device detection
- topology/ = Devices, memory regions, access costs
- engine/ = Interpreter with shared linear memory and host calls
- runtime/ = Scheduling, compile cost, migration, run reports
- hostbench/ = Host memory microbenchmarks
"""

__version__ = "1.0.0"
