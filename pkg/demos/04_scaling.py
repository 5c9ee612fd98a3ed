"""
How bound time grows with network size
======================================

Bound random networks of increasing size, with one contingency per bus.
The contingency block is dense, so cost is proportional to
contingencies times lines, but at these sizes fixed overhead still shows.
"""

import time

import numpy as np

import ibpscopf as ib
from ibpscopf.cli import bench_case

sizes = [50, 100, 200, 400, 800]
times = []
for n in sizes:
    graph = ib.build_pipeline(bench_case(n, n, seed=0))
    ib.compute_bounds(graph)  # warm-up
    t = []
    for _ in range(5):
        t0 = time.perf_counter()
        ib.compute_bounds(graph)
        t.append(time.perf_counter() - t0)
    times.append(min(t))
    print(f"{n:5d} buses  {graph.n_contingencies:5d} ctg  {1e3 * min(t):8.2f} ms")

###############################################################################
# Fitted exponent of time against bus count.

slope = np.polyfit(np.log(sizes), np.log(times), 1)[0]
print("empirical exponent %.2f" % slope)
