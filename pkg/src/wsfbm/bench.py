"""Benchmark harness comparing the four Gram-assembly methods.

Times Gram-matrix construction for each requested method over a ladder of
grid sizes (uniform grid on [0, 10], step 10/n), reports median-of-repeats
wall times and pairwise speedup ratios, and cross-checks accuracy through
pairwise maximum coordinate-wise differences.  Timing numbers are reported,
never asserted: they are machine-specific, which is why every report embeds
an environment note.
"""

from __future__ import annotations

import platform
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from . import quadrature as quad
from .kernels import KernelSpec, TimeGrid
from .quadrature import QuadConfig, ToleranceNotReached

__all__ = ["BenchReport", "BenchError", "run_bench", "write_report"]

_DEFAULT_HORIZON = 10.0


class BenchError(ValueError):
    pass


@dataclass
class BenchReport:
    family: str
    a: float
    b: float | None
    sizes: list
    methods: list
    times: dict = field(default_factory=dict)          # (method, n) -> seconds
    speedup_ratios: dict = field(default_factory=dict)  # (m1, m2) -> ratio
    max_coord_diff: dict = field(default_factory=dict)  # (m1, m2) -> max |diff|
    environment: str = ""
    workers: int = 1


def _family_spec(family: str, a: float, b) -> KernelSpec:
    if family == "C1":
        weight = kernels.PowerLawWeight(a)
    elif family == "C2":
        weight = kernels.ExponentialWeight(a)
    elif family == "const":
        weight = kernels.ConstantWeight(a)
    else:
        raise BenchError(f"unknown family {family!r} (C1, C2 or const)")
    if b is None:
        return KernelSpec.log_kernel(weight)
    return KernelSpec(weight, b)


def _gram_entries(spec, grid, method, cfg, workers):
    if workers <= 1 or method == 4:
        return kernels.gram(spec, grid, method, cfg).entries
    # parallel assembly of quadrature methods: farm lower-triangle rows
    tt = grid.interior
    n = tt.size
    mat = np.zeros((n, n))

    def row(i):
        vals = np.empty(i + 1)
        for j in range(i + 1):
            try:
                vals[j] = kernels.kernel_eval_quad(spec, tt[i], tt[j], cfg,
                                                   method)
            except ToleranceNotReached as exc:
                vals[j] = exc.result.value
        return i, vals

    with ThreadPoolExecutor(max_workers=workers) as pool:
        for i, vals in pool.map(row, range(n)):
            mat[i, :i + 1] = vals
    return mat + np.tril(mat, -1).T


def run_bench(family: str, a: float, b, sizes, methods=(1, 2, 3, 4),
              repeats: int = 5, cfg: QuadConfig = quad.DEFAULT_CONFIG,
              horizon: float = _DEFAULT_HORIZON, workers: int = 1
              ) -> BenchReport:
    """Benchmark Gram assembly for one kernel configuration.

    ``sizes`` is the list of grid sizes n (uniform grid, step horizon/n).
    Each (method, n) cell runs one discarded warm-up plus ``repeats`` timed
    builds, keeping the median.  Accuracy rows hold, per method pair, the
    maximum coordinate-wise Gram difference over all sizes.
    """
    sizes = list(sizes)
    methods = list(methods)
    if not sizes:
        raise BenchError("need at least one grid size")
    if any(m not in kernels.METHOD_NAMES for m in methods):
        raise BenchError(f"methods must be a subset of 1..4, got {methods}")
    if repeats < 1:
        raise BenchError("repeats must be >= 1")
    spec = _family_spec(family, a, b)
    if b is None and 4 in methods and not isinstance(
            spec.weight, (kernels.PowerLawWeight, kernels.ExponentialWeight,
                          kernels.ConstantWeight)):
        raise BenchError("method 4 unsupported for this weight")
    report = BenchReport(family=family, a=a, b=b, sizes=sizes,
                         methods=methods, workers=workers,
                         environment=f"{platform.platform()} / python "
                                     f"{sys.version.split()[0]} / numpy "
                                     f"{np.__version__}")
    grams = {}
    for n in sizes:
        grid = TimeGrid.uniform(horizon, n)
        for method in methods:
            _gram_entries(spec, grid, method, cfg, workers)  # warm-up
            stamps = []
            for _ in range(repeats):
                t0 = time.perf_counter()
                entries = _gram_entries(spec, grid, method, cfg, workers)
                stamps.append(time.perf_counter() - t0)
            report.times[(method, n)] = float(np.median(stamps))
            grams[(method, n)] = entries
    for i, m1 in enumerate(methods):
        for m2 in methods[i + 1:]:
            diffs = [float(np.max(np.abs(grams[(m1, n)] - grams[(m2, n)])))
                     for n in sizes]
            report.max_coord_diff[(m1, m2)] = max(diffs)
            tot1 = sum(report.times[(m1, n)] for n in sizes)
            tot2 = sum(report.times[(m2, n)] for n in sizes)
            report.speedup_ratios[(m1, m2)] = tot1 / tot2 if tot2 > 0 else float("inf")
    return report


def write_report(report: BenchReport, times_path, accuracy_path) -> None:
    """Emit the two comma-separated tables of a benchmark report."""
    with open(times_path, "w") as fh:
        fh.write("method,n,seconds\n")
        for (method, n), seconds in sorted(report.times.items()):
            fh.write(f"{method},{n},{seconds:.6e}\n")
        fh.write(f"# environment: {report.environment}\n")
        fh.write(f"# workers: {report.workers}\n")
    with open(accuracy_path, "w") as fh:
        fh.write("pair_a,pair_b,max_coord_diff\n")
        for (m1, m2), diff in sorted(report.max_coord_diff.items()):
            fh.write(f"{m1},{m2},{diff:.6e}\n")
