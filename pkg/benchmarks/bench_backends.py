"""Time the compiled kernels against the numpy fallback.

Kernel calls are timed in-process on both implementations.  End-to-end
workloads (a continuation sweep and a long trajectory) run in a fresh
interpreter per backend, since the backend is fixed at import time.

    python3 benchmarks/bench_backends.py [--repeat 5] [--json out.json]
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from nmode import _kernels_py, build_hopping_matrix, hypercube

try:
    from nmode import _kernels
except ImportError:  # extension not built
    _kernels = None

# label: (setup, statement)
WORKLOADS = {
    "sweep d=3 [-26,0]": ("from nmode import sweep_ground_diagram, hypercube",
                          "sweep_ground_diagram(hypercube(3), 1, (-26.0, 0.0))"),
    "dynamics d=3 t=200": ("import numpy as np\n"
                           "from nmode import DynamicsConfig, build_hopping_matrix, evolve, hypercube\n"
                           "z = np.exp(1j * np.arange(8)) / np.sqrt(8)\n"
                           "T = build_hopping_matrix(hypercube(3))",
                           "evolve(z, T, DynamicsConfig(epsilon_c=-1.5, t_span=(0, 200)))"),
}


def _best(fn, repeat: int, number: int) -> float:
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def kernel_timings(repeat: int) -> dict[str, dict[str, float]]:
    spec = hypercube(3)
    indptr, cols = spec.neighbor_csr
    ip, idx, data = build_hopping_matrix(spec).csr()
    rng = np.random.default_rng(0)
    q = rng.dirichlet(np.ones(8))
    y = rng.normal(size=16)
    z = rng.normal(size=8) + 1j * rng.normal(size=8)
    z /= np.linalg.norm(z)
    y0 = np.concatenate([z.real, z.imag])
    t_eval = np.linspace(0.0, 10.0, 11)

    impls = {"python": _kernels_py}
    if _kernels is not None:
        impls["compiled"] = _kernels
    out: dict[str, dict[str, float]] = {}
    for name, k in impls.items():
        out[name] = {
            "residual_positive": _best(lambda: k.residual_positive(q, indptr, cols, -3.0, -1.0, 1), repeat, 2000),
            "jacobian_positive": _best(lambda: k.jacobian_positive(q, indptr, cols, -3.0, 1), repeat, 2000),
            "nmode_rhs": _best(lambda: k.nmode_rhs(y, ip, idx, data, -1.5, 1, 1.0), repeat, 2000),
            "dopri5 t=10": _best(lambda: k.dopri5(y0, ip, idx, data, -1.5, 1, 1.0, t_eval, 1e-3, 1e-10,
                                                  1e-12, 10 ** 7, 1e-14), repeat, 1),
        }
    return out


def workload_timings(repeat: int) -> dict[str, dict[str, float]]:
    out: dict[str, dict[str, float]] = {}
    backends = ["python"] + (["compiled"] if _kernels is not None else [])
    for backend in backends:
        env = dict(os.environ, NMODE_BACKEND=backend)
        out[backend] = {}
        for label, (setup, stmt) in WORKLOADS.items():
            code = (f"import timeit\n"
                    f"print(min(timeit.repeat({stmt!r}, setup={setup!r}, repeat={repeat}, number=1)))")
            proc = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
            out[backend][label] = float(proc.stdout.strip())
    return out


def _print_table(title: str, timings: dict[str, dict[str, float]]) -> None:
    print(f"\n{title}")
    names = list(next(iter(timings.values())))
    cols = list(timings)
    print(f"{'':24s}" + "".join(f"{c:>14s}" for c in cols) + ("     speedup" if len(cols) == 2 else ""))
    for n in names:
        vals = [timings[c][n] for c in cols]
        line = f"{n:24s}" + "".join(f"{v * 1e6:12.1f}us" if v < 1e-2 else f"{v:13.3f}s" for v in vals)
        if len(cols) == 2:
            line += f"{vals[0] / vals[1]:11.1f}x"
        print(line)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", default=None, help="also write the timings here")
    ap.add_argument("--skip-workloads", action="store_true")
    args = ap.parse_args(argv)
    if _kernels is None:
        print("compiled extension not available; timing the numpy fallback only")
    res = {"kernels": kernel_timings(args.repeat)}
    _print_table("kernel calls (best of repeats)", res["kernels"])
    if not args.skip_workloads:
        res["workloads"] = workload_timings(max(2, args.repeat // 2))
        _print_table("end-to-end workloads", res["workloads"])
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(res, fh, indent=2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
