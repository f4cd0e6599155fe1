"""Compare the compiled and NumPy kernel backends.

Times a sparse mat-vec, a CG solve of the step matrix and one full time step
on the unit-square mesh for each available backend::

    python3 benchmarks/bench_kernels.py --mesh 32 64 --repeat 5
"""
import argparse
import timeit

import numpy as np

from elastowave import linalg
from elastowave.assembly import assemble_forms
from elastowave.mesh import uniform_triangulation
from elastowave.model import preset
from elastowave.stepper import init_state, make_step_operator, step


def cases(n, k):
    spec = preset("test1")
    forms = assemble_forms(uniform_triangulation(n), spec.lam, spec.mu)
    op = make_step_operator(forms, k)
    state = init_state(forms.mesh, forms, spec)
    x = np.random.default_rng(0).normal(size=forms.dofmap.ndofs)
    b = forms.M @ x
    return {
        "spmv": lambda: linalg.spmv(op.S, x),
        "cg": lambda: linalg.cg_solve(op.S, b),
        "step": lambda: step(op, state, 0.01, spec),
    }


def best_time(fn, repeat, number):
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--mesh", type=int, nargs="+", default=[16, 32, 64])
    p.add_argument("--k", type=float, default=1 / 100)
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args(argv)

    names = sorted(linalg.BACKENDS)
    print(f"backends: {', '.join(names)} (default {linalg.BACKEND})")
    print(f"{'n':>4} {'kernel':>6} " + " ".join(f"{b + ' [ms]':>14}" for b in names)
          + ("   speedup" if len(names) > 1 else ""))
    original = linalg.BACKEND
    try:
        for n in args.mesh:
            times = {}
            for backend in names:
                linalg.set_backend(backend)
                for kernel, fn in cases(n, args.k).items():
                    number = 200 if kernel == "spmv" else 5
                    times[kernel, backend] = best_time(fn, args.repeat, number)
            for kernel in ("spmv", "cg", "step"):
                row = [times[kernel, b] * 1e3 for b in names]
                line = f"{n:>4} {kernel:>6} " + " ".join(f"{t:>14.4f}" for t in row)
                if "cython" in names:
                    line += f"   {times[kernel, 'python'] / times[kernel, 'cython']:7.2f}x"
                print(line)
    finally:
        linalg.set_backend(original)


if __name__ == "__main__":
    main()
