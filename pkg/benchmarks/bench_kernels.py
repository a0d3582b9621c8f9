"""Compare the compiled and pure-Python kernels.

Times the E-step, the fused EM pass and the squared-distance kernel on
Example I sized data, then one end-to-end penalized fit with each backend.

    python benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import timeit
from contextlib import contextmanager

import numpy as np

from penmix import kernels
from penmix import _pykernels
from penmix.init import init_from_kmeans
from penmix.pem import EMConfig, fit_penalized
from penmix.penalty import PenaltySpec
from penmix.simdata import example1_spec, generate, make_rng

try:
    from penmix import _ckernels
except ImportError:  # extension not built
    _ckernels = None

NAMES = ("e_step", "em_pass", "sq_distances")


@contextmanager
def backend(module):
    saved = {name: getattr(kernels, name) for name in NAMES}
    for name in NAMES:
        setattr(kernels, name, getattr(module, name))
    try:
        yield
    finally:
        for name, fn in saved.items():
            setattr(kernels, name, fn)


def best_of(fn, repeat):
    t = timeit.Timer(fn)
    loops, _ = t.autorange()
    return min(t.repeat(repeat, loops)) / loops


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    backends = [("python", _pykernels)]
    if _ckernels is not None:
        backends.insert(0, ("cython", _ckernels))
    else:
        print("compiled extension not available; timing the Python kernels only")

    rng = make_rng(0)
    print(f"{'kernel':<14}{'n':>6}{'M':>5}" + "".join(f"{b:>14}" for b, _ in backends) + f"{'speedup':>10}")
    for n, M in [(600, 10), (600, 50), (5000, 10)]:
        X = rng.standard_normal((n, 2))
        means = rng.standard_normal((M, 2))
        chols = np.repeat(np.eye(2)[None], M, axis=0)
        log_w = np.full(M, -np.log(M))
        calls = {
            "e_step": lambda mod: mod.e_step(X, log_w, means, chols),
            "em_pass": lambda mod: mod.em_pass(X, log_w, means, chols),
            "sq_distances": lambda mod: mod.sq_distances(X, means),
        }
        for name, call in calls.items():
            times = [best_of(lambda mod=mod: call(mod), args.repeat) for _, mod in backends]
            speed = f"{times[-1] / times[0]:>9.1f}x" if len(times) > 1 else ""
            print(f"{name:<14}{n:>6}{M:>5}" + "".join(f"{t * 1e3:>12.3f}ms" for t in times) + speed)

    X = generate(example1_spec(seed=1))
    init = init_from_kmeans(X, 10, make_rng(1, 1))
    spec = PenaltySpec(lam=0.005)
    print("\nend-to-end penalized fit (Example I, M_init=10, lambda=0.005)")
    for label, mod in backends:
        with backend(mod):
            t = best_of(lambda: fit_penalized(X, init, spec, EMConfig()), max(1, args.repeat // 2))
            model, trace = fit_penalized(X, init, spec, EMConfig())
        print(f"  {label:<8}{t * 1e3:10.1f} ms   M={model.n_components} iterations={trace.n_iter}")


if __name__ == "__main__":
    main()
