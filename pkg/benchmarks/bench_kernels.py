"""Benchmark the compiled search kernels against the numpy fallback.

Times the three hot kernels on document shapes matching the default
synthetic preset (and one larger document), checks that both backends
agree, and reports the end-to-end effect on a full beam search.

Usage: python benchmarks/bench_kernels.py
"""

import sys
import time

import numpy as np

from ldslink.kernels import pyref

try:
    from ldslink.kernels import _core
except ImportError:
    _core = None


def workload(seed, n, kmax, u):
    rng = np.random.default_rng(seed)
    utab = rng.standard_normal((u, u))
    psi = rng.random((n, kmax))
    uid = rng.integers(0, u, (n, kmax)).astype(np.int32)
    ncand = np.full(n, kmax, dtype=np.int32)
    assign = rng.integers(0, kmax, n).astype(np.int32)
    targets = np.arange(n, dtype=np.int32)
    return utab, psi, uid, ncand, assign, targets


def time_fn(fn, reps):
    t0 = time.perf_counter()
    for _ in range(reps):
        fn()
    return (time.perf_counter() - t0) / reps


def bench_kernels():
    rows = []
    for label, n, kmax, u, hw, reps in (
        ("preset doc (n=12,k=4)", 12, 4, 44, 15, 4000),
        ("large doc (n=40,k=5)", 40, 5, 180, 15, 1000),
    ):
        utab, psi, uid, ncand, assign, targets = workload(0, n, kmax, u)
        for name, py_fn, c_fn in (
            (
                "sweep_argmax",
                lambda: pyref.sweep_argmax(utab, psi, uid, ncand, assign, targets, hw),
                (lambda: _core.sweep_argmax(utab, psi, uid, ncand, assign, targets, hw)) if _core else None,
            ),
            (
                "pair_sum",
                lambda: pyref.pair_sum(utab, uid, assign, hw),
                (lambda: _core.pair_sum(utab, uid, assign, hw)) if _core else None,
            ),
            (
                "g_row",
                lambda: pyref.g_row(utab, psi, uid, ncand, assign, n // 2, hw),
                (lambda: _core.g_row(utab, psi, uid, ncand, assign, n // 2, hw)) if _core else None,
            ),
        ):
            t_py = time_fn(py_fn, reps)
            if c_fn is None:
                rows.append((label, name, t_py, None, None))
                continue
            a, b = py_fn(), c_fn()
            if not np.allclose(np.asarray(a, dtype=float), np.asarray(b, dtype=float), rtol=1e-10, atol=1e-12):
                print(f"MISMATCH in {name} on {label}", file=sys.stderr)
                sys.exit(1)
            t_c = time_fn(c_fn, reps)
            rows.append((label, name, t_py, t_c, t_py / t_c))
    return rows


def bench_search():
    """End-to-end search on one synthetic preset document, both backends."""
    from ldslink import kernels
    from ldslink.cache import build_cache
    from ldslink.pipeline import TrainConfig, build_instances, train_stages
    from ldslink.search import SearchConfig, search
    from ldslink.synth import SynthConfig, generate

    cfg = SynthConfig(seed=0, n_docs=30)
    kb, lexicon, splits = generate(cfg)
    train = build_instances(splits["train"], kb, lexicon, k=5)
    params, _ = train_stages(
        kb,
        train,
        TrainConfig(attention_epochs=2, mlp_epochs=3, coherence_epochs=10, h2_epochs=4, pruner_epochs=0),
        seed=0,
    )
    caches = [build_cache(inst, kb, params) for inst in train[:10] if inst.active]
    config = SearchConfig()

    results = {}
    for name, impl in (("python", pyref), ("compiled", _core)):
        if impl is None:
            continue
        saved = (kernels.g_row, kernels.sweep_argmax, kernels.pair_sum)
        kernels.g_row, kernels.sweep_argmax, kernels.pair_sum = impl.g_row, impl.sweep_argmax, impl.pair_sum
        try:
            t0 = time.perf_counter()
            sols = [search(c, config, params)[0] for c in caches]
            results[name] = (time.perf_counter() - t0, sols)
        finally:
            kernels.g_row, kernels.sweep_argmax, kernels.pair_sum = saved
    if len(results) == 2:
        for a, b in zip(results["python"][1], results["compiled"][1]):
            assert np.array_equal(a, b), "backends disagree on search output"
    return results


def main():
    if _core is None:
        print("compiled kernels not built (run `python setup.py build_ext --inplace`);")
        print("timing the pure-Python fallback only\n")
    print(f"{'workload':24} {'kernel':13} {'python':>10} {'compiled':>10} {'speedup':>8}")
    print("-" * 70)
    for label, name, t_py, t_c, speedup in bench_kernels():
        c_str = f"{t_c*1e6:9.1f}u" if t_c is not None else "      n/a"
        s_str = f"{speedup:7.1f}x" if speedup is not None else "     n/a"
        print(f"{label:24} {name:13} {t_py*1e6:9.1f}u {c_str} {s_str}")
    print()
    results = bench_search()
    for name, (secs, sols) in sorted(results.items()):
        print(f"full search over 10 documents [{name:8}]: {secs*1e3:7.1f} ms")
    if len(results) == 2:
        print(f"search speedup: {results['python'][0] / results['compiled'][0]:.1f}x (identical outputs)")


if __name__ == "__main__":
    main()
