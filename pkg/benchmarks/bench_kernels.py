"""Time the compiled and numpy kernel backends on bootstrap-sized batches.

    python benchmarks/bench_kernels.py [--batch 20000] [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from paulitomo import entangled_state as es
from paulitomo import kernels
from paulitomo import measurement_sim as ms
from paulitomo import pauli_algebra as pa
from paulitomo import tomography as tomo


def make_batch(batch, seed=0):
    state = es.bell_state(1)
    u = pa.waveplate_matrix(pa.WavePlateSpec.from_pi_units(0.45, -0.138))
    a = ms.run_experiment(state, 10_000, seed=seed)
    b = ms.run_experiment(es.apply_local(u, state), 10_000, seed=seed, stream=1)
    return tomo.resample_counts(a, batch, seed, 2), tomo.resample_counts(b, batch, seed, 3)


def pipeline(impl, counts_in, counts_out, qtab):
    v_in, _ = impl.correlations(counts_in)
    v_out, _ = impl.correlations(counts_out)
    psi_in, _, _ = impl.states(v_in, qtab, -1)
    psi_out, _, _ = impl.states(v_out, qtab, -1)
    return impl.unitaries(psi_out, psi_in)[0]


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--batch", type=int, default=20_000)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    counts_in, counts_out = make_batch(args.batch)
    counts_in = counts_in.astype(float)
    counts_out = counts_out.astype(float)
    qtab = tomo.q_table()
    results = {}
    print(f"batch of {args.batch} counts tables (x2 datasets), best of {args.repeat}")
    for name in sorted(kernels.BACKENDS):
        impl = kernels.get_backend(name)
        results[name] = pipeline(impl, counts_in, counts_out, qtab)
        for label, stmt in [
            ("correlations", lambda: impl.correlations(counts_in)),
            ("full estimator", lambda: pipeline(impl, counts_in, counts_out, qtab)),
        ]:
            t = min(timeit.repeat(stmt, number=1, repeat=args.repeat))
            print(f"  {name:<7} {label:<15} {t * 1e3:8.2f} ms  ({t / args.batch * 1e6:.3f} us/item)")
    if len(results) == 2:
        diff = np.nanmax(np.abs(results["cython"] - results["python"]))
        print(f"max |cython - python| = {diff:.2e}")
    else:
        print("compiled backend not available; only the numpy fallback was timed")


if __name__ == "__main__":
    main()
