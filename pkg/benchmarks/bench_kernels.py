"""Time the compiled kernels against the pure-Python fallback.

Both backends get identical inputs (same parameters, counts, uniforms and
negatives), so the script also reports how far their outputs drift apart.

    python benchmarks/bench_kernels.py --repeat 5
"""

import argparse
import time

import numpy as np

from gasc import _fallback

try:
    from gasc import _kernels
except ImportError:
    _kernels = None


def time_call(fn, make_args, repeat):
    """Median wall time of ``fn(*make_args())`` with fresh inputs each run."""
    times, result = [], None
    for _ in range(repeat):
        args = make_args()
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
        result = args
    return float(np.median(times)), result


def ln_sweep_inputs(T, K, V, n_tokens, seed):
    rng = np.random.default_rng(seed)
    params = rng.normal(scale=0.5, size=(T, K, V))
    counts = rng.multinomial(n_tokens, np.full(K * V, 1.0 / (K * V)), size=T).reshape(T, K, V)
    uniforms = 1.0 - rng.random((T, K, V, 4))

    def make():
        return params.copy(), counts.astype(float), 100.0, 10.0, uniforms, _fallback.AUX | _fallback.LAPLACE
    return make


def sgns_inputs(V, dim, n_sent, sent_len, window, negatives, seed):
    rng = np.random.default_rng(seed)
    w_in = (rng.random((V, dim)) - 0.5) / dim
    tokens = rng.integers(0, V, size=n_sent * sent_len).astype(np.int64)
    indptr = np.arange(0, n_sent * sent_len + 1, sent_len, dtype=np.int64)
    i = np.arange(sent_len)
    n_pairs = int((np.minimum(sent_len, i + window + 1) - np.maximum(0, i - window) - 1).sum()) * n_sent
    negs = rng.integers(0, V, size=(n_pairs, negatives)).astype(np.int64)

    def make():
        return w_in.copy(), np.zeros((V, dim)), tokens, indptr, window, negs, 0.025, 1e-4, 0, n_pairs
    return make, n_pairs


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--T", type=int, default=5)
    ap.add_argument("--K", type=int, default=4)
    ap.add_argument("--V", type=int, default=500, help="vocabulary size for both kernels")
    ap.add_argument("--dim", type=int, default=100)
    ap.add_argument("--sentences", type=int, default=200)
    args = ap.parse_args(argv)

    if _kernels is None:
        print("compiled kernels not built; only the fallback is timed")

    rows = []
    make = ln_sweep_inputs(args.T, args.K, args.V, 2000, args.seed)
    label = f"ln_sweep  T={args.T} K={args.K} V={args.V}"
    t_py, out_py = time_call(_fallback.ln_sweep, make, args.repeat)
    if _kernels is not None:
        t_c, out_c = time_call(_kernels.ln_sweep, make, args.repeat)
        rows.append((label, t_py, t_c, float(np.abs(out_py[0] - out_c[0]).max())))
    else:
        rows.append((label, t_py, None, None))

    make, n_pairs = sgns_inputs(args.V, args.dim, args.sentences, 20, 5, 5, args.seed)
    label = f"sgns_chunk {n_pairs} pairs dim={args.dim}"
    t_py, out_py = time_call(_fallback.sgns_chunk, make, args.repeat)
    if _kernels is not None:
        t_c, out_c = time_call(_kernels.sgns_chunk, make, args.repeat)
        rows.append((label, t_py, t_c, float(np.abs(out_py[0] - out_c[0]).max())))
    else:
        rows.append((label, t_py, None, None))

    print(f"{'kernel':<40} {'python s':>10} {'compiled s':>11} {'speedup':>8} {'max |diff|':>11}")
    for label, t_py, t_c, diff in rows:
        if t_c is None:
            print(f"{label:<40} {t_py:>10.4f} {'-':>11} {'-':>8} {'-':>11}")
        else:
            print(f"{label:<40} {t_py:>10.4f} {t_c:>11.5f} {t_py / t_c:>7.0f}x {diff:>11.2e}")


if __name__ == "__main__":
    main()
