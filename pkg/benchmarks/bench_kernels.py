"""Benchmark the compiled kernels against the numpy reference.

Times the three hot per-batch operations (forward probabilities, fused
loss+gradient, argmax prediction) at the default client-model shape and
reports per-call time and speedup. Run as:

    python benchmarks/bench_kernels.py
    python benchmarks/bench_kernels.py --batch 128 --repeats 2000
"""

import argparse
import time

import numpy as np

from fedshield import kernels
from fedshield.rng import derive_stream

try:
    from fedshield import _ckernels
except ImportError:
    _ckernels = None


def _time(fn, args, repeats: int) -> float:
    fn(*args)  # warm up
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn(*args)
    return (time.perf_counter() - t0) / repeats


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--batch", type=int, default=32, help="batch size n")
    parser.add_argument("--features", type=int, default=32, help="input dim d")
    parser.add_argument("--hidden", type=int, default=12, help="hidden units")
    parser.add_argument("--classes", type=int, default=10, help="output classes")
    parser.add_argument("--repeats", type=int, default=1000,
                        help="timed calls per kernel")
    args = parser.parse_args()

    rng = derive_stream(0, "toy")
    d, h, c, n = args.features, args.hidden, args.classes, args.batch
    w1 = rng.normal(size=(d, h)) * 0.3
    b1 = rng.normal(size=h) * 0.1
    w2 = rng.normal(size=(h, c)) * 0.3
    b2 = rng.normal(size=c) * 0.1
    x = rng.normal(size=(n, d))
    y = rng.integers(0, c, size=n)

    print(f"shape: batch={n} features={d} hidden={h} classes={c}  "
          f"repeats={args.repeats}")
    print(f"active backend: {kernels.backend()}")
    if _ckernels is None:
        print("compiled extension not importable; timing the numpy reference only")

    cases = [
        ("forward_probs", kernels.forward_probs_numpy,
         None if _ckernels is None else _ckernels.forward_probs,
         (w1, b1, w2, b2, x)),
        ("loss_grad", kernels.loss_grad_numpy,
         None if _ckernels is None else _ckernels.loss_grad,
         (w1, b1, w2, b2, x, y)),
        ("predict", kernels.predict_numpy,
         None if _ckernels is None else _ckernels.predict,
         (w1, b1, w2, b2, x)),
    ]
    header = f"{'kernel':<14}{'numpy':>12}{'cython':>12}{'speedup':>10}"
    print(header)
    print("-" * len(header))
    for name, ref, compiled, call_args in cases:
        t_ref = _time(ref, call_args, args.repeats)
        if compiled is None:
            print(f"{name:<14}{t_ref * 1e6:>10.1f}us{'n/a':>12}{'n/a':>10}")
            continue
        # agreement check before trusting the timing
        out_ref, out_c = ref(*call_args), compiled(*call_args)
        if not isinstance(out_ref, tuple):
            out_ref, out_c = (out_ref,), (out_c,)
        ok = all(np.allclose(np.asarray(a), np.asarray(b), rtol=1e-10, atol=1e-12)
                 for a, b in zip(out_ref, out_c))
        t_c = _time(compiled, call_args, args.repeats)
        flag = "" if ok else "  (MISMATCH)"
        print(f"{name:<14}{t_ref * 1e6:>10.1f}us{t_c * 1e6:>10.1f}us"
              f"{t_ref / t_c:>9.2f}x{flag}")


if __name__ == "__main__":
    main()
