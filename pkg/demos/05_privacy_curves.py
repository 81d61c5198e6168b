"""Two quantitative privacy arguments: key shrinkage and noise indistinguishability.

Part 1 replays the known-plaintext recovery of a masked Gram matrix: as the
key coefficient scale sigma_b shrinks, everything the adversary reconstructs
shrinks quadratically with it.

Part 2 sweeps the local-differential-privacy ratio for two inputs of very
different norm. The observation is a mask-weighted projection whose spread
is sigma times the input norm: shrink sigma and the observation lands
inside any fixed window for every input, so the probability ratio between
the two inputs pins to 1 and they become indistinguishable.
"""

import numpy as np

from maskreg import kpa_gram_sweep, ldp_sweep


def main():
    rng = np.random.default_rng(55)
    x22 = rng.standard_normal((100, 5))
    x22 = (x22 - x22.mean(axis=0)) / x22.std(axis=0)

    sigmas_b = (1e-1, 1e-2, 1e-3, 1e-4)
    medians, _ = kpa_gram_sweep(x22, sigmas_b, trials=50, seed=55)
    print("known-plaintext Gram recovery, median max-entry over 50 keys:")
    print(f"{'sigma_b':>10}{'median max-entry':>20}")
    for s, m in zip(sigmas_b, medians):
        bar = "#" * max(1, int(40 + 8 * np.log10(m)))
        print(f"{s:>10g}{m:>20.3e}  {bar}")
    print()

    curve = ldp_sweep(t=1.0, norm1=1.0, norm2=5.0,
                      sigmas=(1.0, 0.5, 0.2, 0.1, 0.05, 0.02, 0.01, 0.001))
    print("privacy ratio for |obs| <= 1 between inputs of norm 1 and 5:")
    print(f"{'sigma':>10}{'ratio':>12}{'implied eps':>14}")
    for s, r, e in zip(curve.sigmas, curve.ratios, curve.implied_eps):
        print(f"{s:>10g}{r:>12.6f}{e:>14.3e}")
    print()
    print("large sigma: window probabilities scale with 1/norm and the "
          "ratio exposes the norm gap; small sigma drives the ratio to 1 "
          "and the two inputs cannot be told apart.")


if __name__ == "__main__":
    main()
