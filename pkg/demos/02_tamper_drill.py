"""Every protocol violation the verification column is designed to catch.

The decrypted estimate carries a pseudo-response column whose coefficients
are known in advance (all ones for a linear fit). Any agency that skips a
masking step, uses a key outside the commuting family, or nudges the cloud
result drags that column away from its target -- and the run is rejected.
"""

import numpy as np

from maskreg import RunConfig, TamperPlan, run_protocol


def make_datasets(seed=11):
    rng = np.random.default_rng(seed)
    beta = np.array([2.0, -1.0, 0.5])
    out = []
    for _ in range(2):
        x = rng.standard_normal((90, 3))
        out.append((x, x @ beta + 0.1 * rng.standard_normal(90)))
    return out


def main():
    datasets = make_datasets()
    plans = [
        TamperPlan(),  # honest baseline
        TamperPlan(action="skip_pseudo_response", agency=2),
        TamperPlan(action="non_commutative_key", agency=1),
        TamperPlan(action="wrong_decrypt", agency=2),
        TamperPlan(action="perturb_result", magnitude=0.01),
    ]
    print(f"{'action':<24}{'verdict':<12}{'max deviation':>14}")
    print("-" * 50)
    for plan in plans:
        report = run_protocol(
            datasets, RunConfig(k=2, seed=11, tamper=plan)
        )
        print(f"{plan.action:<24}{report.verify.verdict:<12}"
              f"{report.verify.max_deviation:>14.3e}")
    print()
    print("a detected run exits the CLI with status 2; "
          "only the honest baseline is accepted")


if __name__ == "__main__":
    main()
