#!/usr/bin/env python3
"""Orbits with a finite place: congruence windows and product tests.

Two short experiments over SL(2,Z[1/2]) machinery:

* window scaling: restricting translators to the principal congruence
  class mod 2 cuts every sector count by about |SL(2,Z/2)| = 6;
* product test sets: a real annulus times a p-adic shell has a
  prediction that factors exactly over the places, and the orbit count
  against the mixed normalizer T 2^E(ln_2 T) grows with slope 1.
"""

from __future__ import annotations

from orbitlab.balls import CongruenceWindow
from orbitlab.equidist import (
    ExperimentConfig,
    OrbitVector,
    RealAnnulusSector,
    parse_test,
    run_experiment,
)


def window_demo() -> None:
    tests = (RealAnnulusSector(1, 2), RealAnnulusSector(1, 3))
    base = dict(
        v=OrbitVector.make(("1", "sqrt(2)")),
        t_ladder=(250, 500),
        tests=tests,
        capacity=10**7,
    )
    full = run_experiment(ExperimentConfig(application="a21", **base))
    part = run_experiment(ExperimentConfig(
        application="a21", window=CongruenceWindow(2, 1, reps=((1, 0, 0, 1),)),
        **base))
    print("congruence window {I mod 2} inside SL(2,Z), share of each count")
    print(f"{'T':>6} {'test set':>24} {'full':>9} {'windowed':>9} "
          f"{'share':>8} {'1/6':>8}")
    for rf, rw in zip(full.rows, part.rows):
        print(f"{rf.t:>6.0f} {rf.test_id:>24} {rf.count:>9} {rw.count:>9} "
              f"{rw.count / rf.count:>8.5f} {1 / 6:>8.5f}")
    print()


def product_demo() -> None:
    tests = tuple(
        parse_test(tok, p=2)
        for tok in (
            "product(annulus(1,2),shell(0))",
            "product(annulus(1,3),shell(0))",
            "product(annulus(1,2),shell(1))",
        )
    )
    print("product test predictions factor exactly over the places")
    for f in tests:
        re_part, qp_part = f.predicted_parts()
        print(f"  {f.label}: {f.predicted():.8f} = "
              f"{re_part:.8f} * {qp_part}")
    config = ExperimentConfig(
        application="a22",
        v=OrbitVector.make(("1", "sqrt(2)"), fin=("1", "3"), p=2),
        t_ladder=(4, 8, 16, 32),
        tests=tests,
        capacity=10**8,
    )
    report = run_experiment(config)
    print(f"\nnormalizer {report.normalizer_label}")
    print(f"{'T':>4} {'test set':>40} {'count':>8} {'ratio':>9} "
          f"{'target':>9}")
    for row in report.rows:
        print(f"{row.t:>4.0f} {row.test_id:>40} {row.count:>8} "
              f"{row.ratio_empirical:>9.5f} {row.ratio_target:>9.5f}")
    if report.slope_first_test:
        s = report.slope_first_test
        print(f"first-test count slope against the normalizer: "
              f"{s.exponent:.4f} +- {s.stderr:.4f} (expected 1)")


def main() -> None:
    window_demo()
    product_demo()


if __name__ == "__main__":
    main()
