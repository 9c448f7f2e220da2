#!/usr/bin/env python3
"""A lattice orbit in the plane against its predicted density.

Streams the SL(2,Z) ball up to a modest radius, counts orbit points of
v = (1, sqrt 2) in a family of annulus sectors, and compares the
empirical ratios with the exact density ratios under dw/|w|.  The
fitted global constant is reported per sector; its stability across
sectors is the constant-free signature of equidistribution.
"""

from __future__ import annotations

import math

from orbitlab.equidist import (
    ExperimentConfig,
    OrbitVector,
    RealAnnulusSector,
    run_experiment,
)

T_LADDER = (125, 250, 500)


def main() -> None:
    config = ExperimentConfig(
        application="ledrappier",
        v=OrbitVector.make(("1", "sqrt(2)")),
        t_ladder=T_LADDER,
        tests=(
            RealAnnulusSector(1, 2),
            RealAnnulusSector(1, 3),
            RealAnnulusSector(1, 2, 0.0, math.pi),
            RealAnnulusSector(1, 2, 0.0, math.pi / 2),
        ),
        capacity=10**7,
    )
    report = run_experiment(config)

    print(f"orbit of v = (1, sqrt 2) under SL(2,Z), normalizer "
          f"{report.normalizer_label}, orientation {report.orientation}")
    print(f"{'T':>6} {'test set':>28} {'count':>9} {'ratio':>9} "
          f"{'target':>9} {'rel err':>8} {'constant':>9}")
    for row in report.rows:
        print(f"{row.t:>6.0f} {row.test_id:>28} {row.count:>9} "
              f"{row.ratio_empirical:>9.5f} {row.ratio_target:>9.5f} "
              f"{row.rel_error:>8.4f} {row.constant:>9.5f}")
    print()
    for t, cv in report.constant_cv:
        print(f"T = {t:>5.0f}: constant variation across sectors {cv:.4f}")
    if report.slope_total:
        s = report.slope_total
        print(f"ball growth exponent {s.exponent:.3f} +- {s.stderr:.3f} "
              f"(expected 2 for SL(2,Z))")


if __name__ == "__main__":
    main()
