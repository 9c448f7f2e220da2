#!/usr/bin/env python3
"""Skew-ball ratio limits for a vector stabilizer in SL(2,R).

The volume ratio vol(H_t(g))/vol(H_t) settles to |v|/|g^-1 v|; the
demo shows the ladder estimates converging to the closed form for a
few translators, and the orientation calibration that pins down which
of g v, g^-1 v the limit pairs with.
"""

from __future__ import annotations

import math

from orbitlab.equidist import calibrate_orientation
from orbitlab.volumes import StabilizerBall, skew_ball_ratio_limit

V = (1.0, math.sqrt(2.0))
TRANSLATORS = (
    ((2, 1), (1, 1)),
    ((1, 3), (0, 1)),
    ((0, -1), (1, 0)),
    ((5, 2), (2, 1)),
)


def main() -> None:
    ball = StabilizerBall(V)
    print(f"stabilizer of v = (1, sqrt 2); ratio limit vs closed form")
    print(f"{'g':>22} {'ladder estimate':>16} {'closed form':>13} "
          f"{'rel err':>10}")
    for g in TRANSLATORS:
        res = skew_ball_ratio_limit(ball, g)
        est = res.estimates[0]
        err = abs(est / res.closed_form - 1.0)
        print(f"{str(g):>22} {est:>16.9f} {res.closed_form:>13.9f} "
              f"{err:>10.2e}")

    rec = calibrate_orientation()
    print()
    print("orientation calibration (which plane point the density pairs with)")
    print(f"  winner: {rec.winner}")
    print(f"  product spread with |g^-1 v|: {rec.inverse_spread:.2e}")
    print(f"  product spread with |g v|:    {rec.forward_spread:.2e}")


if __name__ == "__main__":
    main()
