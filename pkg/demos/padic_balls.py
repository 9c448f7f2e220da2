#!/usr/bin/env python3
"""p-adic SL(2) ball masses from Hecke-coset counts.

The mass of the radius-p^j ball is a finite sum over primitive
Hermite-form classes.  The table shows the exact masses for several
primes, the agreement with an independent brute-force oracle, and the
convergence of the one-step growth ratio to p^2, the leading-term
exponent of the volume.
"""

from __future__ import annotations

import pathlib
import sys

from orbitlab.volumes import padic_sl2_ball_volume

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent.parent / "tests"))
from oracles import padic_ball_mass_oracle  # noqa: E402

J_MAX = 6  # the brute-force oracle is exponential in j


def main() -> None:
    for p in (2, 3, 5):
        print(f"p = {p}")
        print(f"{'j':>3} {'volume':>16} {'ratio to j-1':>14} "
              f"{'ratio/p^2':>10} {'oracle':>7}")
        previous = None
        for j in range(J_MAX + 1):
            vol = padic_sl2_ball_volume(p, j)
            agree = "equal" if vol == padic_ball_mass_oracle(p, j) else "DIFF"
            if previous is None:
                print(f"{j:>3} {str(vol):>16} {'':>14} {'':>10} {agree:>7}")
            else:
                ratio = vol / previous
                print(f"{j:>3} {str(vol):>16} {str(ratio):>14} "
                      f"{float(ratio) / p**2:>10.6f} {agree:>7}")
            previous = vol
        print()


if __name__ == "__main__":
    main()
