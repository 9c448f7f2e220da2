#!/usr/bin/env python3
"""Exact volumes of balls and skew balls in a symmetric-square unipotent.

Prints the volume table for radii p^n, the parity split of the
skew-to-plain ratio, and the residue-class growth fit recovered from
the same numbers.  Everything in the two volume columns is an exact
power of sqrt(p); the fit at the end works on floats and should
reproduce exponent 1 per class at machine precision.
"""

from __future__ import annotations

from orbitlab.volumes import SymSquareUnipotentBall, fit_asymptotics

P = 3
N_MAX = 14


def main() -> None:
    ball = SymSquareUnipotentBall(P)
    g_inf, g_p = (0, 0, 0), (1, 0, -1)

    print(f"symmetric-square unipotent over Z[1/{P}], translator exponents {g_p}")
    print(f"{'n':>3} {'radius':>10} {'volume':>22} {'skew volume':>22} {'skew/plain':>12}")
    for n in range(1, N_MAX + 1):
        plain = ball.ball_volume(n)
        skew = ball.skew_volume(g_inf, g_p, n)
        ratio = (skew / plain).as_fraction()
        print(f"{n:>3} {P**n:>10} {plain.serialize():>22} "
              f"{skew.serialize():>22} {str(ratio):>12}")

    ts = [P**n for n in range(1, 41)]
    vols = [float(ball.ball_volume(n)) for n in range(1, 41)]
    profile = fit_asymptotics(ts, vols, P)
    print()
    print(f"growth fit: modulus {profile.modulus} selected "
          f"(ok={profile.ok})")
    for r, (c, d, e) in sorted(profile.classes.items()):
        print(f"  class n = {r} mod 2: volume ~ {c:.6f} * t^{d:.6f}"
              + (f" * (log t)^{e}" if e else ""))
    single = fit_asymptotics(ts, vols, P, moduli=(1,))
    print(f"forcing one class: ok={single.ok} ({single.message})")


if __name__ == "__main__":
    main()
