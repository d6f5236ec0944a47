#!/usr/bin/env python3
"""Pre-build calibration oracle for the rotationally symmetric sphere family.

Computes the g_l = e^{-2*l*s^2} g_Sn integrals (sigma_2 total, volume, total
scalar curvature) with an independent high-order quadrature (mpmath, 50-digit
working precision), compares them against the leading-order closed forms, and
prints the deviations that are frozen into the Rust test fixtures.

Also locates, by bisection, the cos(2*theta) amplitude at which the pointwise
sigma_2 of the conformal metric first dips negative while sigma_1 stays
positive (used as the cone-entry initial datum).

Run: python3 tools/calibrate_asymptotics.py
"""

import mpmath as mp

mp.mp.dps = 50


def omega(m):
    # surface area of the unit m-sphere
    return 2 * mp.pi ** ((m + 1) / mp.mpf(2)) / mp.gamma((m + 1) / mp.mpf(2))


def lam_plus(s, ell):
    """Schouten eigenvalues of g0^{-1} A_{g_l} for u = -l s^2 (metric e^{2u} g0)."""
    lam1 = mp.mpf("0.5") + 2 * ell - 4 * ell * s**2 + 2 * ell**2 * s**2 * (1 - s**2)
    lam2 = mp.mpf("0.5") - 2 * ell * s**2 - 2 * ell**2 * s**2 * (1 - s**2)
    return lam1, lam2


def family_integrals(ell, n):
    w = omega(n - 1)

    def sig2(s):
        l1, l2 = lam_plus(s, ell)
        return (n - 1) * (n - 2) / mp.mpf(2) * l2**2 + (n - 1) * l1 * l2

    def sig1(s):
        l1, l2 = lam_plus(s, ell)
        return l1 + (n - 1) * l2

    pole = lambda s: (1 - s**2) ** ((n - 2) / mp.mpf(2))
    f2 = w * mp.quad(lambda s: mp.e ** (-(n - 4) * ell * s**2) * sig2(s) * pole(s), [-1, 0, 1])
    vol = w * mp.quad(lambda s: mp.e ** (-n * ell * s**2) * pole(s), [-1, 0, 1])
    s1int = w * mp.quad(lambda s: mp.e ** (-(n - 2) * ell * s**2) * sig1(s) * pole(s), [-1, 0, 1])
    return f2, vol, 2 * (n - 1) * s1int


def leading(ell, n):
    w = omega(n - 1)
    f2 = -(n - 1) * w * ell ** mp.mpf("1.5") * mp.sqrt(mp.pi) / (2 * (n - 4) ** mp.mpf("1.5"))
    vol = w * mp.sqrt(mp.pi) / mp.sqrt(n * ell)
    scal = 2 * (n - 1) * w * mp.sqrt(ell) * mp.sqrt(mp.pi) / mp.sqrt(n - 2)
    return f2, vol, scal


def cone_entry_amplitude(n=5):
    """Amplitude a of u_plus = a*cos(2 theta) where min_s sigma_2 crosses zero.

    In the e^{-2u} g0 convention u_minus = a - 2 a s^2.
    """

    def min_sigmas(a):
        min1 = mp.mpf("inf")
        min2 = mp.mpf("inf")
        for i in range(2001):
            s = mp.mpf(-1) + mp.mpf(2) * i / 2000
            x = s**2 * (1 - s**2)
            lr = mp.mpf("0.5") - 4 * a + 8 * a * s**2 + 8 * a**2 * x
            lt = mp.mpf("0.5") + 4 * a * s**2 - 8 * a**2 * x
            s1 = lr + (n - 1) * lt
            s2 = (n - 1) * (n - 2) / mp.mpf(2) * lt**2 + (n - 1) * lr * lt
            min1 = min(min1, s1)
            min2 = min(min2, s2)
        return min1, min2

    lo, hi = mp.mpf("0.1"), mp.mpf("1.0")
    for _ in range(60):
        mid = (lo + hi) / 2
        _, m2 = min_sigmas(mid)
        if m2 > 0:
            lo = mid
        else:
            hi = mid
    return hi, min_sigmas


def main():
    n = 5
    print(f"omega_4 = {omega(4)}  (8 pi^2/3 = {8 * mp.pi**2 / 3})")
    print(f"Vol(S^5) = pi^3 = {mp.pi**3}")
    print()
    print("ell        F2_exact        vol_exact       scal_exact      dev(F2)      dev(vol)     dev(scal)")
    for ell in [mp.mpf("1e-8"), 100, 1000, 1600, 10000]:
        f2, vol, sc = family_integrals(mp.mpf(ell), n)
        f2l, voll, scl = leading(mp.mpf(ell), n)
        dev = lambda a, b: abs(a / b - 1)
        print(
            f"{float(ell):<10g} {mp.nstr(f2, 10):<15} {mp.nstr(vol, 10):<15} {mp.nstr(sc, 10):<15}"
            f" {mp.nstr(dev(f2, f2l), 6):<12} {mp.nstr(dev(vol, voll), 6):<12} {mp.nstr(dev(sc, scl), 6)}"
        )
    print()
    for ell in [100, 1000, 10000]:
        f2, vol, sc = family_integrals(mp.mpf(ell), n)
        qv = f2 / vol ** (mp.mpf(n - 4) / n)
        qs = f2 / sc ** (mp.mpf(n - 4) / (n - 2))
        print(f"ell={ell:<7} quotient_vol={mp.nstr(qv, 10):<16} quotient_scalar={mp.nstr(qs, 10)}")
    print()
    a_star, min_sigmas = cone_entry_amplitude(n)
    print(f"cos2 amplitude where min sigma_2 crosses 0: a* = {mp.nstr(a_star, 8)}")
    for a in [mp.mpf("0.3"), mp.mpf("0.35"), mp.mpf("0.4"), mp.mpf("0.5")]:
        m1, m2 = min_sigmas(a)
        print(f"  a={float(a):<5} min_sigma1={mp.nstr(m1, 6):<12} min_sigma2={mp.nstr(m2, 6)}")
    # F2 of the a=0.4 initial metric (r_eps must start positive)
    a = mp.mpf("0.4")
    w = omega(4)

    def sig2_a(s):
        x = s**2 * (1 - s**2)
        lr = mp.mpf("0.5") - 4 * a + 8 * a * s**2 + 8 * a**2 * x
        lt = mp.mpf("0.5") + 4 * a * s**2 - 8 * a**2 * x
        return 6 * lt**2 + 4 * lr * lt

    um = lambda s: a - 2 * a * s**2
    f2a = w * mp.quad(lambda s: mp.e ** (-(n - 4) * um(s)) * sig2_a(s) * (1 - s**2) ** mp.mpf("1.5"), [-1, 0, 1])
    f0a = w * mp.quad(lambda s: mp.e ** ((2 * mp.mpf("0.1") - n) * um(s)) * (1 - s**2) ** mp.mpf("1.5"), [-1, 0, 1])
    print(f"  a=0.4 : F2(u0) = {mp.nstr(f2a, 10)}  F0_eps(u0) = {mp.nstr(f0a, 10)}  r_eps(0) = {mp.nstr(f2a / f0a, 10)}")

    # weight integral sanity, n=5
    wint = mp.quad(lambda s: (1 - s**2) ** mp.mpf("1.5"), [-1, 1])
    print(f"\nint (1-s^2)^(3/2) ds = {mp.nstr(wint, 12)}  (3 pi/8 = {mp.nstr(3 * mp.pi / 8, 12)})")


if __name__ == "__main__":
    main()
