"""Clebsch-Gordan coefficients in doubled-integer arguments."""

from functools import lru_cache
from math import factorial, sqrt


def _f(n):
    return factorial(n) if n >= 0 else None


@lru_cache(maxsize=None)
def clebsch_gordan(two_j1: int, two_m1: int, two_j2: int, two_m2: int, two_J: int, two_M: int) -> float:
    """``<j1 m1 j2 m2 | J M>`` via the Racah formula; all arguments doubled."""
    if two_m1 + two_m2 != two_M:
        return 0.0
    if not abs(two_j1 - two_j2) <= two_J <= two_j1 + two_j2:
        return 0.0
    if any(abs(m) > j for j, m in ((two_j1, two_m1), (two_j2, two_m2), (two_J, two_M))):
        return 0.0
    if (two_j1 + two_j2 + two_J) % 2 or (two_j1 + two_m1) % 2 or (two_j2 + two_m2) % 2 or (two_J + two_M) % 2:
        return 0.0
    j1p, j1m = (two_j1 + two_m1) // 2, (two_j1 - two_m1) // 2
    j2p, j2m = (two_j2 + two_m2) // 2, (two_j2 - two_m2) // 2
    Jp, Jm = (two_J + two_M) // 2, (two_J - two_M) // 2
    a = (two_j1 + two_j2 - two_J) // 2
    b = (two_j1 - two_j2 + two_J) // 2
    c = (-two_j1 + two_j2 + two_J) // 2
    d = (two_j1 + two_j2 + two_J) // 2 + 1
    pref = (two_J + 1) * _f(a) * _f(b) * _f(c) / _f(d)
    pref *= _f(Jp) * _f(Jm) * _f(j1m) * _f(j1p) * _f(j2m) * _f(j2p)
    total = 0.0
    for k in range(0, a + 1):
        denoms = (k, a - k, j1m - k, j2p - k, (two_J - two_j2 + two_m1) // 2 + k,
                  (two_J - two_j1 - two_m2) // 2 + k)
        if min(denoms) < 0:
            continue
        term = 1.0
        for dnm in denoms:
            term *= _f(dnm)
        total += (-1) ** k / term
    return sqrt(pref) * total
