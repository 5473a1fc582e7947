"""Regenerate ``frozen.json``: independent high-precision reference values.

Run from the repository root with ``python3 tests/oracles/make_oracles.py``.
Needs ``mpmath``; the test-suite itself only reads the frozen file.
"""

from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path

import mpmath as mp

mp.mp.dps = 400


def pois_pmf(lam, k):
    lam = mp.mpf(lam)
    return mp.e ** (-lam) * lam**k / mp.factorial(k)


def pois_cdf(lam, v):
    return mp.fsum(pois_pmf(lam, k) for k in range(v + 1))


def f_indicator(lam, A, i):
    """Explicit solution for 1_A, written with exact high-precision arithmetic."""
    if i == 0:
        return mp.mpf(0)
    lam = mp.mpf(lam)
    pA = mp.fsum(pois_pmf(lam, a) for a in A)
    pA_low = mp.fsum(pois_pmf(lam, a) for a in A if a <= i - 1)
    return mp.factorial(i - 1) / lam**i * mp.e**lam * (pA_low - pA * pois_cdf(lam, i - 1))


def f_lipschitz(lam, g, i):
    lam = mp.mpf(lam)
    eg = mp.nsum(lambda k: g(int(k)) * pois_pmf(lam, int(k)), [0, mp.inf])
    if i == 0:
        return mp.mpf(0)
    s = mp.fsum((g(k) - eg) * pois_pmf(lam, k) for k in range(i))
    return mp.factorial(i - 1) / lam**i * mp.e**lam * s


def runs_law_dp(n, k, p):
    """Exact law of the number of maximal 1-runs of length >= k (rational p)."""
    p = Fraction(p)
    q = 1 - p
    state = {(0, 0): Fraction(1)}  # (current run length capped at k, count)
    for _ in range(n):
        nxt: dict = {}
        for (r, c), w in state.items():
            nxt[(0, c)] = nxt.get((0, c), 0) + w * q
            r1 = min(r + 1, k)
            c1 = c + (1 if r + 1 == k else 0)
            nxt[(r1, c1)] = nxt.get((r1, c1), 0) + w * p
        state = nxt
    law: dict = {}
    for (_, c), w in state.items():
        law[c] = law.get(c, 0) + w
    return {c: float(w) for c, w in sorted(law.items())}


def binom_law(n, p):
    return [mp.binomial(n, j) * mp.mpf(p) ** j * (1 - mp.mpf(p)) ** (n - j) for j in range(n + 1)]


def distances_binomial_poisson(n, p, lam, kmax=80):
    b = binom_law(n, p) + [mp.mpf(0)] * (kmax - n)
    pk = [pois_pmf(lam, j) for j in range(kmax + 1)]
    tail = 1 - mp.fsum(pk)
    tv = (mp.fsum(abs(b[j] - pk[j]) for j in range(kmax + 1)) + tail) / 2
    Fb = Fp = mp.mpf(0)
    w = mp.mpf(0)
    kol = mp.mpf(0)
    for j in range(kmax + 1):
        Fb += b[j]
        Fp += pk[j]
        w += abs(Fb - Fp)
        kol = max(kol, abs(Fb - Fp))
    return float(tv), float(w), float(kol)


def main():
    out = {}
    out["pmf"] = [[lam, k, float(pois_pmf(lam, k))] for lam, k in [(1, 0), (2, 3), (700, 700), (0.1, 5)]]
    out["pmf_700_log"] = float(mp.log(pois_pmf(700, 700)))
    out["cdf"] = [[lam, v, float(pois_cdf(lam, v))] for lam, v in [(1, 1), (0.5, 0), (10, 9), (30, 20)]]
    cases = [(1.0, [0], 1), (1.0, [0], 2), (0.1, [0, 3], 7), (10.0, [2, 5, 9, 14], 3),
             (10.0, [2, 5, 9, 14], 25), (1.0, list(range(0, 4)), 60), (4.0, [1, 2, 3, 4, 5, 6], 40),
             (0.5, [7], 15), (25.0, [10, 20, 30], 70)]
    out["f_indicator"] = [[lam, A, i, float(f_indicator(lam, A, i))] for lam, A, i in cases]
    gs = {"identity": lambda k: k, "abs_minus_3": lambda k: abs(k - 3),
          "min_k_5": lambda k: min(k, 5)}
    lcases = [(1.0, "identity", 1), (1.0, "abs_minus_3", 10), (4.0, "min_k_5", 30),
              (10.0, "abs_minus_3", 50), (0.3, "identity", 20)]
    out["f_lipschitz"] = [[lam, g, i, float(f_lipschitz(lam, gs[g], i))] for lam, g, i in lcases]
    out["runs"] = [{"n": n, "k": k, "p": p, "law": runs_law_dp(n, k, Fraction(p).limit_denominator())}
                   for n, k, p in [(12, 3, 0.3), (16, 2, 0.5), (20, 1, 0.1), (14, 5, 0.5), (9, 9, 0.3)]]
    out["distances_binomial_poisson"] = [
        {"n": n, "p": p, "lam": lam, "tv_w_k": distances_binomial_poisson(n, p, lam)}
        for n, p, lam in [(10, 0.2, 2.0), (30, 0.1, 3.0), (5, 0.5, 2.5)]]
    Path(__file__).with_name("frozen.json").write_text(json.dumps(out, indent=1) + "\n")


if __name__ == "__main__":
    main()
