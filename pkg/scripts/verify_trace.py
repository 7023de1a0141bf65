#!/usr/bin/env python3
"""Independent straight-line recomputation of the K=3 revision trace fixture.

This script deliberately avoids importing the package. Every step of the
activation-revision procedure is written out by hand with plain ``math``
calls, so the fixture values asserted in the test suite can be checked
against a second, unrelated derivation.

Setup: K = 3 classes, revision depth beta = 3, activation vector
a = [3, 2, 1]. Every class shares one tail model with rho = 0, kappa = 1,
lambda = 2, evaluated without translation. Ranks are visited from the
highest activation down; the argmax rank is skipped.

Exit status 0 when every recomputed value matches the fixture, 1 otherwise.
"""

import math
import sys

A = [3.0, 2.0, 1.0]
BETA = 3
KAPPA = 1.0
LAM = 2.0

# Fixture values the test suite asserts (4-decimal probabilities).
EXPECTED_M = [1.0, 0.877374, 1.0]
EXPECTED_UNKNOWN = 0.245252
EXPECTED_PROBS = [0.6726, 0.1936, 0.0910, 0.0428]


def main() -> int:
    # Rank order of a = [3, 2, 1] descending is b = (0, 1, 2); b_1 = 0 is
    # the argmax and is skipped.
    m = [1.0, 1.0, 1.0]

    # Rank i = 2 visits class index 1: weight (beta - i) / beta = 1/3,
    # survival = exp(-(a_1 / lambda)^kappa) = exp(-(2/2)^1) = e^-1.
    s1 = math.exp(-((A[1] / LAM) ** KAPPA))
    m[1] = 1.0 - ((BETA - 2) / BETA) * s1

    # Rank i = 3 visits class index 2: weight (beta - 3) / beta = 0.
    s2 = math.exp(-((A[2] / LAM) ** KAPPA))
    m[2] = 1.0 - ((BETA - 3) / BETA) * s2

    revised = [A[i] * m[i] for i in range(3)]
    unknown = sum(A[i] - A[i] * m[i] for i in range(3))

    logits = revised + [unknown]
    zmax = max(logits)
    exps = [math.exp(z - zmax) for z in logits]
    total = sum(exps)
    probs = [e / total for e in exps]

    print(f"m        = [{m[0]:.6f}, {m[1]:.6f}, {m[2]:.6f}]")
    print(f"revised  = [{revised[0]:.6f}, {revised[1]:.6f}, {revised[2]:.6f}]")
    print(f"unknown  = {unknown:.6f}")
    print("probs    = [" + ", ".join(f"{p:.4f}" for p in probs) + "]")

    ok = True
    for got, want in zip(m, EXPECTED_M):
        ok &= abs(got - want) < 1e-6
    ok &= abs(unknown - EXPECTED_UNKNOWN) < 1e-6
    for got, want in zip(probs, EXPECTED_PROBS):
        ok &= abs(got - want) < 1e-4

    print("trace matches fixture" if ok else "TRACE MISMATCH")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
