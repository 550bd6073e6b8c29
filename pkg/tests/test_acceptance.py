"""The thirteen acceptance criteria, one test each, with a PASS/FAIL line per criterion.

Criteria 4 (spin-flip chain counts) and 13 (gap trend) fail on the models as
specified; they are strict xfails so that a silent fix would be noticed.
"""
import json

import pytest

from conftest import ACCEPTANCE_LINES
from mixanom import claims

# wall-clock budgets in seconds, per criterion
BUDGET = {2: 10, 3: 30, 4: 120, 5: 60, 11: 10}
_CACHE: dict = {}


def run_claim(cid):
    if cid not in _CACHE:
        _CACHE[cid] = claims.CLAIMS[cid]()
    return _CACHE[cid]


def evaluate(n):
    results = [run_claim(c) for c in claims.CRITERIA[n]]
    ok = all(r.passed for r in results)
    within = sum(r.seconds for r in results) < BUDGET.get(n, float("inf"))
    status = "PASS" if ok and within else "FAIL"
    detail = "; ".join(f"{r.claim} {'PASS' if r.passed else 'FAIL'} {json.dumps(r.values, sort_keys=True)}"
                       for r in results)
    line = f"criterion {n:2d}: {status} ({sum(r.seconds for r in results):.1f}s) {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok and within, results


@pytest.mark.parametrize("n", [1, 2, 3, 5, 6, 7, 8, 9, 10, 11, 12])
def test_criterion(n):
    ok, results = evaluate(n)
    assert ok, [r.line() for r in results]


def test_anomaly_indicators_each_under_one_second():
    r = run_claim("anomaly-indicators")
    assert all(v["under_1s"] for v in r.values.values())


@pytest.mark.xfail(strict=True, reason="spin-flip chain has an extra strong symmetry on odd sites; "
                                       "counts exceed the stated values")
def test_criterion_4():
    ok, results = evaluate(4)
    assert ok, [r.line() for r in results]


def test_criterion_4_parts_that_hold():
    for cid in ("steady-degeneracy-ex1", "steady-degeneracy-ex2"):
        assert run_claim(cid).passed
    # refining by the odd-site flip restores unique sectors at L=6
    assert run_claim("steady-degeneracy-ex3-refined").passed


@pytest.mark.xfail(strict=True, reason="gap in the q = L/4 sector is not monotone over L = 4, 6, 8")
def test_criterion_13():
    ok, results = evaluate(13)
    assert ok, [r.line() for r in results]


if __name__ == "__main__":
    for n in sorted(claims.CRITERIA):
        evaluate(n)
