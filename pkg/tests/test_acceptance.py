"""Acceptance criteria, one test each, at full size.

Every test prints a single ``[PASS]``/``[FAIL]`` line.  Set ``QRNGSIM_TIER=quick`` for the
reduced sizes used by ``qrngsim validate quick``.
"""
import os

import pytest

from qrngsim.validate import CHECKS

TIER = os.environ.get("QRNGSIM_TIER", "full")
CRITERIA = ["1", "1m", "2", "3a", "3b", "4a", "4b", "5", "6a", "6b", "7a", "7b", "7c", "8a", "8b", "8c", "9a", "9b", "9c"]

_cache: dict = {}


def outcome(criterion):
    group = criterion.rstrip("abcm")
    if group not in _cache:
        _cache[group] = {o.criterion: o for o in CHECKS[group](TIER)}
    return _cache[group][criterion]


@pytest.mark.slow
@pytest.mark.parametrize("criterion", CRITERIA)
def test_criterion(criterion, capsys):
    o = outcome(criterion)
    with capsys.disabled():
        print("\n" + o.line())
    assert o.passed, o.line()


def test_every_criterion_is_covered():
    produced = set()
    for group in CHECKS:
        produced |= {c for c in CRITERIA if c.rstrip("abcm") == group}
    assert produced == set(CRITERIA)
    assert set(CHECKS) == {c.rstrip("abcm") for c in CRITERIA}
