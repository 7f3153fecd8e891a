"""Acceptance criteria at their stated tolerances, one pass/fail line each.

The lines are collected into the terminal summary (see conftest.py), so they
show without ``-s``. Criteria that do not hold are left failing on purpose.
Running this file directly prints the same lines.
"""

import sys

import pytest

from sptforge.acceptance import CRITERIA, default_config


@pytest.mark.acceptance
@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number, record_property):
    result = CRITERIA[number](default_config(seed=0))
    record_property("acceptance", result.line())
    print(result.line())
    assert result.passed, result.line()


if __name__ == "__main__":
    results = [CRITERIA[n](default_config(seed=0)) for n in sorted(CRITERIA)]
    for r in results:
        print(r.line())
    sys.exit(0 if all(r.passed for r in results) else 1)
