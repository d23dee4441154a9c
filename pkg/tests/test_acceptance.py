"""Acceptance suite: one test per criterion, each printing its pass/fail line.

Run on its own with ``pytest tests/test_acceptance.py -v -s`` or
``python tests/test_acceptance.py``.  Criterion CSVs go to a temporary
directory (or ``$HILBERT_ESCAPE_ACCEPTANCE_OUT`` when set).
"""

import math
import os
import sys
import time

import pytest
from conftest import ACCEPTANCE_LINES

from hilbert_escape.acceptance import (
    CRITERIA,
    DEFAULT_SEED,
    CriterionResult,
    format_result,
    run_acceptance,
    trajectory_sweep,
)
from hilbert_escape.partitions import relation_admissible

UNATTAINABLE = {
    3: ("unequal real rates: the inequality only holds up to slack -D log 2 "
        "(observed min -0.42 for Q(sqrt2) with rates 0.3, 0.1); see the decisions ledger"),
}


@pytest.fixture(scope="module")
def sweep():
    return trajectory_sweep(DEFAULT_SEED)


@pytest.fixture(scope="module")
def out_dir(tmp_path_factory):
    path = os.environ.get("HILBERT_ESCAPE_ACCEPTANCE_OUT")
    if path:
        os.makedirs(path, exist_ok=True)
        return path
    return str(tmp_path_factory.mktemp("acceptance"))


def _param(n):
    if n in UNATTAINABLE:
        return pytest.param(n, marks=pytest.mark.xfail(strict=True, reason=UNATTAINABLE[n]))
    return n


@pytest.mark.parametrize("number", [_param(n) for n in sorted(CRITERIA)])
def test_criterion(number, sweep, out_dir, capsys):
    name, fn = CRITERIA[number]
    t0 = time.perf_counter()
    if number in (2, 3, 4):
        ok, detail, data = fn(DEFAULT_SEED, out_dir, sweep)
    else:
        ok, detail, data = fn(DEFAULT_SEED, out_dir)
    line = format_result(CriterionResult(number, name, bool(ok), detail,
                                         time.perf_counter() - t0, data))
    ACCEPTANCE_LINES.append(line)
    with capsys.disabled():
        print("\n" + line)
    assert ok, line


def test_ratio_inequality_up_to_log2_slack(sweep):
    # every resolved profile clears -D log 2; equal rates and single places clear 0
    for tag, a, M, it in sweep:
        equal = len(set(a.rates)) == 1
        for prof in it.profiles:
            if prof.truncated or not prof.resolved:
                continue
            slack = relation_admissible(prof, prof.length, a)[1]
            assert slack > -a.D * math.log(2)
            if equal:
                assert slack > -1e-9, (tag, prof)


if __name__ == "__main__":
    results = run_acceptance(DEFAULT_SEED, os.environ.get("HILBERT_ESCAPE_ACCEPTANCE_OUT"),
                             echo=print)
    print(f"{sum(r.passed for r in results)}/{len(results)} criteria passed")
    sys.exit(0 if all(r.passed for r in results) else 1)
