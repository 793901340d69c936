"""The ten acceptance criteria, one test each.

Every test prints its ``[PASS]``/``[FAIL]`` line (measured values and wall
time against the budget) even when pytest captures output.
"""

import pytest

from bersmetrics.acceptance import CRITERIA


@pytest.mark.slow
@pytest.mark.parametrize("check", CRITERIA, ids=[f"criterion_{k:02d}_{c.__name__}"
                                                 for k, c in enumerate(CRITERIA, start=1)])
def test_criterion(check, capsys):
    res = check()
    with capsys.disabled():
        print("\n" + res.line())
    assert res.passed, res.to_dict()
    assert res.within_budget, f"{res.elapsed:.1f}s exceeds the {res.budget:.0f}s budget"
