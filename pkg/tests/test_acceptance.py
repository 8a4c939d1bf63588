"""One test per acceptance criterion; each prints its PASS/FAIL line."""

import pytest

from planar_riccati.acceptance import CRITERIA, run_criterion


@pytest.mark.parametrize("number", [c[0] for c in CRITERIA], ids=[f"criterion_{c[0]:02d}" for c in CRITERIA])
def test_criterion(number, acceptance_log, capsys):
    result = run_criterion(number, seed=0)
    acceptance_log.append(result.line())
    with capsys.disabled():
        print(f"\n{result.line()}")
    assert result.passed, result.details
