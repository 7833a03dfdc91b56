"""Acceptance matrix: one test per criterion, each printing a single pass/fail line."""
import pytest

from wkam.acceptance import CRITERIA


@pytest.mark.slow
@pytest.mark.parametrize("criterion", CRITERIA, ids=[f"criterion_{i + 1}" for i in range(len(CRITERIA))])
def test_criterion(criterion, acceptance_log):
    result = criterion()
    line = f"{result.line()} ({result.seconds:.1f} s)"
    print(line)
    acceptance_log.append(line)
    assert result.passed, f"{line}\n{result.values}"
