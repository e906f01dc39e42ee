"""Runs every acceptance criterion at its stated tolerance.

Each criterion prints one PASS/FAIL line; the lines are repeated in an
"acceptance criteria" section of the terminal summary.
"""

import pytest

from ctxlearn.acceptance import CRITERIA

from conftest import ACCEPTANCE_LINES


@pytest.mark.parametrize("criterion", CRITERIA, ids=[f"criterion_{i}" for i in range(1, len(CRITERIA) + 1)])
def test_criterion(criterion):
    result = criterion()
    ACCEPTANCE_LINES.append(result.line())
    print(result.line())
    assert result.passed, result.line()
