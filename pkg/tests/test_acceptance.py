"""Acceptance criteria C1-C10, each at its stated tolerance and runtime budget.

Every check prints one ``[PASS]``/``[FAIL]`` line. C5 and C8 are expected to
fail; see the README for the analysis.
"""

import json

import pytest

from anharmonic.acceptance import CHECKS


@pytest.fixture(scope="module")
def cold_cache(tmp_path_factory):
    from anharmonic.quantum import SpectrumCache
    return SpectrumCache(tmp_path_factory.mktemp("acceptance-cache"))


@pytest.mark.parametrize("check", CHECKS, ids=[c.key for c in CHECKS])
def test_criterion(check, cold_cache, capsys):
    kw = {"cache": cold_cache} if check.key in ("C7", "C10") else {}
    result = check(**kw)
    with capsys.disabled():
        print("\n" + result.line())
        print("    " + json.dumps(result.details, default=str)[:600])
    assert result.passed, f"{result.key} failed: {result.details}"
