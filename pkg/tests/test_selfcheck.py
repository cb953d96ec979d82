"""The runtime invariant suite passes, filters, and contains failures."""

import ncym.selfcheck as sc


def test_all_checks_pass():
    results = sc.run_selfcheck()
    failed = [r for r in results if not r.passed]
    assert failed == []
    assert len(results) >= 20


def test_module_filter():
    results = sc.run_selfcheck("yang_mills")
    assert results
    assert all(r.module == "yang_mills" for r in results)


def test_unknown_filter_is_empty():
    assert sc.run_selfcheck("no_such_module") == []


def test_crashing_check_is_reported_not_raised(monkeypatch):
    def boom():
        raise RuntimeError("synthetic failure")

    monkeypatch.setattr(sc, "_CHECKS", [("demo", "explodes", boom)])
    (result,) = sc.run_selfcheck()
    assert not result.passed
    assert "synthetic failure" in result.detail


def test_format_table_summarizes():
    results = sc.run_selfcheck("lie_core")
    text = sc.format_table(results)
    assert "pass" in text
    assert text.strip().endswith("0 failed")
