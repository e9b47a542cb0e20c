"""Acceptance bookkeeping: one PASS/FAIL/SKIP line per criterion after the run."""

import pytest

_RESULTS = {}
_ORDER = {"FAIL": 3, "SKIP": 2, "PASS": 1}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if rep.when != "call" and not (rep.skipped or rep.failed):
        return
    cid, title = marker.args
    if rep.skipped:
        status, detail = "SKIP", str(rep.longrepr[2]) if isinstance(rep.longrepr, tuple) else ""
    elif rep.failed:
        crash = getattr(rep.longrepr, "reprcrash", None)
        status, detail = "FAIL", crash.message.splitlines()[0] if crash else ""
    else:
        status, detail = "PASS", ""
    prev = _RESULTS.get(cid)
    # a criterion split over several tests reports its worst outcome
    if prev is None or _ORDER[status] > _ORDER[prev[1]]:
        _RESULTS[cid] = (title, status, detail)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for cid in sorted(_RESULTS, key=lambda c: (int(c.rstrip("ab")), c)):
        title, status, detail = _RESULTS[cid]
        line = f"[{status}] criterion {cid}: {title}"
        if detail and status != "PASS":
            line += f"  ({detail[:160]})"
        tr.write_line(line)
