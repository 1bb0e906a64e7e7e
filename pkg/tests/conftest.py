import os

from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

# criterion id -> list of (label, passed, detail), filled by test_acceptance
ACCEPTANCE = {}


def record(criterion, label, passed, detail=""):
    ACCEPTANCE.setdefault(criterion, []).append((label, bool(passed), detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for crit in sorted(ACCEPTANCE):
        rows = ACCEPTANCE[crit]
        ok = all(p for _, p, _ in rows)
        tr.write_line(f"criterion {crit}: {'PASS' if ok else 'FAIL'} ({sum(p for _, p, _ in rows)}/{len(rows)} checks)")
        for label, p, detail in rows:
            if not p:
                tr.write_line(f"    FAIL {label}: {detail}")
