import sys
from pathlib import Path

import pytest

HERE = Path(__file__).parent
FAKE_ADAPTER = HERE / "fake_adapter.py"

_ACCEPTANCE = "test_acceptance.py"


def adapter_cmd(mode: str = "identity", *extra) -> str:
    parts = [sys.executable, str(FAKE_ADAPTER), mode, *map(str, extra)]
    return " ".join(f'"{p}"' if " " in p else p for p in parts)


@pytest.fixture
def fake_adapter():
    return adapter_cmd


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if _ACCEPTANCE not in item.nodeid:
        return
    failed = rep.failed
    if rep.when == "call" or (failed and rep.when == "setup"):
        doc = (item.function.__doc__ or item.name).strip().splitlines()[0]
        callspec = getattr(item, "callspec", None)
        if callspec is not None:
            doc += f" [{callspec.id}]"
        results = item.config.stash.setdefault(_results_key, {})
        results[item.nodeid] = (doc, not failed and not rep.skipped, rep.duration)


_results_key = pytest.StashKey[dict]()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash.get(_results_key, {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for doc, ok, duration in results.values():
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {doc}  ({duration:.2f}s)")
