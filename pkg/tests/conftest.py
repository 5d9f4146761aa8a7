import pytest

from reqharvest.synthetic import load_bundled_corpus, toy_corpus

_acceptance: dict = {}


def pytest_addoption(parser):
    parser.addoption("--pure-dataset", default=None,
                     help="path to the public PURE-derived dataset (JSONL) for the full-scale check")


@pytest.fixture
def pure_dataset_path(request):
    return request.config.getoption("--pure-dataset")


@pytest.fixture(scope="session")
def toy():
    return toy_corpus()


@pytest.fixture(scope="session")
def synthetic():
    return load_bundled_corpus()


def pytest_runtest_logreport(report):
    if report.when not in ("setup", "call") or (report.when == "setup" and report.passed):
        return
    key = _acceptance_key.get(report.nodeid)
    if key is None:
        return
    outcome = "PASS" if report.passed else "SKIP" if report.skipped else "FAIL"
    _acceptance.setdefault(key, []).append((report.nodeid.split("::", 1)[-1], outcome, report.duration))


_acceptance_key = {}


def pytest_collection_modifyitems(items):
    for item in items:
        marker = item.get_closest_marker("acceptance")
        if marker is not None:
            _acceptance_key[item.nodeid] = (marker.args[0], marker.kwargs.get("title", ""))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for (criterion, title), results in sorted(_acceptance.items(), key=lambda kv: int(kv[0][0][2:])):
        outcomes = [o for _, o, _ in results]
        overall = "FAIL" if "FAIL" in outcomes else "SKIP" if all(o == "SKIP" for o in outcomes) else "PASS"
        passed = outcomes.count("PASS")
        seconds = sum(d for *_, d in results)
        terminalreporter.write_line(
            f"{overall}  {criterion}  {title}  [{passed}/{len(results)} checks passed, {seconds:.2f}s]"
        )
        for name, outcome, _ in results:
            if outcome != "PASS":
                terminalreporter.write_line(f"        {outcome}  {name}")
