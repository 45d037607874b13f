import pytest

from instikit import corpus
from instikit.dsl import parse_model, resolve


@pytest.fixture(scope="session")
def atm_text():
    return corpus.text()


@pytest.fixture(scope="session")
def atm_model(atm_text):
    return resolve(parse_model(atm_text))


@pytest.fixture(scope="session")
def atm_system(atm_model):
    return atm_model.systems["AtmSystem"]


def mutate(text: str, old: str, new: str) -> str:
    assert old in text, old
    return text.replace(old, new)


def widened(text: str) -> str:
    """trialsNum gets room above 3 and the retry limit moves past it."""
    text = mutate(text, "var trialsNum: 0..3 = 0;", "var trialsNum: 0..7 = 0;")
    text = mutate(text, "trialsNum < 2", "trialsNum < 6")
    text = mutate(text, "trialsNum >= 2", "trialsNum >= 6")
    return mutate(text, "stimulus atm.PIN(3);", "stimulus atm.PIN(3);\n  stimulus atm.PIN(1);\n  stimulus atm.PIN(1);")


def double_verify(text: str) -> str:
    """The ATM also asks the bank as soon as a PIN arrives, so verify goes out twice."""
    return mutate(
        text,
        "on PIN(p) from CardEntered to PINEntered do pin := p;",
        "on PIN(p) from CardEntered to PINEntered do { pin := p; send bankCom.verify(cardId, p); }",
    )


# -- acceptance summary ------------------------------------------------------------
_CRITERIA: list[tuple[str, str, str]] = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if report.when == "call" or (report.when == "setup" and report.failed):
        label = "PASS" if report.passed else "FAIL"
        _CRITERIA.append((str(mark.args[0]), label, item.name))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for cid, label, name in _CRITERIA:
        terminalreporter.write_line(f"criterion {cid:<10} {label}  {name}")
