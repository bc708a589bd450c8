import pytest


@pytest.hookimpl(tryfirst=True, hookwrapper=True)
def pytest_runtest_makereport(item, call):
    # expose per-phase reports so fixtures can see the test outcome
    outcome = yield
    rep = outcome.get_result()
    setattr(item, "rep_" + rep.when, rep)
