import os

import graphfb


def pytest_report_header(config):
    return f"graphfb from {os.path.dirname(graphfb.__file__)}"


def pytest_sessionstart(session):
    expected = os.environ.get("GRAPHFB_EXPECT_MODULE_DIR")
    if expected and not os.path.realpath(graphfb.__file__).startswith(os.path.realpath(expected)):
        raise RuntimeError(f"imported graphfb from {graphfb.__file__}, expected the build tree {expected}")
