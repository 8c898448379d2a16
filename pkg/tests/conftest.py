import csv

import numpy as np
import pytest

from batterylife import synthgen, telemetry

# (criterion number, title, passed, detail) appended by test_acceptance
ACCEPTANCE_LOG = []


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    return path


@pytest.fixture
def clean_rows():
    rng = np.random.default_rng(3)
    vals = rng.uniform(1.0, 50.0, size=(5, 18))
    vals[:, 0] = [50.0, 40.0, 30.0, 20.0, 10.0]
    return vals


@pytest.fixture
def frame_from(clean_rows):
    def make(values=None, eid="expA"):
        v = clean_rows if values is None else values
        return telemetry.TelemetryFrame(eid, np.array(v, dtype=float))
    return make


@pytest.fixture(scope="session")
def small_corpus():
    return synthgen.generate_corpus(
        synthgen.SynthConfig(n_experiments=3, rows_per_experiment=600, seed=11)
    )


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LOG:
        return
    terminalreporter.section("acceptance criteria")
    for num, title, ok, detail in sorted(ACCEPTANCE_LOG, key=lambda r: r[0]):
        status = {True: "PASS", False: "FAIL", None: "INFO"}[ok]
        terminalreporter.write_line(f"[{status}] criterion {num}: {title} ({detail})")
