from __future__ import annotations

import pytest

# Acceptance criteria get one human-readable pass/fail line each at the end
# of the run (see test_acceptance.py for the criterion bodies).
ACCEPTANCE_LABELS = {
    "test_dsl_round_trip_and_fuzz": "dsl round-trip and fuzz",
    "test_quantization_bounds": "quantization round-trip and error bound",
    "test_corpus_shape": "corpus sizes, validity, and determinism",
    "test_geometry_oracle_equivalence": "geometric oracle equivalence",
    "test_scale_trichotomy": "scale trichotomy",
    "test_aggregation_arithmetic": "aggregation arithmetic on reference rows",
    "test_golden_end_to_end": "golden end-to-end run",
    "test_statistics_oracles": "agreement statistics vs naive oracles",
    "test_offline_program_generation": "offline program generation",
}


def _criterion(nodeid: str) -> str | None:
    if "test_acceptance.py::" not in nodeid:
        return None
    name = nodeid.split("::")[-1]
    name = name.split("[")[0]
    return name if name in ACCEPTANCE_LABELS else None


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    outcomes: dict[str, bool] = {}
    for status, ok in (("passed", True), ("failed", False), ("error", False)):
        for rep in terminalreporter.stats.get(status, []):
            name = _criterion(getattr(rep, "nodeid", ""))
            if name is None:
                continue
            outcomes[name] = outcomes.get(name, True) and ok
    if not outcomes:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name, label in ACCEPTANCE_LABELS.items():
        if name in outcomes:
            verdict = "PASS" if outcomes[name] else "FAIL"
            terminalreporter.write_line(f"{verdict}  {label}")


@pytest.fixture()
def no_network(monkeypatch):
    """Make any socket creation explode for the duration of a test."""
    import socket

    def _blocked(*args, **kwargs):
        raise AssertionError("network access attempted during an offline test")

    monkeypatch.setattr(socket, "socket", _blocked)
    monkeypatch.setattr(socket, "create_connection", _blocked)
