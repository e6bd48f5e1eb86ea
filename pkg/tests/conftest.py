from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parent.parent
_VERDICTS = {}


@pytest.fixture(scope="session")
def criterion():
    """Record the verdict of an acceptance criterion for the terminal summary."""

    def record(number, title, passed, detail=""):
        _VERDICTS[number] = (title, bool(passed), detail)
        return passed

    return record


@pytest.fixture(scope="session")
def grid():
    """Full 15-qubit experiment grid from configs/paper_15qubit.yaml, computed once."""
    from qknn_pipeline.cli import run_grid
    from qknn_pipeline.config import load_config
    from qknn_pipeline.data import load_dataset

    cfg = load_config(ROOT / "configs" / "paper_15qubit.yaml")
    datasets = [load_dataset(p) for p in cfg.datasets]
    results, skipped, _ = run_grid(cfg, datasets)
    by_method = {}
    for r in results:
        by_method.setdefault(r.method, []).append(r)
    return cfg, by_method, skipped


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_VERDICTS):
        title, passed, detail = _VERDICTS[number]
        line = f"[{'PASS' if passed else 'FAIL'}] {number:>2}. {title}"
        terminalreporter.write_line(line + (f" | {detail}" if detail else ""))
