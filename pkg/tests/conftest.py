from __future__ import annotations

import json
from pathlib import Path

import pytest

DATA = Path(__file__).parent / "data"


def minimal_annotation(**overrides) -> dict:
    raw = {
        "dataset_id": "toy",
        "dataset_name": "Toy",
        "is_accessible": "public",
        "format": "delimited",
        "sensitive_attributes": ["sex"],
        "sensitive_categories": {"sex": ["m", "f"]},
        "feature_selector": "all",
        "target_column": "y",
        "license_permissive": True,
        "country": ["USA"],
        "domain": "finance",
    }
    raw.update(overrides)
    return raw


def manifest_text(*annotations: dict) -> str:
    return json.dumps({"schema_version": "1", "datasets": list(annotations)})


@pytest.fixture
def cache_dir(tmp_path, monkeypatch):
    path = tmp_path / "cache"
    monkeypatch.setenv("FAIRCORPUS_CACHE", str(path))
    return path


@pytest.fixture
def data_dir() -> Path:
    return DATA


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    if module is not None and module.VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in module.VERDICTS:
            terminalreporter.write_line(line)
