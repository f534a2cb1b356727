from pathlib import Path

import numpy as np
import pytest

import rmppi

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "fixtures"
CONFIGS = ROOT / "configs"


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def app_config(tmp_path, monkeypatch):
    """Point the app configuration at an empty directory."""
    monkeypatch.setattr(rmppi, "config_dir", tmp_path / "app")
    monkeypatch.setattr(rmppi, "config_file", tmp_path / "app" / "config.ini")
    monkeypatch.setitem(rmppi.config["paths"], "output_dir", str(tmp_path / "runs"))
    return tmp_path / "app"
