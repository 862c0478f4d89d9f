import numpy as np
import pytest

from app.core.config import get_settings
from app.utils import store as store_module

def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run full-scale benchmark checks")

def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)

@pytest.fixture(autouse=True)
def isolated_env(tmp_path, monkeypatch):
    """Point settings, the run ledger and outputs at a per-test directory."""
    monkeypatch.setenv("EDGERES_DB_PATH", str(tmp_path / "ledger.db"))
    monkeypatch.setenv("EDGERES_OUTPUT_DIR", str(tmp_path / "results"))
    monkeypatch.setenv("EDGERES_WORKERS", "1")
    get_settings.cache_clear()
    monkeypatch.setattr(store_module, "_store_instance", None)
    yield tmp_path
    get_settings.cache_clear()

@pytest.fixture
def rng():
    return np.random.default_rng(1234)
