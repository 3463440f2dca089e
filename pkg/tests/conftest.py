import pytest

from hyperlab.core import config
from hyperlab.services import storage


@pytest.fixture(autouse=True)
def isolated_state(tmp_path, monkeypatch):
    """Every test gets its own run-history database and no spectral cache."""
    db = tmp_path / "runs.db"
    monkeypatch.setattr(config, "DB_PATH", str(db))
    monkeypatch.setattr(config, "CACHE_DIR", "")
    monkeypatch.setattr(config, "ENABLE_PDF_REPORT", False)
    storage.init_db(str(db))
    return db


@pytest.fixture
def out_dir(tmp_path):
    path = tmp_path / "runs"
    path.mkdir()
    return path
