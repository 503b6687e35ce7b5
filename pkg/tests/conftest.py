import pathlib

import pytest

from ragforge.backend import MockBackend
from ragforge.config import EngineConfig
from ragforge.engine import Engine

DATA_DIR = pathlib.Path(__file__).parent / "data"
CORPUS_DIR = DATA_DIR / "corpus"


@pytest.fixture
def data_dir() -> pathlib.Path:
    return DATA_DIR


@pytest.fixture
def corpus_dir() -> pathlib.Path:
    return CORPUS_DIR


def make_engine(tmp_path, *, backend=None, ingest=True, **config_overrides) -> Engine:
    """Engine on a throwaway index directory with the default mock backend."""
    config = EngineConfig()
    config.index.directory = str(tmp_path / "index")
    for dotted, value in config_overrides.items():
        section_name, key = dotted.split("__")
        setattr(getattr(config, section_name), key, value)
    engine = Engine(config, backend=backend or MockBackend())
    if ingest:
        engine.ingest(CORPUS_DIR)
    return engine


@pytest.fixture
def engine(tmp_path) -> Engine:
    return make_engine(tmp_path)
