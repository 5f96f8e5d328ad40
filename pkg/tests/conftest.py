import sys
from pathlib import Path

import pytest

HERE = Path(__file__).resolve().parent
sys.path.insert(0, str(HERE))

FIXTURES = HERE / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir():
    return FIXTURES


@pytest.fixture(scope="session")
def synthetic_dataset(tmp_path_factory):
    """Small synthetic corpus + market data + config, written once per session."""
    from emospread.simulate import DGPSpec, write_synthetic_dataset

    root = tmp_path_factory.mktemp("synthetic")
    cfg = write_synthetic_dataset(DGPSpec(n_days=220), seed=11, outdir=root)
    return cfg
