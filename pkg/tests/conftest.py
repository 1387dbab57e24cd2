import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from wsfbm.quadrature import QuadConfig


@pytest.fixture(scope="session")
def tight_cfg():
    return QuadConfig(abs_tol=1e-12, rel_tol=1e-11, max_subdiv=4000)


@pytest.fixture(scope="session")
def loose_cfg():
    return QuadConfig(abs_tol=1e-9, rel_tol=1e-8, max_subdiv=1000)
