import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import strategies as st

from magvox.ingest import GeomRecord, MagRecord
from magvox.kinematics import MachineConfig
from magvox.voxel_model import merge_datasets

DATA = Path(__file__).parent / "data"


@pytest.fixture
def cfg():
    return MachineConfig()


@pytest.fixture
def data_dir():
    return DATA


def random_design(rng: np.random.Generator, n: int, extent: float = 40.0, name: str = "random"):
    """Distinct-position cubes scattered inside the default travel box with random directions."""
    ids = rng.permutation(np.arange(1, 10 * n + 1))[:n]
    mags, geoms = [], []
    for vid in ids:
        v = rng.normal(size=3)
        v /= np.linalg.norm(v)
        x, y = rng.uniform(-extent, extent, size=2)
        z = rng.choice(np.linspace(-extent, extent, 7))
        mags.append(MagRecord(int(vid), *map(float, v)))
        geoms.append(GeomRecord(int(vid), 0.05, 0.05, 0.05, float(x), float(y), float(z)))
    return merge_datasets(mags, geoms, name)


finite = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False, allow_infinity=False)
positive = st.floats(min_value=1e-6, max_value=1e3, allow_nan=False, allow_infinity=False)


@st.composite
def mag_records(draw, min_size=1, max_size=20):
    ids = draw(st.lists(st.integers(1, 10_000), min_size=min_size, max_size=max_size, unique=True))
    recs = []
    for i in ids:
        v = draw(st.tuples(finite, finite, finite).filter(lambda t: any(t)))
        recs.append(MagRecord(i, *v))
    return recs


@st.composite
def geom_records(draw, ids=None, min_size=1, max_size=20):
    if ids is None:
        ids = draw(st.lists(st.integers(1, 10_000), min_size=min_size, max_size=max_size, unique=True))
    return [GeomRecord(i, draw(positive), draw(positive), draw(positive), draw(finite), draw(finite), draw(finite)) for i in ids]


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.RESULTS:
        terminalreporter.write_line(line)
