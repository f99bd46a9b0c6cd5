import numpy as np
import pytest

from kbi.blau_space import DimSchema, Population, Site
from kbi.kernel_graph import Graph


def line_population(z, n=1, dim="z"):
    """One scalar dimension, site i at coordinate z[i] holding n spins."""
    sizes = np.broadcast_to(n, len(z))
    return Population(
        tuple(Site(str(i), (float(v),), int(k)) for i, (v, k) in enumerate(zip(z, sizes))),
        DimSchema((dim,)),
    )


def random_graph(N, p, rng):
    iu = np.triu_indices(N, 1)
    keep = rng.random(len(iu[0])) < p
    return Graph(np.column_stack([iu[0][keep], iu[1][keep]]), N)


@pytest.fixture
def write_csv(tmp_path):
    def _write(text, name="pop.csv"):
        p = tmp_path / name
        p.write_text(text, encoding="utf-8")
        return p

    return _write
