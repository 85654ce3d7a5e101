import pytest

from mdagid.examples import load_example


@pytest.fixture(scope="session")
def graphs():
    names = ["fig1b", "fig1d", "fig2a-naive", "fig2c", "fig2d", "fig3a", "fig4a", "perm2"]
    return {n: load_example(n) for n in names}
