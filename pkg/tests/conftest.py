import numpy as np
import pytest

from core.config import parse_config_text
from core.grid import Grid


def config_text(n=33, t_end=0.25, A=0.5, B=0.8, r1=None, r2=None, extra=""):
    lines = [
        "[grid]", f"n = {n}",
        "[time]", f"t_end = {t_end}",
        "[initial_data]", f"A = {A}", f"B = {B}",
    ]
    if r1 is not None:
        lines.append(f"r1 = {r1}")
    if r2 is not None:
        lines.append(f"r2 = {r2}")
    return "\n".join(lines) + "\n" + extra


@pytest.fixture
def make_config():
    """RunConfig factory; N=17 needs a wider ring than the default."""
    def _make(**kwargs):
        if kwargs.get("n") == 17:
            kwargs.setdefault("r1", 0.2)
            kwargs.setdefault("r2", 0.8)
        return parse_config_text(config_text(**kwargs))
    return _make


@pytest.fixture
def grid17():
    return Grid(17)


@pytest.fixture
def grid33():
    return Grid(33)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
