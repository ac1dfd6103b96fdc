import numpy as np
import pytest
from hypothesis import strategies as st

from imputekit.dataset import Categorical, Column, MaskedDataset, Numeric

FIG1_CSV = "Age,Income,Gender\n33,NA,F\n18,12000,NA\nNA,13542,M\n"


@pytest.fixture
def fig1_path(tmp_path):
    path = tmp_path / "fig1.csv"
    path.write_text(FIG1_CSV)
    return path


def make_dataset(values, kinds, names=None):
    """Dataset from a value matrix and per-column kind tags ('num' or levels)."""
    values = np.asarray(values, dtype=np.float64)
    cols = []
    for j, kind in enumerate(kinds):
        name = names[j] if names else f"c{j}"
        if kind == "num":
            cols.append(Column(name=name, kind=Numeric()))
        else:
            cols.append(Column(name=name, kind=Categorical(tuple(kind))))
    return MaskedDataset(values=values, columns=cols)


@st.composite
def dataset_strategy(draw, min_rows=4, max_rows=14, max_cols=4, force_missing=True):
    """Small mixed-type datasets where every column keeps >= 1 observed cell."""
    n = draw(st.integers(min_rows, max_rows))
    d = draw(st.integers(2, max_cols))
    kinds = []
    for _ in range(d):
        if draw(st.booleans()):
            kinds.append("num")
        else:
            n_lev = draw(st.integers(1, 3))
            kinds.append(["a", "b", "c"][:n_lev])
    values = np.zeros((n, d))
    for j, kind in enumerate(kinds):
        if kind == "num":
            col = draw(
                st.lists(
                    st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False),
                    min_size=n, max_size=n,
                )
            )
            values[:, j] = col
        else:
            values[:, j] = draw(
                st.lists(st.integers(0, len(kind) - 1), min_size=n, max_size=n)
            )
    mask = np.zeros((n, d), dtype=bool)
    if force_missing:
        for j in range(d):
            holes = draw(st.lists(st.integers(0, n - 1), max_size=n - 1, unique=True))
            mask[holes, j] = True
    values = values.copy()
    values[mask] = np.nan
    return make_dataset(values, kinds)
