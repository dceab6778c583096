import sys

import numpy as np
import pandas as pd
import pytest

from fairrank.dataset import Dataset


def random_dataset(n, n_legit, n_protected=1, seed=0, labels=True, categorical=False,
                   integer=True):
    """Mixed-direction dataset with labels loosely driven by the features."""
    rng = np.random.default_rng(seed)
    cols, directions = {}, {}
    for ell in range(n_legit):
        x = rng.integers(0, 6, n).astype(float) if integer else rng.normal(size=n)
        cols[f"x{ell}"] = x
        directions[f"x{ell}"] = "up" if ell % 3 else "down"
    protected = []
    for k in range(n_protected):
        name = f"a{k}"
        if categorical and k == 0:
            cols[name] = rng.choice(["p", "q", "r"], n)
        else:
            cols[name] = rng.integers(0, 2, n)
        protected.append(name)
    frame = pd.DataFrame(cols)
    y = None
    if labels:
        signed = np.column_stack([cols[f"x{ell}"] * (1 if ell % 3 else -1)
                                  for ell in range(n_legit)])
        score = signed.sum(axis=1) + rng.normal(scale=2.0, size=n)
        y = score > np.median(score)
        if y.all() or not y.any():
            y[0] = not y[0]
    return Dataset.from_frame(frame, directions, protected, labels=y,
                              ids=np.arange(1, n + 1))


@pytest.fixture
def small_dataset():
    return random_dataset(120, 3, seed=1)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda l: int(l.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
