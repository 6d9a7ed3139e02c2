import csv

import numpy as np
import pytest

from traceplots.aggregate import SCHEMA


def write_trace(path, n_rows=5, evals_step=62, seed=0, evals=None):
    """Synthesize a schema-conforming trace CSV with decaying norm_gap."""
    rng = np.random.default_rng(seed)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SCHEMA)
        for k in range(n_rows):
            gap = float(np.exp(-0.5 * k) * (1 + 0.05 * rng.standard_normal()))
            writer.writerow([
                k, evals[k] if evals is not None else k * evals_step,
                1000 * k, repr(gap * 3.0), repr(gap * 3.0), repr(gap),
                repr(gap * 2.0), repr(gap * 0.5), repr(gap * 0.1), 0])
    return path


@pytest.fixture
def trace_dir(tmp_path):
    out = tmp_path / "runs"
    out.mkdir()
    for r in range(4):
        write_trace(out / f"run_{r:02d}.csv", seed=r)
    return out
