"""Synthetic benchmark mixtures, data generation and CSV input/output.

Seeding rule: a run seeded with ``seed`` derives the generator for
replication ``r`` from ``numpy.random.SeedSequence(seed, spawn_key=(r,))``
feeding a PCG64 bit generator. This is what ``SeedSequence(seed).spawn``
produces, so child streams are independent and identical on every platform.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import EmptyFile, ParseError
from .mixture import MixtureModel, _atomic_write, sample_mixture


def make_rng(seed, *key):
    """PCG64 generator for ``seed`` and an optional child key path."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=tuple(key))))


def child_seed(seed, r):
    """Integer seed for replication ``r``; stable across platforms."""
    return int(np.random.SeedSequence(seed, spawn_key=(r,)).generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class DatasetSpec:
    truth: MixtureModel
    n: int
    seed: int = 0
    name: str = "custom"

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be at least 1")

    def with_seed(self, seed):
        return replace(self, seed=seed)

    def with_n(self, n):
        return replace(self, n=n)


def example1_truth():
    # the off-diagonals are the rounded values as printed, not an exact rotation
    weights = np.full(3, 1.0 / 3.0)
    means = np.array([[-1.0, 1.0], [1.0, 1.0], [0.0, -math.sqrt(2.0)]])
    covs = np.array(
        [
            [[0.65, 0.7794], [0.7794, 1.55]],
            [[0.65, -0.7794], [-0.7794, 1.55]],
            [[2.0, 0.0], [0.0, 0.2]],
        ]
    )
    return MixtureModel(weights, means, covs)


def example2_truth():
    weights = np.array([0.3, 0.3, 0.3, 0.1])
    means = np.array([[-2.0, -2.0], [-2.0, -2.0], [2.0, 0.0], [1.0, -4.0]])
    covs = np.array(
        [
            [[0.1, 0.0], [0.0, 0.2]],
            [[2.0, 2.0], [2.0, 7.0]],
            [[0.5, 0.0], [0.0, 4.0]],
            [[0.125, 0.0], [0.0, 0.125]],
        ]
    )
    return MixtureModel(weights, means, covs)


def example1_spec(n=600, seed=0):
    """Three rotated copies of N(0, diag(2, 0.2)) in a triangle, equal weights."""
    return DatasetSpec(example1_truth(), n, seed, name="example1")


def example2_spec(n=1000, seed=0):
    """Four overlapping components, two of them sharing the mean (-2, -2)."""
    return DatasetSpec(example2_truth(), n, seed, name="example2")


def single_gaussian_spec(n=1000, seed=0):
    """One bivariate standard normal, the setting of the weight-profile diagnostic."""
    truth = MixtureModel(np.ones(1), np.zeros((1, 2)), np.eye(2)[None])
    return DatasetSpec(truth, n, seed, name="single")


def generate(spec):
    return sample_mixture(spec.truth, spec.n, make_rng(spec.seed))


def load_csv(path, has_header=False, columns=None):
    """Read comma-separated numeric rows into an (n, d) array.

    ``columns`` selects column indices. Rows are numbered from 1 in error
    messages, counting the header line if present.
    """
    text = Path(path).read_text()
    return parse_csv(text, has_header=has_header, columns=columns)


def parse_csv(text, has_header=False, columns=None):
    reader = csv.reader(io.StringIO(text))
    rows = []
    width = None
    for lineno, row in enumerate(reader, start=1):
        if has_header and lineno == 1:
            continue
        if not row or all(not c.strip() for c in row):
            continue
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise ParseError(f"row {lineno} has {len(row)} fields, expected {width}", row=lineno)
        picked = columns if columns is not None else range(len(row))
        vals = []
        for col in picked:
            if col >= len(row) or col < -len(row):
                raise ParseError(f"row {lineno} has no column {col}", row=lineno, column=col)
            cell = row[col].strip()
            try:
                v = float(cell)
            except ValueError:
                raise ParseError(
                    f"row {lineno}, column {col}: non-numeric value {cell!r}",
                    row=lineno,
                    column=col,
                ) from None
            if not math.isfinite(v):
                raise ParseError(f"row {lineno}, column {col}: non-finite value", row=lineno, column=col)
            vals.append(v)
        rows.append(vals)
    if not rows:
        raise EmptyFile("no data rows")
    return np.array(rows, dtype=float)


def to_csv_text(data, header=None):
    data = np.asarray(data, dtype=float)
    lines = []
    if header:
        lines.append(",".join(header))
    for row in data:
        lines.append(",".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def save_csv(path, data, header=None):
    _atomic_write(path, to_csv_text(data, header))
