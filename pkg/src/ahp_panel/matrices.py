"""Pairwise comparison matrix math.

Validation, group aggregation, column normalization, priority derivation
(column-normalize / row-average), and Saaty consistency checking. All
functions are pure and operate on `PairwiseMatrix` values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import DataError, UnsupportedOrderError

# Random inconsistency indices for reciprocal matrices of order n (Saaty).
RANDOM_INDEX = {
    1: 0.00, 2: 0.00, 3: 0.58, 4: 0.90, 5: 1.12,
    6: 1.24, 7: 1.32, 8: 1.41, 9: 1.45, 10: 1.49,
}

# Default reciprocity tolerance for externally loaded matrices. Published
# matrices are printed rounded to ~3 decimals, which perturbs a_ji vs 1/a_ij
# by up to ~7e-3; internally built matrices are exactly reciprocal.
RECIPROCITY_TOLERANCE = 0.01

CONSISTENCY_THRESHOLD = 0.1


class PairwiseMatrix:
    """Square matrix of pairwise judgment ratios with item labels.

    The constructor only enforces shape (square, n >= 2, labels unique and
    matching the order); judgment-level rules (positivity, unit diagonal,
    reciprocity) are checked by :func:`validate_pairwise` so that broken
    input files can still be represented and reported cell by cell.
    """

    __slots__ = ("labels", "values")

    def __init__(self, labels, values):
        labels = tuple(str(x) for x in labels)
        values = np.asarray(values, dtype=float)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise DataError(f"matrix must be square, got shape {values.shape}")
        n = values.shape[0]
        if n < 2:
            raise DataError("matrix order must be >= 2")
        if len(labels) != n:
            raise DataError(f"{len(labels)} labels for order-{n} matrix")
        if len(set(labels)) != n:
            raise DataError("labels must be unique")
        values = values.copy()
        values.setflags(write=False)
        self.labels = labels
        self.values = values

    @property
    def order(self) -> int:
        return self.values.shape[0]

    @classmethod
    def from_upper(cls, labels, upper) -> "PairwiseMatrix":
        """Build an exactly reciprocal matrix from upper-triangle judgments.

        ``upper`` is the row-major sequence of the n(n-1)/2 entries above the
        diagonal. The diagonal is set to 1 and the lower triangle to the exact
        reciprocals, so the result always passes validation with tolerance 0.
        """
        labels = tuple(labels)
        n = len(labels)
        expected = n * (n - 1) // 2
        upper = list(upper)
        if len(upper) != expected:
            raise DataError(f"expected {expected} upper-triangle values, got {len(upper)}")
        values = np.eye(n)
        k = 0
        for i in range(n):
            for j in range(i + 1, n):
                v = float(upper[k])
                if not (v > 0):
                    raise DataError(f"judgment ({i},{j}) must be positive, got {v}")
                values[i, j] = v
                values[j, i] = 1.0 / v
                k += 1
        return cls(labels, values)

    def permuted(self, perm) -> "PairwiseMatrix":
        """Return the matrix with rows/columns/labels reordered by ``perm``."""
        idx = list(perm)
        if sorted(idx) != list(range(self.order)):
            raise DataError("perm must be a permutation of 0..n-1")
        return PairwiseMatrix(
            [self.labels[i] for i in idx], self.values[np.ix_(idx, idx)]
        )

    def to_dict(self) -> dict:
        return {"labels": list(self.labels), "rows": [list(r) for r in self.values]}

    @classmethod
    def from_dict(cls, d: dict) -> "PairwiseMatrix":
        return cls(d["labels"], d["rows"])

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, PairwiseMatrix)
            and self.labels == other.labels
            and np.array_equal(self.values, other.values)
        )

    def __repr__(self) -> str:
        return f"PairwiseMatrix(order={self.order}, labels={list(self.labels)!r})"


@dataclass(frozen=True)
class PriorityVector:
    """Normalized weights over labeled items; weights sum to 1."""

    labels: tuple
    weights: tuple

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if len(self.labels) != len(self.weights):
            raise DataError("labels and weights differ in length")

    def as_dict(self) -> dict:
        return dict(zip(self.labels, self.weights))

    def __getitem__(self, label: str) -> float:
        return self.as_dict()[label]


@dataclass(frozen=True)
class ConsistencyReport:
    lambda_max: float
    ci: float
    ri: float
    cr: float
    consistent: bool

    def to_dict(self) -> dict:
        return {
            "lambda_max": self.lambda_max,
            "ci": self.ci,
            "ri": self.ri,
            "cr": self.cr,
            "consistent": self.consistent,
        }


@dataclass(frozen=True)
class Violation:
    code: str
    cell: tuple | None
    message: str


@dataclass(frozen=True)
class ValidationResult:
    violations: tuple = field(default_factory=tuple)

    @property
    def ok(self) -> bool:
        return not self.violations

    def raise_if_invalid(self):
        if self.violations:
            lines = "; ".join(v.message for v in self.violations)
            raise DataError(f"invalid pairwise matrix: {lines}")


def validate_pairwise(matrix: PairwiseMatrix, tolerance: float = RECIPROCITY_TOLERANCE) -> ValidationResult:
    """Check Saaty structure: positive entries, unit diagonal, reciprocity.

    Reciprocity of a pair is measured in whichever orientation is more
    favorable, i.e. ``min(|a_ji - 1/a_ij|, |a_ij - 1/a_ji|)``. Print-rounded
    data keeps more relative precision on the larger entry of a pair, so the
    one-sided deviation on the large side can exceed the tolerance even when
    the pair is just a rounded reciprocal.
    """
    a = matrix.values
    n = matrix.order
    violations = []
    for i in range(n):
        for j in range(n):
            v = a[i, j]
            if not math.isfinite(v) or v <= 0:
                violations.append(Violation(
                    "non-positive entry", (i, j),
                    f"non-positive entry ({i},{j}): {v}",
                ))
    for i in range(n):
        if a[i, i] != 1.0:
            violations.append(Violation(
                "diagonal", (i, i), f"diagonal entry ({i},{i}) is {a[i, i]}, expected 1",
            ))
    for i in range(n):
        for j in range(i + 1, n):
            if a[i, j] <= 0 or a[j, i] <= 0:
                continue  # already reported as non-positive
            dev = min(abs(a[j, i] - 1.0 / a[i, j]), abs(a[i, j] - 1.0 / a[j, i]))
            if dev > tolerance:
                violations.append(Violation(
                    "reciprocity", (i, j),
                    f"reciprocity breach at ({i},{j})/({j},{i}): "
                    f"{a[i, j]} vs {a[j, i]} (deviation {dev:.3g} > {tolerance:g})",
                ))
    return ValidationResult(tuple(violations))


def aggregate(matrices, method: str = "geometric", tolerance: float = RECIPROCITY_TOLERANCE) -> PairwiseMatrix:
    """Aggregate one matrix per expert into a group matrix, element-wise.

    ``geometric`` takes the element-wise E-th root of the product (the
    reciprocity-preserving rule); ``arithmetic`` the element-wise mean.
    All inputs must share order and label ordering and pass validation.
    """
    matrices = list(matrices)
    if not matrices:
        raise DataError("aggregate needs at least one matrix")
    if method not in ("geometric", "arithmetic"):
        raise DataError(f"unknown aggregation method {method!r}")
    first = matrices[0]
    for m in matrices:
        if m.order != first.order:
            raise DataError(f"order mismatch: {m.order} vs {first.order}")
        if m.labels != first.labels:
            raise DataError(f"label mismatch: {list(m.labels)} vs {list(first.labels)}")
        validate_pairwise(m, tolerance).raise_if_invalid()
    stack = np.stack([m.values for m in matrices])
    if method == "geometric":
        agg = np.exp(np.log(stack).mean(axis=0))
    else:
        agg = stack.mean(axis=0)
    np.fill_diagonal(agg, 1.0)
    return PairwiseMatrix(first.labels, agg)


def normalize_columns(matrix: PairwiseMatrix) -> np.ndarray:
    """Divide every entry by its column sum; columns of the result sum to 1."""
    a = matrix.values
    sums = a.sum(axis=0)
    if np.any(sums <= 0):
        raise DataError("column sums must be positive")
    return a / sums


def priority_vector(matrix: PairwiseMatrix) -> PriorityVector:
    """Row averages of the column-normalized matrix (sum to 1 by construction)."""
    w = normalize_columns(matrix).mean(axis=1)
    return PriorityVector(matrix.labels, w)


def lambda_max(matrix: PairwiseMatrix, weights: PriorityVector) -> float:
    """Principal-eigenvalue estimate: mean over i of (A w)_i / w_i.

    Equals n exactly for perfectly consistent matrices, and is >= n for any
    reciprocal matrix and positive weights.
    """
    if matrix.labels != weights.labels:
        raise DataError("weights were not derived from this matrix (label mismatch)")
    w = np.asarray(weights.weights)
    if np.any(w <= 0):
        raise DataError("weights must be strictly positive")
    return float(np.mean(matrix.values @ w / w))


def random_index(n: int) -> float:
    """Random inconsistency index RI for matrix order n (2..10)."""
    if not isinstance(n, int) or isinstance(n, bool):
        raise UnsupportedOrderError(f"order must be an integer, got {n!r}")
    if n < 2 or n > 10:
        raise UnsupportedOrderError(f"no random index tabulated for order {n}")
    return RANDOM_INDEX[n]


def consistency(matrix: PairwiseMatrix, threshold: float = CONSISTENCY_THRESHOLD) -> tuple:
    """Derive priorities and the consistency report for a matrix.

    Returns ``(PriorityVector, ConsistencyReport)``. Orders 2 and below are
    consistent by convention (CI = CR = 0); the supported range is 2..10.
    """
    n = matrix.order
    ri = random_index(n)
    weights = priority_vector(matrix)
    lam = lambda_max(matrix, weights)
    if n <= 2:
        ci = 0.0
        cr = 0.0
    else:
        ci = (lam - n) / (n - 1)
        cr = ci / ri
    return weights, ConsistencyReport(
        lambda_max=lam, ci=ci, ri=ri, cr=cr, consistent=cr < threshold
    )


def _format_cell(v: float) -> str:
    """Render a cell value, preferring small exact fractions.

    Integers render bare ("3"); values that are exactly p/q with q <= 9
    render as "p/q" so judgment-scale entries round-trip in their entered
    form; everything else uses repr, which round-trips float64 bit-exactly.
    """
    v = float(v)
    if v == int(v):
        return str(int(v))
    for q in range(2, 10):
        p = round(v * q)
        if p > 0 and p / q == v and math.gcd(p, q) == 1:
            return f"{p}/{q}"
    return repr(v)


def _parse_cell(token: str) -> float:
    token = token.strip()
    if "/" in token:
        frac = Fraction(token)
        return frac.numerator / frac.denominator
    return float(token)


def dump_matrix_csv(matrix: PairwiseMatrix, path) -> None:
    """Write the labeled-CSV matrix format (header row + label column)."""
    lines = ["," + ",".join(_quote(x) for x in matrix.labels)]
    for label, row in zip(matrix.labels, matrix.values):
        lines.append(_quote(label) + "," + ",".join(_format_cell(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_matrix_csv(path) -> PairwiseMatrix:
    """Read the labeled-CSV matrix format written by :func:`dump_matrix_csv`."""
    import csv

    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if len(rows) < 3:
        raise DataError(f"{path}: matrix CSV needs a header and at least 2 rows")
    header = [c.strip() for c in rows[0][1:]]
    labels = []
    values = []
    for r in rows[1:]:
        labels.append(r[0].strip())
        try:
            values.append([_parse_cell(c) for c in r[1:]])
        except (ValueError, ZeroDivisionError) as exc:
            raise DataError(f"{path}: bad cell in row {r[0]!r}: {exc}") from exc
    if labels != header:
        raise DataError(f"{path}: row labels {labels} do not match header {header}")
    try:
        return PairwiseMatrix(labels, values)
    except DataError as exc:
        raise DataError(f"{path}: {exc}") from exc


def _quote(label: str) -> str:
    if "," in label or '"' in label:
        return '"' + label.replace('"', '""') + '"'
    return label
