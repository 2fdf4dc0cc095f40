"""Synthetic domain-adaptation problems and delimited feature-file ingestion."""

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataFormatError
from .regularizers import ClassGroups

UNKNOWN = -1
UNKNOWN_TOKENS = ("", "?", "NA", "nan")

# population centroid of the two moons below (uniform moon angles)
MOONS_CENTROID = (0.5, 0.25)


@dataclass(frozen=True)
class LabeledDataset:
    """Samples ``X`` (n x d) with integer class ids ``y``; ``-1`` marks an unknown label.

    ``classes[k]`` is the original name of class id ``k``.
    """

    X: np.ndarray
    y: np.ndarray
    classes: tuple = ()

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=np.float64))
        y = np.asarray(self.y, dtype=np.int64).ravel()
        if y.shape[0] != X.shape[0]:
            raise ValueError(f"{X.shape[0]} samples but {y.shape[0]} labels")
        classes = tuple(self.classes)
        if not classes:
            classes = tuple(range(int(y.max()) + 1)) if y.size and y.max() >= 0 else ()
        if y.size and y.max() >= len(classes):
            raise ValueError("label id without a class name")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "classes", classes)

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def dim(self):
        return self.X.shape[1]

    @property
    def known(self):
        return self.y != UNKNOWN

    @property
    def fully_labeled(self):
        return bool(self.known.all())

    @property
    def groups(self):
        if not self.fully_labeled:
            raise ValueError("class groups need every label")
        return ClassGroups.from_labels(self.y)

    def partial_labels(self):
        """Labels as a list with ``None`` for unknown entries."""
        return [None if v == UNKNOWN else int(v) for v in self.y]

    def subset(self, idx):
        return LabeledDataset(self.X[idx], self.y[idx], self.classes)

    def hide_labels(self, keep=None):
        """Copy with every label unknown except those at ``keep``."""
        y = np.full_like(self.y, UNKNOWN)
        if keep is not None:
            y[keep] = self.y[keep]
        return LabeledDataset(self.X, y, self.classes)


# --------------------------------------------------------------------------
# two moons

@dataclass(frozen=True)
class TwoMoonsSpec:
    n_per_class: int = 150
    rotation_degrees: float = 0.0
    noise_std: float = 0.1
    seed: int = 0
    n_test: int = 1000
    radius: float = 1.0
    second_center: tuple = (1.0, 0.5)

    def __post_init__(self):
        if self.n_per_class < 1:
            raise ValueError("n_per_class must be >= 1")
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")


def _moons(rng, counts, spec):
    parts, labels = [], []
    for label, count in enumerate(counts):
        t = rng.uniform(0.0, math.pi, count)
        if label == 0:
            pts = spec.radius * np.column_stack([np.cos(t), np.sin(t)])
        else:
            pts = np.asarray(spec.second_center) - spec.radius * np.column_stack(
                [np.cos(t), np.sin(t)])
        parts.append(pts)
        labels.append(np.full(count, label))
    X = np.vstack(parts)
    X += spec.noise_std * rng.standard_normal(X.shape)
    return X, np.concatenate(labels)


def rotate(X, degrees, center=MOONS_CENTROID):
    theta = math.radians(degrees)
    R = np.array([[math.cos(theta), -math.sin(theta)],
                  [math.sin(theta), math.cos(theta)]])
    c = np.asarray(center)
    return (X - c) @ R.T + c


def two_moons(spec):
    """Source, rotated target and rotated test draws of the two-moons problem.

    Moon 0 is the upper unit half circle, moon 1 the lower half circle
    centred at ``second_center``. Target and test samples are rotated by
    ``rotation_degrees`` about the population centroid (0.5, 0.25). One
    generator seeded with ``spec.seed`` draws source, target, test in
    that order.
    """
    rng = np.random.default_rng(spec.seed)
    n = spec.n_per_class
    Xs, ys = _moons(rng, (n, n), spec)
    Xt, yt = _moons(rng, (n, n), spec)
    half = spec.n_test // 2
    Xe, ye = _moons(rng, (half, spec.n_test - half), spec)
    Xt = rotate(Xt, spec.rotation_degrees)
    Xe = rotate(Xe, spec.rotation_degrees)
    return (LabeledDataset(Xs, ys), LabeledDataset(Xt, yt), LabeledDataset(Xe, ye))


# --------------------------------------------------------------------------
# affine recovery instances

def random_rotation(d, rng):
    Q, R = np.linalg.qr(rng.standard_normal((d, d)))
    return Q * np.sign(np.diag(R))


def affine_instance(n, d, seed=0, spd_spectrum=(0.5, 2.0)):
    """Distinct source samples and their image under x -> A x + b with A SPD.

    Returns
    -------
    Xs : ndarray (n, d)
    A : ndarray (d, d)
        Q' diag(s) Q, s drawn uniformly in ``spd_spectrum``.
    b : ndarray (d,)
    Xt : ndarray (n, d)
    """
    lo, hi = spd_spectrum
    if not (lo > 0 and hi >= lo):
        raise ValueError("spectrum must be strictly positive")
    rng = np.random.default_rng(seed)
    Xs = rng.standard_normal((n, d))
    while np.unique(Xs, axis=0).shape[0] < n:
        Xs = rng.standard_normal((n, d))
    Q = random_rotation(d, rng)
    A = Q.T @ np.diag(rng.uniform(lo, hi, d)) @ Q
    A = 0.5 * (A + A.T)
    b = rng.standard_normal(d)
    return Xs, A, b, Xs @ A.T + b


# --------------------------------------------------------------------------
# gaussian blobs under an affine shift

def shifted_blobs(n_classes=10, n_per_class=30, d=10, seed=0, center_scale=3.0,
                  cluster_std=1.0, spd_spectrum=(0.6, 1.6), shift_scale=5.0,
                  n_test_per_class=30):
    """Labelled Gaussian clusters (source) and the same clusters moved by x -> A x + b.

    A is a random SPD matrix (spectrum in ``spd_spectrum``) and b a random
    offset of norm ``shift_scale * center_scale``. Returns source, target and
    an independent target-distribution test set.
    """
    rng = np.random.default_rng(seed)
    centers = center_scale * rng.standard_normal((n_classes, d))
    Q = random_rotation(d, rng)
    A = Q.T @ np.diag(rng.uniform(*spd_spectrum, d)) @ Q
    direction = rng.standard_normal(d)
    b = shift_scale * center_scale * direction / np.linalg.norm(direction)

    def draw(per_class):
        y = np.repeat(np.arange(n_classes), per_class)
        X = centers[y] + cluster_std * rng.standard_normal((y.size, d))
        return X, y

    Xs, ys = draw(n_per_class)
    Xt, yt = draw(n_per_class)
    Xe, ye = draw(n_test_per_class)
    return (LabeledDataset(Xs, ys), LabeledDataset(Xt @ A.T + b, yt),
            LabeledDataset(Xe @ A.T + b, ye))


# --------------------------------------------------------------------------
# delimited text files

def _sniff_delimiter(line):
    return "\t" if "\t" in line else ","


def _read_rows(path, delimiter, header):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"missing file: {path}")
    with path.open(newline="") as fh:
        text = fh.read()
    lines = text.splitlines()
    first = next((ln for ln in lines if ln.strip()), None)
    if first is None:
        raise DataFormatError(f"no samples in {path}")
    delim = delimiter or _sniff_delimiter(first)
    rows = []
    skip_header = header
    for lineno, row in enumerate(csv.reader(lines, delimiter=delim), start=1):
        if not row or all(not cell.strip() for cell in row):
            continue
        if skip_header:
            skip_header = False
            continue
        rows.append((lineno, [cell.strip() for cell in row]))
    if not rows:
        raise DataFormatError(f"no samples in {path}")
    width = len(rows[0][1])
    for lineno, row in rows:
        if len(row) != width:
            raise DataFormatError(f"ragged row: expected {width} fields, got {len(row)}",
                                  line=lineno)
    return rows


def _parse_floats(cells, lineno):
    out = []
    for col, cell in enumerate(cells, start=1):
        try:
            val = float(cell)
        except ValueError:
            raise DataFormatError(f"non-numeric feature {cell!r} in column {col}",
                                  line=lineno) from None
        if not math.isfinite(val):
            raise DataFormatError(f"non-finite feature {cell!r} in column {col}",
                                  line=lineno)
        out.append(val)
    return out


def load_matrix(path, delimiter=None, header=False):
    """Read a purely numeric delimited file into an (n, d) array."""
    rows = _read_rows(path, delimiter, header)
    return np.array([_parse_floats(cells, ln) for ln, cells in rows])


def load_labeled(path, delimiter=None, header=False, classes=()):
    """Read features plus a final label column.

    Labels are arbitrary strings interned to integer ids in order of first
    appearance, continuing from ``classes`` (pass the source vocabulary
    when loading a target file). Empty, ``?``, ``NA`` and ``nan`` labels
    are unknown.
    """
    rows = _read_rows(path, delimiter, header)
    if len(rows[0][1]) < 2:
        raise DataFormatError("need at least one feature column and a label column",
                              line=rows[0][0])
    names = list(classes)
    index = {name: k for k, name in enumerate(names)}
    X, y = [], []
    for lineno, cells in rows:
        X.append(_parse_floats(cells[:-1], lineno))
        label = cells[-1]
        if label in UNKNOWN_TOKENS:
            y.append(UNKNOWN)
            continue
        if label not in index:
            index[label] = len(names)
            names.append(label)
        y.append(index[label])
    return LabeledDataset(np.array(X), np.array(y, dtype=np.int64), tuple(names))


def save_labeled(path, dataset, delimiter=","):
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        for x, lab in zip(dataset.X, dataset.y):
            name = "?" if lab == UNKNOWN else dataset.classes[lab]
            writer.writerow([repr(float(v)) for v in x] + [name])


def save_matrix(path, X, delimiter=","):
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        for row in np.atleast_2d(X):
            writer.writerow([repr(float(v)) for v in row])
