"""Balanced longitudinal panels and their CSV representation.

A panel holds ``m`` subjects, each observed ``n`` times on a response and
``p`` covariates. Internally everything is stored as dense arrays, ``X`` of
shape ``(m, n, p)`` and ``y`` of shape ``(m, n)``, which is the layout the
estimation kernels consume directly.

The on-disk format is long CSV with one observation per row::

    id,time,y,x1,...,xp
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .errors import BalanceError, EmptyPanelError, ParseError, SchemaError


@dataclass(frozen=True)
class Subject:
    id: str
    X: np.ndarray
    y: np.ndarray


@dataclass(frozen=True)
class CsvSchema:
    """Column names used when reading a panel.

    ``covariates=None`` means every column other than id, time and response,
    in file order. ``time=None`` keeps the file order within each subject.
    """

    id: str = "id"
    time: str | None = "time"
    response: str = "y"
    covariates: tuple[str, ...] | None = None


@dataclass(frozen=True, eq=False)
class Panel:
    ids: tuple[str, ...]
    X: np.ndarray
    y: np.ndarray
    covariate_names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        X = np.array(self.X, dtype=np.float64, order="C")
        y = np.array(self.y, dtype=np.float64, order="C")
        if X.ndim != 3 or y.ndim != 2:
            raise ValueError("X must be (m, n, p) and y must be (m, n)")
        m, n, p = X.shape
        if m < 1 or n < 1 or p < 1:
            raise EmptyPanelError(f"panel needs m, n, p >= 1, got {X.shape}")
        if y.shape != (m, n):
            raise BalanceError(f"y has shape {y.shape}, expected {(m, n)}")
        if len(self.ids) != m:
            raise ValueError(f"{len(self.ids)} ids for {m} subjects")
        if not (np.isfinite(X).all() and np.isfinite(y).all()):
            raise ParseError("panel contains non-finite values")
        X.flags.writeable = False
        y.flags.writeable = False
        names = tuple(self.covariate_names) or tuple(f"x{k + 1}" for k in range(p))
        if len(names) != p:
            raise ValueError(f"{len(names)} covariate names for p={p}")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "ids", tuple(str(i) for i in self.ids))
        object.__setattr__(self, "covariate_names", names)

    @property
    def m(self) -> int:
        return self.X.shape[0]

    @property
    def n(self) -> int:
        return self.X.shape[1]

    @property
    def p(self) -> int:
        return self.X.shape[2]

    @property
    def subjects(self) -> list[Subject]:
        return list(self)

    def __iter__(self) -> Iterator[Subject]:
        for i, sid in enumerate(self.ids):
            yield Subject(sid, self.X[i], self.y[i])

    def __len__(self) -> int:
        return self.m

    def take(self, indices: Sequence[int] | np.ndarray) -> "Panel":
        """Panel made of the given subjects, repeats allowed, in the given order."""
        idx = np.asarray(indices, dtype=np.intp)
        # rows of an already-validated panel; skip __post_init__
        X, y = self.X[idx], self.y[idx]
        X.flags.writeable = False
        y.flags.writeable = False
        out = object.__new__(Panel)
        for name, value in (
            ("ids", tuple(map(self.ids.__getitem__, idx.tolist()))),
            ("X", X),
            ("y", y),
            ("covariate_names", self.covariate_names),
        ):
            object.__setattr__(out, name, value)
        return out

    def equals(self, other: "Panel") -> bool:
        return (
            self.ids == other.ids
            and self.covariate_names == other.covariate_names
            and self.X.shape == other.X.shape
            and np.array_equal(self.X, other.X)
            and np.array_equal(self.y, other.y)
        )

    @classmethod
    def from_subjects(cls, subjects: Sequence[Subject]) -> "Panel":
        if not subjects:
            raise EmptyPanelError("no subjects")
        n = len(subjects[0].y)
        for s in subjects:
            if len(s.y) != n or np.shape(s.X)[0] != len(s.y):
                raise BalanceError(
                    f"subject {s.id!r} has {len(s.y)} observations, expected {n}",
                    subject_id=s.id,
                )
        return cls(
            tuple(s.id for s in subjects),
            np.stack([np.asarray(s.X, dtype=float) for s in subjects]),
            np.stack([np.asarray(s.y, dtype=float) for s in subjects]),
        )


def _parse_float(text: str, row: int, column: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ParseError(
            f"row {row}: column {column!r} is not numeric: {text!r}", row=row
        ) from None
    if not math.isfinite(value):
        raise ParseError(f"row {row}: column {column!r} is not finite: {text!r}", row=row)
    return value


def read_panel(path: str | os.PathLike, schema: CsvSchema | None = None) -> Panel:
    """Read a long-format CSV into a balanced :class:`Panel`.

    Subjects appear in order of first occurrence. Within a subject, rows are
    sorted by the time column (stable, so ties keep file order).

    Raises
    ------
    SchemaError
        A named column is missing from the header.
    ParseError
        A cell is empty or non-numeric; the message carries the file row.
    BalanceError
        Subjects have differing numbers of observations.
    EmptyPanelError
        The file has a header but no data rows.
    """
    schema = schema or CsvSchema()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path}: missing header row") from None

        fixed = [schema.id, schema.response] + ([schema.time] if schema.time else [])
        for name in fixed:
            if name not in header:
                raise SchemaError(f"{path}: missing column {name!r}")
        if schema.covariates is None:
            covariates = [h for h in header if h not in fixed]
        else:
            covariates = list(schema.covariates)
            for name in covariates:
                if name not in header:
                    raise SchemaError(f"{path}: missing column {name!r}")
        if not covariates:
            raise SchemaError(f"{path}: no covariate columns")

        pos = {h: k for k, h in enumerate(header)}
        id_col, y_col = pos[schema.id], pos[schema.response]
        t_col = pos[schema.time] if schema.time else None
        x_cols = [pos[c] for c in covariates]

        groups: dict[str, list[tuple[float, list[float], float]]] = {}
        for row_no, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(header):
                raise ParseError(
                    f"row {row_no}: expected {len(header)} fields, got {len(row)}",
                    row=row_no,
                )
            sid = row[id_col].strip()
            t = _parse_float(row[t_col], row_no, schema.time) if t_col is not None else 0.0
            yv = _parse_float(row[y_col], row_no, schema.response)
            xs = [_parse_float(row[c], row_no, header[c]) for c in x_cols]
            groups.setdefault(sid, []).append((t, xs, yv))

    if not groups:
        raise EmptyPanelError(f"{path}: no data rows")

    sizes = {sid: len(obs) for sid, obs in groups.items()}
    n = max(set(sizes.values()), key=list(sizes.values()).count)
    for sid, size in sizes.items():
        if size != n:
            raise BalanceError(
                f"subject {sid!r} has {size} observations, expected {n}",
                subject_id=sid,
            )

    m, p = len(groups), len(covariates)
    X = np.empty((m, n, p))
    y = np.empty((m, n))
    for i, obs in enumerate(groups.values()):
        if t_col is not None:
            obs = sorted(obs, key=lambda o: o[0])
        for j, (_, xs, yv) in enumerate(obs):
            X[i, j] = xs
            y[i, j] = yv
    return Panel(tuple(groups), X, y, tuple(covariates))


def _fmt(value: float) -> str:
    return format(value, ".17g")


def write_panel(panel: Panel, path: str | os.PathLike) -> None:
    """Write ``panel`` as long CSV; times are written as 1..n."""
    if os.path.isdir(path):
        raise IsADirectoryError(f"{path} is a directory")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id", "time", "y", *panel.covariate_names])
        for i, sid in enumerate(panel.ids):
            for j in range(panel.n):
                writer.writerow(
                    [sid, j + 1, _fmt(panel.y[i, j]), *map(_fmt, panel.X[i, j])]
                )
