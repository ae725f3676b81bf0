"""CSV ingestion and artifact writers.

Input schema: UTF-8, a header row, columns x1..xd then y, plain decimal
numbers (no thousands separators). Error rows are reported as file line
numbers, the header being line 1. Floats are written with ``repr`` so that
outputs round-trip exactly and reruns are byte-identical; +inf is "inf".
"""

from __future__ import annotations

import csv
import re
from pathlib import Path

import numpy as np

from .errors import InvalidConfig, ParseError
from .inference import BandResult
from .regression import Dataset

_NUMBER = re.compile(r"[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?")


def _parse_number(token: str, line: int, column: str) -> float:
    t = token.strip()
    if not _NUMBER.fullmatch(t):
        raise ParseError(f"row {line}, column {column}: {token!r} is not a decimal number", row=line, column=column)
    return float(t)


def read_table(path) -> tuple[list[str], np.ndarray]:
    """Header names and the numeric body of a CSV file."""
    path = Path(path)
    if not path.is_file():
        raise InvalidConfig(f"input file {str(path)!r} does not exist")
    try:
        text = path.read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(f"{path}: not valid UTF-8 ({exc.reason})") from None
    rows = list(csv.reader(text.splitlines()))
    if not rows or not any(c.strip() for c in rows[0]):
        raise ParseError(f"{path}: missing header row", row=1)
    header = [c.strip() for c in rows[0]]
    if any(not c for c in header):
        raise ParseError(f"{path}: empty column name in header", row=1)
    body = []
    for i, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise ParseError(f"row {i}: expected {len(header)} fields, found {len(row)}", row=i)
        body.append([_parse_number(tok, i, header[j]) for j, tok in enumerate(row)])
    if not body:
        raise ParseError(f"{path}: no data rows", row=2)
    return header, np.array(body, dtype=float)


def read_dataset(path) -> Dataset:
    """Dataset from a CSV whose last column is y and whose other columns are x1..xd."""
    header, A = read_table(path)
    if len(header) < 2:
        raise ParseError(f"{path}: need at least one x column and a y column", row=1)
    return Dataset(A[:, :-1], A[:, -1])


def read_grid(path, dim: int) -> np.ndarray:
    header, A = read_table(path)
    if A.shape[1] != dim:
        raise ParseError(f"{path}: grid needs {dim} columns, found {A.shape[1]}", row=1)
    return A


def read_nodes(path, dim: int) -> tuple[np.ndarray, np.ndarray]:
    """Quadrature nodes file: d coordinate columns then a weight column."""
    header, A = read_table(path)
    if A.shape[1] != dim + 1:
        raise ParseError(f"{path}: nodes file needs {dim} coordinate columns and a weight column", row=1)
    return A[:, :dim], A[:, dim]


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_table(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(v) for v in r])


def write_vector(path, v, name: str = "value") -> None:
    write_table(path, [name], ([x] for x in np.asarray(v, dtype=float).ravel()))


def write_matrix(path, M) -> None:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    write_table(path, [f"c{j + 1}" for j in range(M.shape[1])], M)


def read_matrix(path) -> np.ndarray:
    return read_table(path)[1]


def write_keyvalue(path, items: dict) -> None:
    lines = [f"{k}={fmt(v)}" for k, v in items.items()]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_keyvalue(path) -> dict[str, str]:
    out = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            k, _, v = line.partition("=")
            out[k] = v
    return out


def band_columns(dim: int) -> list[str]:
    return [f"w{j + 1}" for j in range(dim)] + ["theta_hat", "sigma_hat", "lower", "upper"]


def write_band(path, band: BandResult) -> None:
    """Band CSV: one column per index dimension, then theta_hat, sigma_hat, lower, upper."""
    G = np.asarray(band.grid, dtype=float)
    rows = (
        list(G[i]) + [band.theta_hat[i], band.sigma_hat[i], band.lower[i], band.upper[i]]
        for i in range(G.shape[0])
    )
    write_table(path, band_columns(G.shape[1]), rows)


def read_band(path) -> dict[str, np.ndarray]:
    """Columns of a band CSV; the "inf" sentinel parses back to +inf."""
    text = Path(path).read_text(encoding="utf-8").splitlines()
    rows = list(csv.reader(text))
    header = rows[0]
    data = np.array([[float(t) for t in r] for r in rows[1:]], dtype=float)
    return {name: data[:, j] for j, name in enumerate(header)}
