"""Reading and writing network data.

Stoichiometric matrices are MatrixMarket coordinate files with 1-based
indices; vectors are plain text with one number per line and ``#`` comments.
A manifest is a JSON object naming the files of one network::

    {"name": "ab", "F": "F.mtx", "R": "R.mtx", "k": "k.txt", "l0": "l0.txt"}

``c0`` may replace ``l0``, in which case the totals are L c0. Relative paths
resolve against the manifest's directory.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .network import BioNetwork, NetworkError

MM_HEADER = "%%MatrixMarket matrix coordinate integer general"


class ParseError(ValueError):
    def __init__(self, path, line: int, column: int, message: str):
        super().__init__(f"{path}:{line}:{column}: {message}")
        self.path, self.line, self.column = str(path), line, column


def _tokens(raw: str):
    """Yield (column, token) pairs, columns 1-based."""
    col = 0
    for tok in raw.split():
        col = raw.index(tok, col)
        yield col + 1, tok
        col += len(tok)


def read_matrix_market(path) -> sp.csr_matrix:
    """Parse a coordinate MatrixMarket file (integer, real or pattern; general only)."""
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ParseError(path, 0, 0, f"cannot read: {exc.strerror or exc}") from exc
    if not lines:
        raise ParseError(path, 1, 1, "empty file")
    banner = lines[0].split()
    if len(banner) != 5 or banner[0].lower() != "%%matrixmarket":
        raise ParseError(path, 1, 1, "missing '%%MatrixMarket' banner")
    obj, fmt, field, symmetry = (b.lower() for b in banner[1:])
    if obj != "matrix" or fmt != "coordinate":
        raise ParseError(path, 1, 1, f"only 'matrix coordinate' is supported, got '{obj} {fmt}'")
    if field not in ("integer", "real", "pattern"):
        raise ParseError(path, 1, 1, f"unsupported field '{field}'")
    if symmetry != "general":
        raise ParseError(path, 1, 1, f"unsupported symmetry '{symmetry}'")

    size = None
    rows, cols, vals = [], [], []
    need = 2 if field == "pattern" else 3
    for lineno, raw in enumerate(lines[1:], start=2):
        if not raw.strip() or raw.lstrip().startswith("%"):
            continue
        toks = list(_tokens(raw))
        if size is None:
            if len(toks) != 3:
                raise ParseError(path, lineno, 1, "size line must hold 'rows cols entries'")
            size = [_int(path, lineno, c, t) for c, t in toks]
            if min(size) < 0 or size[0] == 0 or size[1] == 0:
                raise ParseError(path, lineno, 1, "matrix dimensions must be positive")
            continue
        if len(toks) != need:
            col = toks[-1][0] if toks else 1
            raise ParseError(path, lineno, col, f"expected {need} fields, found {len(toks)}")
        (ci, ti), (cj, tj) = toks[0], toks[1]
        i, j = _int(path, lineno, ci, ti), _int(path, lineno, cj, tj)
        if not 1 <= i <= size[0]:
            raise ParseError(path, lineno, ci, f"row index {i} outside 1..{size[0]}")
        if not 1 <= j <= size[1]:
            raise ParseError(path, lineno, cj, f"column index {j} outside 1..{size[1]}")
        if field == "pattern":
            v = 1.0
        elif field == "integer":
            v = float(_int(path, lineno, *toks[2]))
        else:
            v = _float(path, lineno, *toks[2])
        rows.append(i - 1)
        cols.append(j - 1)
        vals.append(v)
    if size is None:
        raise ParseError(path, len(lines), 1, "missing size line")
    if len(vals) != size[2]:
        raise ParseError(path, len(lines), 1, f"header declares {size[2]} entries, found {len(vals)}")
    return sp.coo_matrix((vals, (rows, cols)), shape=(size[0], size[1])).tocsr()


def write_matrix_market(path, A) -> None:
    A = sp.coo_matrix(A)
    if np.any(A.data != np.round(A.data)):
        raise ValueError(f"{path}: integer MatrixMarket output needs integral entries")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(MM_HEADER + "\n")
        fh.write(f"{A.shape[0]} {A.shape[1]} {A.nnz}\n")
        for i, j, v in sorted(zip(A.row.tolist(), A.col.tolist(), A.data.tolist())):
            fh.write(f"{i + 1} {j + 1} {int(v)}\n")


def read_vector(path) -> np.ndarray:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(path, 0, 0, f"cannot read: {exc.strerror or exc}") from exc
    out = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0]
        toks = list(_tokens(body))
        if not toks:
            continue
        if len(toks) > 1:
            raise ParseError(path, lineno, toks[1][0], "one value per line expected")
        out.append(_float(path, lineno, *toks[0]))
    return np.array(out, dtype=float)


def write_vector(path, v, comment: str | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        for x in np.asarray(v, dtype=float).ravel():
            fh.write(f"{float(x)!r}\n")


def _int(path, line, col, tok) -> int:
    try:
        return int(tok)
    except ValueError:
        raise ParseError(path, line, col, f"expected an integer, found '{tok}'") from None


def _float(path, line, col, tok) -> float:
    try:
        v = float(tok)
    except ValueError:
        raise ParseError(path, line, col, f"expected a number, found '{tok}'") from None
    if not np.isfinite(v):
        raise ParseError(path, line, col, f"non-finite value '{tok}'")
    return v


# -------------------------------------------------------------------------
#  Manifests
# -------------------------------------------------------------------------
def read_manifest(path) -> dict:
    path = Path(path)
    try:
        entry = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ParseError(path, 0, 0, f"cannot read: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(path, exc.lineno, exc.colno, exc.msg) from None
    if not isinstance(entry, dict):
        raise ParseError(path, 1, 1, "manifest must be a JSON object")
    missing = [key for key in ("F", "R", "k") if key not in entry]
    if ("l0" in entry) == ("c0" in entry):
        missing.append("exactly one of l0 / c0")
    if missing:
        raise ParseError(path, 1, 1, "manifest lacks " + ", ".join(missing))
    base = path.parent
    out = {"name": str(entry.get("name", path.stem))}
    for key in ("F", "R", "k", "l0", "c0"):
        if key in entry:
            p = Path(entry[key])
            out[key] = p if p.is_absolute() else base / p
    return out


def load_network(manifest) -> BioNetwork:
    """Parse and validate the network a manifest (path or parsed dict) describes."""
    entry = manifest if isinstance(manifest, dict) else read_manifest(manifest)
    F = read_matrix_market(entry["F"])
    R = read_matrix_market(entry["R"])
    if F.shape != R.shape:
        raise NetworkError([f"dimension: F is {F.shape[0]}x{F.shape[1]}, R is {R.shape[0]}x{R.shape[1]}"])
    k = read_vector(entry["k"])
    if "c0" in entry:
        return BioNetwork.from_c0(entry["name"], F, R, k, read_vector(entry["c0"]))
    return BioNetwork(entry["name"], F, R, k, read_vector(entry["l0"]))


def save_network(net: BioNetwork, directory) -> Path:
    """Write F, R, k, l0 and a manifest into ``directory``; returns the manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_matrix_market(directory / "F.mtx", net.F)
    write_matrix_market(directory / "R.mtx", net.R)
    write_vector(directory / "k.txt", net.k, "ln k_f then ln k_r")
    write_vector(directory / "l0.txt", net.l0, "moiety totals")
    manifest = directory / "manifest.json"
    manifest.write_text(json.dumps(
        {"name": net.name, "F": "F.mtx", "R": "R.mtx", "k": "k.txt", "l0": "l0.txt"}, indent=2) + "\n",
        encoding="utf-8")
    return manifest
