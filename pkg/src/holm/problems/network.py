"""Steady states of mass-action biochemical networks as a zero-finding problem.

With x = ln(c) the residual is

    h(x) = ( [Nbar, -Nbar] exp(k + [F, R]^T x) )
           ( L exp(x) - l0                      )

where N = R - F, Nbar holds a row basis of N and L spans its left nullspace.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from ..core import ConfigError, NlsProblem, NumericalBreakdown

EXP_LIMIT = 700.0

log = logging.getLogger(__name__)


class NetworkError(ConfigError):
    """A network failed validation; ``problems`` lists every violation found."""

    def __init__(self, problems: list[str]):
        super().__init__("; ".join(problems))
        self.problems = list(problems)


def _rref(A: np.ndarray, tol: float):
    """Reduced row echelon form with partial pivoting. Returns (R, pivot_columns)."""
    R = np.array(A, dtype=float)
    rows, cols = R.shape
    pivots = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        i = r + int(np.argmax(np.abs(R[r:, c])))
        if abs(R[i, c]) <= tol:
            R[r:, c] = 0.0
            continue
        R[[r, i]] = R[[i, r]]
        R[r] /= R[r, c]
        others = np.arange(rows) != r
        R[others] -= np.outer(R[others, c], R[r])
        pivots.append(c)
        r += 1
    return R, pivots


def _pivot_tol(N: np.ndarray) -> float:
    return 1e-10 * max(1.0, float(np.max(np.abs(N)))) if N.size else 1e-10


def reduce_rows(N):
    """Row basis of N: returns (Nbar, rank, row_indices).

    Rows are picked greedily in index order, so the first independent rows win.
    """
    N = np.asarray(N.toarray() if sp.issparse(N) else N, dtype=float)
    if not np.any(N):
        raise ConfigError("stoichiometric matrix is zero")
    _, pivots = _rref(N.T, _pivot_tol(N))
    return N[pivots], len(pivots), list(pivots)


def left_nullspace(N) -> np.ndarray:
    """Basis L of {l : l^T N = 0}, one row per conserved moiety.

    Built from the reduced echelon form of N^T, so each basis vector has a
    unit entry at its own free species and zeros at the other free species;
    for integer N with unit pivots the entries come out integral.
    """
    N = np.asarray(N.toarray() if sp.issparse(N) else N, dtype=float)
    m = N.shape[0]
    R, pivots = _rref(N.T, _pivot_tol(N))
    free = [j for j in range(m) if j not in pivots]
    L = np.zeros((len(free), m))
    for row, f in enumerate(free):
        L[row, f] = 1.0
        for i, p in enumerate(pivots):
            L[row, p] = -R[i, f]
    L[np.abs(L) < 1e-14] = 0.0
    return L


@dataclass
class BioNetwork:
    name: str
    F: sp.csr_matrix
    R: sp.csr_matrix
    k: np.ndarray
    l0: np.ndarray
    N: np.ndarray = field(init=False)
    Nbar: np.ndarray = field(init=False)
    rank: int = field(init=False)
    row_indices: list = field(init=False)
    L: np.ndarray = field(init=False)
    notes: list = field(init=False, default_factory=list)

    def __post_init__(self):
        self.F = sp.csr_matrix(self.F, dtype=float)
        self.R = sp.csr_matrix(self.R, dtype=float)
        self.k = np.asarray(self.k, dtype=float).ravel()
        self.l0 = np.asarray(self.l0, dtype=float).ravel()
        self.validate_structure()
        self.N = (self.R - self.F).toarray()
        self.Nbar, self.rank, self.row_indices = reduce_rows(self.N)
        self.L = left_nullspace(self.N)
        self.FR_T = sp.hstack([self.F, self.R]).T.tocsr()
        self.validate_derived()

    @property
    def m(self) -> int:
        return self.F.shape[0]

    @property
    def n(self) -> int:
        return self.F.shape[1]

    @classmethod
    def from_c0(cls, name, F, R, k, c0) -> "BioNetwork":
        """Build a network whose moiety totals are l0 = L c0."""
        c0 = np.asarray(c0, dtype=float).ravel()
        if np.any(c0 <= 0):
            raise NetworkError(["c0 positive: initial concentrations must be > 0"])
        N = (sp.csr_matrix(R, dtype=float) - sp.csr_matrix(F, dtype=float)).toarray()
        if N.shape[0] != c0.size:
            raise NetworkError([f"dimension: c0 has {c0.size} entries, expected {N.shape[0]}"])
        return cls(name, F, R, k, left_nullspace(N) @ c0)

    def validate_structure(self):
        errs = []
        if self.F.shape != self.R.shape:
            raise NetworkError([f"dimension: F is {self.F.shape}, R is {self.R.shape}"])
        m, n = self.F.shape
        for label, M in (("F", self.F), ("R", self.R)):
            coo = M.tocoo()
            bad = coo.data < 0
            if np.any(bad):
                i, j = int(coo.row[bad][0]), int(coo.col[bad][0])
                errs.append(f"{label} nonnegative: entry ({i + 1}, {j + 1}) is {coo.data[bad][0]:g}")
            frac = coo.data != np.round(coo.data)
            if np.any(frac):
                i, j = int(coo.row[frac][0]), int(coo.col[frac][0])
                errs.append(f"{label} integer: entry ({i + 1}, {j + 1}) is {coo.data[frac][0]:g}")
        if self.k.size != 2 * n:
            errs.append(f"dimension: k has {self.k.size} entries, expected 2n = {2 * n}")
        elif not np.all(np.isfinite(self.k)):
            errs.append("k finite: kinetic parameters must be finite")
        if errs:
            raise NetworkError(errs)

        N = self.R - self.F
        col_nnz = np.asarray((sp.csc_matrix(N) != 0).sum(axis=0)).ravel()
        thin = np.flatnonzero(col_nnz < 2)
        if thin.size:
            errs.append(f"column cardinality: column {thin[0] + 1} of R-F has {col_nnz[thin[0]]} nonzero(s), "
                        "every reaction needs at least two")
        touched = np.asarray((sp.hstack([self.F, self.R]) != 0).sum(axis=1)).ravel()
        absent = np.flatnonzero(touched == 0)
        if absent.size:
            errs.append(f"row cardinality: species {absent[0] + 1} takes part in no reaction")
        if errs:
            raise NetworkError(errs)
        for label, M in (("F", self.F), ("R", self.R)):
            empty = np.flatnonzero(np.diff(M.indptr) == 0)
            if empty.size:
                self._warn(f"row {empty[0] + 1} of {label} is empty ({empty.size} such rows)", logging.INFO)

    def validate_derived(self):
        errs = []
        expected = self.m - self.rank
        if self.l0.size != expected:
            errs.append(f"dimension: l0 has {self.l0.size} entries, expected m - rank = {expected}")
        elif np.any(self.l0 <= 0):
            errs.append("l0 positive: moiety totals must be > 0")
        if not conserves_mass(self.N):
            errs.append("mass conservation: no positive l with (R-F)^T l = 0")
        if errs:
            raise NetworkError(errs)
        if self.L.size and np.max(np.abs(self.L @ self.N)) > 1e-10:
            raise NetworkError(["left nullspace: L N is not zero"])
        FR = sp.hstack([self.F, self.R]).toarray()
        if np.linalg.matrix_rank(FR) < self.m:
            self._warn("rank([F, R]) < m: network is not kinetically consistent")

    def _warn(self, msg, level=logging.WARNING):
        self.notes.append(msg)
        log.log(level, "%s: %s", self.name, msg)

    # ---------------------------------------------------------------------
    def _exponent(self, x):
        arg = self.k + self.FR_T @ x
        bad = np.flatnonzero(~(arg <= EXP_LIMIT))
        if bad.size:
            raise NumericalBreakdown(f"exp overflow in reaction rate {bad[0]} (argument {arg[bad[0]]:g})", x)
        bad = np.flatnonzero(~(x <= EXP_LIMIT))
        if bad.size:
            raise NumericalBreakdown(f"exp overflow in species {bad[0]} (argument {x[bad[0]]:g})", x)
        return np.exp(arg)

    def residual(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        v = self._exponent(x)
        n = self.n
        top = self.Nbar @ (v[:n] - v[n:])
        bottom = self.L @ np.exp(x) - self.l0
        return np.concatenate([top, bottom])

    def jacobian(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        v = self._exponent(x)
        n = self.n
        weighted = np.hstack([self.Nbar, -self.Nbar]) * v
        top = np.asarray((self.FR_T.T @ weighted.T).T)
        bottom = self.L * np.exp(x)
        return np.vstack([top, bottom])

    def flux_balance(self, x) -> np.ndarray:
        """Full N (v_f - v_r); any left-null vector of N annihilates it."""
        v = self._exponent(np.asarray(x, dtype=float))
        return self.N @ (v[: self.n] - v[self.n:])

    def problem(self, x0=None) -> NlsProblem:
        return NlsProblem(
            name=self.name, m=self.m, n=self.m, residual=self.residual, jacobian=self.jacobian,
            x0=np.zeros(self.m) if x0 is None else np.asarray(x0, dtype=float),
            meta={"rank": self.rank, "reactions": self.n},
        )


def bio_residual(net: BioNetwork, x) -> np.ndarray:
    return net.residual(x)


def bio_jacobian(net: BioNetwork, x) -> np.ndarray:
    return net.jacobian(x)


def conserves_mass(N: np.ndarray) -> bool:
    """True if some l >= 1 (hence positive) satisfies N^T l = 0."""
    m = N.shape[0]
    res = linprog(np.zeros(m), A_eq=N.T, b_eq=np.zeros(N.shape[1]), bounds=[(1.0, None)] * m, method="highs")
    return res.status == 0
