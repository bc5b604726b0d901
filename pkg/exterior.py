from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from math import comb

import numpy as np

# Algebra exterior densa sobre R^d (d = n + m).
# Multi-índices 0-based, estrictamente crecientes, ordenados lexicográficamente.


# ---------------- Multi-índices ----------------

@lru_cache(maxsize=None)
def basis_indices(d: int, k: int) -> tuple[tuple[int, ...], ...]:
    """Todos los k-subconjuntos crecientes de range(d), en orden de rank."""
    return tuple(itertools.combinations(range(d), k))


@lru_cache(maxsize=None)
def _basis_array(d: int, k: int) -> np.ndarray:
    arr = np.array(basis_indices(d, k), dtype=np.intp)
    return arr.reshape(comb(d, k), k)


def rank_multi_index(d: int, idx: tuple[int, ...] | list[int]) -> int:
    """Rank lexicográfico vía el sistema combinatorio (complemento del combinadic)."""
    k = len(idx)
    total = comb(d, k)
    acc = 0
    for pos, c in enumerate(idx):
        acc += comb(d - 1 - c, k - pos)
    return total - 1 - acc


def unrank_multi_index(d: int, k: int, rank: int) -> tuple[int, ...]:
    total = comb(d, k)
    if not 0 <= rank < total:
        raise ValueError(f"rank {rank} fuera de rango para C({d},{k})={total}")
    rest = total - 1 - rank
    out: list[int] = []
    top = d - 1
    for pos in range(k):
        kk = k - pos
        # el mayor a con C(a, kk) <= rest
        a = top
        while comb(a, kk) > rest:
            a -= 1
        rest -= comb(a, kk)
        out.append(d - 1 - a)
        top = a - 1
    return tuple(out)


def permutation_sign(seq: tuple[int, ...] | list[int]) -> int:
    """Signo por conteo de inversiones."""
    inv = 0
    n = len(seq)
    for i in range(n):
        si = seq[i]
        for j in range(i + 1, n):
            if si > seq[j]:
                inv += 1
    return -1 if inv % 2 else 1


# ---------------- Tipos ----------------

@dataclass(frozen=True, eq=False)
class NForm:
    ambient_dim: int
    degree: int
    coeffs: np.ndarray

    def __post_init__(self):
        d, k = int(self.ambient_dim), int(self.degree)
        if d < 1:
            raise ValueError("ambient_dim debe ser positivo")
        if not 0 <= k <= d:
            raise ValueError(f"grado {k} fuera de rango para d={d}")
        c = np.array(self.coeffs, dtype=float).reshape(-1)
        if c.shape[0] != comb(d, k):
            raise ValueError(f"coeffs tiene {c.shape[0]} entradas, se esperaban C({d},{k})={comb(d, k)}")
        c.flags.writeable = False
        object.__setattr__(self, "ambient_dim", d)
        object.__setattr__(self, "degree", k)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zero(cls, d: int, k: int) -> NForm:
        return cls(d, k, np.zeros(comb(d, k)))

    @classmethod
    def basis(cls, d: int, idx: tuple[int, ...] | list[int], coef: float = 1.0) -> NForm:
        """coef · dx_I; idx puede venir desordenado (se ordena con su signo)."""
        idx = tuple(int(i) for i in idx)
        if len(set(idx)) != len(idx):
            return cls.zero(d, len(idx))
        if any(i < 0 or i >= d for i in idx):
            raise ValueError(f"índice fuera de rango en {idx} (d={d})")
        sign = permutation_sign(idx)
        c = np.zeros(comb(d, len(idx)))
        c[rank_multi_index(d, tuple(sorted(idx)))] = sign * coef
        return cls(d, len(idx), c)

    @classmethod
    def scalar(cls, d: int, value: float) -> NForm:
        return cls(d, 0, np.array([float(value)]))

    @classmethod
    def covector(cls, vec) -> NForm:
        v = np.asarray(vec, dtype=float).reshape(-1)
        return cls(v.shape[0], 1, v)

    def _check_same(self, other: NForm) -> None:
        if self.ambient_dim != other.ambient_dim or self.degree != other.degree:
            raise ValueError(
                f"formas incompatibles: (d={self.ambient_dim},k={self.degree}) vs "
                f"(d={other.ambient_dim},k={other.degree})"
            )

    def __add__(self, other: NForm) -> NForm:
        self._check_same(other)
        return NForm(self.ambient_dim, self.degree, self.coeffs + other.coeffs)

    def __sub__(self, other: NForm) -> NForm:
        self._check_same(other)
        return NForm(self.ambient_dim, self.degree, self.coeffs - other.coeffs)

    def __neg__(self) -> NForm:
        return NForm(self.ambient_dim, self.degree, -self.coeffs)

    def __mul__(self, s: float) -> NForm:
        return NForm(self.ambient_dim, self.degree, float(s) * self.coeffs)

    __rmul__ = __mul__

    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def max_abs_diff(self, other: NForm) -> float:
        self._check_same(other)
        if self.coeffs.size == 0:
            return 0.0
        return float(np.max(np.abs(self.coeffs - other.coeffs)))

    def coefficient(self, idx: tuple[int, ...] | list[int]) -> float:
        idx = tuple(int(i) for i in idx)
        if len(idx) != self.degree:
            raise ValueError("largo de multi-índice distinto del grado")
        if len(set(idx)) != len(idx):
            return 0.0
        return permutation_sign(idx) * float(self.coeffs[rank_multi_index(self.ambient_dim, tuple(sorted(idx)))])

    def support(self, tol: float = 0.0) -> list[tuple[tuple[int, ...], float]]:
        basis = basis_indices(self.ambient_dim, self.degree)
        return [(basis[r], float(self.coeffs[r])) for r in np.flatnonzero(np.abs(self.coeffs) > tol)]


@dataclass(frozen=True, eq=False)
class Frame:
    columns: np.ndarray

    def __post_init__(self):
        cols = np.array(self.columns, dtype=float)
        if cols.ndim != 2:
            raise ValueError("columns debe ser una matriz d×k")
        cols.flags.writeable = False
        object.__setattr__(self, "columns", cols)

    @property
    def ambient_dim(self) -> int:
        return int(self.columns.shape[0])

    @property
    def count(self) -> int:
        return int(self.columns.shape[1])

    def gram_error(self) -> float:
        c = self.columns
        return float(np.max(np.abs(c.T @ c - np.eye(self.count)))) if self.count else 0.0

    def is_orthonormal(self, tol: float = 1e-12) -> bool:
        return self.gram_error() <= tol


# ---------------- Operaciones ----------------

def wedge(a: NForm, b: NForm) -> NForm:
    d = a.ambient_dim
    if b.ambient_dim != d:
        raise ValueError(f"dimensiones distintas: {a.ambient_dim} vs {b.ambient_dim}")
    k, l = a.degree, b.degree
    if k + l > d:
        raise ValueError(f"grado {k}+{l} excede d={d}")
    out = np.zeros(comb(d, k + l))
    basis_a = basis_indices(d, k)
    basis_b = basis_indices(d, l)
    nz_b = np.flatnonzero(b.coeffs)
    for ra in np.flatnonzero(a.coeffs):
        I = basis_a[ra]
        ca = a.coeffs[ra]
        sI = set(I)
        for rb in nz_b:
            J = basis_b[rb]
            if sI.intersection(J):
                continue
            inv = sum(1 for i in I for j in J if i > j)
            sign = -1.0 if inv % 2 else 1.0
            merged = tuple(sorted(I + J))
            out[rank_multi_index(d, merged)] += sign * ca * b.coeffs[rb]
    return NForm(d, k + l, out)


def wedge_covectors(rows) -> NForm:
    """rows (k×d): α_1 ∧ … ∧ α_k, coeficiente I = det(rows[:, I])."""
    M = np.atleast_2d(np.asarray(rows, dtype=float))
    k, d = M.shape
    if k > d:
        raise ValueError(f"{k} covectores no entran en R^{d}")
    if k == 0:
        return NForm.scalar(d, 1.0)
    idx = _basis_array(d, k)
    minors = M[:, idx].transpose(1, 0, 2)  # (C, k, k)
    return NForm(d, k, np.linalg.det(minors))


def interior(v, a: NForm) -> NForm:
    vec = np.asarray(v, dtype=float).reshape(-1)
    d, k = a.ambient_dim, a.degree
    if vec.shape[0] != d:
        raise ValueError(f"vector de largo {vec.shape[0]} en R^{d}")
    if not np.all(np.isfinite(vec)):
        raise ValueError("vector con entradas no finitas")
    if k == 0:
        raise ValueError("no se contrae una 0-forma")
    out = np.zeros(comb(d, k - 1))
    basis = basis_indices(d, k)
    for r in np.flatnonzero(a.coeffs):
        I = basis[r]
        c = a.coeffs[r]
        for p, i in enumerate(I):
            if vec[i] == 0.0:
                continue
            J = I[:p] + I[p + 1:]
            out[rank_multi_index(d, J)] += (-1.0 if p % 2 else 1.0) * vec[i] * c
    return NForm(d, k - 1, out)


def hodge_star_rn(a: NForm, n: int) -> NForm:
    """Hodge star de R^n (primeras n coordenadas), orientación dx_1∧…∧dx_n."""
    d, k = a.ambient_dim, a.degree
    if not 1 <= n <= d:
        raise ValueError(f"n={n} fuera de rango para d={d}")
    if k > n:
        raise ValueError(f"grado {k} mayor que n={n}")
    out = np.zeros(comb(d, n - k))
    basis = basis_indices(d, k)
    for r in np.flatnonzero(a.coeffs):
        I = basis[r]
        if any(i >= n for i in I):
            raise ValueError(f"soporte fuera de {{1..{n}}}: {tuple(i + 1 for i in I)}")
        comp = tuple(i for i in range(n) if i not in I)
        out[rank_multi_index(d, comp)] += permutation_sign(I + comp) * a.coeffs[r]
    return NForm(d, n - k, out)


def _frame_matrix(fr) -> np.ndarray:
    return fr.columns if isinstance(fr, Frame) else np.asarray(fr, dtype=float)


def evaluate(a: NForm, fr) -> float:
    """Σ_I a_I · det(filas I del frame); determinantes por LU (np.linalg.det)."""
    A = _frame_matrix(fr)
    if A.ndim != 2 or A.shape[0] != a.ambient_dim or A.shape[1] != a.degree:
        raise ValueError(
            f"frame {A.shape} no corresponde a forma (d={a.ambient_dim}, k={a.degree})"
        )
    k = a.degree
    if k == 0:
        return float(a.coeffs[0])
    nz = np.flatnonzero(a.coeffs)
    if nz.size == 0:
        return 0.0
    idx = _basis_array(a.ambient_dim, k)[nz]
    return float(np.dot(a.coeffs[nz], np.linalg.det(A[idx])))


@lru_cache(maxsize=None)
def _cofactor_indices(k: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    keep = np.array([[j for j in range(k) if j != i] for i in range(k)], dtype=np.intp).reshape(k, k - 1)
    signs = np.array([[(-1.0) ** (r + c) for c in range(k)] for r in range(k)])
    return keep, keep, signs


def evaluate_gradient(a: NForm, fr) -> tuple[float, np.ndarray]:
    """Valor y gradiente exacto de A ↦ evaluate(a, A), por cofactores de cada menor."""
    A = _frame_matrix(fr)
    d, k = a.ambient_dim, a.degree
    if A.shape != (d, k):
        raise ValueError(f"frame {A.shape} no corresponde a forma (d={d}, k={k})")
    grad = np.zeros((d, k))
    if k == 0:
        return float(a.coeffs[0]), grad
    nz = np.flatnonzero(a.coeffs)
    if nz.size == 0:
        return 0.0, grad
    coef = a.coeffs[nz]
    idx = _basis_array(d, k)[nz]  # (C, k)
    M = A[idx]  # (C, k, k)
    value = float(np.dot(coef, np.linalg.det(M)))
    if k == 1:
        np.add.at(grad, (idx[:, 0], 0), coef)
        return value, grad
    rk, ck, signs = _cofactor_indices(k)
    sub = M[:, rk[:, None, :, None], ck[None, :, None, :]]  # (C, k, k, k-1, k-1)
    cof = signs * np.linalg.det(sub)
    np.add.at(grad, idx, coef[:, None, None] * cof)
    return value, grad


def format_form(a: NForm, n: int, tol: float = 0.0) -> list[tuple[str, float]]:
    """Etiquetas legibles: dx1^dx2^dy1 (x = primeras n coordenadas)."""
    out: list[tuple[str, float]] = []
    for idx, c in a.support(tol):
        if not idx:
            out.append(("1", c))
            continue
        label = "^".join(f"dx{i + 1}" if i < n else f"dy{i - n + 1}" for i in idx)
        out.append((label, c))
    return out
