from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from math import comb

import numpy as np
from scipy.optimize import minimize_scalar

from exterior import NForm, Frame, basis_indices, evaluate, evaluate_gradient
from frames import SvdFrame, svd_frame
from theta import ThetaForm, theta_h

THETA_GRID = 2048
THETA_XATOL = 1e-12
REFINE_PEAKS = 8
PROFILE_SLACK = 1e-12

DEFAULT_RESTARTS = 64
DEFAULT_SEED = 0
MAX_ITER = 500
STEP_TOL = 1e-12
GRAD_TOL = 1e-10
ARMIJO_C = 1e-4
COORD_SEEDS = 8


# ---------------- f(θ, τ) y la cota superior ----------------

def _profile(theta, weights: np.ndarray, r: int):
    """cos^r θ + Σ_{ℓ≥2} w_ℓ (ℓ-1) C(r,ℓ) cos^{r-ℓ} θ sin^ℓ θ."""
    c, s = np.cos(theta), np.sin(theta)
    out = c ** r
    for ell in range(2, r + 1):
        w = weights[ell]
        if w != 0.0:
            out = out + w * (ell - 1) * comb(r, ell) * c ** (r - ell) * s ** ell
    return out


def _maximize_profile(weights: np.ndarray, r: int, skip_origin: bool = False) -> tuple[float, float]:
    grid = np.linspace(0.0, math.pi / 2, THETA_GRID)
    vals = _profile(grid, weights, r)
    lo_idx = 1 if skip_origin else 0

    # máximos locales de la grilla; se pulen los mejores
    left = np.concatenate([[-np.inf], vals[:-1]])
    right = np.concatenate([vals[1:], [-np.inf]])
    peaks = np.flatnonzero((vals >= left) & (vals >= right))
    peaks = peaks[peaks >= lo_idx]
    if peaks.size == 0:
        peaks = np.array([lo_idx + int(np.argmax(vals[lo_idx:]))])
    peaks = peaks[np.argsort(-vals[peaks], kind="stable")][:REFINE_PEAKS]

    best_v, best_t = -np.inf, 0.0
    for i in sorted(int(p) for p in peaks):
        v, t = float(vals[i]), float(grid[i])
        a = grid[max(i - 1, lo_idx)]
        b = grid[min(i + 1, THETA_GRID - 1)]
        if b > a:
            res = minimize_scalar(
                lambda th: -float(_profile(th, weights, r)),
                bounds=(float(a), float(b)),
                method="bounded",
                options={"xatol": THETA_XATOL},
            )
            if -res.fun > v:
                v, t = float(-res.fun), float(res.x)
        if v > best_v:
            best_v, best_t = v, t
    return best_v, best_t


def f_theta_tau(theta: float, tau: float, r: int) -> float:
    if r < 2:
        raise ValueError(f"r debe ser >= 2 (vino {r})")
    if not -1e-15 <= theta <= math.pi / 2 + 1e-15:
        raise ValueError(f"theta={theta} fuera de [0, pi/2]")
    if tau < 0:
        raise ValueError("tau debe ser >= 0")
    w = np.array([tau ** ell for ell in range(r + 1)], dtype=float)
    return float(_profile(theta, w, r))


def taylor_coefficient(r: int, tau: float) -> float:
    """Coeficiente de θ² en el desarrollo de f alrededor de 0."""
    return 0.5 * r * ((r - 1) * tau * tau - 1.0)


def _sorted_lambdas(lambdas) -> np.ndarray:
    lam = np.sort(np.abs(np.asarray(lambdas, dtype=float).reshape(-1)))[::-1]
    return lam


def upper_bound(lambdas, r: int) -> tuple[float, float]:
    if r < 2:
        return 1.0, 0.0
    lam = _sorted_lambdas(lambdas)
    padded = np.zeros(r)
    padded[: min(r, lam.size)] = lam[:r]
    weights = np.ones(r + 1)
    for ell in range(1, r + 1):
        weights[ell] = float(np.prod(padded[:ell]))  # Λ_ℓ
    return _maximize_profile(weights, r)


# ---------------- Condiciones de dilatación ----------------

@dataclass(frozen=True)
class DilationCheck:
    rank_r: int
    lambdas: tuple[float, ...]
    max_pair_product: float
    crude_threshold: float
    refined_threshold: float
    crude_ok: bool
    refined_ok: bool
    epsilon: float = math.nan


def dilation_check(lambdas, r: int, epsilon: float) -> DilationCheck:
    lam = _sorted_lambdas(lambdas)
    pair = float(lam[0] * lam[1]) if lam.size >= 2 else 0.0
    if r <= 1:
        return DilationCheck(r, tuple(float(v) for v in lam), pair, math.inf, math.inf, True, True, float(epsilon))
    crude = 1.0 / (r - 1) ** 2
    refined = float(epsilon) / (r - 1)
    return DilationCheck(
        rank_r=r,
        lambdas=tuple(float(v) for v in lam),
        max_pair_product=pair,
        crude_threshold=crude,
        refined_threshold=refined,
        crude_ok=pair <= crude + PROFILE_SLACK,
        refined_ok=pair <= refined + PROFILE_SLACK,
        epsilon=float(epsilon),
    )


def area_nonincreasing(grad_f, grad_g) -> tuple[float, bool]:
    """|∇f|²|∇g|² − (∇f·∇g)² y si no supera 1 (caso m = 2)."""
    a = np.asarray(grad_f, dtype=float)
    b = np.asarray(grad_g, dtype=float)
    v = float(a @ a) * float(b @ b) - float(a @ b) ** 2
    return v, v <= 1.0 + PROFILE_SLACK


# ---------------- ε ----------------

def _tau_weights(eps: float, r: int) -> np.ndarray:
    tau = math.sqrt(eps / (r - 1))
    return np.array([tau ** ell for ell in range(r + 1)], dtype=float)


def epsilon_search(r: int, tol: float = 1e-10) -> tuple[float, float]:
    """(ε*, θ*): mayor ε con max_θ f(θ, √(ε/(r-1)), r) <= 1, y el θ interior donde se toca 1."""
    if r < 2:
        raise ValueError(f"r debe ser >= 2 (vino {r})")
    if not tol > 0:
        raise ValueError("tol debe ser positivo")
    lo, hi = 0.0, 2.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        v, _ = _maximize_profile(_tau_weights(mid, r), r)
        if v <= 1.0 + PROFILE_SLACK:
            lo = mid
        else:
            hi = mid
    _, theta = _maximize_profile(_tau_weights(lo, r), r, skip_origin=True)
    return lo, theta


def epsilon_star(r: int, tol: float = 1e-10) -> float:
    return epsilon_search(r, tol)[0]


def proof_epsilon(r: int) -> float:
    """ε explícito que satisface ε^j/(r-1)^j · (13/3) j² C(2r,2j) <= C(r,j) para todo j."""
    if r < 2:
        raise ValueError(f"r debe ser >= 2 (vino {r})")
    best = math.inf
    for j in range(1, r + 1):
        ratio = comb(r, j) / (13.0 / 3.0 * j * j * comb(2 * r, 2 * j))
        best = min(best, (r - 1) * ratio ** (1.0 / j))
    return best


def crude_sum_identity(r: int) -> Fraction:
    if r < 2:
        raise ValueError(f"r debe ser >= 2 (vino {r})")
    return sum((Fraction((ell - 1) * comb(r, ell), (r - 1) ** ell) for ell in range(2, r + 1)), Fraction(0))


def _binom(n: int, k: int) -> int:
    return comb(n, k) if 0 <= k <= n else 0


def refined_binomial_identity(r: int, ell: int) -> tuple[Fraction, Fraction]:
    if r < 1 or not 0 <= ell <= 2 * r:
        raise ValueError(f"se requiere 0 <= ell <= 2r (r={r}, ell={ell})")
    n2 = 2 * r - 2
    lhs = Fraction((r - 1) ** 2 * _binom(n2, ell - 2) - 2 * (r - 1) * _binom(n2, ell - 1) + _binom(n2, ell))
    rhs = (ell - 1) * comb(2 * r, ell) * (Fraction(ell * r, 2 * (2 * r - 1)) - 1)
    return lhs, rhs


def f_squared_expansion(theta: float, tau: float, r: int) -> float:
    """f² por el desarrollo binomial (debe coincidir con f·f)."""
    if r < 2:
        raise ValueError(f"r debe ser >= 2 (vino {r})")
    c, s = math.cos(theta), math.sin(theta)
    total = c ** (2 * r)
    for ell in range(2, 2 * r + 1):
        lhs, _ = refined_binomial_identity(r, ell)
        coef = float(lhs)
        if ell <= r:
            coef += 4 * (ell - 1) * comb(r, ell)
        total += tau ** ell * coef * c ** (2 * r - ell) * s ** ell
    return total


# ---------------- Cota inferior: ascenso en Stiefel ----------------

@dataclass(frozen=True, eq=False)
class ComassEstimate:
    lower: float
    witness: Frame
    upper: float = math.nan
    theta_star: float = math.nan
    restarts_used: int = 0
    seed: int = DEFAULT_SEED
    dilation: DilationCheck | None = None


def _as_form(theta_form) -> NForm:
    return theta_form.form if isinstance(theta_form, ThetaForm) else theta_form


def qr_retract(M: np.ndarray) -> np.ndarray:
    """Q de la QR reducida con diag(R) > 0."""
    Q, R = np.linalg.qr(M)
    s = np.sign(np.diag(R))
    s[s == 0] = 1.0
    return Q * s


def _ascend(form: NForm, A: np.ndarray) -> tuple[float, np.ndarray]:
    val, G = evaluate_gradient(form, A)
    t = 1.0
    for _ in range(MAX_ITER):
        S = A.T @ G
        xi = G - A @ (0.5 * (S + S.T))
        g2 = float(np.sum(xi * xi))
        if g2 < GRAD_TOL * GRAD_TOL:
            break
        t = min(2.0 * t, 4.0)
        while True:
            A_new = qr_retract(A + t * xi)
            v_new = evaluate(form, A_new)
            if v_new >= val + ARMIJO_C * t * g2:
                break
            t *= 0.5
            if t < 1e-16:
                return val, A
        step = float(np.linalg.norm(A_new - A))
        A = A_new
        val, G = evaluate_gradient(form, A)
        if step < STEP_TOL:
            break
    return val, A


def _coordinate_seeds(form: NForm) -> list[tuple[float, np.ndarray]]:
    d, k = form.ambient_dim, form.degree
    basis = basis_indices(d, k)
    out = []
    for ri in np.flatnonzero(form.coeffs):
        c = float(form.coeffs[ri])
        A = np.zeros((d, k))
        A[list(basis[ri]), range(k)] = 1.0
        if c < 0 and k > 0:
            A[:, -1] *= -1.0
        out.append((abs(c), A))
    out.sort(key=lambda t: -t[0])
    return out


def _random_start(d: int, k: int, seed: int, idx: int) -> np.ndarray:
    rng = np.random.default_rng([seed, idx])
    return qr_retract(rng.standard_normal((d, k)))


def lower_bound(theta_form, restarts: int = DEFAULT_RESTARTS, seed: int = DEFAULT_SEED,
                threads: int = 1) -> ComassEstimate:
    if restarts < 1:
        raise ValueError("restarts debe ser >= 1")
    form = _as_form(theta_form)
    d, k = form.ambient_dim, form.degree

    if k == 0:
        return ComassEstimate(abs(float(form.coeffs[0])), Frame(np.zeros((d, 0))), restarts_used=0, seed=seed)

    coords = _coordinate_seeds(form)
    best_val, best_A = -math.inf, np.eye(d)[:, :k]
    # planos coordenados: ambas orientaciones evaluadas; se asciende desde los mejores
    for v, A in coords:
        if v > best_val:
            best_val, best_A = v, A
    if not coords:
        best_val = 0.0

    starts = [A for _, A in coords[:COORD_SEEDS]]
    for idx in range(restarts):
        A = _random_start(d, k, seed, idx)
        flipped = A.copy()
        flipped[:, -1] *= -1.0
        starts.extend([A, flipped])

    def run(A):
        return _ascend(form, A)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(run, starts))
    else:
        results = [run(A) for A in starts]

    for v, A in results:
        if v > best_val:
            best_val, best_A = v, A
    witness = Frame(best_A)
    return ComassEstimate(
        lower=evaluate(form, witness),
        witness=witness,
        restarts_used=restarts,
        seed=seed,
    )


def comass_estimate(theta_form, fr: SvdFrame, restarts: int = DEFAULT_RESTARTS, seed: int = DEFAULT_SEED,
                    epsilon: float | None = None, threads: int = 1, with_lower: bool = True) -> ComassEstimate:
    r = fr.rank_r
    if epsilon is None:
        epsilon = epsilon_star(r) if r >= 2 else 1.0
    upper, theta_star = upper_bound(fr.lambdas, r)
    dil = dilation_check(fr.lambdas, r, epsilon)
    if not with_lower:
        return ComassEstimate(math.nan, Frame(np.zeros((fr.n + fr.m, 0))), upper, theta_star, 0, seed, dil)
    low = lower_bound(theta_form, restarts, seed, threads)
    return ComassEstimate(low.lower, low.witness, upper, theta_star, low.restarts_used, seed, dil)


def diagonal_jacobian(lambdas, n: int, m: int) -> np.ndarray:
    lam = _sorted_lambdas(lambdas)
    k = min(n, m)
    if lam.size > k:
        raise ValueError(f"{lam.size} valores singulares no entran en una matriz {m}x{n}")
    A = np.zeros((m, n))
    A[range(lam.size), range(lam.size)] = lam
    return A


def comass_from_lambdas(lambdas, n: int, m: int, restarts: int = DEFAULT_RESTARTS, seed: int = DEFAULT_SEED,
                        epsilon: float | None = None, threads: int = 1) -> ComassEstimate:
    A = diagonal_jacobian(lambdas, n, m)
    return comass_estimate(theta_h(A), svd_frame(A), restarts, seed, epsilon, threads)


# ---------------- Reducción a 2r × r ----------------

def _reduced_terms(lambdas, r: int):
    lam = _sorted_lambdas(lambdas)
    padded = np.zeros(r)
    padded[: min(r, lam.size)] = lam[:r]
    for ell in range(0, r + 1):
        if ell == 1:
            continue
        coef = (-1.0) ** ell * (1 - ell)
        for I in combinations(range(r), ell):
            prod = float(np.prod(padded[list(I)])) if I else 1.0
            if prod != 0.0:
                yield coef * prod, I


def reduced_theta_form(lambdas, r: int) -> NForm:
    """El objetivo reducido como r-forma en R^{2r} (filas U = 1..r, V = r+1..2r)."""
    if r < 2:
        raise ValueError(f"r debe ser >= 2 (vino {r})")
    out = NForm.zero(2 * r, r)
    for c, I in _reduced_terms(lambdas, r):
        idx = tuple(r + i if i in I else i for i in range(r))
        out = out + NForm.basis(2 * r, idx, c)
    return out


def stiefel_objective(lambdas, A) -> float:
    """det U − Σ_{ℓ≥2} (−1)^ℓ (ℓ−1) Σ_I Πλ det(A_I), con A_I = U y las filas i ∈ I tomadas de V."""
    A = np.asarray(A, dtype=float)
    r = A.shape[1]
    if A.shape != (2 * r, r):
        raise ValueError(f"A debe ser {2 * r}x{r}")
    U, V = A[:r], A[r:]
    total = 0.0
    for c, I in _reduced_terms(lambdas, r):
        AI = U.copy()
        for i in I:
            AI[i] = V[i]
        total += c * float(np.linalg.det(AI))
    return total


def stiefel_lower_bound(lambdas, r: int, restarts: int = DEFAULT_RESTARTS, seed: int = DEFAULT_SEED,
                        threads: int = 1) -> float:
    return lower_bound(reduced_theta_form(lambdas, r), restarts, seed, threads).lower


@dataclass(frozen=True)
class ReductionGap:
    full: float
    reduced: float
    gap: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "gap", self.full - self.reduced)


def reduction_gap(lambdas, n: int, m: int, restarts: int = DEFAULT_RESTARTS, seed: int = DEFAULT_SEED,
                  threads: int = 1) -> ReductionGap:
    A = diagonal_jacobian(lambdas, n, m)
    fr = svd_frame(A)
    r = max(fr.rank_r, 2)
    full = lower_bound(theta_h(A), restarts, seed, threads).lower
    reduced = stiefel_lower_bound(fr.lambdas, r, restarts, seed, threads)
    return ReductionGap(full, reduced)
