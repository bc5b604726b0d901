from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from maps import as_matrix

RANK_REL_TOL = 1e-9
RANK_ABS_TOL = 1e-12


def rank_tolerance(lambdas) -> float:
    lam = np.asarray(lambdas, dtype=float)
    top = float(lam[0]) if lam.size else 0.0
    return RANK_REL_TOL * top if top > 0.0 else RANK_ABS_TOL


@dataclass(frozen=True, eq=False)
class SvdFrame:
    lambdas: np.ndarray
    rank_r: int
    u_basis: np.ndarray
    v_basis: np.ndarray
    tangent_frame: np.ndarray
    normal_frame: np.ndarray

    @property
    def n(self) -> int:
        return int(self.u_basis.shape[0])

    @property
    def m(self) -> int:
        return int(self.v_basis.shape[0])

    @property
    def orientation(self) -> int:
        """+1 si u_basis conserva la orientación de R^n."""
        return 1 if np.linalg.det(self.u_basis) > 0 else -1

    def padded_lambdas(self) -> np.ndarray:
        """λ de largo n (ceros más allá de min(n,m))."""
        out = np.zeros(self.n)
        out[: self.lambdas.size] = self.lambdas
        return out

    def coframe(self) -> np.ndarray:
        """Filas ω^1..ω^{n+m}: duales del frame ortonormal (e_1..e_{n+m})."""
        return np.hstack([self.tangent_frame, self.normal_frame]).T

    def oriented_tangent(self) -> np.ndarray:
        """Frame tangente con la orientación del grafo (dx_1∧…∧dx_n > 0)."""
        t = np.array(self.tangent_frame)
        if self.orientation < 0:
            t[:, -1] *= -1.0
        return t

    def reconstruction_error(self, dF) -> float:
        A = as_matrix(dF)
        k = self.lambdas.size
        R = (self.v_basis[:, :k] * self.lambdas) @ self.u_basis[:, :k].T
        return float(np.max(np.abs(R - A))) if A.size else 0.0


def svd_frame(dF) -> SvdFrame:
    A = as_matrix(dF)
    if not np.all(np.isfinite(A)):
        raise ValueError("dF con entradas no finitas")
    m, n = A.shape
    k = min(n, m)
    W, s, Zt = np.linalg.svd(A, full_matrices=True)
    lam = np.array(s[:k], dtype=float)
    if k == 0 or lam[0] == 0.0:
        u, v = np.eye(n), np.eye(m)
        lam = np.zeros(k)
    else:
        u, v = Zt.T.copy(), W.copy()
    tol = rank_tolerance(lam)

    # SO(m) en el codominio; la columna que se da vuelta es la de menor λ
    if np.linalg.det(v) < 0:
        j = m - 1
        v[:, j] *= -1.0
        if j < k:
            # el par (u_j, v_j) se invierte junto aunque λ_j esté bajo la tolerancia
            u[:, j] *= -1.0

    tangent = np.zeros((n + m, n))
    for i in range(n):
        li = lam[i] if i < k else 0.0
        c = 1.0 / np.sqrt(1.0 + li * li)
        tangent[:n, i] = c * u[:, i]
        if i < m:
            tangent[n:, i] = c * li * v[:, i]
    normal = np.zeros((n + m, m))
    for i in range(m):
        li = lam[i] if i < k else 0.0
        c = 1.0 / np.sqrt(1.0 + li * li)
        if i < n:
            normal[:n, i] = -c * li * u[:, i]
        normal[n:, i] = c * v[:, i]

    for arr in (lam, u, v, tangent, normal):
        arr.flags.writeable = False
    return SvdFrame(
        lambdas=lam,
        rank_r=int(np.count_nonzero(lam > tol)),
        u_basis=u,
        v_basis=v,
        tangent_frame=tangent,
        normal_frame=normal,
    )


def _sym_pow(M: np.ndarray, p: float) -> np.ndarray:
    w, Q = np.linalg.eigh(M)
    return (Q * w ** p) @ Q.T


@dataclass(frozen=True, eq=False)
class TangentNormalData:
    G: np.ndarray
    H: np.ndarray
    J: np.ndarray
    g_metric: np.ndarray
    h_metric: np.ndarray
    L: np.ndarray  # (n+m)×n, columnas = L_p(∂x_j)
    L_perp: np.ndarray  # (n+m)×m, columnas = L_p^⊥(∂y_α)

    def j_ambient(self) -> np.ndarray:
        """J_p como operador de R^{n+m}: cero en la normal, imagen en la normal."""
        return self.L_perp @ self.J @ self.L.T


def tangent_normal_data(dF) -> TangentNormalData:
    A = as_matrix(dF)
    if not np.all(np.isfinite(A)):
        raise ValueError("dF con entradas no finitas")
    m, n = A.shape
    G = np.eye(n) + A.T @ A
    H = np.eye(m) + A @ A.T
    Gm = _sym_pow(G, -0.5)
    Hm = _sym_pow(H, -0.5)
    L = np.vstack([Gm, A @ Gm])
    L_perp = np.vstack([-A.T @ Hm, Hm])
    # en las bases (L_p, L_p^⊥) la matriz de J_p es dF
    J = np.array(A)
    return TangentNormalData(G=G, H=H, J=J, g_metric=G, h_metric=H, L=L, L_perp=L_perp)


def j_map(dF) -> np.ndarray:
    """J_p = L^⊥ ∘ dF ∘ L^{-1} sobre R^{n+m}."""
    return tangent_normal_data(dF).j_ambient()


def j_map_projection(dF) -> np.ndarray:
    """J_p = P_N ∘ ι_2 ∘ dF ∘ G ∘ π_1 ∘ P_T, sin raíces cuadradas."""
    A = as_matrix(dF)
    m, n = A.shape
    G = np.eye(n) + A.T @ A
    graph = np.vstack([np.eye(n), A])
    P_T = graph @ np.linalg.solve(G, graph.T)
    P_N = np.eye(n + m) - P_T
    pi1 = np.hstack([np.eye(n), np.zeros((n, m))])
    iota2 = np.vstack([np.zeros((n, m)), np.eye(m)])
    return P_N @ iota2 @ A @ G @ pi1 @ P_T


def j_in_frame(fr: SvdFrame, J_amb: np.ndarray) -> np.ndarray:
    """Matriz m×n de J en las bases (e_1..e_n) → (e_{n+1}..e_{n+m})."""
    return fr.normal_frame.T @ J_amb @ fr.tangent_frame


def sylvester_check(S) -> float:
    S = as_matrix(S)
    m, n = S.shape
    g = np.eye(n) + S.T @ S
    h = np.eye(m) + S @ S.T
    gi = np.linalg.inv(g)
    hi = np.linalg.inv(h)
    dg, dh = np.linalg.det(g), np.linalg.det(h)
    scale = max(1.0, float(np.max(np.abs(S)))) if S.size else 1.0

    errs = [
        abs(dg - dh) / max(1.0, abs(dg)),
        float(np.max(np.abs(hi - (np.eye(m) - S @ gi @ S.T)))),
        abs(np.trace(hi) - m - np.trace(gi) + n) / max(1.0, n + m),
        float(np.max(np.abs(hi @ S - S @ gi))) / scale if S.size else 0.0,
        float(np.max(np.abs(gi - (np.eye(n) - S.T @ hi @ S)))),
    ]
    return float(max(errs))
