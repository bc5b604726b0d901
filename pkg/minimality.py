from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from exterior import NForm, wedge
from maps import H1_REL, DomainError, GraphMap, hessians, jacobian
from theta import theta_h

DTHETA_REL_STEP = 1e-4
RATIO_FLOOR = 1e-6


def default_step(x) -> float:
    return DTHETA_REL_STEP * max(1.0, float(np.linalg.norm(np.asarray(x, dtype=float))))


def _require_margin(F: GraphMap, p: np.ndarray, need: float) -> None:
    got = F.margin(p)
    if got < need:
        raise DomainError(
            f"margen insuficiente en {tuple(float(v) for v in p)}: {got:.3g} < {need:.3g} "
            "(acercar el punto al interior o achicar h)"
        )


def _divergence_terms(F: GraphMap, x) -> tuple[np.ndarray, np.ndarray, list[np.ndarray], np.ndarray]:
    """(J, Hs, ∂_j(√g g^{-1}) para cada j, √g g^{-1})."""
    p = np.asarray(x, dtype=float).reshape(-1)
    _require_margin(F, p, F.fd_margin(p))
    J = jacobian(F, p).entries
    Hs = np.array(hessians(F, p)).reshape(F.m, F.n, F.n)
    n = F.n
    G = np.eye(n) + J.T @ J
    Gi = np.linalg.inv(G)
    sq = math.sqrt(float(np.linalg.det(G)))
    dA = []
    for j in range(n):
        D = Hs[:, :, j]  # ∂_j dF
        dG = D.T @ J + J.T @ D
        dsq = 0.5 * sq * float(np.trace(Gi @ dG))
        dA.append(dsq * Gi - sq * (Gi @ dG @ Gi))
    return J, Hs, dA, sq * Gi


def mgs_residual(F: GraphMap, x) -> np.ndarray:
    """Σ_{j,k} ∂_j(√g g^{jk} ∂_k f_α) para cada α, expandido con dF y d²F."""
    J, Hs, dA, A = _divergence_terms(F, x)
    res = np.zeros(F.m)
    for a in range(F.m):
        s = float(np.sum(A * Hs[a]))
        for j, dAj in enumerate(dA):
            s += float(dAj[j] @ J[a])
        res[a] = s
    return res


def stationarity_residual(F: GraphMap, x) -> np.ndarray:
    """Σ_k ∂_k(√g g^{jk}) para cada j."""
    _, _, dA, _ = _divergence_terms(F, x)
    return np.array([sum(float(dA[k][j, k]) for k in range(F.n)) for j in range(F.n)])


def dtheta_form(F: GraphMap, x, h: float | None = None) -> NForm:
    p = np.asarray(x, dtype=float).reshape(-1)
    step = default_step(p) if h is None else float(h)
    if not step > 0.0:
        raise ValueError("h debe ser positivo")
    need = step if F.exact else step + H1_REL * max(1.0, float(np.linalg.norm(p)) + step)
    _require_margin(F, p, need)

    n, m = F.n, F.m
    d = n + m
    out = NForm.zero(d, n + 1)
    for j in range(n):
        e = np.zeros(n)
        e[j] = step
        plus = theta_h(jacobian(F, p + e)).form
        minus = theta_h(jacobian(F, p - e)).form
        out = out + wedge(NForm.basis(d, (j,)), (plus - minus) * (1.0 / (2.0 * step)))
    if __debug__:
        # Θ no depende de y: cada término de dΘ lleva exactamente un dy_α
        for idx, _ in out.support():
            assert sum(1 for i in idx if i >= n) == 1, idx
    return out


def dtheta_residual(F: GraphMap, x, h: float | None = None) -> float:
    return dtheta_form(F, x, h).norm()


@dataclass(frozen=True, eq=False)
class MinimalityReport:
    point: np.ndarray
    mgs_residual: np.ndarray
    mgs_norm: float
    dtheta_norm: float
    step: float
    stationarity_norm: float = 0.0


def minimality_report(F: GraphMap, x, h: float | None = None) -> MinimalityReport:
    p = np.asarray(x, dtype=float).reshape(-1)
    step = default_step(p) if h is None else float(h)
    res = mgs_residual(F, p)
    return MinimalityReport(
        point=p,
        mgs_residual=res,
        mgs_norm=float(np.linalg.norm(res)),
        dtheta_norm=dtheta_residual(F, p, step),
        step=step,
        stationarity_norm=float(np.linalg.norm(stationarity_residual(F, p))),
    )


@dataclass(frozen=True)
class ProbeRow:
    point: tuple[float, ...]
    mgs_norm: float
    dtheta_norm: float
    ratio: float  # dtheta/mgs; nan si mgs <= RATIO_FLOOR


@dataclass(frozen=True)
class EquivalenceSummary:
    rows: tuple[ProbeRow, ...] = field(default_factory=tuple)

    @property
    def max_mgs(self) -> float:
        return max((r.mgs_norm for r in self.rows), default=0.0)

    @property
    def max_dtheta(self) -> float:
        return max((r.dtheta_norm for r in self.rows), default=0.0)

    def ratio_range(self) -> tuple[float, float] | None:
        vals = [r.ratio for r in self.rows if not math.isnan(r.ratio)]
        if not vals:
            return None
        return min(vals), max(vals)


def equivalence_probe(F: GraphMap, points) -> EquivalenceSummary:
    rows = []
    for x in points:
        rep = minimality_report(F, x)
        ratio = rep.dtheta_norm / rep.mgs_norm if rep.mgs_norm > RATIO_FLOOR else math.nan
        rows.append(ProbeRow(tuple(float(v) for v in rep.point), rep.mgs_norm, rep.dtheta_norm, ratio))
    return EquivalenceSummary(tuple(rows))
