from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from math import factorial

import numpy as np

from exterior import NForm, evaluate, hodge_star_rn, interior, wedge, wedge_covectors
from frames import SvdFrame, svd_frame
from maps import GraphMap, as_matrix, jacobian

ROUTE_SVD = "svd_series"
ROUTE_H = "h_formula"
ROUTE_G = "g_formula"
ROUTE_CODIM2 = "codim2"
ROUTE_SVD_COORDS = "svd_coords"

ROUTES = (ROUTE_SVD, ROUTE_H, ROUTE_G, ROUTE_CODIM2, ROUTE_SVD_COORDS)


@dataclass(frozen=True, eq=False)
class ThetaForm:
    form: NForm
    route: str
    base_point: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def n(self) -> int:
        return self.form.degree

    @property
    def m(self) -> int:
        return self.form.ambient_dim - self.form.degree


def volume_form(n: int, m: int) -> NForm:
    return NForm.basis(n + m, tuple(range(n)))


def _point(dF) -> np.ndarray:
    return getattr(dF, "base_point", np.zeros(0))


# ---------------- Rutas por frame SVD ----------------

def _delta(fr: SvdFrame, I: tuple[int, ...]) -> NForm:
    """Δ_I: el factor j es ω^{n+j} si j ∈ I, si no ω^j."""
    n = fr.n
    co = fr.coframe()
    rows = [co[n + j] if j in I else co[j] for j in range(n)]
    return wedge_covectors(np.array(rows))


def _delta_sum(fr: SvdFrame, ell: int) -> NForm:
    n, m = fr.n, fr.m
    out = NForm.zero(n + m, n)
    if ell == 0:
        return _delta(fr, ())
    for I in combinations(range(fr.rank_r), ell):
        prod = float(np.prod(fr.lambdas[list(I)]))
        out = out + _delta(fr, I) * prod
    return out


def psi_ell(fr: SvdFrame, ell: int) -> NForm:
    """Ψ^ℓ(F) = ℓ! Σ_{|I|=ℓ} (Π λ_j) Δ_I en coordenadas estándar (orientación del frame)."""
    if not 0 <= ell <= fr.n:
        raise ValueError(f"ell={ell} fuera de rango [0, {fr.n}]")
    return _delta_sum(fr, ell) * factorial(ell)


def theta_svd(fr: SvdFrame) -> ThetaForm:
    # (1+Ψ)e^{-Ψ}: el coeficiente de Σ Πλ Δ_I es (-1)^ℓ (1-ℓ); ℓ=1 no aporta
    form = _delta_sum(fr, 0)
    for ell in range(2, fr.rank_r + 1):
        form = form + _delta_sum(fr, ell) * ((-1.0) ** ell * (1 - ell))
    return ThetaForm(form * fr.orientation, ROUTE_SVD)


def theta_svd_coords(fr: SvdFrame) -> ThetaForm:
    n, m = fr.n, fr.m
    d = n + m
    lam = fr.lambdas
    k = lam.size
    dx = np.zeros((n, d))
    dx[:, :n] = fr.u_basis.T  # filas dx̃_i
    dy = np.zeros((m, d))
    dy[:, n:] = fr.v_basis.T  # filas dỹ_α

    scale = float(np.sqrt(np.prod(1.0 + lam ** 2)))
    ratio = lam ** 2 / (1.0 + lam ** 2)
    form = wedge_covectors(dx) * (scale * (1.0 - float(np.sum(ratio))))
    for j in range(k):
        if lam[j] == 0.0:
            continue
        rows = np.vstack([dy[j:j + 1], np.delete(dx, j, axis=0)])
        coef = scale * (-1.0) ** j * lam[j] / (1.0 + lam[j] ** 2)
        form = form + wedge_covectors(rows) * coef
    return ThetaForm(form * fr.orientation, ROUTE_SVD_COORDS)


def mixed_frame(fr: SvdFrame, ell: int) -> np.ndarray:
    """(e_{n+1},…,e_{n+ℓ}, e_{ℓ+1},…,e_n)."""
    if not 1 <= ell <= min(fr.n, fr.m):
        raise ValueError(f"ell={ell} fuera de rango [1, {min(fr.n, fr.m)}]")
    return np.hstack([fr.normal_frame[:, :ell], fr.tangent_frame[:, ell:]])


def mixed_frame_value(fr: SvdFrame, theta: ThetaForm, ell: int) -> float:
    """Valor de Θ en el frame mixto, medido con la orientación del frame SVD."""
    return fr.orientation * evaluate(theta.form, mixed_frame(fr, ell))


# ---------------- Rutas en coordenadas ----------------

def _padded(vec, d: int) -> NForm:
    c = np.zeros(d)
    v = np.asarray(vec, dtype=float)
    c[: v.size] = v
    return NForm.covector(c)


def theta_h(dF) -> ThetaForm:
    A = as_matrix(dF)
    m, n = A.shape
    d = n + m
    H = np.eye(m) + A @ A.T
    Hi = np.linalg.inv(H)
    sq = float(np.sqrt(np.linalg.det(H)))

    form = volume_form(n, m) * (sq * (float(np.trace(Hi)) - (m - 1)))
    C = sq * (Hi @ A)  # fila α: Σ_β √h h^{αβ} df_β
    for a in range(m):
        if not np.any(C[a]):
            continue
        form = form + wedge(NForm.basis(d, (n + a,)), hodge_star_rn(_padded(C[a], d), n))
    return ThetaForm(form, ROUTE_H, _point(dF))


def theta_g(dF) -> ThetaForm:
    A = as_matrix(dF)
    m, n = A.shape
    d = n + m
    G = np.eye(n) + A.T @ A
    Gi = np.linalg.inv(G)
    sq = float(np.sqrt(np.linalg.det(G)))

    vol = volume_form(n, m)
    form = vol * (sq * (float(np.trace(Gi)) - (n - 1)))
    for a in range(m):
        V = sq * (Gi @ A[a])
        if not np.any(V):
            continue
        form = form + wedge(NForm.basis(d, (n + a,)), interior(np.concatenate([V, np.zeros(m)]), vol))
    return ThetaForm(form, ROUTE_G, _point(dF))


def theta_codim2(grad_f, grad_g) -> ThetaForm:
    gf = np.asarray(grad_f, dtype=float).reshape(-1)
    gg = np.asarray(grad_g, dtype=float).reshape(-1)
    if gf.shape != gg.shape:
        raise ValueError("grad_f y grad_g deben tener el mismo largo")
    n = gf.size
    d = n + 2
    ff, gg2, fg = float(gf @ gf), float(gg @ gg), float(gf @ gg)
    xi = (1.0 + ff) * (1.0 + gg2) - fg * fg

    form = volume_form(n, 2) * (1.0 - ff * gg2 + fg * fg)
    star_f = hodge_star_rn(_padded(gf, d), n)
    star_g = hodge_star_rn(_padded(gg, d), n)
    form = form + wedge(NForm.basis(d, (n,)), star_f * (1.0 + gg2) - star_g * fg)
    form = form + wedge(NForm.basis(d, (n + 1,)), star_g * (1.0 + ff) - star_f * fg)
    return ThetaForm(form * (1.0 / np.sqrt(xi)), ROUTE_CODIM2)


# ---------------- Utilidades ----------------

def theta_routes(dF) -> dict[str, ThetaForm]:
    A = as_matrix(dF)
    fr = svd_frame(A)
    out = {
        ROUTE_SVD: theta_svd(fr),
        ROUTE_H: theta_h(A),
        ROUTE_G: theta_g(A),
        ROUTE_SVD_COORDS: theta_svd_coords(fr),
    }
    if A.shape[0] == 2:
        out[ROUTE_CODIM2] = theta_codim2(A[0], A[1])
    return out


def max_route_deviation(routes: dict[str, ThetaForm]) -> float:
    forms = list(routes.values())
    worst = 0.0
    for i in range(len(forms)):
        for j in range(i + 1, len(forms)):
            worst = max(worst, forms[i].form.max_abs_diff(forms[j].form))
    return worst


def theta_at(F: GraphMap, x, route: str = ROUTE_H) -> ThetaForm:
    dF = jacobian(F, x)
    A = dF.entries
    if route == ROUTE_H:
        t = theta_h(dF)
    elif route == ROUTE_G:
        t = theta_g(dF)
    elif route == ROUTE_SVD:
        t = theta_svd(svd_frame(A))
    elif route == ROUTE_SVD_COORDS:
        t = theta_svd_coords(svd_frame(A))
    elif route == ROUTE_CODIM2:
        if F.m != 2:
            raise ValueError("la ruta codim2 requiere m = 2")
        t = theta_codim2(A[0], A[1])
    else:
        raise ValueError(f"ruta desconocida {route!r}; opciones: {', '.join(ROUTES)}")
    return ThetaForm(t.form, t.route, dF.base_point)
