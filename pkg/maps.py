from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

DOMAIN_SLACK = 1e-12
H1_REL = 1e-6  # paso primeras derivadas
H2_REL = 1e-4  # paso segundas derivadas


class MapSpecError(ValueError):
    """Spec JSON inválido; el mensaje arranca con el path del campo."""

    def __init__(self, path: str, msg: str):
        super().__init__(f"{path}: {msg}")
        self.path = path


class DomainError(RuntimeError):
    pass


Monomial = tuple[tuple[int, ...], float]


@dataclass(frozen=True)
class Builtin:
    name: str
    n: int
    m: int
    domain: tuple[tuple[float, float], ...]
    is_minimal: bool
    description: str
    # o bien componentes polinomiales (derivadas exactas) o bien una función analítica
    polynomial: Callable[[int, int, tuple[float, ...]], tuple[tuple[Monomial, ...], ...]] | None = None
    func: Callable[[np.ndarray, tuple[float, ...]], np.ndarray] | None = None
    fixed_dims: bool = True


# ---------------- Galería de builtins ----------------

def _linear_poly(n: int, m: int, params: tuple[float, ...]) -> tuple[tuple[Monomial, ...], ...]:
    if params and len(params) != n * m:
        raise MapSpecError("params", f"linear espera {n * m} entradas (matriz {m}x{n} por filas), vinieron {len(params)}")
    A = np.array(params, dtype=float).reshape(m, n) if params else np.zeros((m, n))
    comps = []
    for a in range(m):
        mons = []
        for j in range(n):
            if A[a, j] != 0.0:
                e = [0] * n
                e[j] = 1
                mons.append((tuple(e), float(A[a, j])))
        comps.append(tuple(mons))
    return tuple(comps)


def _holo_square_poly(n: int, m: int, params: tuple[float, ...]) -> tuple[tuple[Monomial, ...], ...]:
    c = float(params[0]) if params else 1.0
    return (
        (((2, 0), 0.5 * c), ((0, 2), -0.5 * c)),
        (((1, 1), c),),
    )


def _paraboloid_poly(n: int, m: int, params: tuple[float, ...]) -> tuple[tuple[Monomial, ...], ...]:
    return ((((2, 0), 1.0), ((0, 2), 1.0)),)


# Las funciones analíticas usan ufuncs de numpy: los stencils las evalúan en np.longdouble.

def _scherk(x: np.ndarray, params: tuple[float, ...]) -> np.ndarray:
    if np.any(np.abs(x) >= math.pi / 2):
        raise DomainError(f"scherk no está definida en {tuple(float(v) for v in x)} (|x_i| >= pi/2)")
    return np.stack([np.log(np.cos(x[0])) - np.log(np.cos(x[1]))])


def _holo_exp(x: np.ndarray, params: tuple[float, ...]) -> np.ndarray:
    e = np.exp(x[0])
    return np.stack([e * np.cos(x[1]), e * np.sin(x[1])])


def _helicoid(x: np.ndarray, params: tuple[float, ...]) -> np.ndarray:
    if x[0] <= 0.0:
        raise DomainError(f"helicoid requiere x1 > 0 (x={tuple(float(v) for v in x)})")
    return np.stack([np.arctan(x[1] / x[0])])


BUILTINS: dict[str, Builtin] = {
    b.name: b
    for b in [
        Builtin(
            name="linear",
            n=2, m=2,
            domain=((-1.0, 1.0), (-1.0, 1.0)),
            is_minimal=True,
            description="F(x) = A x; params = A por filas (vacío = mapa nulo)",
            polynomial=_linear_poly,
            fixed_dims=False,
        ),
        Builtin(
            name="holomorphic_square",
            n=2, m=2,
            domain=((-1.0, 1.0), (-1.0, 1.0)),
            is_minimal=True,
            description="F = c((x1^2 - x2^2)/2, x1 x2); params = [c]",
            polynomial=_holo_square_poly,
        ),
        Builtin(
            name="scherk",
            n=2, m=1,
            domain=((-math.pi / 2, math.pi / 2), (-math.pi / 2, math.pi / 2)),
            is_minimal=True,
            description="f = log cos x1 - log cos x2",
            func=_scherk,
        ),
        Builtin(
            name="paraboloid",
            n=2, m=1,
            domain=((-1.0, 1.0), (-1.0, 1.0)),
            is_minimal=False,
            description="f = x1^2 + x2^2 (no minimal, control negativo)",
            polynomial=_paraboloid_poly,
        ),
        Builtin(
            name="holomorphic_exp",
            n=2, m=2,
            domain=((-1.0, 1.0), (-1.0, 1.0)),
            is_minimal=True,
            description="F = (e^x1 cos x2, e^x1 sin x2)",
            func=_holo_exp,
        ),
        Builtin(
            name="helicoid",
            n=2, m=1,
            domain=((0.2, 1.2), (-1.0, 1.0)),
            is_minimal=True,
            description="f = arctan(x2/x1), x1 > 0",
            func=_helicoid,
        ),
    ]
}


# ---------------- Tipos ----------------

@dataclass(frozen=True)
class GraphMap:
    n: int
    m: int
    kind: str  # polynomial | builtin
    domain: tuple[tuple[float, float], ...]
    components: tuple[tuple[Monomial, ...], ...] = ()
    name: str = ""
    params: tuple[float, ...] = ()

    @property
    def exact(self) -> bool:
        # builtins polinomiales también tienen derivadas exactas
        return bool(self.components) or self.kind == "polynomial"

    def margin(self, x) -> float:
        x = np.asarray(x, dtype=float)
        lo = np.array([b[0] for b in self.domain])
        hi = np.array([b[1] for b in self.domain])
        return float(np.min(np.minimum(x - lo, hi - x)))

    def contains(self, x) -> bool:
        return self.margin(x) >= -DOMAIN_SLACK

    def fd_margin(self, x) -> float:
        """Margen requerido por los stencils (0 si las derivadas son exactas)."""
        if self.exact:
            return 0.0
        return H2_REL * max(1.0, float(np.linalg.norm(x)))


@dataclass(frozen=True)
class Jacobian:
    entries: np.ndarray
    base_point: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        e = np.array(self.entries, dtype=float)
        if e.ndim != 2:
            raise ValueError("el jacobiano debe ser una matriz m×n")
        if not np.all(np.isfinite(e)):
            raise DomainError("jacobiano con entradas no finitas")
        e.flags.writeable = False
        object.__setattr__(self, "entries", e)
        object.__setattr__(self, "base_point", np.array(self.base_point, dtype=float))

    @property
    def m(self) -> int:
        return int(self.entries.shape[0])

    @property
    def n(self) -> int:
        return int(self.entries.shape[1])


def as_matrix(dF) -> np.ndarray:
    return dF.entries if isinstance(dF, Jacobian) else np.asarray(dF, dtype=float)


# ---------------- Evaluación ----------------

def _point(F: GraphMap, x) -> np.ndarray:
    p = np.asarray(x, dtype=float).reshape(-1)
    if p.shape[0] != F.n:
        raise DomainError(f"el punto tiene {p.shape[0]} coordenadas, se esperaban {F.n}")
    if not F.contains(p):
        raise DomainError(f"punto {tuple(float(v) for v in p)} fuera del dominio {F.domain}")
    return p


def _eval_builtin(F: GraphMap, p: np.ndarray) -> np.ndarray:
    """Valor del builtin en la precisión de p (float64 o longdouble)."""
    b = BUILTINS[F.name]
    with np.errstate(all="raise"):
        try:
            val = np.asarray(b.func(p, F.params), dtype=p.dtype)
        except (FloatingPointError, ValueError, ZeroDivisionError) as e:
            raise DomainError(f"{F.name} indefinida en {tuple(float(v) for v in p)}: {e}") from e
    if not np.all(np.isfinite(val)):
        raise DomainError(f"{F.name} no finita en {tuple(float(v) for v in p)}")
    return val


def _eval_raw(F: GraphMap, p: np.ndarray) -> np.ndarray:
    if F.components:
        out = np.zeros(F.m)
        for a, mons in enumerate(F.components):
            s = 0.0
            for exps, coef in mons:
                s += coef * math.prod(p[j] ** e for j, e in enumerate(exps))
            out[a] = s
        return out
    return _eval_builtin(F, p).astype(float)


def evaluate_map(F: GraphMap, x) -> np.ndarray:
    return _eval_raw(F, _point(F, x))


def _poly_jacobian(F: GraphMap, p: np.ndarray) -> np.ndarray:
    J = np.zeros((F.m, F.n))
    for a, mons in enumerate(F.components):
        for exps, coef in mons:
            for j, e in enumerate(exps):
                if e == 0:
                    continue
                t = coef * e
                for i, ei in enumerate(exps):
                    t *= p[i] ** (ei - 1 if i == j else ei)
                J[a, j] += t
    return J


def _poly_hessians(F: GraphMap, p: np.ndarray) -> list[np.ndarray]:
    out = []
    for mons in F.components:
        Hs = np.zeros((F.n, F.n))
        for exps, coef in mons:
            for j in range(F.n):
                for k in range(F.n):
                    e = list(exps)
                    mult = e[j]
                    e[j] -= 1
                    mult *= e[k]
                    e[k] -= 1
                    if mult == 0:
                        continue
                    Hs[j, k] += (coef * mult) * math.prod(p[i] ** ei for i, ei in enumerate(e))
        out.append(Hs)
    return out


def jacobian(F: GraphMap, x) -> Jacobian:
    p = _point(F, x)
    if F.exact:
        return Jacobian(_poly_jacobian(F, p), p)
    # stencils en longdouble: el ruido de redondeo queda muy por debajo de h1²
    pl = p.astype(np.longdouble)
    h = np.longdouble(H1_REL * max(1.0, float(np.linalg.norm(p))))
    J = np.zeros((F.m, F.n))
    for j in range(F.n):
        e = np.zeros(F.n, dtype=np.longdouble)
        e[j] = h
        J[:, j] = ((_eval_builtin(F, pl + e) - _eval_builtin(F, pl - e)) / (2 * h)).astype(float)
    return Jacobian(J, p)


def hessians(F: GraphMap, x) -> list[np.ndarray]:
    p = _point(F, x)
    if F.exact:
        return _poly_hessians(F, p)
    pl = p.astype(np.longdouble)
    h = np.longdouble(H2_REL * max(1.0, float(np.linalg.norm(p))))
    def f(q):
        return _eval_builtin(F, q)

    f0 = f(pl)
    H = np.zeros((F.m, F.n, F.n))
    for j in range(F.n):
        ej = np.zeros(F.n, dtype=np.longdouble)
        ej[j] = h
        H[:, j, j] = ((f(pl + ej) - 2 * f0 + f(pl - ej)) / (h * h)).astype(float)
        for k in range(j + 1, F.n):
            ek = np.zeros(F.n, dtype=np.longdouble)
            ek[k] = h
            v = ((f(pl + ej + ek) - f(pl + ej - ek) - f(pl - ej + ek) + f(pl - ej - ek)) / (4 * h * h)).astype(float)
            H[:, j, k] = v
            H[:, k, j] = v
    return [H[a] for a in range(F.m)]


# ---------------- Spec JSON ----------------

def _req_int(doc: dict, key: str, path: str) -> int:
    if key not in doc:
        raise MapSpecError(f"{path}{key}", "falta el campo")
    v = doc[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise MapSpecError(f"{path}{key}", f"se esperaba entero, vino {v!r}")
    if v < 1:
        raise MapSpecError(f"{path}{key}", "debe ser >= 1")
    return v


def _num(v, path: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise MapSpecError(path, f"se esperaba número, vino {v!r}")
    if not math.isfinite(float(v)):
        raise MapSpecError(path, "número no finito")
    return float(v)


def _parse_domain(raw, n: int, default) -> tuple[tuple[float, float], ...]:
    if raw is None:
        return tuple(default)
    if not isinstance(raw, list) or len(raw) != n:
        raise MapSpecError("domain", f"se esperaban {n} intervalos [lo, hi]")
    out = []
    for i, iv in enumerate(raw):
        if not isinstance(iv, list) or len(iv) != 2:
            raise MapSpecError(f"domain[{i}]", "se esperaba [lo, hi]")
        lo, hi = _num(iv[0], f"domain[{i}][0]"), _num(iv[1], f"domain[{i}][1]")
        if not lo < hi:
            raise MapSpecError(f"domain[{i}]", "lo debe ser menor que hi")
        out.append((lo, hi))
    return tuple(out)


def graph_map_from_dict(doc) -> GraphMap:
    if not isinstance(doc, dict):
        raise MapSpecError("$", "el documento debe ser un objeto JSON")
    kind = doc.get("kind")
    if kind not in ("polynomial", "builtin"):
        raise MapSpecError("kind", f"debe ser 'polynomial' o 'builtin', vino {kind!r}")

    if kind == "builtin":
        name = doc.get("name")
        if not isinstance(name, str):
            raise MapSpecError("name", "falta el nombre del builtin")
        b = BUILTINS.get(name)
        if b is None:
            raise MapSpecError("name", f"builtin desconocido {name!r}; disponibles: {', '.join(sorted(BUILTINS))}")
        n = _req_int(doc, "n", "") if "n" in doc else b.n
        m = _req_int(doc, "m", "") if "m" in doc else b.m
        if b.fixed_dims and (n, m) != (b.n, b.m):
            raise MapSpecError("n", f"{name} es {b.n}->{b.m}, vino {n}->{m}")
        raw_params = doc.get("params", [])
        if not isinstance(raw_params, list):
            raise MapSpecError("params", "se esperaba una lista de reales")
        params = tuple(_num(v, f"params[{i}]") for i, v in enumerate(raw_params))
        default_dom = b.domain if (n, m) == (b.n, b.m) else tuple((-1.0, 1.0) for _ in range(n))
        domain = _parse_domain(doc.get("domain"), n, default_dom)
        comps = b.polynomial(n, m, params) if b.polynomial else ()
        return GraphMap(n=n, m=m, kind="builtin", domain=domain, components=comps, name=name, params=params)

    n = _req_int(doc, "n", "")
    m = _req_int(doc, "m", "")
    raw = doc.get("components")
    if not isinstance(raw, list):
        raise MapSpecError("components", "se esperaba una lista")
    if len(raw) != m:
        raise MapSpecError("components", f"se esperaban {m} componentes, vinieron {len(raw)}")
    comps = []
    for a, comp in enumerate(raw):
        if not isinstance(comp, list):
            raise MapSpecError(f"components[{a}]", "se esperaba una lista de monomios")
        mons = []
        for t, mon in enumerate(comp):
            p = f"components[{a}][{t}]"
            if not isinstance(mon, dict):
                raise MapSpecError(p, "se esperaba {exps, coef}")
            exps = mon.get("exps")
            if not isinstance(exps, list) or len(exps) != n:
                raise MapSpecError(f"{p}.exps", f"se esperaban {n} exponentes")
            for i, e in enumerate(exps):
                if isinstance(e, bool) or not isinstance(e, int) or e < 0:
                    raise MapSpecError(f"{p}.exps[{i}]", f"exponente inválido {e!r}")
            if "coef" not in mon:
                raise MapSpecError(f"{p}.coef", "falta el coeficiente")
            mons.append((tuple(exps), _num(mon["coef"], f"{p}.coef")))
        comps.append(tuple(mons))
    domain = _parse_domain(doc.get("domain"), n, tuple((-1.0, 1.0) for _ in range(n)))
    return GraphMap(n=n, m=m, kind="polynomial", domain=domain, components=tuple(comps))


def parse_map_spec(text: str) -> GraphMap:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise MapSpecError("$", f"JSON mal formado (línea {e.lineno}, columna {e.colno}): {e.msg}") from e
    return graph_map_from_dict(doc)


def load_map_spec(path: str | Path) -> GraphMap:
    p = Path(path)
    if not p.exists():
        raise MapSpecError("$", f"no existe el archivo {p}")
    return parse_map_spec(p.read_text(encoding="utf-8"))


def builtin_map(name: str, params: tuple[float, ...] | list[float] = (), *, n: int | None = None,
                m: int | None = None, domain=None) -> GraphMap:
    doc: dict = {"kind": "builtin", "name": name, "params": list(params)}
    if n is not None:
        doc["n"] = n
    if m is not None:
        doc["m"] = m
    if domain is not None:
        doc["domain"] = [list(iv) for iv in domain]
    return graph_map_from_dict(doc)
