from __future__ import annotations

import csv
import io
import itertools
import json
import math
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from comass import dilation_check, epsilon_star, lower_bound, upper_bound
from frames import svd_frame
from maps import H1_REL, DOMAIN_SLACK, DomainError, GraphMap, jacobian
from minimality import default_step, dtheta_residual, mgs_residual
from theta import theta_h

CALIBRATED_CRUDE = "calibrated_crude"
CALIBRATED_REFINED = "calibrated_refined"
COMASS_BOUND_ONLY = "comass_bound_only"
NOT_CERTIFIED = "not_certified"
NOT_MINIMAL = "not_minimal"
UNDEFINED = "undefined"

VERDICTS = (CALIBRATED_CRUDE, CALIBRATED_REFINED, COMASS_BOUND_ONLY, NOT_CERTIFIED, NOT_MINIMAL, UNDEFINED)
CERTIFIED = (CALIBRATED_CRUDE, CALIBRATED_REFINED)

REPORT_FORMATS = ("csv", "json", "xlsx")


@dataclass(frozen=True)
class CertifyOptions:
    minimality_tol: float = 1e-6
    comass_tol: float = 1e-12
    epsilon_tol: float = 1e-10
    with_lower: bool = False
    restarts: int = 64
    seed: int = 0
    threads: int = 1
    with_dtheta: bool = True


@dataclass(frozen=True)
class PointReport:
    point: tuple[float, ...]
    rank_r: int
    lambdas: tuple[float, ...]
    max_pair_product: float
    mgs_norm: float
    dtheta_norm: float
    upper: float
    lower: float | None
    verdict: str
    global_verdict: str = ""
    error: str = ""


@dataclass
class RegionReport:
    n: int
    m: int
    grid: tuple[tuple[float, float, int], ...]
    points: list[PointReport] = field(default_factory=list)
    global_rank: int = 0
    config: dict = field(default_factory=dict)

    @property
    def counts(self) -> dict[str, int]:
        return {v: sum(1 for p in self.points if p.verdict == v) for v in VERDICTS}

    @property
    def global_counts(self) -> dict[str, int]:
        return {v: sum(1 for p in self.points if p.global_verdict == v) for v in VERDICTS}

    def summary_lines(self) -> list[str]:
        out = [f"puntos: {len(self.points)}  rango global: {self.global_rank}"]
        for v in VERDICTS:
            c, g = self.counts[v], self.global_counts[v]
            if c or g:
                out.append(f"  {v:<20} puntual={c:<6} global={g}")
        return out


# ---------------- Grilla ----------------

_AXIS_RE = re.compile(r"^x(\d+)=([^:]+):([^:]+):([^:]+)$")


def parse_grid(text: str, n: int) -> tuple[tuple[float, float, int], ...]:
    """'x1=lo:hi:count,x2=…' con exactamente un eje por coordenada."""
    axes: dict[int, tuple[float, float, int]] = {}
    for part in (text or "").split(","):
        part = part.strip()
        mt = _AXIS_RE.match(part)
        if not mt:
            raise ValueError(f"eje mal formado {part!r}; se espera x<i>=lo:hi:count")
        i = int(mt.group(1))
        if not 1 <= i <= n:
            raise ValueError(f"eje x{i} fuera de rango (n={n})")
        if i in axes:
            raise ValueError(f"eje x{i} repetido")
        try:
            lo, hi = float(mt.group(2)), float(mt.group(3))
            count = int(mt.group(4))
        except ValueError as e:
            raise ValueError(f"valores inválidos en {part!r}") from e
        if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
            raise ValueError(f"intervalo inválido en {part!r}")
        if count < 0:
            raise ValueError(f"count negativo en {part!r}")
        axes[i] = (lo, hi, count)
    missing = [f"x{i}" for i in range(1, n + 1) if i not in axes]
    if missing:
        raise ValueError(f"faltan ejes: {', '.join(missing)}")
    return tuple(axes[i] for i in range(1, n + 1))


def grid_points(grid) -> list[tuple[float, ...]]:
    axes = [np.linspace(lo, hi, count) if count else np.zeros(0) for lo, hi, count in grid]
    return [tuple(float(v) for v in pt) for pt in itertools.product(*axes)]


def _check_grid(F: GraphMap, grid) -> None:
    if len(grid) != F.n:
        raise ValueError(f"la grilla tiene {len(grid)} ejes, el mapa n={F.n}")
    for i, ((lo, hi, count), (dlo, dhi)) in enumerate(zip(grid, F.domain)):
        if count < 0 or not lo <= hi:
            raise ValueError(f"eje x{i + 1} inválido: {lo}:{hi}:{count}")
        if lo < dlo - DOMAIN_SLACK or hi > dhi + DOMAIN_SLACK:
            raise DomainError(f"eje x{i + 1} = [{lo}, {hi}] fuera del dominio [{dlo}, {dhi}]")


# ---------------- Veredicto ----------------

def decide(mgs_norm: float, crude_ok: bool, refined_ok: bool, upper: float, opts: CertifyOptions) -> str:
    if not mgs_norm <= opts.minimality_tol:
        return NOT_MINIMAL
    if crude_ok:
        return CALIBRATED_CRUDE
    if refined_ok:
        return CALIBRATED_REFINED
    if upper <= 1.0 + opts.comass_tol:
        return COMASS_BOUND_ONLY
    return NOT_CERTIFIED


def _verdict_for_rank(lambdas, r: int, mgs_norm: float, eps: dict[int, float], opts: CertifyOptions) -> tuple[str, float]:
    dil = dilation_check(lambdas, r, eps.get(r, 1.0))
    upper, _ = upper_bound(lambdas, r)
    return decide(mgs_norm, dil.crude_ok, dil.refined_ok, upper, opts), upper


def _undefined(x: tuple[float, ...], k: int, msg: str) -> PointReport:
    nan = math.nan
    return PointReport(x, 0, tuple([nan] * k), nan, nan, nan, nan, None, UNDEFINED, UNDEFINED, msg)


def certify_point(F: GraphMap, x, opts: CertifyOptions, eps: dict[int, float]) -> PointReport:
    p = tuple(float(v) for v in x)
    k = min(F.n, F.m)
    try:
        dF = jacobian(F, p)
        fr = svd_frame(dF)
        mgs = float(np.linalg.norm(mgs_residual(F, p)))
        dtheta = math.nan
        if opts.with_dtheta:
            h = default_step(p)
            need = h if F.exact else h + H1_REL * max(1.0, float(np.linalg.norm(p)) + h)
            if F.margin(p) >= need:
                dtheta = dtheta_residual(F, p, h)
        r = fr.rank_r
        verdict, upper = _verdict_for_rank(fr.lambdas, r, mgs, eps, opts)
        lower = None
        if opts.with_lower:
            lower = lower_bound(theta_h(dF), opts.restarts, opts.seed).lower
    except DomainError as e:
        return _undefined(p, k, str(e))
    lam = fr.lambdas
    return PointReport(
        point=p,
        rank_r=r,
        lambdas=tuple(float(v) for v in lam),
        max_pair_product=float(lam[0] * lam[1]) if lam.size >= 2 else 0.0,
        mgs_norm=mgs,
        dtheta_norm=dtheta,
        upper=upper,
        lower=lower,
        verdict=verdict,
    )


def certify_grid(F: GraphMap, grid, opts: CertifyOptions | None = None) -> RegionReport:
    opts = opts or CertifyOptions()
    grid = tuple((float(lo), float(hi), int(c)) for lo, hi, c in grid)
    _check_grid(F, grid)
    pts = grid_points(grid)

    eps = {r: epsilon_star(r, opts.epsilon_tol) for r in range(2, min(F.n, F.m) + 1)}

    def run(x):
        return certify_point(F, x, opts, eps)

    if opts.threads > 1 and len(pts) > 1:
        with ThreadPoolExecutor(max_workers=opts.threads) as ex:
            reports = list(ex.map(run, pts))
    else:
        reports = [run(x) for x in pts]

    defined = [rp for rp in reports if rp.verdict != UNDEFINED]
    R = max((rp.rank_r for rp in defined), default=0)
    final = []
    for rp in reports:
        if rp.verdict == UNDEFINED:
            final.append(rp)
            continue
        gv, _ = _verdict_for_rank(rp.lambdas, R, rp.mgs_norm, eps, opts)
        final.append(replace(rp, global_verdict=gv))

    config = {
        "minimality_tol": opts.minimality_tol,
        "comass_tol": opts.comass_tol,
        "epsilon_tol": opts.epsilon_tol,
        "epsilon": {str(r): v for r, v in eps.items()},
        "with_lower": opts.with_lower,
        "restarts": opts.restarts,
        "seed": opts.seed,
    }
    return RegionReport(n=F.n, m=F.m, grid=grid, points=final, global_rank=R, config=config)


# ---------------- Salida ----------------

def csv_header(n: int, m: int) -> list[str]:
    return (
        [f"x_{i + 1}" for i in range(n)]
        + ["rank"]
        + [f"lambda_{i + 1}" for i in range(min(n, m))]
        + ["max_pair_product", "mgs_norm", "dtheta_norm", "comass_upper", "comass_lower",
           "pointwise_verdict", "global_verdict"]
    )


def _num(v: float) -> str:
    return format(float(v), ".17g")


def _csv_row(p: PointReport) -> list[str]:
    return (
        [_num(v) for v in p.point]
        + [str(p.rank_r)]
        + [_num(v) for v in p.lambdas]
        + [_num(p.max_pair_product), _num(p.mgs_norm), _num(p.dtheta_norm), _num(p.upper),
           "" if p.lower is None else _num(p.lower), p.verdict, p.global_verdict]
    )


def report_csv(rep: RegionReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(csv_header(rep.n, rep.m))
    for p in rep.points:
        w.writerow(_csv_row(p))
    return buf.getvalue()


def _json_num(v):
    if v is None:
        return None
    v = float(v)
    return v if math.isfinite(v) else None


def _from_json_num(v) -> float:
    return math.nan if v is None else float(v)


def report_to_dict(rep: RegionReport) -> dict:
    return {
        "n": rep.n,
        "m": rep.m,
        "grid": [[lo, hi, c] for lo, hi, c in rep.grid],
        "global_rank": rep.global_rank,
        "config": rep.config,
        "counts": rep.counts,
        "global_counts": rep.global_counts,
        "points": [
            {
                "point": [_json_num(v) for v in p.point],
                "rank_r": p.rank_r,
                "lambdas": [_json_num(v) for v in p.lambdas],
                "max_pair_product": _json_num(p.max_pair_product),
                "mgs_norm": _json_num(p.mgs_norm),
                "dtheta_norm": _json_num(p.dtheta_norm),
                "upper": _json_num(p.upper),
                "lower": _json_num(p.lower),
                "verdict": p.verdict,
                "global_verdict": p.global_verdict,
                "error": p.error,
            }
            for p in rep.points
        ],
    }


def report_json(rep: RegionReport) -> str:
    return json.dumps(report_to_dict(rep), ensure_ascii=False, indent=2) + "\n"


def parse_report(text: str) -> RegionReport:
    doc = json.loads(text)
    try:
        points = [
            PointReport(
                point=tuple(_from_json_num(v) for v in d["point"]),
                rank_r=int(d["rank_r"]),
                lambdas=tuple(_from_json_num(v) for v in d["lambdas"]),
                max_pair_product=_from_json_num(d["max_pair_product"]),
                mgs_norm=_from_json_num(d["mgs_norm"]),
                dtheta_norm=_from_json_num(d["dtheta_norm"]),
                upper=_from_json_num(d["upper"]),
                lower=None if d.get("lower") is None else float(d["lower"]),
                verdict=str(d["verdict"]),
                global_verdict=str(d.get("global_verdict", "")),
                error=str(d.get("error", "")),
            )
            for d in doc["points"]
        ]
        return RegionReport(
            n=int(doc["n"]),
            m=int(doc["m"]),
            grid=tuple((float(lo), float(hi), int(c)) for lo, hi, c in doc["grid"]),
            points=points,
            global_rank=int(doc.get("global_rank", 0)),
            config=dict(doc.get("config", {})),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise ValueError(f"reporte JSON inválido: {e}") from e


def _write_xlsx(rep: RegionReport, path: Path) -> None:
    from openpyxl import Workbook
    from openpyxl.utils import get_column_letter

    wb = Workbook()
    ws = wb.active
    ws.title = "Certificacion"
    headers = csv_header(rep.n, rep.m)
    ws.append(headers)
    for p in rep.points:
        ws.append(
            list(p.point)
            + [p.rank_r]
            + [_json_num(v) for v in p.lambdas]
            + [_json_num(p.max_pair_product), _json_num(p.mgs_norm), _json_num(p.dtheta_norm),
               _json_num(p.upper), _json_num(p.lower), p.verdict, p.global_verdict]
        )
    for col in range(1, len(headers) + 1):
        ws.column_dimensions[get_column_letter(col)].width = 18
    wb.save(str(path))


def emit_report(rep: RegionReport, path, fmt: str = "csv") -> None:
    fmt = (fmt or "csv").strip().lower()
    if fmt not in REPORT_FORMATS:
        raise ValueError(f"formato desconocido {fmt!r}; opciones: {', '.join(REPORT_FORMATS)}")
    p = Path(path)
    if fmt == "xlsx":
        _write_xlsx(rep, p)
        return
    text = report_csv(rep) if fmt == "csv" else report_json(rep)
    with open(p, "w", encoding="utf-8", newline="") as f:
        f.write(text)
