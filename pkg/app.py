from __future__ import annotations

import argparse
import json
import math
import sys
import time
from dataclasses import dataclass, field
from typing import Any

from certify import (
    CertifyOptions,
    NOT_CERTIFIED,
    REPORT_FORMATS,
    UNDEFINED,
    certify_grid,
    emit_report,
    parse_grid,
    report_csv,
    report_json,
)
from comass import (
    DEFAULT_RESTARTS,
    comass_from_lambdas,
    diagonal_jacobian,
    epsilon_search,
    proof_epsilon,
    reduction_gap,
)
from exterior import format_form
from frames import svd_frame
from gallery import GALLERY, check_entry, describe, get_entry
from maps import DomainError, GraphMap, builtin_map, jacobian, load_map_spec
from run_log import RunRecord, append_run, json_safe
from settings import DEFAULT_SETTINGS_PATH, get_setting, load_settings, resolve_threads
from suite import SUITES, run_suite
from theta import ROUTE_H, ROUTES, max_route_deviation, theta_at, theta_routes

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_INPUT = 2
EXIT_DOMAIN = 3
EXIT_INTERNAL = 4


@dataclass
class CliConfig:
    subcommand: str
    settings: dict[str, Any]
    threads: int = 1
    log_path: str = ""
    fmt: str = "text"
    out: str = ""
    map_path: str = ""
    builtin: str = ""
    params: list[float] = field(default_factory=list)
    n: int | None = None
    m: int | None = None
    point: list[float] = field(default_factory=list)
    grid: str = ""
    route: str = ROUTE_H
    all_routes: bool = False
    lambdas: list[float] = field(default_factory=list)
    restarts: int = DEFAULT_RESTARTS
    seed: int = 0
    tol: float = 0.0
    with_lower: bool = False
    reduction: bool = False
    rank: int = 2
    action: str = "list"
    name: str = ""
    tag: str = ""
    junit: str = ""


# ---------------- Parsing de flags ----------------

def _floats(text: str | None, what: str) -> list[float]:
    if text is None or not text.strip():
        return []
    out = []
    for part in text.split(","):
        try:
            v = float(part)
        except ValueError:
            raise ValueError(f"{what}: {part.strip()!r} no es un número")
        if not math.isfinite(v):
            raise ValueError(f"{what}: valor no finito {part.strip()!r}")
        out.append(v)
    return out


def _map_flags(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--map", dest="map_path", help="archivo JSON con la especificación del mapa")
    src.add_argument("--builtin", help=f"mapa de galería ({', '.join(GALLERY)})")
    p.add_argument("--params", default="", help="parámetros del builtin separados por coma (usar --params=-1,2)")
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--m", type=int, default=None)


def _common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--settings", default=DEFAULT_SETTINGS_PATH, help="archivo de arranque (settings.json)")
    p.add_argument("--log-path", default=None, help="log de corridas; vacío lo desactiva")
    p.add_argument("--threads", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="calibra", description="Calibraciones de grafos mínimos: Θ(F), comasa y certificación")
    sub = ap.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("theta", help="coeficientes de Θ(F) en un punto")
    _map_flags(p)
    p.add_argument("--point", required=True, help="punto x, p.ej. 0.3,0.2")
    p.add_argument("--route", default=ROUTE_H, choices=ROUTES)
    p.add_argument("--all-routes", action="store_true", help="todas las rutas y su desviación máxima")
    p.add_argument("--format", dest="fmt", default="text", choices=("text", "json"))
    _common_flags(p)

    p = sub.add_parser("certify", help="certificación sobre una grilla")
    _map_flags(p)
    p.add_argument("--grid", required=True, help="x1=lo:hi:count,x2=lo:hi:count")
    p.add_argument("--tol", type=float, default=None, help="tolerancia de minimalidad")
    p.add_argument("--with-lower", action="store_true", help="también la cota inferior por ascenso")
    p.add_argument("--restarts", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default="")
    p.add_argument("--format", dest="fmt", default=None, choices=REPORT_FORMATS)
    _common_flags(p)

    p = sub.add_parser("comass", help="cotas de comasa para λ dados")
    p.add_argument("--lambdas", required=True, help="valores singulares, p.ej. 0.4,0.4")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--restarts", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--reduction", action="store_true", help="comparar con el problema reducido 2r x r")
    p.add_argument("--format", dest="fmt", default="text", choices=("text", "json"))
    _common_flags(p)

    p = sub.add_parser("epsilon", help="ε* para un rango dado")
    p.add_argument("--rank", type=int, required=True)
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--format", dest="fmt", default="text", choices=("text", "json"))
    _common_flags(p)

    p = sub.add_parser("gallery", help="mapas de galería")
    p.add_argument("action", choices=("list", "show", "check"))
    p.add_argument("name", nargs="?", default="")
    p.add_argument("--format", dest="fmt", default="text", choices=("text", "json"))
    _common_flags(p)

    p = sub.add_parser("suite", help="corre las pruebas de un módulo")
    p.add_argument("tag", help=", ".join(SUITES))
    p.add_argument("--junit", default="", help="salida JUnit XML")
    _common_flags(p)
    return ap


def config_from_args(args: argparse.Namespace, settings: dict[str, Any]) -> CliConfig:
    sub = args.subcommand
    log_path = args.log_path if args.log_path is not None else str(get_setting(settings, "log_path", ""))
    cfg = CliConfig(
        subcommand=sub,
        settings=settings,
        threads=resolve_threads(args.threads, settings),
        log_path=log_path,
        fmt=getattr(args, "fmt", None) or "text",
    )

    if sub in ("theta", "certify"):
        cfg.map_path = args.map_path or ""
        cfg.builtin = args.builtin or ""
        cfg.params = _floats(args.params, "--params")
        cfg.n, cfg.m = args.n, args.m
    if sub == "theta":
        cfg.point = _floats(args.point, "--point")
        if not cfg.point:
            raise ValueError("--point vacío")
        cfg.route = args.route
        cfg.all_routes = args.all_routes
    elif sub == "certify":
        cfg.grid = args.grid
        cfg.out = args.out
        cfg.fmt = args.fmt or str(get_setting(settings, "report_format", "csv"))
        cfg.tol = float(args.tol) if args.tol is not None else float(get_setting(settings, "minimality_tol"))
        cfg.with_lower = args.with_lower
        if cfg.fmt not in REPORT_FORMATS:
            raise ValueError(f"report_format desconocido {cfg.fmt!r}; opciones: {', '.join(REPORT_FORMATS)}")
        if cfg.fmt == "xlsx" and not cfg.out:
            raise ValueError("--format xlsx requiere --out")
    elif sub == "comass":
        cfg.lambdas = _floats(args.lambdas, "--lambdas")
        cfg.n, cfg.m = args.n, args.m
        cfg.reduction = args.reduction
        if any(v < 0 for v in cfg.lambdas):
            raise ValueError("--lambdas: los valores singulares son >= 0")
    elif sub == "epsilon":
        cfg.rank = args.rank
        cfg.tol = float(args.tol) if args.tol is not None else float(get_setting(settings, "epsilon_tol"))
    elif sub == "gallery":
        cfg.action, cfg.name = args.action, args.name
        if cfg.action in ("show", "check") and not cfg.name:
            raise ValueError(f"gallery {cfg.action} requiere un nombre")
    elif sub == "suite":
        cfg.tag, cfg.junit = args.tag, args.junit

    if sub in ("certify", "comass"):
        cfg.restarts = int(args.restarts if args.restarts is not None else get_setting(settings, "restarts"))
        cfg.seed = int(args.seed if args.seed is not None else get_setting(settings, "seed"))

    # validación antes de despachar
    if cfg.restarts < 1:
        raise ValueError("--restarts debe ser >= 1")
    if cfg.seed < 0:
        raise ValueError("--seed debe ser >= 0")
    if sub in ("certify", "epsilon") and not cfg.tol > 0:
        raise ValueError("--tol debe ser positivo")
    for flag, v in (("--n", cfg.n), ("--m", cfg.m)):
        if v is not None and v < 1:
            raise ValueError(f"{flag} debe ser >= 1")
    return cfg


# ---------------- Subcomandos ----------------

def _load_map(cfg: CliConfig) -> GraphMap:
    if cfg.map_path:
        return load_map_spec(cfg.map_path)
    return builtin_map(cfg.builtin, cfg.params, n=cfg.n, m=cfg.m)


def _num(v: float) -> str:
    return format(float(v), ".17g")


def _print_json(doc: dict) -> None:
    print(json.dumps(json_safe(doc), ensure_ascii=False, indent=2))


def _coeffs(theta, n: int) -> dict[str, float]:
    return {label: float(c) for label, c in format_form(theta.form, n)}


def cmd_theta(cfg: CliConfig) -> tuple[int, dict]:
    F = _load_map(cfg)
    x = tuple(cfg.point)
    if cfg.all_routes:
        routes = theta_routes(jacobian(F, x))
        dev = max_route_deviation(routes)
        doc = {
            "point": list(x), "n": F.n, "m": F.m,
            "routes": {name: _coeffs(t, F.n) for name, t in routes.items()},
            "max_deviation": dev,
        }
    else:
        t = theta_at(F, x, cfg.route)
        doc = {"point": list(x), "n": F.n, "m": F.m, "route": cfg.route, "coefficients": _coeffs(t, F.n)}

    if cfg.fmt == "json":
        _print_json(doc)
    else:
        print(f"Θ(F) en x = ({', '.join(_num(v) for v in x)})  n={F.n} m={F.m}")
        blocks = doc["routes"] if cfg.all_routes else {cfg.route: doc["coefficients"]}
        for name, coeffs in blocks.items():
            print(f"ruta {name}:")
            for label, c in coeffs.items():
                print(f"  {label:<24} {_num(c)}")
        if cfg.all_routes:
            print(f"desviación máxima entre rutas: {_num(doc['max_deviation'])}")
    return EXIT_OK, {"map": F.name, "point": list(x)}


def cmd_certify(cfg: CliConfig) -> tuple[int, dict]:
    F = _load_map(cfg)
    grid = parse_grid(cfg.grid, F.n)
    opts = CertifyOptions(
        minimality_tol=cfg.tol,
        comass_tol=float(get_setting(cfg.settings, "comass_tol")),
        epsilon_tol=float(get_setting(cfg.settings, "epsilon_tol")),
        with_lower=cfg.with_lower,
        restarts=cfg.restarts,
        seed=cfg.seed,
        threads=cfg.threads,
    )
    rep = certify_grid(F, grid, opts)
    if cfg.out:
        emit_report(rep, cfg.out, cfg.fmt)
        print(f"[OK] reporte {cfg.fmt} -> {cfg.out}")
        for line in rep.summary_lines():
            print(line)
        counts = rep.counts
        if counts[UNDEFINED]:
            print(f"[WARN] {counts[UNDEFINED]} puntos indefinidos (ver columna de error en JSON)")
        if counts[NOT_CERTIFIED]:
            print(f"[WARN] {counts[NOT_CERTIFIED]} puntos sin certificar")
    else:
        sys.stdout.write(report_csv(rep) if cfg.fmt == "csv" else report_json(rep))
    return EXIT_OK, {"map": F.name, "points": len(rep.points), "counts": rep.counts,
                     "global_counts": rep.global_counts, "global_rank": rep.global_rank}


def cmd_comass(cfg: CliConfig) -> tuple[int, dict]:
    A = diagonal_jacobian(cfg.lambdas, cfg.n, cfg.m)
    fr = svd_frame(A)
    est = comass_from_lambdas(cfg.lambdas, cfg.n, cfg.m, cfg.restarts, cfg.seed, threads=cfg.threads)
    dil = est.dilation
    doc = {
        "lambdas": [float(v) for v in fr.lambdas],
        "n": cfg.n,
        "m": cfg.m,
        "rank": fr.rank_r,
        "lower": est.lower,
        "upper": est.upper,
        "theta_star": est.theta_star,
        "restarts": est.restarts_used,
        "seed": est.seed,
        "dilation": {
            "max_pair_product": dil.max_pair_product,
            "crude_threshold": dil.crude_threshold,
            "refined_threshold": dil.refined_threshold,
            "crude_ok": dil.crude_ok,
            "refined_ok": dil.refined_ok,
            "epsilon": dil.epsilon,
        },
        "witness": est.witness.columns.tolist(),
    }
    if cfg.reduction:
        gap = reduction_gap(cfg.lambdas, cfg.n, cfg.m, cfg.restarts, cfg.seed, cfg.threads)
        doc["reduction"] = {"full": gap.full, "reduced": gap.reduced, "gap": gap.gap}

    if cfg.fmt == "json":
        _print_json(doc)
    else:
        print(f"λ = ({', '.join(_num(v) for v in doc['lambdas'])})  rango r = {fr.rank_r}")
        print(f"cota inferior: {_num(est.lower)}  (restarts={est.restarts_used}, seed={est.seed})")
        print(f"cota superior: {_num(est.upper)}  (θ* = {_num(est.theta_star)})")
        print(f"λ1λ2 = {_num(dil.max_pair_product)}  cruda <= {_num(dil.crude_threshold)}: "
              f"{'SI' if dil.crude_ok else 'NO'}  refinada <= {_num(dil.refined_threshold)}: "
              f"{'SI' if dil.refined_ok else 'NO'}")
        if "reduction" in doc:
            red = doc["reduction"]
            print(f"reducción 2r x r: completo={_num(red['full'])} reducido={_num(red['reduced'])} "
                  f"brecha={_num(red['gap'])}")
        if est.upper <= 1.0 + float(get_setting(cfg.settings, "comass_tol")):
            print("[OK] comasa <= 1: Θ es una calibración")
        elif est.lower > 1.0:
            print("[WARN] comasa > 1: Θ no es una calibración")
    return EXIT_OK, {"lower": est.lower, "upper": est.upper, "rank": fr.rank_r}


def cmd_epsilon(cfg: CliConfig) -> tuple[int, dict]:
    eps, theta = epsilon_search(cfg.rank, cfg.tol)
    rigorous = proof_epsilon(cfg.rank)
    doc = {"rank": cfg.rank, "tol": cfg.tol, "epsilon_star": eps, "theta": theta, "proof_epsilon": rigorous}
    if cfg.fmt == "json":
        _print_json(doc)
    else:
        print(f"r = {cfg.rank}")
        print(f"ε* = {_num(eps)}  (tol {cfg.tol:g})")
        print(f"θ  = {_num(theta)}")
        print(f"ε de la prueba = {_num(rigorous)}")
    return EXIT_OK, doc


def cmd_gallery(cfg: CliConfig) -> tuple[int, dict]:
    if cfg.action == "list":
        rows = [describe(name) for name in GALLERY]
        if cfg.fmt == "json":
            _print_json({"entries": rows})
        else:
            for d in rows:
                dom = " x ".join(f"[{_num(lo)}, {_num(hi)}]" for lo, hi in d["domain"])
                tag = "minimal" if d["is_minimal"] else "no minimal"
                print(f"{d['name']:<20} n={d['n']} m={d['m']}  {tag:<10} {dom}")
        return EXIT_OK, {"entries": len(rows)}

    try:
        entry = get_entry(cfg.name)
    except KeyError as e:
        raise ValueError(e.args[0]) from None

    if cfg.action == "show":
        d = describe(entry.name)
        if cfg.fmt == "json":
            _print_json(d)
        else:
            for k, v in d.items():
                print(f"{k:<18} {v}")
        return EXIT_OK, {"name": entry.name}

    summary = check_entry(entry)
    rr = summary.ratio_range()
    doc = {
        "name": entry.name,
        "points": len(summary.rows),
        "max_mgs": summary.max_mgs,
        "max_dtheta": summary.max_dtheta,
        "ratio_range": list(rr) if rr else None,
    }
    if cfg.fmt == "json":
        _print_json(doc)
    else:
        print(f"{entry.name}: {doc['points']} puntos  max mgs = {_num(summary.max_mgs)}  "
              f"max dΘ = {_num(summary.max_dtheta)}")
    tol = float(get_setting(cfg.settings, "minimality_tol"))
    if entry.is_minimal and summary.max_mgs > tol:
        print(f"[WARN] {entry.name} figura como mínimo pero el residuo supera {tol:g}")
        return EXIT_FAILED, doc
    return EXIT_OK, doc


def cmd_suite(cfg: CliConfig) -> tuple[int, dict]:
    res = run_suite(cfg.tag, cfg.junit or None)
    print(res.summary())
    if not res.ok:
        sys.stderr.write(res.output)
    if cfg.junit:
        print(f"[OK] JUnit -> {cfg.junit}")
    return (EXIT_OK if res.ok else EXIT_FAILED), {"tests": res.tests_run, "failures": res.failures,
                                                   "errors": res.errors, "seed": res.seed}


HANDLERS = {
    "theta": cmd_theta,
    "certify": cmd_certify,
    "comass": cmd_comass,
    "epsilon": cmd_epsilon,
    "gallery": cmd_gallery,
    "suite": cmd_suite,
}


def _error(msg: str) -> None:
    sys.stderr.write(f"[ERROR] {msg}\n")


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    cfg: CliConfig | None = None
    outcome: dict = {}
    t0 = time.perf_counter()
    try:
        settings = load_settings(args.settings)
        cfg = config_from_args(args, settings)
        rc, outcome = HANDLERS[cfg.subcommand](cfg)
    except DomainError as e:
        _error(f"dominio: {e}")
        rc = EXIT_DOMAIN
    except FloatingPointError as e:
        _error(f"cálculo inválido: {e}")
        rc = EXIT_DOMAIN
    except ValueError as e:
        # incluye MapSpecError (mensaje con la ruta del campo)
        _error(str(e))
        rc = EXIT_INPUT
    except AssertionError as e:
        _error(f"falla interna: {e}")
        rc = EXIT_INTERNAL
    except OSError as e:
        _error(f"archivo: {e}")
        rc = EXIT_INPUT

    log_path = cfg.log_path if cfg else (args.log_path if args.log_path is not None else "")
    append_run(log_path, RunRecord(args.subcommand, vars(args), rc, outcome, time.perf_counter() - t0))
    return rc


if __name__ == "__main__":
    sys.exit(main())
