from __future__ import annotations

import os
import zlib
from dataclasses import dataclass

import numpy as np

from certify import grid_points
from maps import BUILTINS, GraphMap, builtin_map
from minimality import EquivalenceSummary, equivalence_probe

GLOBAL_SEED = int(os.environ.get("CALIBRA_SEED", "20240611"))


def case_seed(name: str) -> int:
    return (GLOBAL_SEED + zlib.crc32(name.encode("utf-8"))) % (2 ** 32)


def seeded_rng(name: str) -> np.random.Generator:
    """Generador con nombre: el mismo caso siempre ve los mismos números."""
    return np.random.default_rng(case_seed(name))


@dataclass(frozen=True)
class GalleryEntry:
    name: str
    map: GraphMap
    is_minimal: bool
    notes: str
    reference_grid: tuple[tuple[float, float, int], ...]


def _entries() -> list[GalleryEntry]:
    return [
        GalleryEntry(
            name="linear",
            map=builtin_map("linear", [1.5, -0.4, 0.7, 2.0]),
            is_minimal=True,
            notes="grafo plano; λ constantes, rango 2",
            reference_grid=((-0.9, 0.9, 10), (-0.9, 0.9, 10)),
        ),
        GalleryEntry(
            name="holomorphic_square",
            map=builtin_map("holomorphic_square", [1.0]),
            is_minimal=True,
            notes="λ1 = λ2 = |z|; calibrated_crude donde |z| < 1",
            reference_grid=((-0.6, 0.6, 10), (-0.6, 0.6, 10)),
        ),
        GalleryEntry(
            name="scherk",
            map=builtin_map("scherk"),
            is_minimal=True,
            notes="hipersuperficie (rango <= 1): comasa 1 en todo el dominio",
            reference_grid=((-0.6, 0.6, 10), (-0.6, 0.6, 10)),
        ),
        GalleryEntry(
            name="holomorphic_exp",
            map=builtin_map("holomorphic_exp"),
            is_minimal=True,
            notes="λ1 = λ2 = e^{x1}; calibrated_crude donde x1 < 0",
            reference_grid=((-0.5, 0.5, 10), (-0.5, 0.5, 10)),
        ),
        GalleryEntry(
            name="helicoid",
            map=builtin_map("helicoid"),
            is_minimal=True,
            notes="helicoide como grafo sobre x1 > 0",
            reference_grid=((0.6, 1.1, 10), (-0.5, 0.5, 10)),
        ),
        GalleryEntry(
            name="paraboloid",
            map=builtin_map("paraboloid"),
            is_minimal=False,
            notes="control negativo: residuo MGS lejos de 0",
            reference_grid=((0.2, 0.8, 10), (0.2, 0.8, 10)),
        ),
    ]


GALLERY: dict[str, GalleryEntry] = {e.name: e for e in _entries()}


def get_entry(name: str) -> GalleryEntry:
    e = GALLERY.get(name)
    if e is None:
        raise KeyError(f"'{name}' no está en la galería; disponibles: {', '.join(sorted(GALLERY))}")
    return e


def describe(name: str) -> dict:
    e = get_entry(name)
    b = BUILTINS[name]
    return {
        "name": e.name,
        "n": e.map.n,
        "m": e.map.m,
        "domain": [list(iv) for iv in e.map.domain],
        "is_minimal": e.is_minimal,
        "exact_derivatives": e.map.exact,
        "formula": b.description,
        "notes": e.notes,
    }


def check_entry(entry: GalleryEntry, grid=None) -> EquivalenceSummary:
    return equivalence_probe(entry.map, grid_points(grid or entry.reference_grid))
