from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path


def json_safe(v):
    """NaN/inf pasan a null; tuplas a listas; claves a texto."""
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, dict):
        return {str(k): json_safe(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [json_safe(x) for x in v]
    return v


@dataclass
class RunRecord:
    """Una invocación de la CLI: subcomando, argumentos, código de salida y resumen."""

    subcommand: str
    args: dict
    exit_code: int
    outcome: dict = field(default_factory=dict)
    seconds: float = 0.0
    ts: str = ""

    def to_dict(self) -> dict:
        return {
            "ts": self.ts or datetime.now().isoformat(timespec="seconds"),
            "event": f"calibra.{self.subcommand}",
            "exit_code": self.exit_code,
            "seconds": round(self.seconds, 3),
            "args": json_safe(self.args),
            "outcome": json_safe(self.outcome),
        }


def append_run(path: str | Path | None, record: RunRecord) -> bool:
    """Agrega una línea JSON al log. Path vacío = log apagado. Nunca lanza."""
    if not path:
        return False
    try:
        line = json.dumps(record.to_dict(), ensure_ascii=False, sort_keys=True, default=str)
        with open(path, "a", encoding="utf-8") as f:
            f.write(line + "\n")
        return True
    except Exception:
        # el log no puede cortar un cálculo
        return False


def read_runs(path: str | Path) -> list[dict]:
    p = Path(path)
    if not p.exists():
        return []
    out = []
    for line in p.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line:
            continue
        try:
            out.append(json.loads(line))
        except json.JSONDecodeError:
            print(f"[WARN] línea de log ilegible: {line[:60]}")
    return out
