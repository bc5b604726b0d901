from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Any

DEFAULT_SETTINGS_PATH = "settings.json"
THREADS_ENV = "CALIBRA_THREADS"

DEFAULT_SETTINGS: dict[str, Any] = {
  "minimality_tol": 1e-6,
  "comass_tol": 1e-12,
  "restarts": 64,
  "seed": 0,
  "threads": 1,
  "epsilon_tol": 1e-10,
  "log_path": "calibra.log",
  "report_format": "csv",  # csv|json|xlsx
}

def _coerce(key: str, value: Any) -> Any:
  default = DEFAULT_SETTINGS.get(key)
  if default is None or value is None:
    return value
  try:
    if isinstance(default, bool):
      return str(value).strip().lower() in ("1", "true", "si", "sí", "yes")
    if isinstance(default, int):
      return int(value)
    if isinstance(default, float):
      return float(value)
    return str(value)
  except (TypeError, ValueError):
    raise ValueError(f"settings: '{key}' tiene un valor inválido ({value!r})")

def load_settings(path: str | Path = DEFAULT_SETTINGS_PATH) -> dict[str, Any]:
  """
  Archivo de arranque. Si no existe se crea con los defaults.
  Claves desconocidas se conservan tal cual.
  """
  p = Path(path)
  if not p.exists():
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(json.dumps(DEFAULT_SETTINGS, indent=2), encoding="utf-8")
  try:
    raw = json.loads(p.read_text(encoding="utf-8") or "{}")
  except json.JSONDecodeError as e:
    raise ValueError(f"settings: {p} no es JSON válido ({e.msg}, línea {e.lineno})") from e
  if not isinstance(raw, dict):
    raise ValueError(f"settings: {p} debe contener un objeto JSON")
  out = dict(DEFAULT_SETTINGS)
  for k, v in raw.items():
    out[k] = _coerce(k, v)
  return out

def get_setting(settings: dict[str, Any], key: str, default: Any = None) -> Any:
  v = settings.get(key)
  if v is None or v == "":
    return DEFAULT_SETTINGS.get(key, default) if default is None else default
  return v

def resolve_threads(flag: int | None, settings: dict[str, Any]) -> int:
  """--threads, después CALIBRA_THREADS, después settings."""
  if flag is not None:
    n = int(flag)
  else:
    env = (os.environ.get(THREADS_ENV) or "").strip()
    if env:
      try:
        n = int(env)
      except ValueError:
        raise ValueError(f"{THREADS_ENV}={env!r} no es un entero")
    else:
      n = int(get_setting(settings, "threads", 1))
  if n < 1:
    raise ValueError("threads debe ser >= 1")
  return n
