"""Run configuration: a flat JSON object with strictly validated keys.

Example::

    {
      "k_list": [1, 5, 10, 50],
      "lam": 0.01,
      "estimation_window": 504,
      "cost_rate": 0.0,
      "prices": "prices.csv",
      "cashflows": "cashflows.csv",
      "curves": "curves.csv"
    }

Relative paths resolve against the config file's directory. Keys not
listed in :data:`FIELDS` are rejected.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields
from pathlib import Path

from ..backtest import BacktestConfig
from ..exceptions import SchemaError

PATH_KEYS = ("prices", "returns", "cashflows", "curves", "quotes", "out_dir")


@dataclass(frozen=True)
class RunConfig:
    k_list: tuple = (1, 5, 10, 50)
    lam: float = 0.01
    estimation_window: int = 504
    reestimate_every: int | None = None
    cost_rate: float = 0.0
    regime: str = "return-seeking"
    seed: int = 0
    k_max: int = 100
    p_levels: tuple = (0.99,)
    roll: bool = True
    rate: float = 0.0
    funding_rates: tuple | None = None
    zero_weights: bool = False
    vol_params: dict = field(default_factory=dict)  # underlying -> [alpha, q]
    book: dict = field(default_factory=dict)  # option_id -> position
    prices: str | None = None
    returns: str | None = None
    cashflows: str | None = None
    curves: str | None = None
    quotes: str | None = None
    out_dir: str | None = None

    def backtest_config(self) -> BacktestConfig:
        return BacktestConfig(
            k_list=self.k_list,
            lam=self.lam,
            estimation_window=self.estimation_window,
            reestimate_every=self.reestimate_every,
            cost_rate=self.cost_rate,
            regime=self.regime,
            seed=self.seed,
        )


FIELDS = tuple(f.name for f in fields(RunConfig))


def _is_int(v):
    return isinstance(v, int) and not isinstance(v, bool)


def _is_num(v):
    return (isinstance(v, (int, float)) and not isinstance(v, bool)) and math.isfinite(v)


def _check(key, value):
    def fail(expected):
        raise SchemaError(f"config key {key!r}: expected {expected}, got {value!r}")

    if key in ("k_list",):
        if not isinstance(value, list) or not value or not all(_is_int(v) for v in value):
            fail("a non-empty list of integers")
        return tuple(value)
    if key == "p_levels":
        if not isinstance(value, list) or not value or not all(_is_num(v) and 0 < v < 1 for v in value):
            fail("a non-empty list of probabilities in (0, 1)")
        return tuple(float(v) for v in value)
    if key == "funding_rates":
        if value is None:
            return None
        if not isinstance(value, list) or not all(_is_num(v) for v in value):
            fail("a list of numbers")
        return tuple(float(v) for v in value)
    if key in ("lam", "cost_rate", "rate"):
        if not _is_num(value):
            fail("a finite number")
        return float(value)
    if key in ("estimation_window", "seed", "k_max"):
        if not _is_int(value):
            fail("an integer")
        return value
    if key == "reestimate_every":
        if value is not None and not _is_int(value):
            fail("an integer or null")
        return value
    if key in ("roll", "zero_weights"):
        if not isinstance(value, bool):
            fail("true or false")
        return value
    if key == "regime":
        if not isinstance(value, str):
            fail("a string")
        return value
    if key == "vol_params":
        if not isinstance(value, dict) or not all(
            isinstance(v, list) and len(v) == 2 and all(_is_num(x) for x in v) for v in value.values()
        ):
            fail("an object mapping underlying to [alpha, q]")
        return {str(u): (float(a), float(q)) for u, (a, q) in value.items()}
    if key == "book":
        if not isinstance(value, dict) or not all(_is_num(v) for v in value.values()):
            fail("an object mapping option id to position")
        return {str(o): float(p) for o, p in value.items()}
    if key in PATH_KEYS:
        if value is not None and not isinstance(value, str):
            fail("a path string or null")
        return value
    raise AssertionError(key)  # pragma: no cover


def parse_config(doc: dict, base_dir=None) -> RunConfig:
    if not isinstance(doc, dict):
        raise SchemaError("config must be a JSON object")
    unknown = sorted(set(doc) - set(FIELDS))
    if unknown:
        raise SchemaError(f"unknown config keys: {', '.join(unknown)}")
    values = {key: _check(key, value) for key, value in doc.items()}
    if base_dir is not None:
        for key in PATH_KEYS:
            if values.get(key):
                values[key] = str(Path(base_dir) / values[key])
    cfg = RunConfig(**values)
    try:
        cfg.backtest_config()
    except ValueError as exc:
        raise SchemaError(f"invalid backtest settings: {exc}") from None
    if cfg.k_max < 1:
        raise SchemaError("k_max must be at least 1")
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON: {exc.msg}", line=exc.lineno) from None
    return parse_config(doc, base_dir=path.parent)


def dump_config(cfg: RunConfig) -> str:
    doc = {}
    for name in FIELDS:
        v = getattr(cfg, name)
        if isinstance(v, tuple):
            v = list(v)
        if isinstance(v, dict):
            v = {k: list(x) if isinstance(x, tuple) else x for k, x in v.items()}
        doc[name] = v
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"
