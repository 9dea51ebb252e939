"""Line-oriented key-value records and the flat config file."""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, fields

from .errors import SchemaError

CONFIG_ENV = "CPWLAB_CONFIG"


def dumps_record(record):
    """One JSON object on one line; floats use shortest round-trip repr."""
    return json.dumps(record, separators=(", ", ": "))


def loads_record(line):
    return json.loads(line)


def read_records(text):
    return [loads_record(ln) for ln in text.splitlines() if ln.strip()]


@dataclass
class Config:
    eps_r: float = 11.45
    temp_k: float = 0.05
    atten_db: float = 90.0
    fit_max_iter: int = 200
    fit_xtol: float = 1e-10
    no_resonance_factor: float = 5.0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not v > 0:
                raise SchemaError(f"config value {f.name} must be positive, got {v!r}")


def parse_config(text):
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    known = {f.name: f.type for f in fields(Config)}
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        key = key.strip()
        if not sep:
            raise SchemaError(f"config line {lineno}: expected key=value")
        if key not in known:
            raise SchemaError(f"config line {lineno}: unknown key {key!r}")
        try:
            values[key] = int(val) if known[key] in (int, "int") else float(val)
        except ValueError:
            raise SchemaError(f"config line {lineno}: bad value for {key}: {val.strip()!r}") from None
    return Config(**values)


def load_config(path=None):
    """Config from ``path``, else from $CPWLAB_CONFIG, else defaults."""
    path = path or os.environ.get(CONFIG_ENV)
    if not path:
        return Config()
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
