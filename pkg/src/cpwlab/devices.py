"""Device table ingestion and per-group statistics.

The bundled ``data/device_table.csv`` holds the measured devices: one row per
resonator, Q columns in units of 1e6, process flags marked ``x``.
Groups are keyed by the device-id prefix before the dot (``2c.5`` -> ``2c``).
"""
from __future__ import annotations

import csv
import io
import math
import statistics
from dataclasses import dataclass
from importlib import resources

from .errors import DomainError, SchemaError

FLAGS = ("wet_etch_al", "rie_al", "bosch_si", "iso_etch_si", "us_microcut",
         "feedline_bridges", "resonator_bridges")
HEADER = ("device", "f_ghz", "q_lp_e6", "q_hp_e6") + FLAGS
Q_UNIT = 1e6

REFERENCE_GROUPS_FILTER = {
    "f_min_ghz": 4.0,
    "f_max_ghz": 5.0,
    "exclude": ("feedline_bridges", "resonator_bridges"),
}


@dataclass(frozen=True)
class DeviceRecord:
    device_id: str
    f_ghz: float
    q_lp: float
    q_hp: float
    wet_etch_al: bool = False
    rie_al: bool = False
    bosch_si: bool = False
    iso_etch_si: bool = False
    us_microcut: bool = False
    feedline_bridges: bool = False
    resonator_bridges: bool = False

    @property
    def group_label(self):
        return self.device_id.split(".", 1)[0]

    def flag(self, name):
        if name not in FLAGS:
            raise DomainError(f"unknown flag {name!r}")
        return getattr(self, name)

    def violations(self):
        out = []
        if self.wet_etch_al == self.rie_al:
            out.append("exactly one of wet_etch_al / rie_al must be set")
        if self.bosch_si and self.iso_etch_si:
            out.append("bosch_si and iso_etch_si are mutually exclusive")
        if self.resonator_bridges and not self.feedline_bridges:
            out.append("resonator_bridges requires feedline_bridges")
        if self.q_hp < self.q_lp:
            out.append("q_hp < q_lp")
        return out


@dataclass(frozen=True)
class RowError:
    line: int
    device: str
    message: str


@dataclass(frozen=True)
class GroupStats:
    group: str
    n: int
    mean: float
    std: float
    min: float
    max: float

    def to_record(self):
        return {"group": self.group, "n": self.n, "mean": self.mean,
                "std": self.std, "min": self.min, "max": self.max}


@dataclass(frozen=True)
class RatioReport:
    numerator: str
    denominator: str
    ratio: float
    rel_uncertainty: float

    def to_record(self):
        return {"ratio": f"{self.numerator}/{self.denominator}", "value": self.ratio,
                "rel_uncertainty": self.rel_uncertainty}


def _flag_cell(cell, line, name):
    v = cell.strip().lower()
    if v == "x":
        return True
    if v == "":
        return False
    raise ValueError(f"flag {name} must be 'x' or empty, got {cell!r}")


def parse_device_table(text):
    """Parse device CSV text.

    Returns ``(records, errors)``; rows with bad numbers or violated
    invariants are skipped and listed in ``errors`` with their line number.

    Raises:
        SchemaError: a required column is missing.
    """
    if not text.strip():
        return [], []
    reader = csv.reader(io.StringIO(text))
    header = None
    records, errors = [], []
    for row in reader:
        line = reader.line_num
        if not row or not "".join(row).strip() or row[0].lstrip().startswith("#"):
            continue
        if header is None:
            header = [h.strip() for h in row]
            missing = [h for h in HEADER if h not in header]
            if missing:
                raise SchemaError(f"missing column(s): {', '.join(missing)}")
            idx = {h: header.index(h) for h in HEADER}
            continue
        cells = row + [""] * (len(header) - len(row))
        dev = cells[idx["device"]].strip()
        try:
            f = float(cells[idx["f_ghz"]])
            q_lp = float(cells[idx["q_lp_e6"]]) * Q_UNIT
            q_hp = float(cells[idx["q_hp_e6"]]) * Q_UNIT
            flags = {name: _flag_cell(cells[idx[name]], line, name) for name in FLAGS}
        except ValueError as exc:
            errors.append(RowError(line, dev, str(exc)))
            continue
        rec = DeviceRecord(dev, f, q_lp, q_hp, **flags)
        bad = rec.violations()
        if bad:
            errors.append(RowError(line, dev, "invariant violation: " + "; ".join(bad)))
            continue
        records.append(rec)
    return records, errors


def load_bundled_table():
    """Records of the bundled device table."""
    text = resources.files("cpwlab").joinpath("data/device_table.csv").read_text(encoding="utf-8")
    records, errors = parse_device_table(text)
    assert not errors, errors
    return records


def filter_records(records, f_min_ghz=None, f_max_ghz=None, require=(), exclude=(),
                   group_prefix=None):
    if f_min_ghz is not None and f_max_ghz is not None and f_min_ghz > f_max_ghz:
        raise DomainError(f"f_min_ghz {f_min_ghz} > f_max_ghz {f_max_ghz}")
    out = []
    for r in records:
        if f_min_ghz is not None and r.f_ghz < f_min_ghz:
            continue
        if f_max_ghz is not None and r.f_ghz > f_max_ghz:
            continue
        if any(not r.flag(name) for name in require):
            continue
        if any(r.flag(name) for name in exclude):
            continue
        if group_prefix is not None and not r.group_label.startswith(group_prefix):
            continue
        out.append(r)
    return out


def group_stats(records, value="q_lp", **filters):
    """Mean, sample std (n - 1), min and max of ``value`` per group.

    Groups that end up empty after filtering are absent from the result.
    Keys are sorted by group label.
    """
    if value not in ("q_lp", "q_hp"):
        raise DomainError(f"value must be 'q_lp' or 'q_hp', got {value!r}")
    groups = {}
    for r in filter_records(records, **filters):
        groups.setdefault(r.group_label, []).append(getattr(r, value))
    out = {}
    for g in sorted(groups):
        vals = groups[g]
        out[g] = GroupStats(
            group=g,
            n=len(vals),
            mean=statistics.fmean(vals),
            std=statistics.stdev(vals) if len(vals) > 1 else 0.0,
            min=min(vals),
            max=max(vals),
        )
    return out


def reference_group_stats(records, value="q_lp"):
    """Group statistics over 4-5 GHz devices without airbridges."""
    return group_stats(records, value=value, **REFERENCE_GROUPS_FILTER)


def ratio_report(stats_a: GroupStats, stats_b: GroupStats) -> RatioReport:
    """mean_b / mean_a with the propagated standard error of the means."""
    if not (stats_a.mean > 0 and stats_b.mean > 0):
        raise DomainError("group means must be positive")
    rel = math.hypot(stats_a.std / (stats_a.mean * math.sqrt(stats_a.n)),
                     stats_b.std / (stats_b.mean * math.sqrt(stats_b.n)))
    return RatioReport(stats_b.group, stats_a.group, stats_b.mean / stats_a.mean, rel)


def best_device(records, value="q_lp"):
    return max(records, key=lambda r: getattr(r, value))
