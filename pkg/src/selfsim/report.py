"""Report rows and their CSV / JSON serialisation."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

COLUMNS = ("check_name", "parameter", "theoretical", "empirical", "band_low",
           "band_high", "pass", "note")


def row(check, parameter, theoretical, empirical, band_low=None, band_high=None,
        passed=None, note=""):
    """One report record.

    ``passed`` defaults to ``band_low <= empirical <= band_high``; rows
    without a band are informational and pass unless told otherwise.
    """
    if passed is None:
        if band_low is None and band_high is None:
            passed = True
        else:
            lo = -math.inf if band_low is None else band_low
            hi = math.inf if band_high is None else band_high
            passed = bool(lo <= empirical <= hi)
    return {
        "check_name": str(check),
        "parameter": str(parameter),
        "theoretical": _num(theoretical),
        "empirical": _num(empirical),
        "band_low": _num(band_low),
        "band_high": _num(band_high),
        "pass": bool(passed),
        "note": str(note),
    }


def _num(x):
    if x is None:
        return None
    if isinstance(x, bool):
        return float(x)
    return float(x)


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return repr(x)
    return str(x)


@dataclass
class Report:
    rows: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(r["pass"] for r in self.rows)

    def csv_body(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in self.rows:
            w.writerow([_fmt(r[c]) for c in COLUMNS])
        return buf.getvalue()

    def to_json(self):
        return json.dumps({"rows": self.rows, "metadata": self.metadata},
                          indent=2, sort_keys=True, allow_nan=True)

    @classmethod
    def from_json(cls, text):
        obj = json.loads(text)
        return cls([dict(r) for r in obj["rows"]], dict(obj["metadata"]))

    def __eq__(self, other):
        if not isinstance(other, Report):
            return NotImplemented
        return _same(self.rows, other.rows) and self.metadata == other.metadata


def _same(a, b):
    if len(a) != len(b):
        return False
    for x, y in zip(a, b):
        if x.keys() != y.keys():
            return False
        for k in x:
            u, v = x[k], y[k]
            if isinstance(u, float) and isinstance(v, float) and math.isnan(u) and math.isnan(v):
                continue
            if u != v:
                return False
    return True


_NUMERIC = ("theoretical", "empirical", "band_low", "band_high")


def parse_csv(text):
    """Rows of a CSV body back as typed dicts (inverse of ``Report.csv_body``)."""
    out = []
    for rec in csv.DictReader(io.StringIO(text)):
        for k in _NUMERIC:
            rec[k] = float(rec[k]) if rec[k] != "" else None
        rec["pass"] = rec["pass"] == "true"
        out.append(rec)
    return out
