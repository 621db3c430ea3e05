"""Named scalar results and their JSON/CSV renderings."""

from __future__ import annotations

import csv
import io
import json
from typing import Iterator, NamedTuple

from .errors import ValidationError


class Entry(NamedTuple):
    name: str
    value: float
    provenance: str


class MetricReport:
    """Ordered collection of ``(name, value, provenance)`` entries with unique names."""

    def __init__(self, entries=()):
        self._entries: dict[str, Entry] = {}
        for e in entries:
            self.add(*e)

    def add(self, name: str, value, provenance: str) -> "MetricReport":
        if name in self._entries:
            raise ValidationError(f"duplicate report entry {name!r}")
        if isinstance(value, bool):
            value = 1.0 if value else 0.0
        self._entries[name] = Entry(name, float(value), str(provenance))
        return self

    def merge(self, other: "MetricReport", prefix: str = "") -> "MetricReport":
        for e in other:
            self.add(prefix + e.name, e.value, e.provenance)
        return self

    def __getitem__(self, name: str) -> float:
        return self._entries[name].value

    def __contains__(self, name: str) -> bool:
        return name in self._entries

    def __iter__(self) -> Iterator[Entry]:
        return iter(self._entries.values())

    def __len__(self) -> int:
        return len(self._entries)

    def provenance(self, name: str) -> str:
        return self._entries[name].provenance

    def as_dict(self) -> dict[str, float]:
        return {e.name: e.value for e in self}

    def __repr__(self) -> str:
        body = ", ".join(f"{e.name}={e.value!r}" for e in self)
        return f"MetricReport({body})"


def emit_report(report: MetricReport, fmt: str = "json") -> bytes:
    """Serialize a report; output is deterministic and round-trips floats exactly."""
    if fmt == "json":
        doc = {e.name: {"value": e.value, "provenance": e.provenance} for e in report}
        return (json.dumps(doc, indent=2, allow_nan=True) + "\n").encode()
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["name", "value", "provenance"])
        for e in report:
            w.writerow([e.name, repr(e.value), e.provenance])
        return buf.getvalue().encode()
    raise ValidationError(f"unknown report format {fmt!r}")


def parse_report(data: bytes, fmt: str = "json") -> MetricReport:
    if fmt == "json":
        doc = json.loads(data)
        return MetricReport((k, v["value"], v["provenance"]) for k, v in doc.items())
    if fmt == "csv":
        rows = list(csv.reader(io.StringIO(data.decode())))
        return MetricReport((name, float(value), prov) for name, value, prov in rows[1:])
    raise ValidationError(f"unknown report format {fmt!r}")
