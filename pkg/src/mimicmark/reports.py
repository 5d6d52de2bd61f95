"""Run reports: reproducible JSON documents plus CSV/plot-data rendering.

Every reported number traces back to an input hash or a seed. Timestamps
live in a separate field excluded from the canonical content hash, so
identical runs produce identical hashes.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .channel import AccuracySampleSet, FIVE_BIN_EDGES, TEN_BIN_EDGES

FIVE_BIN_HEADERS = ["0-20%", "20-40%", "40-60%", "60-80%", "80-100%"]
TEN_BIN_HEADERS = [f"{10 * i}-{10 * (i + 1)}%" for i in range(10)]


def file_sha256(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunReport:
    command: list[str]
    inputs: list[dict] = field(default_factory=list)  # {path, sha256}
    results: list[dict] = field(default_factory=list)
    verdicts: dict = field(default_factory=dict)
    provenance: list[str] = field(default_factory=list)
    seeds: dict = field(default_factory=dict)
    tool_version: str = __version__
    created_at: str = field(
        default_factory=lambda: datetime.now(timezone.utc).isoformat(timespec="seconds")
    )

    def add_input(self, path: str | Path) -> None:
        self.inputs.append({"path": str(path), "sha256": file_sha256(path)})

    def canonical_dict(self) -> dict:
        """Everything except the timestamp, in stable order."""
        return {
            "command": self.command,
            "inputs": self.inputs,
            "results": self.results,
            "verdicts": self.verdicts,
            "provenance": self.provenance,
            "seeds": self.seeds,
            "tool_version": self.tool_version,
        }

    def content_hash(self) -> str:
        blob = json.dumps(self.canonical_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def to_dict(self) -> dict:
        d = self.canonical_dict()
        d["created_at"] = self.created_at
        d["content_hash"] = self.content_hash()
        return d

    def write(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n")

    @classmethod
    def from_dict(cls, d: dict) -> "RunReport":
        return cls(
            command=d.get("command", []),
            inputs=d.get("inputs", []),
            results=d.get("results", []),
            verdicts=d.get("verdicts", {}),
            provenance=d.get("provenance", []),
            seeds=d.get("seeds", {}),
            tool_version=d.get("tool_version", __version__),
            created_at=d.get("created_at", ""),
        )


def _row_from_verdictlike(label: str, hist: list[int], avg: float, best: int) -> list:
    return [label, *[int(c) for c in hist], round(float(avg), 2), int(best)]


def samples_to_csv(samples: AccuracySampleSet, binning: str = "five", label: str = "") -> str:
    """One table row in the standard report layout: bins + avg(bits) + best(bits)."""
    from .verify import histogram, summary  # local import to avoid a cycle

    binkey = "five-20pct" if binning == "five" else "ten-10pct"
    hist = histogram(samples, binkey)
    s = summary(samples)
    headers = FIVE_BIN_HEADERS if binning == "five" else TEN_BIN_HEADERS
    out = io.StringIO()
    w = csv.writer(out)
    w.writerow(["label", *headers, "avg(bits)", "best(bits)"])
    w.writerow(
        _row_from_verdictlike(label or samples.label or "samples", list(hist), s["avg_bits"], s["best_bits"])
    )
    return out.getvalue()


def verdict_to_csv(verdict_dict: dict, binning: str = "five", label: str = "verdict") -> str:
    hist = verdict_dict["histogram_5bin"] if binning == "five" else verdict_dict["histogram_10bin"]
    headers = FIVE_BIN_HEADERS if binning == "five" else TEN_BIN_HEADERS
    out = io.StringIO()
    w = csv.writer(out)
    w.writerow(["label", *headers, "avg(bits)", "best(bits)"])
    w.writerow(_row_from_verdictlike(label, hist, verdict_dict["avg_bits"], verdict_dict["best_bits"]))
    return out.getvalue()


def samples_to_plot_data(samples: AccuracySampleSet, binning: str = "five") -> dict:
    """Histogram series for plotting tools."""
    from .verify import histogram, summary

    binkey = "five-20pct" if binning == "five" else "ten-10pct"
    edges = FIVE_BIN_EDGES if binning == "five" else TEN_BIN_EDGES
    return {
        "bin_edges": list(edges),
        "counts": list(histogram(samples, binkey)),
        "n_bits": samples.n_bits,
        "sample_count": len(samples),
        **summary(samples),
    }
