"""GPU-hour to kg CO2-eq accounting.

emissions_kg = gpu_hours * (power_watts / 1000) * intensity_kg_per_kwh, kept at
full float precision internally and rounded to two decimals only for display.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

DEFAULT_POWER_WATTS = 440.0
DEFAULT_INTENSITY_KG_PER_KWH = 0.297


def estimate_emissions(
    gpu_hours: float,
    power_watts: float = DEFAULT_POWER_WATTS,
    intensity_kg_per_kwh: float = DEFAULT_INTENSITY_KG_PER_KWH,
) -> float:
    if gpu_hours < 0:
        raise ValueError(f"gpu_hours must be non-negative, got {gpu_hours}")
    if power_watts <= 0:
        raise ValueError(f"power_watts must be positive, got {power_watts}")
    if intensity_kg_per_kwh < 0:
        raise ValueError(f"intensity must be non-negative, got {intensity_kg_per_kwh}")
    return gpu_hours * (power_watts / 1000.0) * intensity_kg_per_kwh


@dataclass(frozen=True)
class CarbonRecord:
    """One ledger row. Aggregate rows may carry explicit emissions with no rate."""

    label: str
    gpu_hours: float
    power_watts: float | None = DEFAULT_POWER_WATTS
    intensity_kg_per_kwh: float | None = DEFAULT_INTENSITY_KG_PER_KWH
    emissions_kg: float | None = None

    def __post_init__(self) -> None:
        if self.gpu_hours < 0:
            raise ValueError(f"{self.label}: gpu_hours must be non-negative")
        if self.emissions_kg is None:
            if self.power_watts is None or self.intensity_kg_per_kwh is None:
                raise ValueError(f"{self.label}: need power and intensity to derive emissions")
            object.__setattr__(
                self,
                "emissions_kg",
                estimate_emissions(self.gpu_hours, self.power_watts, self.intensity_kg_per_kwh),
            )
        elif self.emissions_kg < 0:
            raise ValueError(f"{self.label}: emissions must be non-negative")


def ledger_total(records: Sequence[CarbonRecord]) -> CarbonRecord:
    """Exact sums of hours and emissions; rates carry over only when uniform."""
    if not records:
        raise ValueError("cannot total an empty ledger")
    powers = {r.power_watts for r in records}
    intensities = {r.intensity_kg_per_kwh for r in records}
    return CarbonRecord(
        label="total",
        gpu_hours=sum(r.gpu_hours for r in records),
        power_watts=powers.pop() if len(powers) == 1 else None,
        intensity_kg_per_kwh=intensities.pop() if len(intensities) == 1 else None,
        emissions_kg=sum(r.emissions_kg for r in records),
    )


def _record_from_mapping(obj: dict, where: str) -> CarbonRecord:
    try:
        return CarbonRecord(
            label=str(obj["label"]),
            gpu_hours=float(obj["gpu_hours"]),
            power_watts=float(obj.get("power_watts", DEFAULT_POWER_WATTS)),
            intensity_kg_per_kwh=float(obj.get("intensity_kg_per_kwh", DEFAULT_INTENSITY_KG_PER_KWH)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"{where}: bad carbon record: {exc}") from exc


def load_ledger(path: str | Path) -> list[CarbonRecord]:
    """Read ledger rows from a JSON array or a TSV with a header line."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() == ".json":
        raw = json.loads(text)
        if not isinstance(raw, list):
            raise ValueError(f"{path}: ledger JSON must be an array of records")
        return [_record_from_mapping(obj, f"{path}[{i}]") for i, obj in enumerate(raw)]
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines:
        return []
    columns = lines[0].split("\t")
    records = []
    for i, line in enumerate(lines[1:], start=2):
        values = line.split("\t")
        if len(values) != len(columns):
            raise ValueError(f"{path}:{i}: expected {len(columns)} columns, got {len(values)}")
        records.append(_record_from_mapping(dict(zip(columns, values)), f"{path}:{i}"))
    return records


def format_report(records: Iterable[CarbonRecord], include_total: bool = True) -> str:
    """Ledger as an aligned text table with two-decimal display rounding."""
    rows = [("label", "gpu_hours", "emissions_kg")]
    records = list(records)
    for record in records:
        rows.append((record.label, f"{record.gpu_hours:.2f}", f"{record.emissions_kg:.2f}"))
    if include_total and records:
        total = ledger_total(records)
        rows.append((total.label, f"{total.gpu_hours:.2f}", f"{total.emissions_kg:.2f}"))
    widths = [max(len(row[col]) for row in rows) for col in range(3)]
    lines = []
    for row in rows:
        lines.append(
            row[0].ljust(widths[0]) + "  " + row[1].rjust(widths[1]) + "  " + row[2].rjust(widths[2])
        )
    return "\n".join(lines) + "\n"
