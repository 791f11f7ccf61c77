import json

import pytest
from hypothesis import given, settings, strategies as st

from corpuskit.carbon import (
    DEFAULT_INTENSITY_KG_PER_KWH,
    DEFAULT_POWER_WATTS,
    CarbonRecord,
    estimate_emissions,
    format_report,
    ledger_total,
    load_ledger,
)

# Published single-run footprints to reproduce with the default power draw
# and grid intensity. Values are kg CO2-eq as printed at two decimals.
REFERENCE_ROWS = [
    ("7B", 952.53, 124.47),
    ("13B", 2518.0, 329.06),
    ("70B", 30266.0, 3955.17),
]
REFERENCE_TOTAL = 4408.70


@pytest.mark.parametrize("label,gpu_hours,expected", REFERENCE_ROWS)
def test_reference_rows_reproduce(label, gpu_hours, expected):
    assert estimate_emissions(gpu_hours) == pytest.approx(expected, abs=0.05)


def test_reference_total_reproduces():
    total = sum(estimate_emissions(h) for _, h, _ in REFERENCE_ROWS)
    assert total == pytest.approx(REFERENCE_TOTAL, abs=0.05)


def test_defaults_are_applied():
    explicit = estimate_emissions(
        100.0, power_watts=DEFAULT_POWER_WATTS, intensity_kg_per_kwh=DEFAULT_INTENSITY_KG_PER_KWH
    )
    assert estimate_emissions(100.0) == explicit


def test_known_round_numbers():
    # 1000 h at 500 W is 500 kWh; at 0.5 kg/kWh that is 250 kg.
    assert estimate_emissions(1000.0, power_watts=500.0, intensity_kg_per_kwh=0.5) == pytest.approx(
        250.0
    )


def test_zero_hours_zero_emissions():
    assert estimate_emissions(0.0) == 0.0


@pytest.mark.parametrize(
    "kwargs",
    [
        {"gpu_hours": -1.0},
        {"gpu_hours": 1.0, "power_watts": -5.0},
        {"gpu_hours": 1.0, "intensity_kg_per_kwh": -0.1},
    ],
)
def test_negative_inputs_rejected(kwargs):
    with pytest.raises(ValueError):
        estimate_emissions(**kwargs)


@settings(max_examples=300, deadline=None)
@given(
    st.floats(min_value=0, max_value=1e6, allow_nan=False),
    st.floats(min_value=0, max_value=1e6, allow_nan=False),
)
def test_additive_in_hours(a, b):
    combined = estimate_emissions(a + b)
    split = estimate_emissions(a) + estimate_emissions(b)
    assert combined == pytest.approx(split, rel=1e-9, abs=1e-9)


@settings(max_examples=300, deadline=None)
@given(
    st.floats(min_value=0.001, max_value=1e5, allow_nan=False),
    st.floats(min_value=1.0, max_value=2000.0, allow_nan=False),
    st.floats(min_value=0.001, max_value=2.0, allow_nan=False),
)
def test_linear_in_each_factor(hours, watts, intensity):
    base = estimate_emissions(hours, power_watts=watts, intensity_kg_per_kwh=intensity)
    assert estimate_emissions(2 * hours, power_watts=watts, intensity_kg_per_kwh=intensity) == pytest.approx(2 * base, rel=1e-9)
    assert estimate_emissions(hours, power_watts=2 * watts, intensity_kg_per_kwh=intensity) == pytest.approx(2 * base, rel=1e-9)
    assert estimate_emissions(hours, power_watts=watts, intensity_kg_per_kwh=2 * intensity) == pytest.approx(2 * base, rel=1e-9)


# --- records and ledgers ---


def test_record_derives_emissions():
    record = CarbonRecord(label="7B", gpu_hours=952.53)
    assert record.emissions_kg == pytest.approx(124.47, abs=0.05)


def test_record_accepts_external_emissions():
    record = CarbonRecord(
        label="reported", gpu_hours=100.0, power_watts=None, intensity_kg_per_kwh=None,
        emissions_kg=42.0,
    )
    assert record.emissions_kg == 42.0


def test_record_without_rates_needs_emissions():
    with pytest.raises(ValueError):
        CarbonRecord(label="x", gpu_hours=1.0, power_watts=None, intensity_kg_per_kwh=None)


def test_ledger_total_sums_rows():
    records = [CarbonRecord(label=l, gpu_hours=h) for l, h, _ in REFERENCE_ROWS]
    total = ledger_total(records)
    assert total.gpu_hours == pytest.approx(952.53 + 2518.0 + 30266.0)
    assert total.emissions_kg == pytest.approx(REFERENCE_TOTAL, abs=0.05)
    # Uniform rates survive into the total row.
    assert total.power_watts == DEFAULT_POWER_WATTS
    assert total.intensity_kg_per_kwh == DEFAULT_INTENSITY_KG_PER_KWH


def test_ledger_total_mixed_rates_blank():
    records = [
        CarbonRecord(label="a", gpu_hours=10.0, power_watts=300.0),
        CarbonRecord(label="b", gpu_hours=10.0, power_watts=700.0),
    ]
    total = ledger_total(records)
    assert total.power_watts is None
    assert total.emissions_kg == pytest.approx(
        estimate_emissions(10.0, power_watts=300.0) + estimate_emissions(10.0, power_watts=700.0)
    )


def test_ledger_total_empty_rejected():
    with pytest.raises(ValueError):
        ledger_total([])


def test_load_ledger_json(tmp_path):
    path = tmp_path / "ledger.json"
    path.write_text(
        json.dumps(
            [
                {"label": "7B", "gpu_hours": 952.53},
                {"label": "13B", "gpu_hours": 2518.0, "power_watts": 440.0},
            ]
        ),
        encoding="utf-8",
    )
    records = load_ledger(path)
    assert [r.label for r in records] == ["7B", "13B"]
    assert records[0].emissions_kg == pytest.approx(124.47, abs=0.05)


def test_load_ledger_tsv(tmp_path):
    path = tmp_path / "ledger.tsv"
    path.write_text(
        "label\tgpu_hours\tpower_watts\tintensity_kg_per_kwh\n"
        "7B\t952.53\t440\t0.297\n"
        "70B\t30266\t440\t0.297\n",
        encoding="utf-8",
    )
    records = load_ledger(path)
    assert len(records) == 2
    assert records[1].emissions_kg == pytest.approx(3955.17, abs=0.05)


def test_load_ledger_bad_row_rejected(tmp_path):
    path = tmp_path / "ledger.json"
    path.write_text(json.dumps([{"label": "x"}]), encoding="utf-8")
    with pytest.raises(ValueError):
        load_ledger(path)


def test_format_report_two_decimals():
    records = [CarbonRecord(label=l, gpu_hours=h) for l, h, _ in REFERENCE_ROWS]
    report = format_report(records, include_total=True)
    lines = report.splitlines()
    assert "124.47" in report or "124.48" in report
    assert lines[-1].startswith("total")
    # Every printed emission value carries exactly two decimals.
    for _, _, printed in REFERENCE_ROWS:
        row_vals = [tok for line in lines for tok in line.split() if tok.count(".") == 1]
        assert any(len(tok.rsplit(".", 1)[1]) == 2 for tok in row_vals)


def test_format_report_without_total():
    records = [CarbonRecord(label="only", gpu_hours=10.0)]
    report = format_report(records, include_total=False)
    assert "total" not in report
