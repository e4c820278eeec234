import csv
import io
import math

import numpy as np
import pytest

from spectral_match.bench_cli import main
from spectral_match.market_io import read_records, write_market_csv, write_market_json
from spectral_match.market_model import validate_market

SMALL_BENCH = ["--seeds", "2", "--agents", "20", "--objects", "4", "--noise", "0,1", "--no-timings"]


@pytest.fixture
def market_json(pedagogical_market, tmp_path):
    path = tmp_path / "market.json"
    write_market_json(pedagogical_market, path)
    return path


def test_pedagogical_transcript(capsys):
    assert main(["pedagogical"]) == 0
    out = capsys.readouterr().out
    assert "A1->P1, A2->P2, A3->P3" in out
    assert "Band: Proceed" in out
    assert "NSW = 2664" in out


def test_pedagogical_numbers_as_json(tmp_path):
    path = tmp_path / "numbers.json"
    assert main(["pedagogical", "--format", "json", "--out", str(path)]) == 0
    numbers = read_records(path)[0]
    assert numbers["allocation"] == [0, 1, 2]
    assert numbers["oracle_allocation"] == [0, 1, 2]
    assert numbers["sigma_ratio"] == pytest.approx(2.72, abs=0.01)


def test_match_on_bundled_market(market_json, tmp_path):
    out = tmp_path / "match.json"
    code = main(["match", "--market", str(market_json), "--mechanisms", "svd,oracle,serial", "--format", "json", "--out", str(out)])
    assert code == 0
    record = read_records(out)[0]
    assert record["mechanisms"]["svd"]["allocation"] == [0, 1, 2]
    assert record["mechanisms"]["oracle"]["allocation"] == [0, 1, 2]
    assert record["diagnostics"]["band"] == "Proceed"
    assert set(record["timings"]) >= {"decomposition", "projection", "sort", "match", "total"}


def test_match_on_csv_triple(pedagogical_market, tmp_path, capsys):
    paths = write_market_csv(pedagogical_market, tmp_path / "market")
    code = main(
        [
            "match",
            "--features", str(paths["features"]),
            "--preferences", str(paths["preferences"]),
            "--capacities", str(paths["capacities"]),
            "--no-timings",
        ]
    )
    assert code == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith("seed,distribution,noise,mechanism,")
    assert [line.split(",")[3] for line in lines[1:]] == ["random", "serial", "svd"]


def _assert_complete_csv(text):
    header, *rows = list(csv.reader(io.StringIO(text)))
    assert rows
    for row in rows:
        assert len(row) == len(header)
        for column, cell in zip(header, row):
            assert cell != "", f"empty {column}"
            try:
                number = float(cell)
            except ValueError:
                continue
            assert math.isfinite(number) or cell == "-inf", f"{column}={cell}"


@pytest.mark.parametrize(
    "args",
    [
        ["match", "--mechanisms", "svd,random,serial,oracle", "--agents", "6", "--objects", "3"],
        ["bench", "--seeds", "1", "--agents", "20", "--objects", "4", "--noise", "0,1"],
    ],
)
def test_csv_rows_have_no_blank_cells(args, capsys, monkeypatch):
    monkeypatch.setenv("SPECTRAL_MATCH_TIMING_REPEATS", "1")
    monkeypatch.setenv("SPECTRAL_MATCH_NOISE_REPLICATIONS", "2")
    assert main(args) == 0
    out = capsys.readouterr().out
    assert "svd_time_us.total" in out.splitlines()[0]
    _assert_complete_csv(out)


def test_capacity_mismatch_exit_code(pedagogical_market, tmp_path, capsys):
    paths = write_market_csv(pedagogical_market, tmp_path / "market")
    paths["capacities"].write_text("capacity\n2\n1\n1\n")
    code = main(["match", "--features", str(paths["features"]), "--preferences", str(paths["preferences"]), "--capacities", str(paths["capacities"])])
    assert code == 2
    assert "error:" in capsys.readouterr().err


def test_zero_features_exit_code(tmp_path):
    path = tmp_path / "features.csv"
    path.write_text("x1,x2\n0,0\n0,0\n")
    assert main(["diagnose", "--features", str(path)]) == 3


def test_diagnose_needs_features():
    assert main(["diagnose"]) == 2


def test_oracle_budget_exit_code(tmp_path):
    path = tmp_path / "big.json"
    size = 12
    market = validate_market(np.eye(size) + 1.0, np.eye(size), np.ones(size, dtype=int))
    write_market_json(market, path)
    assert main(["match", "--market", str(path), "--mechanisms", "oracle", "--no-timings"]) == 4


def test_diagnose_tables(pedagogical_market, tmp_path):
    paths = write_market_csv(pedagogical_market, tmp_path / "market")
    out = tmp_path / "diag.json"
    assert main(["diagnose", "--features", str(paths["features"]), "--format", "json", "--out", str(out)]) == 0
    tables = read_records(out)
    assert len(tables["spectrum"]) == 3
    assert tables["diagnosis"][0]["band"] == "Proceed"
    assert tables["diagnosis"][0]["rho1"] == pytest.approx(0.880, abs=1e-3)


def test_bench_is_byte_identical_without_timings(capsys):
    assert main(["bench", *SMALL_BENCH]) == 0
    first = capsys.readouterr().out
    assert main(["bench", *SMALL_BENCH]) == 0
    second = capsys.readouterr().out
    assert first == second
    rows = first.splitlines()
    assert len(rows) == 1 + 2 * 2 * 3
    assert "time_us" not in rows[0]


def test_bench_json_round_trip(tmp_path):
    out = tmp_path / "bench.json"
    assert main(["bench", *SMALL_BENCH, "--format", "json", "--out", str(out)]) == 0
    records = read_records(out)
    assert [(r["seed"], r["noise"]) for r in records] == [(0, 0.0), (0, 1.0), (1, 0.0), (1, 1.0)]
    assert all("timings" not in record for record in records)


def test_robustness_without_models(tmp_path):
    out = tmp_path / "robust.json"
    code = main(["robustness", "--seeds", "2", "--agents", "20", "--objects", "4", "--noise", "0,1", "--dist", "normal,uniform", "--format", "json", "--out", str(out)])
    assert code == 0
    tables = read_records(out)
    assert tables["nonlinear"] == []
    assert len(tables["cross_distribution"]) == 2
    assert len(tables["noise_sensitivity"]) == 4


def test_robustness_nonlinear_table(tmp_path):
    out = tmp_path / "robust.json"
    code = main(["robustness", "--seeds", "2", "--agents", "20", "--objects", "4", "--model", "linear,5,mlp", "--format", "json", "--out", str(out)])
    assert code == 0
    rows = read_records(out)["nonlinear"]
    assert [row["model"] for row in rows] == ["1. linear", "5. concave", "8. mlp"]
    assert rows[0]["loss_vs_linear_pct"] == pytest.approx(0.0)
    assert rows[0]["mean_tau"] == pytest.approx(1.0)


def test_unknown_mechanism_exit_code():
    assert main(["match", "--mechanisms", "auction"]) == 2
