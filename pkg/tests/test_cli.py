import csv
import fcntl
import json
import shutil
import subprocess
import sys

import numpy as np
import pytest

from greenjump.cli import PipelineConfig, emit_report, main, make_parser, build_config
from greenjump.counterfactual import ClassificationIntervals
from greenjump.kde import kde_evaluate, unit_grid

RUN_OUTPUTS = [
    "classification_report.txt", "densities_pooled.csv", "manifest.json", "new_green_products.csv",
    "proximity.csv", "rca_t0.csv", "rca_t1.csv", "regression_table.csv", "regression_table.txt",
    "relatedness.csv",
]


def run(small_fixture, out, *extra):
    return main(["run", "--config", str(small_fixture / "pipeline.ini"), "--output", str(out), *extra])


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_small_run_writes_everything(small_fixture, tmp_path):
    out = tmp_path / "out"
    assert run(small_fixture, out) == 0
    assert sorted(p.name for p in out.iterdir()) == RUN_OUTPUTS
    rel = read_csv(out / "relatedness.csv")
    assert rel[0] == ["country", "product", "d_value"]
    assert ["AAA", "000004", "0.0"] in rel
    assert ["CCC", "000002", "0.5"] in rel
    new = read_csv(out / "new_green_products.csv")
    assert new[0] == ["country", "product", "rca_t0", "rca_t1"]
    assert [r[:2] for r in new[1:]] == [["AAA", "000004"], ["CCC", "000002"]]
    assert len((out / "densities_pooled.csv").read_text().splitlines()) == 513
    report = (out / "classification_report.txt").read_text()
    assert "seed: 20071017" in report and "Number of countries" in report


def test_outputs_sorted_by_key(small_fixture, tmp_path):
    run(small_fixture, tmp_path)
    for name, key in (("rca_t0.csv", 2), ("proximity.csv", 2), ("relatedness.csv", 2), ("new_green_products.csv", 2)):
        rows = read_csv(tmp_path / name)[1:]
        keys = [tuple(r[:key]) for r in rows]
        assert keys == sorted(keys) and len(set(keys)) == len(keys)


def test_per_country_single_point_density(small_fixture, tmp_path):
    assert run(small_fixture, tmp_path, "--country", "AAA", "--bandwidth", "0.05") == 0
    rows = np.array(read_csv(tmp_path / "densities_AAA.csv")[1:], dtype=float)
    expect = kde_evaluate([0.0], 0.05, unit_grid()).values
    np.testing.assert_array_equal(rows[:, 0], unit_grid())
    np.testing.assert_array_equal(rows[:, 1], expect)
    assert rows[0, 1] == rows[:, 1].max()


def test_degenerate_country_fails_and_cleans_up(small_fixture, tmp_path, capsys):
    # one observation and no explicit bandwidth
    assert run(small_fixture, tmp_path, "--country", "AAA") == 4
    err = capsys.readouterr().err
    assert "stage 'counterfactual'" in err and "degenerate" in err
    assert list(tmp_path.iterdir()) == []


def test_equal_years_rejected_before_work(small_fixture, tmp_path, capsys):
    out = tmp_path / "out"
    assert run(small_fixture, out, "--t0", "2017") == 2
    assert "t0" in capsys.readouterr().err
    assert not out.exists()


def test_missing_green_names_field(small_fixture, tmp_path, capsys):
    code = main(["run", "--trade", str(small_fixture / "trade.csv"), "--seed", "1",
                 "--green", str(tmp_path / "nope.txt"), "--output", str(tmp_path / "o")])
    assert code == 2
    assert "green" in capsys.readouterr().err
    code = main(["run", "--trade", str(small_fixture / "trade.csv"), "--seed", "1", "--output", str(tmp_path / "o")])
    assert code == 2


def test_missing_seed(small_fixture, tmp_path, capsys):
    code = main(["counterfactual", "--trade", str(small_fixture / "trade.csv"),
                 "--green", str(small_fixture / "green.txt"), "--output", str(tmp_path)])
    assert code == 2 and "seed" in capsys.readouterr().err


def test_data_error_exit_code(small_fixture, tmp_path, capsys):
    bad = tmp_path / "t.csv"
    bad.write_text("year,reporter_iso,hs6\n2007,AAA,000001\n")
    code = main(["rca", "--trade", str(bad), "--output", str(tmp_path / "o")])
    assert code == 3 and "trade_value_usd" in capsys.readouterr().err


def test_missing_year_is_data_error(small_fixture, tmp_path):
    assert run(small_fixture, tmp_path, "--t1", "2019") == 3
    assert list(tmp_path.iterdir()) == []


@pytest.mark.parametrize("command, files", [
    ("ingest", ["tensor.csv"]),
    ("rca", ["rca_t0.csv", "rca_t1.csv"]),
    ("proximity", ["proximity.csv"]),
    ("new-products", ["new_green_products.csv", "relatedness.csv"]),
    ("counterfactual", ["classification_report.txt", "densities_pooled.csv"]),
    ("regress", ["regression_table.csv", "regression_table.txt"]),
])
def test_subcommands(small_fixture, tmp_path, command, files):
    assert main([command, "--config", str(small_fixture / "pipeline.ini"), "-o", str(tmp_path)]) == 0
    assert sorted(p.name for p in tmp_path.iterdir()) == files


def test_subcommand_matches_run(small_fixture, tmp_path):
    run(small_fixture, tmp_path / "a")
    main(["proximity", "--config", str(small_fixture / "pipeline.ini"), "-o", str(tmp_path / "b")])
    assert (tmp_path / "a" / "proximity.csv").read_bytes() == (tmp_path / "b" / "proximity.csv").read_bytes()


def test_flags_override_config(small_fixture):
    args = make_parser().parse_args(["run", "--config", str(small_fixture / "pipeline.ini"),
                                     "--draws", "5", "--bandwidth", "auto", "--country", "aaa"])
    cfg = build_config(args)
    assert cfg.draws == 5 and cfg.seed == 20071017 and cfg.bandwidth is None
    assert cfg.countries == ("AAA",)
    assert cfg.trade == small_fixture / "trade.csv"


def test_bad_config_file(tmp_path, capsys):
    ini = tmp_path / "c.ini"
    ini.write_text("[greenjump]\ndraws = many\n")
    assert main(["rca", "--config", str(ini)]) == 2
    ini.write_text("[greenjump]\nfavourite_colour = green\n")
    assert main(["rca", "--config", str(ini)]) == 2
    assert "favourite_colour" in capsys.readouterr().err


def test_manifest_tracks_input_bytes(small_fixture, tmp_path):
    src = tmp_path / "in"
    shutil.copytree(small_fixture, src)
    run(src, tmp_path / "a")
    first = json.loads((tmp_path / "a" / "manifest.json").read_text())
    # same bytes, new mtime
    (src / "green.txt").write_bytes((src / "green.txt").read_bytes())
    run(src, tmp_path / "b")
    assert json.loads((tmp_path / "b" / "manifest.json").read_text())["inputs"] == first["inputs"]
    with (src / "trade.csv").open("a") as fh:
        fh.write("2017,BBB,000001,0\n")
    run(src, tmp_path / "c")
    third = json.loads((tmp_path / "c" / "manifest.json").read_text())
    assert third["inputs"]["trade"]["sha256"] != first["inputs"]["trade"]["sha256"]
    assert third["inputs"]["green"] == first["inputs"]["green"]
    assert first["seed"] == 20071017 and first["rng"]["generator"] == "numpy.PCG64"


def test_locked_output(small_fixture, tmp_path, capsys):
    tmp_path.mkdir(exist_ok=True)
    with (tmp_path / ".greenjump.lock").open("w") as fh:
        fcntl.flock(fh, fcntl.LOCK_EX)
        assert run(small_fixture, tmp_path) == 2
    assert "in use" in capsys.readouterr().err
    assert run(small_fixture, tmp_path) == 0
    assert not (tmp_path / ".greenjump.lock").exists()


def test_emit_report_formats(tmp_path):
    mixed = ClassificationIntervals(((0.58, 0.70),), ((0.71, 1.0),), "mixed", 0.6, 0.2)
    text = emit_report(mixed, None, tmp_path / "r.txt").read_text()
    assert "path-dependent: [0.580, 0.700]" in text
    full = ClassificationIntervals(((0.0, 1.0),), (), "full", 1.0, 0.4)
    text = emit_report(full, "TABLE\n", tmp_path / "r.txt").read_text()
    assert "full path-dependence" in text
    assert "non-path-dependent: none" in text
    assert text.rstrip().endswith("TABLE")


def test_config_validation():
    for bad in (dict(t0=2017, t1=2007), dict(draws=0), dict(new_low_threshold=2.0), dict(bandwidth=-1.0),
                dict(baseline_scope="some"), dict(dependent_mode="x")):
        with pytest.raises(Exception) as exc:
            PipelineConfig(**bad).validate(needs=())
        assert getattr(exc.value, "exit_code", None) == 2


def test_console_script_version():
    out = subprocess.run([sys.executable, "-m", "greenjump.cli", "--version"], capture_output=True, text=True)
    assert out.returncode == 0 and out.stdout.startswith("greenjump ")
