import csv
import json

import pytest

from stepstone.cli import main
from stepstone.experiments import (ConfigError, formulas_report, parse_config, profile_rows, run,
                                   sha256, write_csv)
from stepstone.model import LimitParams

BASE = {
    "thm1_grid": {"model": {"L": 30, "N": 1, "nu": 0.5}, "replicates": 60,
                  "geometry": {"mode": "clustered", "n": 2, "beta": 0.5}, "options": {"betas": [0.5, 0.7]}},
    "thm2_counts": {"model": {"L": 20, "N": 1, "nu": 1.0}, "replicates": 40,
                    "geometry": {"mode": "spread", "n": 3}},
    "thm3_counts": {"model": {"L": 30, "N": 1, "nu": 1.0}, "replicates": 40,
                    "geometry": {"mode": "clustered", "n": 3, "beta": 0.5}},
    "nrbc_curve": {"model": {"L": 12, "N": 1, "nu": 0.5}, "replicates": 40,
                   "geometry": {"mode": "clustered", "n": 2, "beta": 0.5},
                   "options": {"distances_nt": [1e5, 1e6], "rho": 1e-8, "skeleton": True}},
    "pairwise": {"model": {"L": 12, "N": 1, "nu": 0.5}, "replicates": 30,
                 "geometry": {"mode": "clustered", "n": 3, "beta": 0.5}, "options": {"mu": 0.01}},
    "mutation_profile": {"model": {"L": 100, "N": 5, "nu": 0.2},
                         "geometry": {"mode": "clustered", "n": 2, "beta": 0.4},
                         "options": {"sigma2": 2.0, "points": 31}},
    "duality": {"model": {"L": 3, "N": 1, "nu": 0.5}, "replicates": 50, "options": {"times": [1.0, 3.0]}},
    "formulas": {"model": {"L": 100, "N": 5, "nu": 0.2},
                 "geometry": {"mode": "clustered", "n": 2, "beta": 0.4}, "options": {"sigma2": 2.0}},
}


def config(exp, **extra):
    return {"experiment": exp, "seed": 7, **json.loads(json.dumps(BASE[exp])), **extra}


def write_config(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


@pytest.mark.parametrize("exp", sorted(BASE))
def test_reruns_are_byte_identical(exp, tmp_path):
    m1 = run(parse_config(config(exp)), tmp_path / "a")
    m2 = run(parse_config(config(exp), workers=2), tmp_path / "b")
    assert m1["files"] == m2["files"]
    for name, digest in m1["files"].items():
        assert sha256(tmp_path / "a" / name) == digest
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert manifest["config"]["experiment"] == exp
    assert {"version", "wall_clock_seconds", "files"} <= set(manifest)


def test_seed_changes_output(tmp_path):
    run(parse_config(config("thm2_counts")), tmp_path / "a")
    run(parse_config(config("thm2_counts"), seed=8), tmp_path / "b")
    assert (tmp_path / "a" / "thm2_counts.csv").read_bytes() != (tmp_path / "b" / "thm2_counts.csv").read_bytes()


@pytest.mark.parametrize("mutate, field", [
    (lambda c: c.update(replicates=0), "replicates"),
    (lambda c: c.update(bogus=1), "bogus"),
    (lambda c: c["model"].update(colour="red"), "model.colour"),
    (lambda c: c["model"].update(nu=0.0), "model.nu"),
    (lambda c: c["model"].update(kernel={"kind": "hex"}), "model.kernel"),
    (lambda c: c["geometry"].update(mode="ring"), "geometry.mode"),
    (lambda c: c["options"].update(speed=3), "options.speed"),
    (lambda c: c.update(experiment="thm9"), "experiment"),
    (lambda c: c.update(seed=-1), "seed"),
    (lambda c: c.update(workers=0), "workers"),
    (lambda c: c["geometry"].update(beta=0.1, c=0.01), "geometry"),
])
def test_validation_names_field(mutate, field):
    cfg = config("thm1_grid")
    mutate(cfg)
    with pytest.raises(ConfigError) as e:
        parse_config(cfg)
    assert e.value.field == field


def test_duality_scale_guard():
    with pytest.raises(ConfigError, match="2N L"):
        parse_config(config("duality", model={"L": 40, "N": 5, "nu": 0.5}))


def test_cli_exit_codes(tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["run", "--config", write_config(tmp_path, config("thm1_grid")), "--out", str(out)]) == 0
    assert (out / "manifest.json").exists()
    bad = tmp_path / "bad"
    assert main(["run", "--config", write_config(tmp_path, config("thm1_grid")),
                 "--replicates", "0", "--out", str(bad)]) == 2
    assert not bad.exists()
    assert main(["run", "--config", str(tmp_path / "missing.json"), "--out", str(out)]) == 2
    (tmp_path / "broken.json").write_text("{not json")
    assert main(["run", "--config", str(tmp_path / "broken.json"), "--out", str(out)]) == 2
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["run", "--config", write_config(tmp_path, config("formulas")),
                 "--out", str(blocker / "sub")]) == 3
    assert main(["run", "--config", write_config(tmp_path, config("formulas"))]) == 2
    with pytest.raises(SystemExit) as e:
        main(["frobnicate"])
    assert e.value.code == 2


def test_cli_flags_override(tmp_path):
    out = tmp_path / "o"
    main(["run", "--config", write_config(tmp_path, config("thm2_counts")), "--out", str(out),
          "--seed", "99", "--replicates", "11", "--workers", "1"])
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["seed"] == 99 and manifest["config"]["replicates"] == 11
    rows = list(csv.DictReader(open(out / "thm2_counts.csv")))
    assert sum(int(r["count"]) for r in rows) == 11 * 4


def test_formulas_preset(capsys):
    assert main(["formulas", "--preset", "paper-example"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["alpha"] == pytest.approx(2.7288, abs=5e-4)
    assert rep["Ne"] == pytest.approx(34162, abs=2)
    assert rep["survival"] == pytest.approx(0.83909, abs=1e-4)
    assert rep["u1"] == pytest.approx(0.17544, abs=1e-4)
    assert rep["pairwise_per_mu"] == pytest.approx(155391, rel=1e-3)


def test_formulas_report_matches_run(tmp_path):
    cfg = parse_config(config("formulas"))
    run(cfg, tmp_path)
    assert json.loads((tmp_path / "formulas.json").read_text()) == json.loads(json.dumps(formulas_report(cfg)))


def test_profile_rows_have_jump():
    lp = LimitParams.from_model(100, 5, 0.2, 2.0, 0.4)
    rows = profile_rows(lp, 1e-4, 301)
    us = [r["u"] for r in rows]
    assert us == sorted(us) and us[0] == 0.0 and us[-1] == pytest.approx(3 * lp.u1)
    at = [r for r in rows if r["u"] == lp.u1]
    assert len(at) == 2 and at[0]["rate"] > at[1]["rate"]
    assert at[1]["rate"] == pytest.approx(6.83, rel=0.01)


def test_time_columns(tmp_path):
    run(parse_config(config("thm1_grid")), tmp_path)
    rows = list(csv.DictReader(open(tmp_path / "thm1_grid.csv")))
    for r in rows:
        assert float(r["time_t"]) == pytest.approx(2 * 0.5 * float(r["time_raw"]))
        assert float(r["time_raw"]) == pytest.approx(30 ** (2 * float(r["gamma"])) / (2 * 0.5))


def test_header_only_csv(tmp_path):
    write_csv(tmp_path / "e.csv", ["u", "rate"], [])
    assert (tmp_path / "e.csv").read_text() == "u,rate\n"
