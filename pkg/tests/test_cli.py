"""Command-line interface: exit codes, artifacts, manifests, reruns."""

import hashlib
import json
import os

import numpy as np
import pytest

from samplab.cli import EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, main
from samplab.frame import GridFrame
from samplab.gaussfield import CovarianceSpec, SuperPopulationSpec, generate_population

TINY_LADDER = """\
mode: ladder
master_seed: 20240601
frame:
  n_cols: 8
  n_rows: 8
  cell_side: 1.0
ladder:
  esr_start: 0.05
  esr_end: 0.5
  count: 4
designs:
  - kind: SRS
    n: 4
  - kind: SYS
    n: 4
replication:
  replicates: 30
  bootstrap_samples: 200
  smoothing_window: 3
figures:
  enabled: false
"""


def _write(tmp_path, text, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def _sha(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def test_run_produces_artifacts_and_manifest(tmp_path, capsys):
    cfg = _write(tmp_path, TINY_LADDER)
    out = tmp_path / "out"
    rc = main(["run", cfg, "--output-dir", str(out)])
    assert rc == EXIT_OK
    assert (out / "summaries.csv").exists()
    assert (out / "smoothed.csv").exists()
    assert (out / "config.yaml").exists()
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["status"] == "complete"
    assert manifest["tool"] == "samplab"
    assert manifest["mode"] == "ladder"
    for name, digest in manifest["files"].items():
        assert _sha(out / name) == digest
    printed = capsys.readouterr().out
    assert "summaries.csv" in printed


def test_rerun_with_same_config_is_byte_identical(tmp_path):
    cfg = _write(tmp_path, TINY_LADDER)
    out = tmp_path / "out"
    assert main(["run", cfg, "--output-dir", str(out)]) == EXIT_OK
    first = {p.name: p.read_bytes() for p in out.iterdir()}
    assert main(["run", cfg, "--output-dir", str(out)]) == EXIT_OK
    second = {p.name: p.read_bytes() for p in out.iterdir()}
    assert first == second


def test_seed_override_changes_results(tmp_path):
    cfg = _write(tmp_path, TINY_LADDER)
    out1 = tmp_path / "a"
    out2 = tmp_path / "b"
    assert main(["run", cfg, "--output-dir", str(out1)]) == EXIT_OK
    assert main(["run", cfg, "--output-dir", str(out2), "--seed", "9"]) == EXIT_OK
    assert (out1 / "summaries.csv").read_bytes() != (out2 / "summaries.csv").read_bytes()


def test_run_rejects_bad_estimator_with_exit_2(tmp_path, capsys):
    cfg = _write(tmp_path, TINY_LADDER + "estimators: [HT, TYPO]\n")
    rc = main(["run", cfg, "--output-dir", str(tmp_path / "out")])
    assert rc == EXIT_CONFIG
    err = capsys.readouterr().err
    assert "TYPO" in err
    assert "GREG1" in err  # valid tags are listed


def test_run_missing_config_file_is_exit_2(tmp_path, capsys):
    rc = main(["run", str(tmp_path / "nope.yaml"),
               "--output-dir", str(tmp_path / "out")])
    assert rc == EXIT_CONFIG


def test_validate_reports_problems_but_exits_zero(tmp_path, capsys):
    cfg = _write(tmp_path, TINY_LADDER + "estimators: [HT, TYPO]\n")
    rc = main(["validate", cfg])
    assert rc == EXIT_OK
    out = capsys.readouterr().out
    assert "TYPO" in out


def test_validate_happy_path_prints_derived_quantities(tmp_path, capsys):
    cfg = _write(tmp_path, TINY_LADDER)
    rc = main(["validate", cfg])
    assert rc == EXIT_OK
    out = capsys.readouterr().out
    assert "valid" in out
    assert "64" in out  # frame cell count


def test_validate_demo_keyword(capsys):
    assert main(["validate", "demo"]) == EXIT_OK
    assert "valid" in capsys.readouterr().out


def test_set_overrides_flow_into_the_run(tmp_path):
    cfg = _write(tmp_path, TINY_LADDER)
    out = tmp_path / "out"
    rc = main(["run", cfg, "--output-dir", str(out),
               "--set", "ladder.count=3",
               "--set", "estimators=[HT]"])
    assert rc == EXIT_OK
    lines = (out / "summaries.csv").read_text().strip().splitlines()
    # 3 rungs x 2 designs x 1 estimator + header
    assert len(lines) == 1 + 3 * 2


def test_synth_stemmap_writes_census_and_sidecars(tmp_path, capsys):
    out = tmp_path / "synth"
    rc = main(["synth-stemmap", "--output-dir", str(out),
               "--set", "stemmap.region.width=100",
               "--set", "stemmap.region.height=100",
               "--set", "stemmap.synthesis.n_trees=500",
               "--seed", "5"])
    assert rc == EXIT_OK
    assert (out / "stemmap.csv").exists()
    assert (out / "stemmap.csv.meta.json").exists()
    assert (out / "covariates.csv").exists()
    assert (out / "covariates.csv.meta.json").exists()
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["status"] == "complete"
    n_rows = len((out / "stemmap.csv").read_text().strip().splitlines())
    assert n_rows == 1 + 500


def test_stemmap_run_with_impossible_plot_lattice_is_runtime_error(tmp_path, capsys):
    cfg = _write(tmp_path, """\
mode: stemmap
master_seed: 3
stemmap:
  region:
    width: 200
    height: 280
  synthesis:
    n_trees: 2000
  design:
    kind: SYS
    k_cols: 20
    k_rows: 28
  replicates: 20
""")
    rc = main(["run", cfg, "--output-dir", str(tmp_path / "out")])
    assert rc == EXIT_RUNTIME


def test_variogram_subcommand_fits_population_residuals(tmp_path, capsys):
    fr = GridFrame(n_cols=20, n_rows=20, cell_side=1.0)
    spec = SuperPopulationSpec(cov=CovarianceSpec.from_esr(4.0, 6.0),
                               beta=(0.0, 1.0, 1.0), tau2=1.0)
    pop = generate_population(fr, spec, master_seed=24, population_index=0)
    csv_path = tmp_path / "pop.csv"
    rows = ["cell_index,row,col,x1,x2,y"]
    for i in range(fr.n_cells):
        rows.append(f"{i},{i // 20},{i % 20},{float(pop.x1[i])!r},"
                    f"{float(pop.x2[i])!r},{float(pop.y[i])!r}")
    csv_path.write_text("\n".join(rows) + "\n")

    out = tmp_path / "vg"
    rc = main(["variogram", str(csv_path), "--output-dir", str(out)])
    assert rc == EXIT_OK
    for tag in ("ht", "greg1", "greg2"):
        assert (out / f"variogram_{tag}.csv").exists()
    assert (out / "variogram.svg").exists()
    printed = capsys.readouterr().out
    assert "nugget" in printed

    rc2 = main(["variogram", str(csv_path), "--output-dir", str(out),
                "--estimators", "HT,NOPE"])
    assert rc2 == EXIT_CONFIG


def test_variogram_rejects_sqrt_family(tmp_path, capsys):
    csv_path = tmp_path / "pop.csv"
    rows = ["cell_index,row,col,x1,x2,y"]
    rng = np.random.default_rng(1)
    for i in range(64):
        rows.append(f"{i},{i // 8},{i % 8},{rng.normal()!r},{rng.normal()!r},{rng.normal()!r}")
    csv_path.write_text("\n".join(rows) + "\n")
    rc = main(["variogram", str(csv_path), "--output-dir", str(tmp_path / "vg"),
               "--estimators", "HF-GREG1"])
    assert rc == EXIT_CONFIG


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert "samplab" in capsys.readouterr().out
