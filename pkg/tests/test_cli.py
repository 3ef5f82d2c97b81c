import numpy as np
import pytest

from wavemarg.cli import main
from wavemarg.fieldio import read_wff, write_wff
from wavemarg.grid import marginal
from wavemarg.pipeline import ExperimentConfig, generate_density_sequence, generate_target


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text(f"# small run\nM = 64\nL = 10\noutput_dir = {tmp_path / 'out'}\n")
    return path


def test_run_and_report(config_file, tmp_path, capsys):
    assert main(["run", str(config_file), "--fields"]) == 0
    out = tmp_path / "out"
    assert (out / "report.csv").exists() and (out / "psi_1.wff").exists()
    assert main(["report", str(out)]) == 0
    text = capsys.readouterr().out
    assert "ratio=" in text and text.count("\n") >= 8


def test_report_flags_bad_rows(config_file, tmp_path, capsys):
    main(["run", str(config_file)])
    path = tmp_path / "out" / "report.csv"
    lines = path.read_text().splitlines()
    cells = lines[1].split(",")
    cells[5] = "0.5"  # marginal_l1
    lines[1] = ",".join(cells)
    path.write_text("\n".join(lines) + "\n")
    assert main(["report", str(tmp_path / "out")]) == 1
    assert "rows out of tolerance: [1]" in capsys.readouterr().err


def test_trace_lines_are_tab_separated(config_file, capsys):
    assert main(["--trace", "run", str(config_file)]) == 0
    lines = capsys.readouterr().out.splitlines()
    stages = {line.split("\t")[0] for line in lines if "\t" in line}
    assert {"realloc", "smooth"} <= stages
    realloc = next(line for line in lines if line.startswith("realloc\t"))
    assert len(realloc.split("\t")) == 5


def test_bad_config_exits_nonzero(tmp_path, capsys):
    path = tmp_path / "bad.cfg"
    path.write_text("mode = fermion\n")
    assert main(["run", str(path)]) == 1
    assert "ConfigError" in capsys.readouterr().err


def test_invariant_failure_reports_stage(tmp_path, capsys):
    path = tmp_path / "tight.cfg"
    path.write_text(f"M = 64\nmarginal_tol = 1e-30\noutput_dir = {tmp_path}\n")
    assert main(["run", str(path)]) == 1
    assert "stage smoothing" in capsys.readouterr().err


def test_usage_error():
    with pytest.raises(SystemExit) as info:
        main(["smooth", "x.wff"])
    assert info.value.code == 2


def _fields(tmp_path, mode="nonneg"):
    cfg = ExperimentConfig(M=64, mode=mode)
    psi, rho = generate_target(cfg)
    rho_n = generate_density_sequence(rho, cfg)[0]
    write_wff(tmp_path / "psi.wff", psi, cfg.d, cfg.L)
    write_wff(tmp_path / "phi.wff", np.abs(psi), cfg.d, cfg.L)
    write_wff(tmp_path / "rho_n.wff", rho_n, cfg.d, cfg.L)
    return cfg, rho_n


def test_reallocate_command(tmp_path):
    cfg, rho_n = _fields(tmp_path)
    assert main(["reallocate", str(tmp_path / "phi.wff"), str(tmp_path / "rho_n.wff"),
                 "-o", str(tmp_path / "out.wff")]) == 0
    header, phi_n = read_wff(tmp_path / "out.wff")
    err = np.sum(np.abs(marginal(header.grid(), phi_n) - rho_n)) / np.sum(rho_n)
    assert err <= 1e-10


def test_smooth_command(tmp_path, capsys):
    _fields(tmp_path)
    assert main(["smooth", str(tmp_path / "phi.wff"), "--eps", "0.5",
                 "-o", str(tmp_path / "sm.wff")]) == 0
    assert "marginal_l1=" in capsys.readouterr().out
    assert main(["smooth", str(tmp_path / "phi.wff"), "--eps", "0.01"]) == 1


def test_lift_command(tmp_path, capsys):
    cfg, _ = _fields(tmp_path, mode="signed")
    _, rho = generate_target(cfg)
    paths = []
    for n, rho_n in enumerate(generate_density_sequence(rho, cfg)[:3], 1):
        paths.append(str(tmp_path / f"phi_{n}.wff"))
        write_wff(paths[-1], np.sqrt(rho_n[:, None] * rho_n[None, :]), cfg.d, cfg.L)
    args = ["lift", str(tmp_path / "psi.wff")] + paths
    assert main(args + ["-o", str(tmp_path / "lifted")]) == 0
    header, psi_1 = read_wff(tmp_path / "lifted" / "psi_1.wff")
    assert header.kind == "complex"
    assert capsys.readouterr().out.startswith("k\tn_k")
    args = ["lift", str(tmp_path / "psi.wff")] + [str(tmp_path / "phi.wff")] * 3
    assert main(args) == 1
    assert "SubsequenceError" in capsys.readouterr().err


def test_reallocate_rejects_mismatched_grid(tmp_path):
    _fields(tmp_path)
    write_wff(tmp_path / "short.wff", np.full(32, 1 / 20.0), 1, 10.0)
    assert main(["reallocate", str(tmp_path / "phi.wff"), str(tmp_path / "short.wff")]) == 1
