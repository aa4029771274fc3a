import numpy as np
import pytest

from pnpadmm import cli
from pnpadmm.fileio import load_image, parse_config, read_trace_csv, save_image
from pnpadmm.presets import synthetic_image
from pnpadmm.sequences import PgsSpec, pgs_generate


def run_cli(*args):
    return cli.main([str(a) for a in args])


def test_run_smoke_writes_outputs(tmp_path, capsys):
    out = tmp_path / "smoke"
    assert run_cli("run", "--preset", "smoke", "--out", out) == 0
    records = read_trace_csv(out / "trace.csv")
    assert len(records) >= 1
    assert (out / "restored.pgm").exists()
    summary = (out / "summary.txt").read_text()
    assert "stop_reason = tolerance" in summary
    assert "fixed_point_residual" in summary
    assert "gradient_bound_m_hat" in summary
    assert "denoiser_bound_k_hat" in summary
    cfg = parse_config(out / "run_config.txt")
    assert cfg["preset"] == "smoke"


def test_run_is_byte_deterministic(tmp_path):
    a = tmp_path / "a"
    b = tmp_path / "b"
    args = ("run", "--preset", "deblur", "--max-iter", "15", "--eta", "0.9")
    assert run_cli(*args, "--out", a) == 0
    assert run_cli(*args, "--out", b) == 0
    assert (a / "trace.csv").read_bytes() == (b / "trace.csv").read_bytes()


def test_run_accepts_config_file_and_overrides(tmp_path):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text(
        "# experiment\npreset = deblur\nmax_iter = 8\nnoise_sigma = 0.0\n"
        "lambda = 0.02\n"
    )
    out = tmp_path / "run"
    assert run_cli("run", "--config", cfg, "--eta", "0.9", "--out", out) == 0
    echoed = parse_config(out / "run_config.txt")
    assert echoed["eta"] == "0.9"
    assert echoed["lambda"] == "0.02"
    assert echoed["max_iter"] == "8"


def test_run_with_user_pgm_image(tmp_path):
    img = synthetic_image(16)
    src = tmp_path / "src.pgm"
    save_image(img, src)
    out = tmp_path / "run"
    code = run_cli(
        "run", "--preset", "deblur", "--image", src, "--max-iter", "5", "--out", out
    )
    assert code == 0
    restored = load_image(out / "restored.pgm")
    assert restored.width == 16


def test_run_missing_image_errors(tmp_path, capsys):
    code = run_cli(
        "run", "--preset", "deblur", "--image", tmp_path / "nope.pgm", "--out", tmp_path / "o"
    )
    assert code == 1
    assert "error:" in capsys.readouterr().err


def test_run_sweep_writes_subdirectories(tmp_path):
    out = tmp_path / "sweep"
    code = run_cli(
        "run", "--preset", "smoke", "--sweep", "0.1,0.6", "--out", out
    )
    assert code == 0
    assert (out / "eta=0.1" / "trace.csv").exists()
    assert (out / "eta=0.6" / "trace.csv").exists()


def test_analyze_on_run_output(tmp_path, capsys):
    run_dir = tmp_path / "run"
    assert run_cli(
        "run", "--preset", "deblur", "--eta", "0.95", "--max-iter", "60",
        "--out", run_dir,
    ) == 0
    out = tmp_path / "analysis"
    code = run_cli(
        "analyze", "--trace", run_dir / "trace.csv", "--out", out,
        "--epsilon", "1e-3",
    )
    assert code == 0
    report = (out / "bound_report.txt").read_text()
    assert "bound_holds = True" in report
    assert "cauchy_tail_bound" in report
    lines = (out / "bound.csv").read_text().splitlines()
    assert lines[0] == "iter,delta,bound,margin"
    assert len(lines) == 61


def test_analyze_all_c1_trace_uses_geometric_bound(tmp_path):
    run_dir = tmp_path / "run"
    assert run_cli(
        "run", "--preset", "deblur", "--eta", "0.1", "--max-iter", "40",
        "--out", run_dir,
    ) == 0
    out = tmp_path / "analysis"
    assert run_cli("analyze", "--trace", run_dir / "trace.csv", "--out", out) == 0
    report = (out / "bound_report.txt").read_text()
    assert "bound_kind = geometric" in report
    assert "bound_holds = True" in report


@pytest.mark.parametrize(
    "preset,eta",
    [("deblur", 0.1), ("deblur", 0.95), ("superres", 0.95), ("deblur", 0.6)],
)
def test_analyze_never_errors_on_short_valid_traces(tmp_path, preset, eta):
    run_dir = tmp_path / "run"
    assert run_cli(
        "run", "--preset", preset, "--eta", eta, "--max-iter", "10", "--out", run_dir
    ) == 0
    code = run_cli(
        "analyze", "--trace", run_dir / "trace.csv", "--out", tmp_path / "a"
    )
    assert code == 0


def test_analyze_truncated_trace_errors(tmp_path, capsys):
    trace = tmp_path / "one.csv"
    trace.write_text(
        "iter,delta,rho,sigma,condition,fidelity_value\n1,0.5,1,0.1,NA,0\n"
    )
    code = run_cli("analyze", "--trace", trace, "--out", tmp_path / "o")
    assert code == 1
    assert "insufficient iterations" in capsys.readouterr().err


def test_analyze_malformed_trace_errors(tmp_path, capsys):
    trace = tmp_path / "bad.csv"
    trace.write_text(
        "iter,delta,rho,sigma,condition,fidelity_value\n1,0.5,1\n"
    )
    code = run_cli("analyze", "--trace", trace, "--out", tmp_path / "o")
    assert code == 1
    assert "line 2" in capsys.readouterr().err


def test_pgs_demo_values(tmp_path, capsys):
    out = tmp_path / "pgs.csv"
    code = run_cli(
        "pgs-demo", "--beta", "0.5", "--chunk-lengths", "2,3", "--length", "8",
        "--epsilon", "1e-3", "--out", out,
    )
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "k,y,partial_sum,chunk_bound"
    ys = [float(line.split(",")[1]) for line in lines[1:]]
    spec = PgsSpec(beta=0.5, peak0=1.0, chunk_starts=(1, 3, 6))
    assert np.allclose(ys, pgs_generate(spec, 8))
    partial = [float(line.split(",")[2]) for line in lines[1:]]
    assert np.allclose(partial, np.cumsum(ys))
    assert "epsilon" in capsys.readouterr().out


def test_pgs_demo_rejects_bad_beta(tmp_path, capsys):
    code = run_cli("pgs-demo", "--beta", "1.5", "--out", tmp_path / "x.csv")
    assert code == 1
    assert "beta" in capsys.readouterr().err


def test_cli_requires_subcommand():
    with pytest.raises(SystemExit):
        cli.main([])
