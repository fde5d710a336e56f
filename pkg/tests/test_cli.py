"""End-to-end checks of the command-line driver via main(argv)."""

import pytest

from orliczwave.cli import main

RUN_HEADER = "step,t,l2_v,h1semi_v,potential,energy,dissipation_slack,newton_iters,residual_norm"
CONV_HEADER = "case,kind,resolution,tau,l2_error,v_error,fitted_rate"


def invoke(tmp_path, name, text, command, *extra):
    cfg = tmp_path / f"{name}.cfg"
    cfg.write_text(text)
    out = tmp_path / f"{name}-out"
    code = main([command, "--config", str(cfg), "--out", str(out), *extra])
    return code, out


def summary_of(out):
    return (out / "summary.txt").read_text()


SOLVE_C1 = """\
[run]
command = solve
[case]
name = C1
[time]
T = 1.0
N = 40
"""


def test_solve_case_artifacts_and_checks(tmp_path):
    code, out = invoke(tmp_path, "c1", SOLVE_C1, "solve")
    assert code == 0
    for artifact in ("run.csv", "summary.txt", "energy.png", "final_state.csv"):
        assert (out / artifact).exists(), artifact
    lines = (out / "run.csv").read_text().splitlines()
    assert lines[0] == RUN_HEADER
    assert len(lines) == 42  # header + initial record + 40 steps
    text = summary_of(out)
    for check in ("dissipation", "energy estimate", "telescoping",
                  "second-order form"):
        assert f"{check}:" in text and "[FAIL]" not in text
    # Spectral space with a closed conjugate: the dual-norm diagnostic runs.
    assert "dual increment sum" in text


def test_solve_is_deterministic(tmp_path):
    _, out_a = invoke(tmp_path, "one", SOLVE_C1, "solve")
    _, out_b = invoke(tmp_path, "two", SOLVE_C1, "solve")
    assert (out_a / "run.csv").read_bytes() == (out_b / "run.csv").read_bytes()


def test_solve_expression_driven(tmp_path):
    text = """\
[run]
command = solve
[spec]
kind = power
p = 2
[space]
kind = spectral1d
resolution = 16
[time]
T = 0.5
N = 10
[initial]
u0 = sin(pi * x)
"""
    code, out = invoke(tmp_path, "expr", text, "solve")
    assert code == 0
    assert "[FAIL]" not in summary_of(out)


def test_solve_fem2d_writes_grid(tmp_path):
    text = """\
[run]
command = solve
[case]
name = C3
[space]
kind = fem2d
resolution = 8
[time]
T = 0.5
N = 10
"""
    code, out = invoke(tmp_path, "c3", text, "solve")
    assert code == 0
    dump = (out / "final_grid.dat").read_text()
    blocks = dump.strip().split("\n\n")
    assert len(blocks) == 9  # one block per y-level of the 8x8 grid
    assert len(blocks[0].splitlines()) == 9


def test_converge_time(tmp_path):
    text = """\
[run]
command = converge-time
[case]
name = C1
[time]
T = 1.0
tau_ladder = 0.1 0.05 0.025 0.0125
"""
    code, out = invoke(tmp_path, "ct", text, "converge-time")
    assert code == 0
    lines = (out / "convergence.csv").read_text().splitlines()
    assert lines[0] == CONV_HEADER
    assert len(lines) == 5
    assert (out / "convergence.png").exists()
    text = summary_of(out)
    assert "temporal rate" in text and "[FAIL]" not in text
    assert "spatial floor" in text


def test_converge_space(tmp_path):
    text = """\
[run]
command = converge-space
[case]
name = C3
[time]
T = 0.5
tau = 0.002
resolution_ladder = 4 8 16
"""
    code, out = invoke(tmp_path, "cs", text, "converge-space")
    assert code == 0
    lines = (out / "convergence.csv").read_text().splitlines()
    assert len(lines) == 7  # three solves plus three projection controls
    assert sum("C3-projection" in line for line in lines) == 3
    assert "spatial rate" in summary_of(out)
    assert "[FAIL]" not in summary_of(out)


def test_verify_nfun_power(tmp_path):
    text = "[run]\ncommand = verify-nfun\n[spec]\nkind = power\np = 3\n"
    code, out = invoke(tmp_path, "nfun3", text, "verify-nfun")
    assert code == 0
    text = summary_of(out)
    assert "satisfied, constant 8" in text
    assert "[FAIL]" not in text
    assert (out / "nfun.csv").exists() and (out / "growth.png").exists()


def test_verify_nfun_exponential(tmp_path):
    text = "[run]\ncommand = verify-nfun\n[spec]\nkind = exp\n"
    code, out = invoke(tmp_path, "nfunexp", text, "verify-nfun")
    assert code == 0
    text = summary_of(out)
    assert "not satisfied" in text and "divergent" in text
    assert "delta2/growth equivalence" in text and "[FAIL]" not in text


@pytest.mark.parametrize("spec_lines", [
    "kind = power\np = 2",
    "kind = quadform\nmatrix = 2 -1; -1 2",
], ids=["power", "quadform"])
def test_verify_orlicz(tmp_path, spec_lines):
    text = f"[run]\ncommand = verify-orlicz\n[spec]\n{spec_lines}\n"
    code, out = invoke(tmp_path, "orl", text, "verify-orlicz")
    assert code == 0
    assert "[FAIL]" not in summary_of(out)
    assert (out / "orlicz.csv").exists() and (out / "young_gap.png").exists()


def test_verify_orlicz_exponential_skips_holder(tmp_path):
    text = "[run]\ncommand = verify-orlicz\n[spec]\nkind = exp\n"
    code, out = invoke(tmp_path, "orlexp", text, "verify-orlicz")
    assert code == 0
    assert "skipped" in summary_of(out)
    assert ",SKIP" in (out / "orlicz.csv").read_text()


def test_verify_orlicz_seed_changes_samples(tmp_path):
    text = "[run]\ncommand = verify-orlicz\n[spec]\nkind = power\np = 2\n"
    _, out_a = invoke(tmp_path, "seed1", text, "verify-orlicz", "--seed", "1")
    _, out_b = invoke(tmp_path, "seed2", text, "verify-orlicz", "--seed", "2")
    assert (out_a / "orlicz.csv").read_text() != (out_b / "orlicz.csv").read_text()
    _, out_c = invoke(tmp_path, "seed1b", text, "verify-orlicz", "--seed", "1")
    assert (out_a / "orlicz.csv").read_bytes() == (out_c / "orlicz.csv").read_bytes()


def test_probe_unique_monotone(tmp_path):
    text = "[run]\ncommand = probe-unique\n[case]\nname = C1\n"
    code, out = invoke(tmp_path, "probe", text, "probe-unique")
    assert code == 0
    assert "uniqueness" in summary_of(out) and "[FAIL]" not in summary_of(out)
    assert (out / "probe.csv").exists() and (out / "probe.png").exists()


def test_probe_unique_nonmonotone_is_reported_not_asserted(tmp_path):
    text = "[run]\ncommand = probe-unique\n[case]\nname = nonmonotone\n"
    code, out = invoke(tmp_path, "probent", text, "probe-unique")
    assert code == 0
    assert "not asserted" in summary_of(out)


# -- failure modes ------------------------------------------------------------------

def test_missing_config_file(tmp_path, capsys):
    code = main(["solve", "--config", str(tmp_path / "nope.cfg")])
    assert code == 2
    assert "cannot read config" in capsys.readouterr().err


def test_config_errors_are_located(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("[case]\nname = C9\n")
    code = main(["probe-unique", "--config", str(cfg)])
    assert code == 2
    err = capsys.readouterr().err
    assert f"{cfg}:2:" in err and "unknown case" in err


def test_command_mismatch(tmp_path, capsys):
    cfg = tmp_path / "mismatch.cfg"
    cfg.write_text("[run]\ncommand = solve\n[case]\nname = C1\n")
    code = main(["probe-unique", "--config", str(cfg)])
    assert code == 2
    assert "config sets command" in capsys.readouterr().err


def test_incomplete_config_for_command(tmp_path, capsys):
    code, _ = invoke(tmp_path, "non", "[case]\nname = C1\n", "solve")
    assert code == 2
    assert "solve needs [time] N" in capsys.readouterr().err


def test_newton_failure_exits_3(tmp_path, capsys):
    text = """\
[run]
command = solve
[case]
name = C2
[space]
kind = fem1d
resolution = 32
[time]
T = 1.0
N = 2
[tolerances]
newton_tol = 1e-30
"""
    code, _ = invoke(tmp_path, "hard", text, "solve")
    assert code == 3
    assert "solver failure" in capsys.readouterr().err


def test_unknown_command_rejected_by_parser(tmp_path):
    with pytest.raises(SystemExit) as err:
        main(["teleport", "--config", "x"])
    assert err.value.code == 2
