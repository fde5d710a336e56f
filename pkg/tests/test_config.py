import numpy as np
import pytest

from orliczwave.config import (COMMANDS, ConfigError, compile_expression,
                               parse_config)

MINIMAL = """\
[run]
command = solve
[spec]
kind = power
p = 2
[space]
kind = spectral1d
resolution = 16
[time]
T = 1.0
N = 100
"""


def problems_of(text):
    with pytest.raises(ConfigError) as err:
        parse_config(text)
    return err.value.problems


# -- happy paths -------------------------------------------------------------------

def test_minimal_solve_config():
    config = parse_config(MINIMAL)
    assert config.command == "solve"
    assert config.spec_kind == "power" and config.spec_p == 2.0
    assert config.space_kind == "spectral1d" and config.resolution == 16
    assert config.t_final == 1.0 and config.n_steps == 100
    assert config.tau is None
    assert config.seed == 0 and config.out_dir == "out"


def test_comments_and_blank_lines_are_ignored():
    text = MINIMAL.replace("p = 2", "p = 2   # quadratic\n\n# next section")
    assert parse_config(text).spec_p == 2.0


def test_matrix_accepts_semicolon_rows():
    text = """\
[run]
command = solve
[spec]
kind = quadform
matrix = 2 -1; -1 2
[space]
kind = fem2d
resolution = 8
[time]
T = 1.0
N = 10
"""
    config = parse_config(text)
    assert np.array_equal(config.spec_matrix, [[2.0, -1.0], [-1.0, 2.0]])


def test_resolution_ladder_replaces_fixed_resolution():
    text = """\
[run]
command = converge-space
[case]
name = C1
[space]
kind = fem1d
[time]
T = 1.0
tau = 0.0001
resolution_ladder = 16 32 64
"""
    config = parse_config(text)
    assert config.resolution is None
    assert config.resolution_ladder == [16, 32, 64]


def test_consistent_tau_and_n_are_accepted():
    text = MINIMAL.replace("N = 100", "N = 100\ntau = 0.01")
    config = parse_config(text)
    assert config.tau == 0.01 and config.n_steps == 100


# -- rejections, each pointing at its line ------------------------------------------

def test_unknown_section_and_key():
    text = """\
[run]
command = solve
[rnu]
seed = 1
[run]
sede = 1
"""
    problems = problems_of(text)
    assert (3, "unknown section [rnu]") in problems
    assert any(ln == 6 and "unknown key 'sede'" in msg for ln, msg in problems)


def test_key_outside_section_and_missing_equals():
    problems = problems_of("command = solve\n[run]\njust words\n")
    assert any(ln == 1 and "outside any" in msg for ln, msg in problems)
    assert any(ln == 3 and "key = value" in msg for ln, msg in problems)


def test_unknown_command():
    problems = problems_of("[run]\ncommand = flyby\n")
    assert any(ln == 2 and "unknown command 'flyby'" in msg for ln, msg in problems)


def test_tau_must_reproduce_horizon():
    text = MINIMAL.replace("N = 100", "N = 100\ntau = 0.02")
    problems = problems_of(text)
    assert any(ln == 12 and "does not reproduce T" in msg for ln, msg in problems)


def test_power_needs_p_above_one():
    problems = problems_of(MINIMAL.replace("p = 2", "p = 1"))
    assert any(ln == 5 and "p > 1" in msg for ln, msg in problems)
    problems = problems_of("\n".join(
        line for line in MINIMAL.splitlines() if not line.startswith("p =")))
    assert any("power spec needs p" in msg for _, msg in problems)


def test_quadform_matrix_validation():
    base = """\
[spec]
kind = quadform
matrix = {entries}
[space]
kind = fem2d
resolution = 4
"""
    problems = problems_of(base.format(entries="1 2 3"))
    assert any(ln == 3 and "square number of entries" in msg
               for ln, msg in problems)
    # Indefinite matrix: rejected by the same check the library applies.
    problems = problems_of(base.format(entries="1 2 2 1"))
    assert any(ln == 3 and "positive definite" in msg for ln, msg in problems)
    # 1x1 matrix over a 2d space.
    problems = problems_of(base.format(entries="2"))
    assert any(ln == 3 and "2-dimensional" in msg for ln, msg in problems)


def test_space_needs_a_size():
    problems = problems_of("[space]\nkind = spectral1d\n")
    assert any(ln == 2 and "needs resolution" in msg for ln, msg in problems)
    problems = problems_of("[space]\nkind = fem2d\nnx = 4\n")
    assert any(ln == 2 and "nx and ny" in msg for ln, msg in problems)
    problems = problems_of("[space]\nkind = fem1d\nresolution = 0\n")
    assert any(ln == 3 and ">= 1" in msg for ln, msg in problems)
    problems = problems_of("[space]\nkind = moebius\nresolution = 4\n")
    assert any(ln == 2 and "unknown space kind" in msg for ln, msg in problems)


def test_time_bounds():
    assert any("T must be positive" in msg
               for _, msg in problems_of("[time]\nT = 0\n"))
    assert any("N must be >= 1" in msg
               for _, msg in problems_of("[time]\nN = 0\n"))
    assert any("tau must be positive" in msg
               for _, msg in problems_of("[time]\ntau = -0.1\nN = 10\nT = -1\n"))
    assert any("ladder entries must be positive" in msg
               for _, msg in problems_of("[time]\ntau_ladder = 0.1 -0.05\n"))


def test_unknown_case():
    problems = problems_of("[case]\nname = C9\n")
    assert any(ln == 2 and "unknown case 'C9'" in msg for ln, msg in problems)


def test_bad_expression_is_reported_with_location():
    problems = problems_of("[initial]\nu0 = sin(q * x)\n")
    assert any(ln == 2 and "bad expression" in msg and "'q'" in msg
               for ln, msg in problems)
    problems = problems_of("[initial]\nv0 = sin(\n")
    assert any(ln == 2 and "bad expression" in msg for ln, msg in problems)


def test_newton_tol_positive():
    problems = problems_of("[tolerances]\nnewton_tol = 0\n")
    assert any("newton_tol must be positive" in msg for _, msg in problems)


def test_all_problems_are_collected_in_line_order():
    text = """\
[run]
command = flyby
[time]
T = 0
N = 0
"""
    problems = problems_of(text)
    assert [ln for ln, _ in problems] == sorted(ln for ln, _ in problems)
    assert len(problems) == 3


def test_integer_keys_reject_fractions():
    problems = problems_of("[time]\nN = 2.5\nT = 1.0\n")
    assert any(ln == 2 and "expected an integer" in msg for ln, msg in problems)


# -- expression compiler -------------------------------------------------------------

def test_expression_evaluates_vectorized():
    fn = compile_expression("sin(pi * x) * cos(t)")
    pts = np.array([[0.25], [0.5], [0.75]])
    expected = np.sin(np.pi * pts[:, 0]) * np.cos(0.3)
    assert np.allclose(fn(pts, 0.3), expected, atol=1e-15)


def test_expression_y_defaults_to_zero_in_1d():
    fn = compile_expression("y + 1.0")
    assert np.array_equal(fn(np.array([[0.1], [0.9]])), [1.0, 1.0])
    fn2 = compile_expression("sin(pi * x) * sin(pi * y)")
    pts = np.array([[0.5, 0.5], [0.25, 0.75]])
    expected = np.sin(np.pi * pts[:, 0]) * np.sin(np.pi * pts[:, 1])
    assert np.allclose(fn2(pts), expected, atol=1e-15)


def test_expression_scalar_broadcasts():
    fn = compile_expression("2.5")
    out = fn(np.zeros((4, 1)))
    assert out.shape == (4,) and np.all(out == 2.5)


@pytest.mark.parametrize("text", [
    "__import__('os').system('true')",
    "open('/etc/passwd')",
    "x.__class__",
    "(lambda: 1)()",
    "[sin(v) for v in (1, 2)]",
])
def test_expression_rejects_interpreter_access(text):
    with pytest.raises(ValueError):
        compile_expression(text)


def test_command_catalogue_is_stable():
    assert COMMANDS == ("solve", "converge-time", "converge-space",
                        "verify-orlicz", "verify-nfun", "probe-unique")
