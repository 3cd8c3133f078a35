import io
import json
import os

import pytest

from heatkern import cli

CONFIGS = os.path.join(os.path.dirname(__file__), os.pardir, "configs")


def cfg(name):
    return os.path.join(CONFIGS, name + ".json")


def run(sub, config, **kw):
    out, err = io.StringIO(), io.StringIO()
    code = cli.run(sub, config, stdout=out, stderr=err, **kw)
    return code, out.getvalue(), err.getvalue()


# the slower acceptance configs run in test_acceptance.py
@pytest.mark.parametrize(
    "sub,name,code",
    [
        ("subordinator", "c01_laplace_identity", 0),
        ("subordinator", "c02_eta_closed_form", 0),
        ("bounds", "c05_dn", 0),
        ("parametrix", "c07_remainder", 0),
        ("parametrix", "c08_parametrix_residual", 0),
        ("scan-angle", "c09_angle", 0),
        ("bounds", "c10_longtime", 0),
        ("verify", "c11_theta", 0),
        ("bounds", "derivative_j0_g1", 0),
        ("bounds", "derivative_j1_g0", 1),
        ("bounds", "selftest_wrong_exponent", 1),
        ("kernel", "kernel_poisson_complex", 0),
        ("parametrix", "parametrix_terms", 0),
        ("subordinator", "subordinator_table", 0),
    ],
)
def test_shipped_configs(sub, name, code):
    rc, out, err = run(sub, cfg(name))
    assert rc == code, err
    assert out.count("\n") > 1
    assert err.rstrip().endswith("overall: " + ("PASS" if code == 0 else "FAIL"))


def test_kernel_csv_columns():
    rc, out, _ = run("kernel", cfg("kernel_poisson_complex"))
    lines = out.splitlines()
    assert lines[0] == "x,y,t_re,t_im,K_re,K_im,method,K_max"
    assert len(lines) == 1 + 16 * 3
    assert rc == 0


def test_output_is_deterministic_and_thread_independent(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run("kernel", cfg("kernel_poisson_complex"), out=str(a))[0] == 0
    assert run("kernel", cfg("kernel_poisson_complex"), out=str(b), threads=3)[0] == 0
    assert a.read_bytes() == b.read_bytes()


def test_summary_goes_to_stdout_with_out(tmp_path):
    rc, out, err = run("subordinator", cfg("c01_laplace_identity"), out=str(tmp_path / "x.csv"))
    assert rc == 0 and "overall: PASS" in out and err == ""


@pytest.mark.parametrize(
    "sub,config",
    [
        ("kernel", '{"symbol": {"kind": "power"}, "t": 1.0, "bogus": 1}'),
        ("kernel", "{broken"),
        ("kernel", '{"symbol": {"kind": "power"}}'),
        ("kernel", '{"symbol": {"kind": "power", "d": -1}, "t": 1.0}'),
        ("kernel", '{"symbol": {"kind": "power"}, "t": -1.0}'),
        ("kernel", '{"symbol": {"kind": "power"}, "t": 1.0, "route": "teleport"}'),
        ("bounds", '{"campaign": "nope"}'),
        ("nosuch", "{}"),
    ],
)
def test_invalid_input_exits_2(sub, config):
    rc, _, err = run(sub, config)
    assert rc == 2
    assert "invalid input" in err


def test_truncation_failure_exits_1():
    config = json.dumps({"symbol": {"kind": "power", "d": 1.0}, "t": 1e-3, "x": [0.5], "y": [0.0]})
    rc, _, err = run("kernel", config, kmax=4)
    assert rc == 1 and "TruncationError" in err


def test_main_help_and_usage(capsys):
    assert cli.main(["--help"]) == 0
    assert cli.main(["kernel", "--help"]) == 0
    assert cli.main([]) == 2
    assert cli.main(["kernel"]) == 2
    assert cli.main(["--version"]) == 0
    capsys.readouterr()


def test_main_runs_a_config(capsys):
    assert cli.main(["verify", cfg("c11_theta")]) == 0
    assert "overall: PASS" in capsys.readouterr().err
