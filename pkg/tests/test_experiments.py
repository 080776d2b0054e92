import numpy as np
import pytest

from pmgdg import experiments as ex


def _cfg(name, **kw):
    return ex.make_config(name, kw)


@pytest.mark.parametrize("text, expected", [("2-6", (2, 3, 4, 5, 6)), ("8,16", (8, 16)), ("4", (4,)), ((1, 2), (1, 2))])
def test_parse_int_list(text, expected):
    assert ex.parse_int_list(text) == expected


def test_parse_int_list_rejects():
    with pytest.raises(ex.ConfigError):
        ex.parse_int_list("a,b")


def test_defaults_and_overrides():
    cfg = _cfg("two_level")
    assert cfg.dim == 1 and cfg.box == (-1.0, 1.0) and cfg.p == tuple(range(2, 9))
    cfg = _cfg("two_level", p="3", n="4,8")
    assert cfg.p == (3,) and cfg.n == (4, 8)


@pytest.mark.parametrize("overrides", [
    dict(dim=3), dict(dim=4), dict(form="galerkin"), dict(m_rule="q"), dict(tol=2.0),
    dict(alpha0=-1.0), dict(K="1"), dict(box="1,0"), dict(n="0"),
])
def test_invalid_configs(overrides):
    with pytest.raises(ex.ConfigError):
        _cfg("wcycle", **overrides).validate()


def test_unknown_sweep():
    with pytest.raises(ex.ConfigError):
        _cfg("smooth_ratio", sweep="x")


def test_3d_allowed_with_flag():
    _cfg("op_complexity", dim=3, allow_3d=True).validate()


def test_fingerprint_ignores_runtime_keys():
    a = _cfg("two_level", p="3")
    b = _cfg("two_level", p="3", out="x.csv", force=True)
    c = _cfg("two_level", p="4")
    assert a.fingerprint() == b.fingerprint() != c.fingerprint()
    assert len(a.fingerprint()) == 40


def test_config_file(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# comment\ndim = 2\nn = 4\np = 2-3\nform = inherited\n")
    values = ex.read_config_file(path)
    cfg = ex.make_config("wcycle", values)
    assert cfg.dim == 2 and cfg.n == (4,) and cfg.p == (2, 3) and cfg.form == ("inherited",)
    path.write_text("colour = red\n")
    with pytest.raises(ex.ConfigError):
        ex.read_config_file(path)


def test_report_deterministic():
    cfg = _cfg("two_level", n="4,8", p="2,3")
    a, b = ex.run(cfg).to_csv(), ex.run(cfg).to_csv()
    assert a == b
    lines = a.splitlines()
    assert lines[0] == "# schema=1"
    assert f"# fingerprint={cfg.fingerprint()}" in lines
    assert "N_h,p,m_rule,m,N_it,rho" in lines


def test_write_report_refuses_overwrite(tmp_path):
    out = tmp_path / "r.csv"
    ex.write_report(ex.run(_cfg("op_complexity", n="4", p="2")), out)
    ex.write_report(ex.run(_cfg("op_complexity", n="4", p="2")), out)  # same fingerprint is fine
    other = ex.run(_cfg("op_complexity", n="4", p="3"))
    with pytest.raises(ex.ConfigError):
        ex.write_report(other, out)
    ex.write_report(other, out, force=True)
    assert ex.read_fingerprint(out) == other.config.fingerprint()


def test_loglog_slope():
    x = np.array([1.0, 2.0, 4.0, 8.0])
    assert ex.loglog_slope(x, 3 * x**-1.5) == pytest.approx(-1.5)


def test_error_order_report():
    rep = ex.run(_cfg("error_order", n="4,8", p="2"))
    assert rep.column("l2_order")[-1] > 2.8


def test_compare_skips_large_K():
    rep = ex.run(_cfg("compare", n="4", p="2", m_rule="4", K="2,3"))
    assert rep.column("K") == [2]


def test_smooth_ratio_slope_meta():
    rep = ex.run(_cfg("smooth_ratio", n="4", p="2", m_rule="2,4,8"))
    assert "slope" in rep.meta and rep.meta["slope"] < 0


def test_cli_success(capsys):
    assert ex.main(["op-complexity", "--n", "4", "--p", "2"]) == ex.EXIT_OK
    out = capsys.readouterr().out
    assert out.startswith("# schema=1")


def test_cli_out_and_force(tmp_path):
    out = str(tmp_path / "g.csv")
    assert ex.main(["gmres", "--n", "4", "--p", "2", "--out", out]) == ex.EXIT_OK
    assert ex.main(["gmres", "--n", "4", "--p", "3", "--out", out]) == ex.EXIT_CONFIG
    assert ex.main(["gmres", "--n", "4", "--p", "3", "--out", out, "--force"]) == ex.EXIT_OK


def test_cli_dump_matrices(tmp_path):
    assert ex.main(["solve", "--n", "2", "--p", "2", "--dump-matrices", str(tmp_path)]) == ex.EXIT_OK
    assert sorted(p.name for p in (tmp_path / "d1_n2_p2_inherited").iterdir()) == \
        ["A_k1.mtx", "A_k2.mtx", "M_k1.mtx", "M_k2.mtx"]


@pytest.mark.parametrize("argv", [
    ["wcycle", "--dim", "3"],
    ["wcycle", "--p", "3", "--K", "4"],
    ["two-level", "--form", "galerkin"],
    ["wcycle", "--n", "a"],
])
def test_cli_config_errors(argv, capsys):
    assert ex.main(argv) == ex.EXIT_CONFIG
    assert "config error" in capsys.readouterr().err


def test_cli_nonconvergence(capsys):
    assert ex.main(["solve", "--n", "8", "--p", "3", "--max-iter", "2"]) == ex.EXIT_NONCONVERGENCE
