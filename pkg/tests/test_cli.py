import csv
import math
import subprocess
import sys

import numpy as np
import pytest

from qmengine.cli import (
    CSV_HEADER,
    ConfigError,
    RunConfig,
    fmt,
    main,
    parse_config,
)


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


def report(text):
    """Parse ``[engine]`` sections of ``key = value`` lines."""
    out, current = {}, None
    for line in text.splitlines():
        if line.startswith("["):
            current = out.setdefault(line.strip("[]"), {})
        elif " = " in line:
            k, v = line.split(" = ", 1)
            current[k] = v
    return out


class TestParseConfig:
    def test_empty_gives_defaults(self):
        cfg = parse_config("")
        assert cfg == RunConfig()
        assert (cfg.omega_a, cfg.delta, cfg.theta_over_pi, cfg.q) == (10, 50, 0.2, 0.05)
        assert cfg.beta_e_p == pytest.approx(1 / 30, abs=1e-17)
        tq = cfg.two_qubit()
        assert tq.theta == pytest.approx(math.pi / 5, abs=1e-15)

    def test_comments_fractions_overrides(self):
        cfg = parse_config("# header\nq = 1/10  # trailing\n\nengine = eme\n", ["q=0.2"])
        assert cfg.q == 0.2 and cfg.engine == "eme"

    def test_grid(self):
        cfg = parse_config("p_steps = 499\np_min = 0.501\np_max = 0.999\n")
        g = cfg.p_grid()
        assert len(g) == 499
        assert np.allclose(np.diff(g), 0.001, atol=1e-15)

    @pytest.mark.parametrize("text,key", [
        ("q = 0", "q"),
        ("qq = 1", "qq"),
        ("delta = fifty", "delta"),
        ("delta = -1", "delta"),
        ("p_steps = 2.5", "p_steps"),
        ("scheme = projective", "scheme"),
        ("p_min = 0.4", "p_min"),
        ("theta_over_pi = 0.3", "theta_over_pi"),
        ("omega_a = 10\ndelta = 0", "delta"),
        ("just words", "<line 1>"),
    ])
    def test_rejections_name_key(self, text, key):
        with pytest.raises(ConfigError) as exc:
            parse_config(text)
        assert exc.value.key == key
        assert f"'{key}'" in str(exc.value)

    def test_q_zero_names_full_rank(self):
        with pytest.raises(ConfigError, match="full-rank"):
            parse_config("q = 0")

    def test_large_theta_allowed_for_eme_only(self):
        parse_config("theta_over_pi = 0.3\nengine = eme")
        parse_config("theta_over_pi = 0.3\nn_th_mode = from_bath")


class TestFormat:
    @pytest.mark.parametrize("x,s", [(None, ""), (0.0, "0.00000000000e+00"),
                                     (-0.0, "0.00000000000e+00"),
                                     (1 / 3, "3.33333333333e-01"), (-25.5, "-2.55000000000e+01")])
    def test_fmt(self, x, s):
        assert fmt(x) == s

    def test_twelve_significant_digits(self):
        mantissa = fmt(math.pi).split("e")[0]
        assert len(mantissa.replace(".", "")) == 12


class TestSweepCommand:
    def test_csv_layout(self, tmp_path):
        out = tmp_path / "s.csv"
        code = main(["sweep", "--output", str(out), "--set", "p_min=0.51",
                     "--set", "p_max=0.99", "--set", "p_steps=49"])
        assert code == 0
        with open(out, "rb") as fh:
            first = fh.readline()
        assert first == (",".join(CSV_HEADER) + "\n").encode()
        rows = read_csv(out)
        assert rows[0] == list(CSV_HEADER)
        data = rows[1:]
        assert len(data) == 2 * 49
        assert all(len(r) == 14 for r in data)
        keys = [(r[0], r[1], float(r[2])) for r in data]
        assert keys == sorted(keys)
        for r in data:
            w, eta = float(r[7]), r[11]
            if w >= 0:
                assert eta == ""
            assert r[13] == ""

    def test_default_sweep_flags_uncoolable_points(self, tmp_path, capsys):
        out = tmp_path / "s.csv"
        code = main(["sweep", "--output", str(out)])
        assert code == 1
        data = read_csv(out)[1:]
        assert len(data) == 2 * 499
        bad = [r for r in data if r[13]]
        assert {round(float(r[2]), 9) for r in bad} == {round(0.501 + 0.001 * k, 9)
                                                       for k in range(8)}
        assert all(r[13].startswith("cool: ") and r[4:13] == [""] * 9 for r in bad)
        assert "error tag" in capsys.readouterr().err

    def test_byte_identical(self, tmp_path):
        paths = [tmp_path / "a.csv", tmp_path / "b.csv"]
        for p in paths:
            main(["sweep", "--output", str(p), "--scheme", "unbiased", "--set", "p_steps=99",
                  "--set", "p_min=0.51", "--set", "p_max=0.99"])
        assert paths[0].read_bytes() == paths[1].read_bytes()

    def test_config_file(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("engine = tcme\np_steps = 3\np_min = 0.6\np_max = 0.8\n")
        assert main(["sweep", "--config", str(cfg)]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert len(lines) == 4 and all(",tcme," in l for l in lines[1:])

    def test_bad_config_exit_code(self, capsys):
        assert main(["sweep", "--set", "q=0"]) == 2
        assert "'q'" in capsys.readouterr().err
        assert main(["sweep", "--config", "/nonexistent/x.cfg"]) == 2


class TestOtherCommands:
    def test_cycle_null_eta(self, capsys):
        assert main(["cycle", "--set", "q=1", "--set", "p=0.6"]) == 0
        rep = report(capsys.readouterr().out)
        assert set(rep) == {"eme", "tcme"}
        for sec in rep.values():
            assert float(sec["w"]) >= 0
            assert sec["eta"] == "null"

    def test_cycle_fields(self, capsys):
        assert main(["cycle", "--engine", "eme"]) == 0
        sec = report(capsys.readouterr().out)["eme"]
        for key in ("e_prep", "e_cool", "e_corr", "w", "e_reset", "e_reset_clamped", "e_meas",
                    "eta", "c_max"):
            assert key in sec
        assert float(sec["e_cool"]) == pytest.approx(25.4257722, abs=1e-6)
        assert float(sec["c_max"]) == pytest.approx(0.9, abs=1e-11)

    def test_axioms(self, capsys):
        assert main(["axioms", "--set", "p=0.8"]) == 0
        for sec in report(capsys.readouterr().out).values():
            assert float(sec["invasive_residual"]) <= 1e-12
            assert float(sec["c_max"]) == pytest.approx(0.8, abs=1e-12)

    def test_axioms_unbiased(self, capsys):
        assert main(["axioms", "--scheme", "unbiased", "--set", "p=0.8"]) == 0
        for sec in report(capsys.readouterr().out).values():
            assert float(sec["bias_residual"]) <= 1e-12

    def test_lindblad_converges(self, tmp_path):
        out = tmp_path / "l.csv"
        assert main(["lindblad", "--output", str(out), "--set", "rk4_tmax=20",
                     "--set", "sample_every=1000"]) == 0
        rows = read_csv(out)
        assert rows[0] == ["t", "p00", "p01", "p10", "p11", "coh", "trace"]
        assert len(rows) == 1 + 21
        last = [float(x) for x in rows[-1]]
        assert last[0] == pytest.approx(20.0)
        assert abs(last[2] / last[3] - math.tan(math.pi / 5) ** 2) < 1e-6
        assert abs(last[6] - 1) < 1e-9

    def test_lindblad_step_guard(self, capsys):
        assert main(["lindblad", "--set", "rk4_dt=0.01"]) == 1
        assert "too large" in capsys.readouterr().err

    def test_module_entry_point(self):
        res = subprocess.run([sys.executable, "-m", "qmengine", "cycle", "--engine", "tcme"],
                             capture_output=True, text=True, check=False)
        assert res.returncode == 0
        assert "[tcme]" in res.stdout

    def test_requires_command(self):
        with pytest.raises(SystemExit):
            main([])
