import json

import numpy as np
import pytest

from reroute_mf import cli
from reroute_mf.equilibria import dar_limit_nu_a


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def payload(out):
    return json.loads(out)


def numeric_lines(path):
    return [ln for ln in path.read_text().splitlines() if not ln.startswith("#")]


class TestEquilibria:
    def test_rist_zero_roots_is_success(self, capsys):
        code, out, _ = run(capsys, "equilibria", "rist", "--rho1", "1", "--rho2", "3", "--C", "2")
        d = payload(out)
        assert code == 0
        assert d["roots"] == [] and d["singular_saturation"] is True
        assert d["config"]["rho2"] == 3.0 and "version" in d

    def test_nlmm1(self, capsys):
        code, out, _ = run(capsys, "equilibria", "nlmm1", "--a", "2", "--nu", "1.4")
        roots = payload(out)["roots"]
        assert code == 0 and len(roots) == 1
        assert roots[0]["R_or_S"] == pytest.approx(0.5235, abs=1e-4)

    def test_dar_large_capacity_three_roots(self, capsys):
        # the three-root picture appears once C is large enough at this load
        code, out, _ = run(capsys, "equilibria", "dar", "--a", "2", "--nu", "0.97", "--C", "3000")
        assert code == 0 and len(payload(out)["roots"]) == 3

    def test_writes_file(self, capsys, tmp_path):
        run(capsys, "equilibria", "dar-limit", "--out", str(tmp_path))
        d = json.loads((tmp_path / "equilibria_dar-limit.json").read_text())
        assert d["config"]["nu"] == 0.97


class TestConfig:
    def test_file_then_flags(self, capsys, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"nu": 1.3, "a": 3.0}))
        _, out, _ = run(capsys, "equilibria", "nlmm1", "--config", str(cfg), "--nu", "1.5")
        c = payload(out)["config"]
        assert c["nu"] == 1.5 and c["a"] == 3.0

    def test_config_round_trip(self, capsys, tmp_path):
        _, out, _ = run(capsys, "equilibria", "nlmm1", "--nu", "1.45")
        echoed = payload(out)["config"]
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps(echoed))
        _, out2, _ = run(capsys, "equilibria", "nlmm1", "--config", str(cfg))
        assert payload(out2)["roots"] == payload(out)["roots"]

    @pytest.mark.parametrize(
        "argv",
        [
            ["equilibria", "rist", "--nu", "0.5"],
            ["equilibria", "bogus"],
            ["nonsense"],
            ["equilibria", "nlmm1", "--nu", "abc"],
            ["equilibria", "rist", "--C", "0"],
            ["sweep", "--start", "1.0", "--stop", "0.9"],
        ],
    )
    def test_input_errors(self, capsys, argv):
        assert run(capsys, *argv)[0] == cli.EXIT_INPUT

    def test_bad_config_keys(self, capsys, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"unknown_key": 1}))
        assert run(capsys, "equilibria", "nlmm1", "--config", str(cfg))[0] == cli.EXIT_INPUT
        assert run(capsys, "equilibria", "nlmm1", "--config", str(tmp_path / "missing.json"))[0] == cli.EXIT_INPUT


class TestOde:
    def test_singular_status_in_trailer(self, capsys, tmp_path):
        code, out, _ = run(capsys, "ode", "rist", "--mu2", "0.2", "--init", "saturated", "--out", str(tmp_path))
        assert code == 0
        text = (tmp_path / "ode_rist.csv").read_text().splitlines()
        assert text[-1].startswith("# status=SingularityAt(")
        assert payload(out)["status"].startswith("SingularityAt(")

    @pytest.mark.parametrize("model", ["rist", "rist-p0", "dar", "nlmm1"])
    def test_models_run(self, capsys, tmp_path, model):
        code, out, _ = run(capsys, "ode", model, "--horizon", "1", "--out", str(tmp_path))
        assert code == 0 and payload(out)["status"] == "ReachedHorizon"
        header = (tmp_path / f"ode_{model}.csv").read_text().splitlines()[0]
        assert header.startswith("t,") and header.endswith("saturated_frac,mean_y,empty_places")


class TestSimulate:
    def test_byte_reproducible(self, capsys, tmp_path):
        for d in ("a", "b"):
            run(capsys, "simulate", "rist", "--N", "200", "--horizon", "2", "--seed", "9", "--out", str(tmp_path / d))
        a = numeric_lines(tmp_path / "a" / "simulate_rist.csv")
        b = numeric_lines(tmp_path / "b" / "simulate_rist.csv")
        assert a == b and len(a) == 102

    def test_seed_changes_output(self, capsys, tmp_path):
        for s in ("1", "2"):
            run(capsys, "simulate", "dar", "--N", "100", "--horizon", "1", "--seed", s, "--out", str(tmp_path / s))
        assert numeric_lines(tmp_path / "1" / "simulate_dar.csv") != numeric_lines(tmp_path / "2" / "simulate_dar.csv")

    def test_trailer_has_config_and_version(self, capsys, tmp_path):
        run(capsys, "simulate", "u", "--N", "20", "--u0", "5", "--out", str(tmp_path))
        lines = (tmp_path / "simulate_u.csv").read_text().splitlines()
        assert any(ln.startswith("# version=") for ln in lines)
        cfg = json.loads(next(ln for ln in lines if ln.startswith("# config="))[len("# config="):])
        assert cfg["config"]["N"] == 20

    def test_plot_is_deterministic(self, capsys, tmp_path):
        for d in ("a", "b"):
            run(capsys, "simulate", "rist", "--N", "50", "--horizon", "1", "--plot", "--out", str(tmp_path / d))
        a = (tmp_path / "a" / "simulate_rist.svg").read_bytes()
        assert a.startswith(b"<?xml") and a == (tmp_path / "b" / "simulate_rist.svg").read_bytes()


class TestCoupleCheck:
    def test_passes(self, capsys, tmp_path):
        code, out, _ = run(capsys, "couple-check", "--seeds", "10", "--N", "50", "--out", str(tmp_path))
        d = payload(out)
        assert code == 0 and d["violations"] == 0 and d["branch_counts"]["2c_iii"] == 0
        assert (tmp_path / "coupling_run0.csv").exists()

    def test_violation_exits_nonzero(self, capsys, monkeypatch):
        real = cli.nsim.simulate_coupled

        def broken(*a, **k):
            rep = real(*a, **k)
            rep.violation_time = 0.0
            return rep

        monkeypatch.setattr(cli.nsim, "simulate_coupled", broken)
        assert run(capsys, "couple-check", "--seeds", "2", "--N", "20")[0] == cli.EXIT_INVARIANT

    def test_defect_exception_maps_to_invariant_code(self, capsys, monkeypatch):
        def boom(*a, **k):
            raise cli.nsim.CouplingDefect("forced")

        monkeypatch.setattr(cli.nsim, "simulate_coupled", boom)
        assert run(capsys, "couple-check", "--seeds", "1", "--N", "20")[0] == cli.EXIT_INVARIANT


def test_numeric_failure_code(capsys, monkeypatch):
    def boom(*a, **k):
        raise FloatingPointError("overflow")

    monkeypatch.setattr(cli.eq, "nlmm1_fixed_points", boom)
    assert run(capsys, "equilibria", "nlmm1")[0] == cli.EXIT_NUMERIC


def test_saturation(capsys):
    code, out, _ = run(capsys, "saturation", "--N", "100", "--runs", "4", "--T", "2")
    d = payload(out)
    assert code == 0 and d["runs"] == 4 and 0 <= d["probability"] <= 1


class TestStability:
    def test_interval(self, capsys):
        code, out, _ = run(capsys, "stability", "interval", "--a", "2")
        lo, hi = payload(out)["interval"]
        assert code == 0
        assert lo == pytest.approx(1.2068, abs=5e-4) and hi == pytest.approx(1.5978, abs=5e-4)

    def test_rist_and_nlmm1(self, capsys):
        _, out, _ = run(capsys, "stability", "rist")
        (r,) = payload(out)["results"]
        assert r["kappa"] == pytest.approx(0.51301, abs=1e-5)
        _, out, _ = run(capsys, "stability", "nlmm1", "--nu", "1.4")
        assert payload(out)["results"][0]["verdict"] == "CriterionMet"

    def test_probe(self, capsys):
        code, out, _ = run(capsys, "stability", "probe")
        assert code == 0 and payload(out)["results"][0]["label"] == "Stable"
        assert run(capsys, "stability", "probe", "--system", "queue")[0] == cli.EXIT_INPUT


class TestSweep:
    def test_small_sweep(self, capsys, tmp_path):
        code, out, _ = run(capsys, "sweep", "--C", "600", "--start", "0.93", "--stop", "0.95", "--num", "5",
                           "--plot", "--out", str(tmp_path))
        assert code == 0
        lines = numeric_lines(tmp_path / "sweep_nu.csv")
        assert lines[0] == "nu,n_roots,roots,regime,verdicts" and len(lines) == 6
        assert (tmp_path / "sweep_nu.svg").exists()

    def test_below_window_single_root(self, capsys, tmp_path):
        _, out, _ = run(capsys, "sweep", "--C", "1000", "--start", "0.5", "--stop", "0.9", "--num", "9",
                        "--out", str(tmp_path))
        assert payload(out)["multi_root_window"] is None

    def test_above_one_single_root(self, capsys, tmp_path):
        _, out, _ = run(capsys, "sweep", "--C", "200", "--start", "1.0", "--stop", "1.5", "--num", "11",
                        "--out", str(tmp_path))
        assert payload(out)["multi_root_window"] is None

    def test_rist_sweep_with_verdicts(self, capsys, tmp_path):
        code, _, _ = run(capsys, "sweep", "--var", "rho2", "--C", "3", "--start", "2", "--stop", "6", "--num", "5",
                         "--stability", "--out", str(tmp_path))
        assert code == 0
        rows = [ln.split(",") for ln in numeric_lines(tmp_path / "sweep_rho2.csv")[1:]]
        assert all(len(r[4].split(";")) == int(r[1]) for r in rows if int(r[1]) > 0)

    def test_same_rows_in_parallel(self, capsys, tmp_path):
        args = ["sweep", "--C", "100", "--start", "0.9", "--stop", "1.0", "--num", "4"]
        run(capsys, *args, "--out", str(tmp_path / "a"))
        run(capsys, *args, "--jobs", "2", "--out", str(tmp_path / "b"))
        a = numeric_lines(tmp_path / "a" / "sweep_nu.csv")
        assert a == numeric_lines(tmp_path / "b" / "sweep_nu.csv")

    @pytest.mark.slow
    def test_multi_root_window_at_c1000(self, capsys, tmp_path):
        # 121-point sweep of the load; the window should sit inside [nu_a - 0.002, 1.002]
        _, out, _ = run(capsys, "sweep", "--out", str(tmp_path))
        lo, hi = payload(out)["multi_root_window"]
        print(f"multi-root window at C=1000: [{lo:.4f}, {hi:.4f}], width {hi - lo:.4f}")
        assert dar_limit_nu_a(2.0) - 0.002 <= lo and hi <= 1.002
        assert hi - lo == pytest.approx(0.063, abs=0.002)
