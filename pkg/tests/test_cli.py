import csv
import io
import json
import math

import pytest

from conftest import HALF_LOG2
from isi_mismatch import cli
from isi_mismatch.model import InfeasibleError


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def run_json(capsys, *argv):
    code, out, err = run(capsys, *argv)
    assert code == 0, err
    return json.loads(out)


class TestSingleEvaluations:
    def test_rate_universal(self, capsys):
        rec = run_json(capsys, "rate-universal", "--h", "1,1", "--px", "1", "--sigma2", "1")
        assert rec["command"] == "rate-universal"
        assert rec["result"]["rate"] == pytest.approx(0.5 * math.log(1.5), abs=1e-9)

    def test_matched_capacity(self, capsys):
        rec = run_json(capsys, "matched-capacity", "--h", "0.70710678,0.70710678", "--px", "1", "--sigma2", "1")
        assert rec["result"]["capacity"] == pytest.approx(0.374, abs=5e-4)

    def test_bits(self, capsys):
        rec = run_json(capsys, "rate-universal", "--h", "1", "--bits")
        assert rec["result"]["rate"] == pytest.approx(0.5, abs=1e-9)
        assert rec["result"]["units"] == "bits"

    def test_rate_ar_fixed(self, capsys):
        rec = run_json(capsys, "rate-ar", "--h", "1", "--alpha", "1")
        assert rec["result"]["rate"] == pytest.approx(HALF_LOG2, abs=1e-9)

    def test_rate_fc_order(self, capsys):
        rec = run_json(capsys, "rate-fc", "--h", "0.7071067812,0.7071067812", "--order", "1", "--grid", "21")
        assert rec["result"]["rate"] == pytest.approx(HALF_LOG2, abs=1e-6)
        assert len(rec["result"]["outer_argmax"]) == 2

    def test_config_echoed(self, capsys):
        rec = run_json(capsys, "rate-universal", "--h", "1")
        assert set(cli.DEFAULTS) <= set(rec["config"])
        assert rec["config"]["sigma2"] == "1"

    def test_exponent(self, capsys):
        rec = run_json(capsys, "exponent", "--h", "1", "--alpha0", "-1", "--rate", "0.1")
        assert rec["result"]["exponent"] == 0.0

    def test_exponent_curve(self, capsys):
        code, out, _ = run(capsys, "exponent-universal", "--h", "1", "--rates", "0:0.4:5")
        assert code == 0
        rows = list(csv.reader(io.StringIO(out)))
        assert rows[0] == ["rate", "exponent", "p_y", "rho", "status"]
        assert len(rows) == 6
        assert float(rows[1][1]) > 0 and float(rows[-1][1]) < 1e-3

    def test_simulate_byte_identical(self, capsys):
        argv = ("simulate", "--h", "1", "--n", "16", "--rate", "0.17", "--trials", "100", "--seed", "3")
        first = run(capsys, *argv)
        second = run(capsys, *argv)
        assert first[0] == 0 and first == second
        rec = json.loads(first[1])
        assert rec["result"]["wall_time"] is None
        assert rec["result"]["config"]["codewords"] == math.ceil(math.exp(16 * 0.17))


class TestSweeps:
    def test_sweep_csv(self, capsys):
        code, out, _ = run(capsys, "sweep", "--h", "1", "--alpha", "1", "--axis", "alpha0",
                           "--values", "0.5,1,2", "--ensembles", "iid,fc0")
        assert code == 0
        rows = list(csv.DictReader(io.StringIO(out)))
        assert len(rows) == 6
        for r in rows:
            if r["ensemble"] == "fc0":
                assert float(r["rate"]) == pytest.approx(HALF_LOG2, abs=1e-3)

    def test_reproduce_figure_one(self, capsys, tmp_path):
        path = tmp_path / "fig1.csv"
        code, out, _ = run(capsys, "reproduce-figure", "1", "--output", str(path))
        assert code == 0 and out == ""
        rows = list(csv.DictReader(path.open()))
        assert len(rows) == 29
        assert all(abs(float(r["fc0"]) - HALF_LOG2) < 1e-3 for r in rows)
        first = path.read_bytes()
        run(capsys, "reproduce-figure", "1", "--output", str(path))
        assert path.read_bytes() == first


class TestConfigFiles:
    def test_precedence(self, capsys, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("# scenario\nh = 1\nsigma2 = 4\npx = 1\n")
        rec = run_json(capsys, "rate-universal", "--config", str(cfg))
        assert rec["result"]["rate"] == pytest.approx(0.5 * math.log1p(0.25), abs=1e-9)
        rec = run_json(capsys, "rate-universal", "--config", str(cfg), "--sigma2", "1")
        assert rec["result"]["rate"] == pytest.approx(HALF_LOG2, abs=1e-9)
        assert rec["config"]["sigma2"] == "1"

    def test_unknown_key(self, capsys, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("colour = blue\n")
        code, _, err = run(capsys, "rate-universal", "--config", str(cfg))
        assert code == cli.EXIT_INVALID and "colour" in err

    def test_missing_file(self, capsys, tmp_path):
        code, _, _ = run(capsys, "rate-universal", "--config", str(tmp_path / "none.cfg"))
        assert code == cli.EXIT_IO


class TestExitCodes:
    def test_unstable_phi(self, capsys):
        code, _, err = run(capsys, "rate-ar", "--h", "1", "--phi", "1.5")
        assert code == cli.EXIT_INVALID and err

    def test_non_pd_gamma(self, capsys):
        code, _, _ = run(capsys, "rate-fc", "--h", "1", "--gamma", "1,1.2")
        assert code == cli.EXIT_INVALID

    def test_non_numeric(self, capsys):
        code, _, _ = run(capsys, "rate-universal", "--h", "1,x")
        assert code == cli.EXIT_INVALID

    def test_unwritable_output(self, capsys, tmp_path):
        code, _, _ = run(capsys, "rate-universal", "--output", str(tmp_path / "missing" / "out.json"))
        assert code == cli.EXIT_IO

    def test_infeasible(self, capsys, monkeypatch):
        def boom(settings):
            raise InfeasibleError("no feasible point")

        monkeypatch.setitem(cli.COMMANDS, "rate-universal", boom)
        code, _, err = run(capsys, "rate-universal")
        assert code == cli.EXIT_INFEASIBLE and "infeasible" in err

    def test_bad_subcommand(self):
        with pytest.raises(SystemExit) as info:
            cli.main(["plot"])
        assert info.value.code == 2
