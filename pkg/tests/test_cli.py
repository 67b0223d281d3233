import csv
import io
import json
import math

import numpy as np
import pytest

from imdd_capacity import ConvergenceError, SisoChannel, cli
from imdd_capacity.bounds import upper_mckellips
from imdd_capacity.cli import SweepSpec, dumps_csv, dumps_json, main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def run_json(capsys, *argv):
    code, out, err = run(capsys, *argv)
    assert code == 0, err
    return json.loads(out)


class TestFormatting:
    def test_ten_significant_digits(self):
        assert dumps_json({"x": 1 / 3}) == '{\n  "x": 0.3333333333\n}\n'

    def test_non_finite_as_strings(self):
        assert json.loads(dumps_json([math.inf, -math.inf, math.nan])) == ["inf", "-inf", "nan"]

    def test_csv_quoting(self):
        text = dumps_csv(["a", "b,c"], [[1.0, 'say "hi"']])
        assert text == 'a,"b,c"\r\n1,"say ""hi"""\r\n'
        assert list(csv.reader(io.StringIO(text))) == [["a", "b,c"], ["1", 'say "hi"']]


class TestSiso:
    def test_example_channel(self, capsys):
        data = run_json(capsys, "siso", "--gain", "1", "--peak", "5", "--avg", "1.25", "--methods", "capacity,fh,relax")
        res = data["results"]
        assert list(res) == ["capacity", "fh", "relax"]
        assert res["capacity"]["value"] == pytest.approx(0.626, abs=5e-3)
        assert res["capacity"]["k"] == 3 and res["capacity"]["certified"]
        assert res["fh"]["value"] == pytest.approx(0.6134, abs=5e-3)
        assert res["relax"]["value"] == pytest.approx(0.8691, abs=5e-3)

    def test_exponential_average_only(self, capsys):
        data = run_json(capsys, "siso", "--gain", "1", "--peak", "inf", "--avg", "1.25", "--methods", "exp")
        expected = 0.5 * math.log1p(math.e * 1.25**2 / (2 * math.pi))
        assert data["results"]["exp"]["value"] == pytest.approx(expected, rel=1e-9)
        assert data["channel"]["regime"] == "avg"

    def test_zero_gain(self, capsys):
        data = run_json(capsys, "siso", "--gain", "0", "--peak", "5", "--avg", "1.25")
        assert "capacity" in data["results"]
        assert all(r["value"] == 0.0 for r in data["results"].values())

    def test_bits(self, capsys):
        nats = run_json(capsys, "siso", "--gain", "1", "--peak", "5", "--avg", "1.25", "--methods", "relax")
        bits = run_json(capsys, "siso", "--gain", "1", "--peak", "5", "--avg", "1.25", "--methods", "relax", "--bits")
        assert bits["unit"] == "bits"
        assert bits["results"]["relax"]["value"] == pytest.approx(nats["results"]["relax"]["value"] / math.log(2), rel=1e-9)

    def test_csv_output(self, capsys):
        code, out, _ = run(capsys, "siso", "--gain", "1", "--peak", "5", "--avg", "1.25", "--methods", "fh,relax", "--format", "csv")
        assert code == 0
        rows = list(csv.reader(io.StringIO(out)))
        assert rows[0] == ["fh", "relax"]
        assert float(rows[1][1]) == pytest.approx(0.8691, abs=5e-3)

    @pytest.mark.parametrize(
        "argv",
        [
            ["--gain", "-1", "--peak", "5"],
            ["--gain", "1", "--peak", "5", "--methods", "bogus"],
            ["--gain", "1", "--peak", "inf", "--avg", "1", "--methods", "capacity"],
            ["--gain", "1", "--peak", "0"],
        ],
    )
    def test_invalid_input_exits_2(self, capsys, argv):
        code, out, err = run(capsys, "siso", *argv)
        assert code == 2 and out == "" and err

    @pytest.mark.parametrize("gain", ["x", "nan"])
    def test_unparseable_flag_exits_2(self, capsys, gain):
        with pytest.raises(SystemExit) as info:
            main(["siso", "--gain", gain, "--peak", "1"])
        assert info.value.code == 2

    def test_non_convergence_exits_3_with_partial(self, capsys, monkeypatch):
        def boom(*args, **kwargs):
            raise ConvergenceError("no certificate", best=None)

        monkeypatch.setattr(cli, "capacity", boom)
        code, out, err = run(capsys, "siso", "--gain", "1", "--peak", "5", "--avg", "1.25", "--methods", "fh,capacity")
        assert code == 3 and out == ""
        payload = json.loads(err)
        assert payload["partial"]["fh"]["value"] == pytest.approx(0.6134, abs=5e-3)

    def test_output_file(self, capsys, tmp_path):
        path = tmp_path / "r.json"
        code, out, _ = run(capsys, "siso", "--gain", "1", "--peak", "5", "--methods", "mckellips", "-o", str(path))
        assert code == 0 and out == ""
        assert json.loads(path.read_text())["results"]["mckellips"]["value"] == pytest.approx(0.7929, abs=5e-4)

    def test_deterministic(self, capsys):
        argv = ["siso", "--gain", "1", "--peak", "5", "--avg", "1.25"]
        _, a, _ = run(capsys, *argv)
        _, b, _ = run(capsys, *argv)
        assert a == b


class TestSweep:
    def test_two_points(self, capsys):
        code, out, _ = run(capsys, "sweep", "--variable", "peak", "--start", "1", "--stop", "2", "--points", "2",
                           "--avg", "0.25", "--methods", "lmw,relax")
        assert code == 0
        rows = list(csv.reader(io.StringIO(out)))
        assert rows[0] == ["x", "peak", "avg", "lmw", "relax"]
        assert len(rows) == 3
        assert [float(r[1]) for r in rows[1:]] == [1.0, 2.0]

    def test_log_axis_is_decibels(self, capsys):
        spec = SweepSpec("alpha", 0.0, 20.0, 3, "log10")
        np.testing.assert_allclose(spec.values(), [1.0, 10.0, 100.0])

    @pytest.mark.parametrize("kw", [dict(start=2.0, stop=1.0, points=3), dict(start=0.0, stop=1.0, points=1)])
    def test_spec_validation(self, kw):
        with pytest.raises(cli.UsageError):
            SweepSpec("peak", scale="linear", **kw)

    def test_capacity_column_matches_reference_points(self, capsys):
        code, out, _ = run(capsys, "sweep", "--variable", "alpha", "--alpha", "1/4", "--start", "0", "--stop", "10",
                           "--points", "2", "--scale", "log10", "--methods", "capacity")
        assert code == 0
        rows = list(csv.reader(io.StringIO(out)))
        assert float(rows[1][3]) == pytest.approx(0.0854, abs=0.01)
        assert float(rows[2][3]) == pytest.approx(0.9998, abs=0.01)

    def test_mckellips_column(self, capsys):
        data = run_json(capsys, "sweep", "--variable", "alpha", "--alpha", "0.5", "--start", "0", "--stop", "20",
                        "--points", "5", "--scale", "log10", "--methods", "mckellips", "--format", "json")
        assert data["columns"] == ["x", "peak", "avg", "mckellips"]
        assert len(data["rows"]) == 5
        for x, peak, _, value in data["rows"]:
            assert peak == pytest.approx(10 ** (x / 10))
            assert value == pytest.approx(upper_mckellips(SisoChannel(1, peak)).value, rel=1e-8)

    def test_thread_pool_keeps_order(self, capsys, monkeypatch):
        argv = ["sweep", "--variable", "peak", "--start", "1", "--stop", "8", "--points", "6", "--avg", "0.5",
                "--methods", "lmw,fh,mckellips"]
        monkeypatch.setenv("IMDD_THREADS", "1")
        _, serial, _ = run(capsys, *argv)
        monkeypatch.setenv("IMDD_THREADS", "4")
        _, parallel, _ = run(capsys, *argv)
        assert serial == parallel

    def test_alpha_sweep_needs_alpha(self, capsys):
        code, _, err = run(capsys, "sweep", "--variable", "alpha", "--start", "0", "--stop", "1", "--points", "2")
        assert code == 2 and "alpha" in err


class TestRegion:
    LOW = ["--g1", "1", "--g2", "0.5", "--peak", str(10 ** -0.2), "--alpha", "1/3", "--outer-method", "relax0"]

    def test_bc_outer_intercepts(self, capsys):
        data = run_json(capsys, "region", "--bc", *self.LOW, "--regions", "outer,low")
        b = np.array(data["regions"]["outer"]["boundary"])
        assert b[:, 0].max() == pytest.approx(0.042386, abs=1e-4)
        assert b[:, 1].max() == pytest.approx(0.010938, abs=1e-4)
        assert data["regions"]["outer"]["tag"] == "outer"
        assert data["regions"]["low"]["tag"] == "asymptotic"

    def test_mac_outer_box(self, capsys):
        data = run_json(capsys, "region", "--mac", *self.LOW, "--regions", "outer")
        b = np.array(data["regions"]["outer"]["boundary"])
        assert b[:, 0].max() == pytest.approx(0.0423857, abs=1e-4)
        assert b[:, 1].max() == pytest.approx(0.0109380, abs=1e-4)

    def test_mac_silent_user_interval(self, capsys):
        data = run_json(capsys, "region", "--mac", "--g1", "1", "--g2", "0", "--peak", "3", "--avg", "1", "--regions", "outer")
        b = np.array(data["regions"]["outer"]["boundary"])
        assert b[:, 1].max() == 0.0 and b[:, 0].max() > 0

    def test_bits_scaling(self, capsys):
        nats = run_json(capsys, "region", "--bc", *self.LOW, "--regions", "low")
        bits = run_json(capsys, "region", "--bc", *self.LOW, "--regions", "low", "--bits")
        np.testing.assert_allclose(np.array(bits["regions"]["low"]["boundary"]) * math.log(2),
                                   nats["regions"]["low"]["boundary"], rtol=1e-9)

    @pytest.mark.parametrize("extra", [["--regions", "outer,square"], ["--g1", "-1"]])
    def test_invalid(self, capsys, extra):
        argv = ["region", "--bc", "--g1", "1", "--g2", "0.5", "--peak", "1", "--avg", "0.3", *extra]
        code, _, err = run(capsys, *argv)
        assert code == 2 and err

    def test_needs_average(self, capsys):
        code, _, _ = run(capsys, "region", "--bc", "--g1", "1", "--g2", "0.5", "--peak", "1")
        assert code == 2


class TestMimo:
    @pytest.fixture
    def diag(self, tmp_path):
        p = tmp_path / "g.json"
        p.write_text(json.dumps(np.diag([1, 0.7, 0.3, 0.1]).tolist()))
        return str(p)

    def test_parallel_fig10a_point(self, capsys, diag):
        data = run_json(capsys, "mimo", "--matrix", diag, "--avg", "10", "--parallel")
        assert data["parallel"]["lower"] == pytest.approx(2.157, abs=0.02)
        assert data["parallel"]["lower"] <= data["parallel"]["upper"]

    def test_qr_equals_parallel_lower(self, capsys, diag):
        data = run_json(capsys, "mimo", "--matrix", diag, "--avg", "10", "--parallel", "--qr")
        assert data["qr"]["rate"] == pytest.approx(data["parallel"]["lower"], rel=1e-9)

    def test_simo(self, capsys, tmp_path):
        p = tmp_path / "col.txt"
        p.write_text("3\n4\n")
        data = run_json(capsys, "mimo", "--matrix", str(p), "--peak", "2", "--avg", "0.5", "--simo")
        assert data["simo"]["gain"] == pytest.approx(5.0)
        assert data["simo"]["bounds"]["relax"] == pytest.approx(0.5 * math.log1p(25 * 0.5 * 1.5))

    def test_whitespace_matrix(self, capsys, tmp_path):
        p = tmp_path / "m.txt"
        p.write_text("1 0.5\n0.2 1\n")
        data = run_json(capsys, "mimo", "--matrix", str(p), "--avg", "2", "--qr")
        assert data["shape"] == [2, 2]
        assert data["qr"]["rate"] > 0

    def test_miso_and_asymptotes(self, capsys, tmp_path):
        p = tmp_path / "row.json"
        p.write_text("[[1, 0.5, 0.25]]")
        data = run_json(capsys, "mimo", "--matrix", str(p), "--peak", "10", "--avg", "2", "--miso", "--high-snr", "--low-snr")
        assert {"miso", "high_snr", "low_snr"} <= set(data)
        assert sum(data["low_snr"]["masses"]) == pytest.approx(1.0)

    @pytest.mark.parametrize("text", ["[[1, 2], [3]]", "[[1, -2]]", "", "1 x\n", "[[1, NaN]]"])
    def test_malformed_matrix_exits_2(self, capsys, tmp_path, text):
        p = tmp_path / "bad.txt"
        p.write_text(text)
        code, out, err = run(capsys, "mimo", "--matrix", str(p), "--avg", "1", "--qr")
        assert code == 2 and out == "" and err

    def test_missing_file_and_no_action(self, capsys, tmp_path, diag):
        assert run(capsys, "mimo", "--matrix", str(tmp_path / "none"), "--qr")[0] == 2
        assert run(capsys, "mimo", "--matrix", diag, "--avg", "1")[0] == 2

    def test_parallel_needs_diagonal(self, capsys, tmp_path):
        p = tmp_path / "full.json"
        p.write_text("[[1, 1], [1, 1]]")
        assert run(capsys, "mimo", "--matrix", str(p), "--avg", "1", "--parallel")[0] == 2
