from __future__ import annotations

import json

import pytest
from mpmath import mp, mpf

from focksobolev import berezin as bz
from focksobolev import cli
from focksobolev.serialize import read_csv
from focksobolev.symbols import GRAMMAR


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


class TestCommands:
    def test_semicomm_witness(self, capsys):
        code, out, _ = run(capsys, "semicomm", "--m", "1", "--N", "8", "--f", "exp((1,0))", "--g", "exp((0,-2pi))")
        assert code == 0
        doc = json.loads(out)
        re, im = doc["entries"][0]
        assert abs(re) < 1e-60 and im == pytest.approx(6.283185307179586, rel=1e-15)
        assert doc["m"] == 1 and doc["N"] == 8 and len(doc["entries"]) == 81

    def test_semicomm_norm(self, capsys):
        code, out, _ = run(capsys, "semicomm", "--m", "1", "--N", "4", "--f", "z", "--g", "z", "--norm")
        assert code == 0 and json.loads(out)["norm"] == pytest.approx(2.0)

    def test_moment_trivial(self, capsys):
        code, out, _ = run(capsys, "moment", "--j", "0", "--k", "0", "--A", "(0,0)", "--B", "(0,0)")
        doc = json.loads(out)
        assert code == 0 and doc["value"] == [1.0, 0.0] and doc["path"] == "closed"

    def test_moment_full_precision(self, capsys):
        code, out, _ = run(capsys, "moment", "--j", "1", "--k", "1", "--A", "(1,0)", "--B", "(0,2pi)")
        # the JSON number carries every digit; re-parse the token text rather than a float
        token = out.split('"value": [')[1].split("]")[0].split(",")[1].strip()
        assert mpf(token) == 2 * mp.pi

    def test_kernel(self, capsys):
        code, out, _ = run(capsys, "kernel", "--z", "(1,0)", "--w", "(1,0)", "--m", "0")
        assert code == 0 and json.loads(out)["value"][0] == pytest.approx(2.718281828459045)

    def test_toeplitz_to_file(self, capsys, tmp_path):
        path = tmp_path / "mat.json"
        code, out, _ = run(capsys, "toeplitz", "--m", "0", "--N", "3", "--f", "z", "--g", "1", "--out", str(path))
        doc = json.loads(path.read_text())
        assert code == 0 and out == ""
        assert doc["entries"][1 * 4 + 0] == [1.0, 0.0]
        assert doc["config"]["output"] == str(path)

    def test_normscan_csv(self, capsys):
        code, out, _ = run(capsys, "normscan", "--m", "1", "--f", "exp((1,0))", "--g", "exp((-1,0))", "--Ns", "4,8,16")
        header, rows = read_csv(out)
        assert code == 0 and header["command"] == "normscan"
        assert out.splitlines()[1] == "N,norm,classification"
        assert [r["N"] for r in rows] == ["4", "8", "16"] and rows[0]["classification"] == "Plateau"

    def test_berezin_grid(self, capsys):
        code, out, _ = run(capsys, "berezin", "--m", "1", "--f", "exp((1,0))", "--g", "exp((0,1))",
                           "--grid", "0:1:2,0.5:1:2", "--check")
        header, rows = read_csv(out)
        assert code == 0 and len(rows) == 4
        assert list(rows[0]) == ["re", "im", "value_re", "value_im", "route"]
        assert {r["route"] for r in rows} == {"closed"}

    def test_dfg(self, capsys):
        code, out, _ = run(capsys, "dfg", "--m", "1", "--f", "exp((0,2pi))", "--g", "exp((1,0))", "--ts", "1,2")
        _, rows = read_csv(out)
        assert code == 0 and mpf(rows[1]["defect"]) > mpf(rows[0]["defect"])

    def test_verify_identities(self, capsys, tmp_path):
        path = tmp_path / "report.json"
        code, _, err = run(capsys, "verify", "--suite", "identities", "--out", str(path))
        doc = json.loads(path.read_text())
        assert code == 0
        assert all(c["pass"] for c in doc["checks"]) and "PASS" in err


class TestExitCodes:
    @pytest.mark.parametrize(
        "argv",
        [
            [],
            ["bogus"],
            ["moment", "--j", "x", "--k", "0", "--A", "0", "--B", "0"],
            ["semicomm", "--m", "1", "--N", "4", "--f", "exp((1,0)", "--g", "1"],
            ["berezin", "--m", "1", "--f", "z", "--g", "1", "--grid", "0:1"],
            ["kernel", "--z", "0", "--w", "0", "--m", "1", "--precision", "16"],
            ["berezin", "--m", "1", "--f", "z", "--g", "1", "--grid", "0:0:1,0:0:1", "--route", "closed"],
        ],
    )
    def test_usage_errors(self, capsys, argv):
        code, out, err = run(capsys, *argv)
        assert code == 1 and out == "" and err

    def test_json_errors(self, capsys):
        code, _, err = run(capsys, "moment", "--j", "0", "--k", "0", "--A", "(0,0", "--B", "1", "--json-errors")
        doc = json.loads(err)
        assert code == 1 and doc["error"] == "usage" and "position" in doc["message"]

    def test_route_disagreement_is_anomaly(self, capsys, monkeypatch):
        real = bz.berezin

        def skewed(s, m, z, route=bz.AUTO):
            sample = real(s, m, z, route)
            if sample.route == bz.CLOSED:
                return bz.BerezinSample(sample.z, sample.value * 2, sample.route)
            return sample

        monkeypatch.setattr(bz, "berezin", skewed)
        code, _, err = run(capsys, "berezin", "--m", "1", "--f", "exp((1,0))", "--g", "exp((0,1))",
                           "--grid", "1:1:1,0:0:1", "--check", "--json-errors")
        assert code == 2 and json.loads(err)["error"] == "numerical"

    def test_failed_check_is_anomaly(self, capsys, monkeypatch):
        from focksobolev.verify import Check

        monkeypatch.setattr(cli, "verify_suite", lambda name: [Check("x", "d", "1", "0", False)])
        code, out, _ = run(capsys, "verify", "--suite", "theoremB")
        assert code == 2 and json.loads(out)["checks"][0]["pass"] is False

    def test_help_lists_grammar(self, capsys):
        code, out, _ = run(capsys, "--help")
        assert code == 0 and GRAMMAR in out
        code, out, _ = run(capsys, "berezin", "--help")
        assert code == 0 and GRAMMAR in out


class TestReproducibility:
    def test_thread_count_does_not_change_bytes(self, capsys):
        argv = ["normscan", "--m", "1", "--f", "exp((1,0))", "--g", "exp((0,-1pi))", "--Ns", "4,8,16"]
        _, a, _ = run(capsys, *argv, "--threads", "1")
        _, b, _ = run(capsys, *argv, "--threads", "4")
        assert a == b

    def test_repeat_runs_identical(self, capsys):
        argv = ["berezin", "--m", "2", "--f", "z*exp((0.5,0))", "--g", "1 + z", "--grid", "-1:1:3,0:1:2"]
        assert run(capsys, *argv)[1] == run(capsys, *argv)[1]

    def test_every_output_embeds_config(self, capsys):
        outs = [
            run(capsys, "kernel", "--z", "1", "--w", "1", "--m", "1")[1],
            run(capsys, "toeplitz", "--m", "0", "--N", "1", "--f", "z", "--g", "1")[1],
            run(capsys, "dfg", "--m", "1", "--f", "z", "--g", "z", "--ts", "1")[1],
        ]
        assert json.loads(outs[0])["config"]["command"] == "kernel"
        assert json.loads(outs[1])["config"]["precision_bits"] == 256
        assert json.loads(outs[2].splitlines()[0][1:])["command"] == "dfg"

    def test_precision_flag_overrides_env(self, capsys, monkeypatch):
        monkeypatch.setenv("FS_PRECISION_BITS", "128")
        _, out, _ = run(capsys, "kernel", "--z", "1", "--w", "1", "--m", "1")
        assert json.loads(out)["config"]["precision_bits"] == 128
        _, out, _ = run(capsys, "kernel", "--z", "1", "--w", "1", "--m", "1", "--precision", "192")
        assert json.loads(out)["config"]["precision_bits"] == 192

    def test_csv_values_round_trip(self, capsys):
        _, out, _ = run(capsys, "dfg", "--m", "1", "--f", "exp((0.5,0))", "--g", "z", "--ts", "1.5")
        _, rows = read_csv(out)
        assert mpf(rows[0]["defect"]) == bz.defect(
            cli.parse_symbol("exp((0.5,0))"), cli.parse_symbol("z"), 1, mpf("1.5")
        )
