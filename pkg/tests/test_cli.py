import csv
import io
import json
import subprocess
import sys
from pathlib import Path

import pytest

from foamlab.cli import emit_csv, main, run, structured
from foamlab.manifest import ManifestSyntaxError, canonical, dumps, load, loads

MANIFESTS = Path(__file__).resolve().parent.parent / "manifests"

SMALL = """
[space]
dimension = 1
omega = [["-1", "1"]]

[nets.delta]
[[nets.delta.piece]]
region = "-1/k < x1 < 1/k"
expr = "k*nbump(k*x1)"

[nets.bump]
diagonal = "bump(x1)"

[[task]]
kind = "eq"
lhs = "delta"
"""


def write(tmp_path, text, name="m.toml"):
    p = tmp_path / name
    p.write_text(text)
    return p


class TestManifest:
    @pytest.mark.parametrize("path", sorted(MANIFESTS.glob("*.toml")), ids=lambda p: p.stem)
    def test_round_trip(self, path):
        m = load(path)
        assert loads(dumps(m)) == m

    def test_canonical_defaults(self):
        data = canonical(loads(SMALL).data)
        assert data["space"]["index"] == "naturals"
        assert data["space"]["family"] == "ND"
        assert data["task"][0]["name"] == "eq-1"

    def test_syntax_error(self):
        with pytest.raises(ManifestSyntaxError):
            loads("[space\n")


class TestExitCodes:
    def test_success(self, tmp_path):
        report, code, _ = run(write(tmp_path, SMALL))
        assert code == 0 and report["tasks"][0]["verdict"] == "Equal"

    def test_negative_verdict_exits_one(self, tmp_path):
        text = SMALL + '\n[[task]]\nkind = "eq"\nlhs = "bump"\n'
        report, code, _ = run(write(tmp_path, text))
        assert code == 1 and report["tasks"][1]["verdict"] == "NotEqual"

    def test_expected_negative_is_ok(self, tmp_path):
        text = SMALL + '\n[[task]]\nkind = "eq"\nlhs = "bump"\nexpect = "negative"\n'
        _, code, _ = run(write(tmp_path, text))
        assert code == 0

    def test_expect_flag(self, tmp_path):
        text = SMALL.replace('lhs = "delta"', 'lhs = "bump"')
        _, code, _ = run(write(tmp_path, text), {"expect": "negative"})
        assert code == 0

    def test_toml_syntax_error_exits_two(self, tmp_path):
        assert main([str(write(tmp_path, "[space\ndimension = 1\n"))]) == 2

    def test_missing_file_exits_two(self, tmp_path):
        assert main([str(tmp_path / "absent.toml")]) == 2

    def test_malformed_region_names_its_location(self, tmp_path, capsys):
        text = SMALL.replace('"-1/k < x1 < 1/k"', '"-1/k < x1 <<< 1/k"')
        assert main([str(write(tmp_path, text))]) == 3
        err = capsys.readouterr().err
        assert "nets.delta.piece[0].region" in err and "offset" in err

    def test_bad_dimension_exits_three(self, tmp_path):
        assert main([str(write(tmp_path, SMALL.replace("dimension = 1", "dimension = 4")))]) == 3

    def test_unknown_task_kind_exits_three(self, tmp_path):
        assert main([str(write(tmp_path, SMALL.replace('kind = "eq"', 'kind = "prove"')))]) == 3

    def test_unknown_net_reference(self, tmp_path):
        assert main([str(write(tmp_path, SMALL.replace('lhs = "delta"', 'lhs = "nope"')))]) == 3


class TestOutputs:
    def test_emit_csv_header_only(self):
        text = emit_csv({"table": {"columns": ["x1", "min_index"], "rows": []}})
        assert text == "x1,min_index\r\n"

    def test_emit_csv_quotes_fields(self):
        text = emit_csv({"table": {"columns": ["a"], "rows": [['he said "hi", twice']]}})
        assert text == 'a\r\n"he said ""hi"", twice"\r\n'

    def test_delta_oracle_csv(self, tmp_path, capsys):
        text = SMALL + '\n[[task]]\nkind = "oracle"\nnet = "delta"\n'
        assert main([str(write(tmp_path, text)), "--format", "csv"]) == 0
        rows = list(csv.reader(io.StringIO(capsys.readouterr().out)))
        assert rows[0] == ["task", "x1", "min_index"]
        xs = sorted(float(r[1]) for r in rows[1:])
        assert xs == [-0.0078125, 0.0, 0.0078125]
        assert all(r[2] == "NONE" for r in rows[1:])

    def test_json_output_and_out_file(self, tmp_path, capsys):
        out = tmp_path / "report.json"
        assert main([str(write(tmp_path, SMALL)), "--format", "json", "--out", str(out)]) == 0
        printed = json.loads(capsys.readouterr().out)
        assert printed == json.loads(out.read_text())
        assert printed["format_version"] == "1"

    def test_flags_override_defaults(self, tmp_path):
        report, _, _ = run(write(tmp_path, SMALL), {"depth": 16, "order": 2})
        settings = report["tasks"][0]["settings"]
        assert settings["depth"] == 16 and settings["order"] == 2

    def test_human_output(self, tmp_path, capsys):
        main([str(write(tmp_path, SMALL))])
        out = capsys.readouterr().out
        assert "Equal" in out and "exit code 0" in out

    def test_structured_output_is_deterministic(self, tmp_path):
        p = write(tmp_path, SMALL)
        a, _, _ = run(p)
        b, _, _ = run(p)
        assert structured(a) == structured(b)
        assert "timings" not in json.loads(structured(a))


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "foamlab", str(write(tmp_path, SMALL)), "--format", "json"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["exit_code"] == 0
