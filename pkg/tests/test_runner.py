import orjson
import pytest

from sobolev_jets import runner
from sobolev_jets.errors import CapacityError


def _stdout(capsys):
    return orjson.loads(capsys.readouterr().out)


@pytest.fixture(autouse=True)
def clean_env(settings):
    """The settings fixture clears SOBOLEV_JETS_* variables"""
    return settings


class TestCommands:
    def test_gen(self, tmp_path, capsys):
        target = tmp_path / "instance.json"
        code = runner.main(["gen", "--n", "1", "--m", "2", "--points", "4", "--seed", "7", "--output", str(target)])
        assert code == 0
        assert target.exists()
        out = _stdout(capsys)
        assert out["success"] is True
        assert out["artifacts"] == [str(target)]

    def test_gen_default_location(self, tmp_path, capsys):
        code = runner.main(["gen", "--n", "2", "--m", "1", "--points", "3", "--output-dir", str(tmp_path)])
        assert code == 0
        assert (tmp_path / "instance_n2_m1_seed0.json").exists()

    def test_seminorm(self, fixtures_dir, tmp_path, capsys):
        code = runner.main(["seminorm", str(fixtures_dir / "two_point_m1.json"), "--output-dir", str(tmp_path)])
        assert code == 0
        out = _stdout(capsys)
        assert out["values"]["phi"]["value"] == pytest.approx(1.0)
        assert out["values"]["bruteforce"] == pytest.approx(1.0)
        assert (tmp_path / "seminorms.json").exists()

    def test_reports_are_deterministic(self, fixtures_dir, tmp_path, capsys):
        for name in ("first", "second"):
            assert runner.main(["graph", str(fixtures_dir / "linear_m2.json"), "--output-dir", str(tmp_path / name)]) == 0
        capsys.readouterr()
        assert (tmp_path / "first" / "graph.json").read_bytes() == (tmp_path / "second" / "graph.json").read_bytes()
        assert (tmp_path / "first" / "graph.dot").read_text() == (tmp_path / "second" / "graph.dot").read_text()

    def test_extend_writes_grid(self, fixtures_dir, tmp_path, capsys):
        assert runner.main(["extend", str(fixtures_dir / "singleton_m2.json"), "--output-dir", str(tmp_path)]) == 0
        header = (tmp_path / "extension_grid.csv").read_text().splitlines()[0]
        assert header == "x0,alpha,value"

    def test_mcshane_finite_exponent(self, fixtures_dir, tmp_path, capsys):
        assert runner.main(["mcshane", str(fixtures_dir / "two_point_m1.json"), "--output-dir", str(tmp_path)]) == 0
        out = _stdout(capsys)
        assert out["method"] == "l1p"
        assert out["trace_error"] < 1e-9
        assert (tmp_path / "mcshane_grid.csv").exists()

    def test_wmp_refines_to_delta(self, fixtures_dir, tmp_path, capsys):
        assert runner.main(["wmp", str(fixtures_dir / "two_point_m1.json"), "--output-dir", str(tmp_path)]) == 0
        out = _stdout(capsys)
        assert out["depth"] == 25
        assert out["numerical"]["seminorm"] > 0
        assert out["ratio"] > 0

    def test_generated_instance_verifies(self, tmp_path, capsys):
        target = tmp_path / "instance.json"
        assert runner.main(["gen", "--seed", "7", "--n", "2", "--m", "2", "--points", "6", "--output", str(target)]) == 0
        assert runner.main(["verify", str(target), "--seed", "7", "--output-dir", str(tmp_path)]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert '"passed": true' in "\n".join(lines)


class TestExitCodes:
    def test_missing_input_file(self, tmp_path, capsys):
        assert runner.main(["decompose", str(tmp_path / "missing.json")]) == 2
        out = _stdout(capsys)
        assert out["success"] is False
        assert out["error"] == "FieldSchemaError"

    def test_bad_inflation(self, fixtures_dir, capsys):
        assert runner.main(["decompose", str(fixtures_dir / "two_point_m1.json"), "--inflate", "2"]) == 2

    def test_bad_exponent(self, fixtures_dir, capsys):
        assert runner.main(["graph", str(fixtures_dir / "bad_exponent.json")]) == 2
        assert _stdout(capsys)["error"] == "ExponentError"

    def test_missing_positional(self):
        with pytest.raises(SystemExit):
            runner.main(["seminorm"])

    def test_capacity(self, fixtures_dir, tmp_path, monkeypatch, capsys):
        def overloaded(field, settings, output_dir):
            raise CapacityError("brute force enumerates at most 8 points, got 9")

        monkeypatch.setitem(runner.FIELD_COMMANDS, "seminorm", overloaded)
        assert runner.main(["seminorm", str(fixtures_dir / "two_point_m1.json"), "--output-dir", str(tmp_path)]) == 4
        assert _stdout(capsys)["exit_code"] == 4

    def test_failed_verification(self, fixtures_dir, tmp_path, monkeypatch, capsys):
        monkeypatch.setattr(runner, "verify_tool", lambda *args: {"success": True, "passed": False, "suites": []})
        assert runner.main(["verify", str(fixtures_dir / "two_point_m1.json"), "--output-dir", str(tmp_path)]) == 3
