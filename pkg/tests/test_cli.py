import json
import subprocess
import sys
from pathlib import Path

import pytest
from click.testing import CliRunner

from radledger.cli import main

GOLDEN_DIR = Path(__file__).parent / "golden"


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def world(tmp_path, runner):
    """CA + operator card + local/central stores, ready for commands."""
    ca_dir = tmp_path / "pki"
    operator = tmp_path / "operator.json"
    local = tmp_path / "local"
    central = tmp_path / "central"
    steps = [
        ["ca", "init", "--name", "cli-root", "--dir", str(ca_dir)],
        ["card", "personalize", "--ca-dir", str(ca_dir), "--kind", "PRSC",
         "--holder", "dr-x", "--pin", "1234", "--out", str(operator)],
        ["store", "init", "--dir", str(local), "--kind", "LOCAL"],
        ["store", "init", "--dir", str(central), "--kind", "CENTRAL"],
    ]
    for step in steps:
        result = runner.invoke(main, step, catch_exceptions=False)
        assert result.exit_code == 0, result.output
    return {"ca": ca_dir, "operator": operator, "local": local, "central": central,
            "tmp": tmp_path}


def _record(runner, world, *extra, exam="chest_pa", args=("--dap", "197", "--area", "1225")):
    cmd = [
        "--format", "json", "record",
        "--card", str(world["operator"]), "--pin", "1234",
        "--patient", "p1", "--exam", exam, *args,
        "--store", str(world["local"]), "--at", "2026-09-01T10:00:00Z",
        "--seed", "42", *extra,
    ]
    result = runner.invoke(main, cmd, catch_exceptions=False)
    assert result.exit_code == 0, result.output
    return json.loads(result.output)


class TestRecordCommand:
    def test_reference_dap_output_matches_golden(self, runner, world):
        document = _record(runner, world)
        assert document.pop("stored_to") == str(world["local"])
        golden = json.loads((GOLDEN_DIR / "cli_record.json").read_text())
        golden.pop("stored_to")
        assert document == golden

    def test_catalog_record(self, runner, world):
        document = _record(runner, world, exam="head", args=("--catalog",))
        assert document["effective_msv"] == 2.0
        assert document["chest_equivalents"] == 100.0

    def test_ct_machine_inputs(self, runner, world):
        document = _record(
            runner, world, exam="head",
            args=("--ctdi", "12.5", "--length", "32", "--anatomy", "head"),
        )
        # DLP 400 x 0.002
        assert document["effective_msv"] == pytest.approx(0.8)

    def test_gray_dap_ingestion(self, runner, world):
        document = _record(runner, world, args=("--gy-dap", "0.197", "--area", "1225"))
        assert document["effective_msv"] == pytest.approx(0.0193, abs=1e-4)

    def test_wrong_pin_fails(self, runner, world):
        result = runner.invoke(
            main,
            ["record", "--card", str(world["operator"]), "--pin", "9999",
             "--patient", "p1", "--exam", "head", "--catalog",
             "--store", str(world["local"])],
        )
        assert result.exit_code != 0


class TestProfileAndWhatIf:
    def test_profile_roundtrip(self, runner, world):
        _record(runner, world)
        result = runner.invoke(
            main,
            ["--format", "json", "profile", "--patient", "p1",
             "--store", str(world["local"]), "--as-of", "2026-12-01T00:00:00Z"],
            catch_exceptions=False,
        )
        document = json.loads(result.output)
        assert document["cumulative_total_msv"] == pytest.approx(0.0193, abs=1e-4)

    def test_empty_patient_zero_totals(self, runner, world):
        result = runner.invoke(
            main,
            ["--format", "json", "profile", "--patient", "ghost",
             "--store", str(world["local"])],
            catch_exceptions=False,
        )
        document = json.loads(result.output)
        assert document["cumulative_total_msv"] == 0.0
        assert document["records"] == []

    def test_whatif_from_store(self, runner, world):
        result = runner.invoke(
            main,
            ["--format", "json", "whatif", "--patient", "p1", "--exam", "abdomen",
             "--store", str(world["local"])],
            catch_exceptions=False,
        )
        document = json.loads(result.output)
        assert document["projected"]["chest_equivalents_delta"] == 500.0


class TestSyncCommand:
    def test_dir_to_dir_sync(self, runner, world):
        _record(runner, world)
        result = runner.invoke(
            main,
            ["--format", "json", "sync", "--a", str(world["local"]),
             "--b", str(world["central"])],
            catch_exceptions=False,
        )
        document = json.loads(result.output)
        assert document["resulting_sizes"] == {
            f"local-{world['local'].name}": 1,
            f"central-{world['central'].name}": 1,
        }

    def test_card_to_dir_sync(self, runner, world):
        _record(runner, world)
        patient_card = world["tmp"] / "p1.json"
        runner.invoke(
            main,
            ["card", "personalize", "--ca-dir", str(world["ca"]), "--kind", "CRSC",
             "--holder", "p1", "--pin", "0000", "--out", str(patient_card)],
            catch_exceptions=False,
        )
        result = runner.invoke(
            main,
            ["sync", "--a", str(patient_card), "--b", str(world["local"])],
            catch_exceptions=False,
        )
        assert result.exit_code == 0
        read = runner.invoke(
            main, ["--format", "json", "card", "read", str(patient_card)],
            catch_exceptions=False,
        )
        assert len(json.loads(read.output)["records"]) == 1


class TestScenarioCommand:
    @pytest.mark.parametrize("case", ["no-card-online", "no-card-offline-local", "card-only"])
    def test_replay_matches_golden(self, runner, case):
        result = runner.invoke(
            main, ["--format", "json", "scenario", "replay", "--case", case],
            catch_exceptions=False,
        )
        assert result.exit_code == 0
        golden = json.loads(
            (GOLDEN_DIR / f"scenario_{case.replace('-', '_')}.json").read_text()
        )
        assert json.loads(result.output) == golden

    def test_unknown_case(self, runner):
        result = runner.invoke(main, ["scenario", "replay", "--case", "nope"])
        assert result.exit_code != 0


class TestVerifyCommand:
    def test_clean_store_passes(self, runner, world):
        _record(runner, world)
        result = runner.invoke(
            main,
            ["--format", "json", "verify", "--store", str(world["local"]),
             "--trust-dir", str(world["ca"])],
            catch_exceptions=False,
        )
        document = json.loads(result.output)
        assert document == {"checked": 1, "rejected": []}


class TestExitCodes:
    def _run(self, *args):
        return subprocess.run(
            [sys.executable, "-m", "radledger.cli", *args],
            capture_output=True, text=True,
        )

    def test_missing_config_exits_2(self, tmp_path):
        result = self._run("serve", "--config", str(tmp_path / "absent.json"))
        assert result.returncode == 2

    def test_missing_ca_exits_2(self, tmp_path):
        result = self._run(
            "cert", "issue", "--ca-dir", str(tmp_path), "--subject", "s",
            "--role", "FACILITY", "--out", str(tmp_path / "id.json"),
        )
        assert result.returncode == 2

    def test_verification_failure_exits_3(self, tmp_path):
        # wrong PIN on a fresh card
        subprocess.run(
            [sys.executable, "-m", "radledger.cli", "ca", "init", "--name", "r",
             "--dir", str(tmp_path / "pki")], capture_output=True,
        )
        subprocess.run(
            [sys.executable, "-m", "radledger.cli", "card", "personalize",
             "--ca-dir", str(tmp_path / "pki"), "--kind", "CRSC", "--holder", "p",
             "--pin", "1111", "--out", str(tmp_path / "c.json")], capture_output=True,
        )
        result = self._run(
            "record", "--card", str(tmp_path / "c.json"), "--pin", "2222",
            "--patient", "p", "--exam", "head", "--catalog",
        )
        assert result.returncode == 3
