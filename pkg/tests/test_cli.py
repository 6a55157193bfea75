import json

import yaml
from click.testing import CliRunner

from conftest import make_record
from vidhumor.cli import main

UTTS = [
    {"start_s": 0.0, "end_s": 2.0, "text": "I totally meant to do that"},
    {"start_s": 2.0, "end_s": 4.0, "text": "the cat disagrees"},
]

FILTER_FIXTURE = {
    "asr": {"*": {"language": "en", "utterances": UTTS}},
    "caption": {"*": ["a man slips while the cat watches"]},
    "complete_rules": [
        {"contains": ["Video caption:", "which utterance is funny"],
         "reply": '"the cat disagrees"'},
        {"contains": ["which utterance is funny"],
         "reply": '"the cat disagrees"'},
        {"contains": ["Video caption:", "explain why"],
         "reply": "with-caption explanation"},
        {"contains": ["explain why"], "reply": "without-caption explanation"},
    ],
    "embed": {"with-caption explanation": [1.0, 0.0],
              "without-caption explanation": [0.0, 1.0]},
}


def write_manifest(tmp_path, n=4, name="manifest.jsonl"):
    path = tmp_path / name
    with open(path, "w", encoding="utf-8") as fh:
        for i in range(n):
            record = make_record(f"v{i}", moments=[(1.0, 3.0, "Gold reason.")])
            fh.write(json.dumps(record.to_dict()) + "\n")
    return path


def write_config(tmp_path, fixture=FILTER_FIXTURE):
    fixture_path = tmp_path / "fixture.json"
    fixture_path.write_text(json.dumps(fixture), encoding="utf-8")
    config_path = tmp_path / "config.yaml"
    config_path.write_text(yaml.safe_dump({
        "fixture": str(fixture_path),
        "paths": {"reports_dir": str(tmp_path / "reports")},
    }), encoding="utf-8")
    return config_path


class TestTopLevel:
    def test_version(self):
        result = CliRunner().invoke(main, ["--version"])
        assert result.exit_code == 0
        assert result.output.startswith("vidhumor ")

    def test_help_lists_subcommands(self):
        result = CliRunner().invoke(main, ["--help"])
        assert result.exit_code == 0
        for cmd in ("stats", "split", "filter", "prompt", "explain",
                    "eval", "serve", "mock-backend"):
            assert cmd in result.output

    def test_unknown_command_is_usage_error(self):
        result = CliRunner().invoke(main, ["frobnicate"])
        assert result.exit_code == 2

    def test_missing_required_option_is_usage_error(self):
        result = CliRunner().invoke(main, ["stats"])
        assert result.exit_code == 2


class TestStats:
    def test_reports_counts(self, tmp_path):
        manifest = write_manifest(tmp_path)
        result = CliRunner().invoke(main, ["stats", "--manifest",
                                           str(manifest)])
        assert result.exit_code == 0
        payload = json.loads(result.output)
        assert payload["video_count"] == 4
        assert payload["explanation_count"] == 4

    def test_malformed_manifest_exit_1(self, tmp_path):
        bad = tmp_path / "bad.jsonl"
        bad.write_text("not json\n", encoding="utf-8")
        result = CliRunner().invoke(main, ["stats", "--manifest", str(bad)])
        assert result.exit_code == 1
        assert "manifest_error" in result.output


class TestSplit:
    def test_kfold5_sizes(self, tmp_path):
        manifest = write_manifest(tmp_path, n=10)
        result = CliRunner().invoke(main, ["split", "--manifest",
                                           str(manifest)])
        assert result.exit_code == 0
        payload = json.loads(result.output)
        assert sorted(payload["sizes"].values()) == [2] * 5
        split_file = tmp_path / "manifest.kfold5.split.json"
        assert split_file.exists()

    def test_tvt_sizes(self, tmp_path):
        manifest = write_manifest(tmp_path, n=10)
        result = CliRunner().invoke(main, ["split", "--manifest",
                                           str(manifest), "--scheme", "tvt"])
        payload = json.loads(result.output)
        assert payload["sizes"] == {"train": 8, "val": 1, "test": 1}

    def test_deterministic_across_runs(self, tmp_path):
        manifest = write_manifest(tmp_path, n=10)
        args = ["split", "--manifest", str(manifest), "--seed", "7"]
        CliRunner().invoke(main, args)
        snapshot = (tmp_path / "manifest.kfold5.split.json").read_text()
        CliRunner().invoke(main, args)
        assert (tmp_path / "manifest.kfold5.split.json").read_text() \
            == snapshot

    def test_seed_changes_assignment(self, tmp_path):
        manifest = write_manifest(tmp_path, n=10)
        out_a = tmp_path / "a.json"
        out_b = tmp_path / "b.json"
        CliRunner().invoke(main, ["split", "--manifest", str(manifest),
                                  "--seed", "0", "--out", str(out_a)])
        CliRunner().invoke(main, ["split", "--manifest", str(manifest),
                                  "--seed", "1", "--out", str(out_b)])
        assert out_a.read_text() != out_b.read_text()


class TestFilter:
    def test_writes_verdicts(self, tmp_path):
        manifest = write_manifest(tmp_path)
        config = write_config(tmp_path)
        out = tmp_path / "verdicts.jsonl"
        result = CliRunner().invoke(main, [
            "filter", "--manifest", str(manifest), "--config", str(config),
            "--out", str(out), "--jobs", "2"])
        assert result.exit_code == 0, result.output
        lines = [json.loads(ln) for ln in out.read_text().splitlines()]
        assert len(lines) == 4
        assert all(ln["decision"] == "accept" for ln in lines)
        assert "accept@d_divergence" in result.output

    def test_dry_run_writes_nothing(self, tmp_path):
        manifest = write_manifest(tmp_path)
        config = write_config(tmp_path)
        out = tmp_path / "verdicts.jsonl"
        result = CliRunner().invoke(main, [
            "filter", "--manifest", str(manifest), "--config", str(config),
            "--out", str(out), "--dry-run"])
        assert result.exit_code == 0
        assert not out.exists()
        assert "dry run" in result.output

    def test_stage_limit_counts_undecided(self, tmp_path):
        manifest = write_manifest(tmp_path)
        config = write_config(tmp_path)
        out = tmp_path / "verdicts.jsonl"
        result = CliRunner().invoke(main, [
            "filter", "--manifest", str(manifest), "--config", str(config),
            "--out", str(out), "--stage-limit", "b"])
        assert result.exit_code == 0
        assert "undecided" in result.output


class TestPromptAblateFlag:
    def test_bad_code_is_argument_error(self, tmp_path):
        manifest = write_manifest(tmp_path)
        config = write_config(tmp_path)
        result = CliRunner().invoke(main, [
            "prompt", "--manifest", str(manifest), "--config", str(config),
            "--out", str(tmp_path / "prompts"), "--ablate", "x"])
        assert result.exit_code == 1
        assert "argument_error" in result.output


class TestEvalHuman:
    def test_ratings_mean(self, tmp_path):
        config = write_config(tmp_path)
        ratings = tmp_path / "ratings.jsonl"
        ratings.write_text(json.dumps(
            {"item_id": "v1", "ratings": [1.0, 0.75, 0.75, 0.5, 0.0]}
        ) + "\n", encoding="utf-8")
        result = CliRunner().invoke(main, [
            "eval", "human", "--config", str(config),
            "--ratings", str(ratings)])
        assert result.exit_code == 0, result.output
        payload = json.loads(result.output.split("\n{", 1)[0]
                             if result.output.startswith("{")
                             else result.output)
        assert abs(payload["per_item"]["v1"] - 2 / 3) < 1e-6

    def test_comparisons_included(self, tmp_path):
        config = write_config(tmp_path)
        ratings = tmp_path / "ratings.jsonl"
        ratings.write_text(json.dumps(
            {"item_id": "v1", "ratings": [0.5] * 5}) + "\n")
        comps = tmp_path / "comps.jsonl"
        comps.write_text(json.dumps(
            {"pair": ["ours", "baseline"],
             "votes": ["ours", "ours", "ours", "baseline", "ours"]}) + "\n")
        result = CliRunner().invoke(main, [
            "eval", "human", "--config", str(config),
            "--ratings", str(ratings), "--comparisons", str(comps)])
        assert result.exit_code == 0, result.output
        payload = json.loads(result.output)
        assert payload["comparisons"]["ours vs baseline"]["ours"] == 4


class TestEvalAuto:
    def test_no_overlap_is_argument_error(self, tmp_path):
        config = write_config(tmp_path)
        manifest = write_manifest(tmp_path)
        pred = tmp_path / "pred.jsonl"
        pred.write_text(json.dumps({"id": "zz", "explanation": "x"}) + "\n")
        result = CliRunner().invoke(main, [
            "eval", "auto", "--config", str(config),
            "--pred", str(pred), "--gold", str(manifest)])
        assert result.exit_code == 1
        assert "argument_error" in result.output

    def test_report_written_and_table_printed(self, tmp_path):
        config = write_config(tmp_path)
        manifest = write_manifest(tmp_path, n=2)
        pred = tmp_path / "pred.jsonl"
        with open(pred, "w", encoding="utf-8") as fh:
            for i in range(2):
                fh.write(json.dumps({"id": f"v{i}",
                                     "explanation": "Gold reason."}) + "\n")
        result = CliRunner().invoke(main, [
            "eval", "auto", "--config", str(config),
            "--pred", str(pred), "--gold", str(manifest)])
        assert result.exit_code == 0, result.output
        assert "SentBERT@0.7" in result.output
        reports = list((tmp_path / "reports").glob("auto_*.json"))
        assert len(reports) == 1
        payload = json.loads(reports[0].read_text())
        assert payload["ids"] == ["v0", "v1"]
