"""End-to-end CLI tests: every subcommand, exit codes, and determinism."""

import hashlib
import json

import numpy as np
import pytest

from adapt.cli import main
from adapt.concepts import ConceptPair, bind_template
from adapt.llm import write_fixture
from adapt.tensorio import load_vector, save_tensor, save_vector
from adapt.attention import AttentionTensor

HAIRY_FROG_BLOCK = """Num Rare Concepts: 1
a. Rare concept: A hairy frog
b. A hairy frog does not exist in reality, while a hairy animal does. Main noun subject: frog, Context: a hairy, Replaced frequent subject: animal
c. A hairy animal BREAK A hairy frog
Context: a hairy
Final Prompt Sequence: A hairy animal BREAK A hairy frog"""


@pytest.fixture()
def concept_map(tmp_path):
    pair = ConceptPair(1, "A hairy frog", "A hairy animal", "a hairy")
    plan = bind_template("A hairy frog", [pair])
    path = tmp_path / "map.json"
    path.write_text(json.dumps(plan.to_dict()))
    return str(path)


@pytest.fixture()
def mock_config(tmp_path):
    doc = {"default": {"baseline": 0.02, "amplitude": 0.5, "kappa": 10.0}}
    path = tmp_path / "mock.json"
    path.write_text(json.dumps(doc))
    return str(path)


class TestPlan:
    def test_fixture_backend(self, tmp_path, capsys):
        fixtures = tmp_path / "fixtures"
        write_fixture(fixtures, "A hairy frog", HAIRY_FROG_BLOCK, model="gpt-4o")
        out = tmp_path / "map.json"
        code = main(
            [
                "plan",
                "A hairy frog",
                "--backend",
                f"fixture:{fixtures}",
                "--out",
                str(out),
            ]
        )
        assert code == 0
        doc = json.loads(out.read_text())
        assert doc["pairs"] == [
            {
                "index": 1,
                "rare": "A hairy frog",
                "frequent": "A hairy animal",
                "attribute": "a hairy",
            }
        ]

    def test_empty_prompt_exits_2(self, tmp_path, capsys):
        code = main(["plan", "", "--backend", f"fixture:{tmp_path}"])
        assert code == 2
        err = json.loads(capsys.readouterr().err)
        assert err["error"]["code"] == "empty_prompt"

    def test_missing_fixture_exits_2(self, tmp_path, capsys):
        code = main(["plan", "A hairy frog", "--backend", f"fixture:{tmp_path}"])
        assert code == 2
        err = json.loads(capsys.readouterr().err)
        assert err["error"]["code"] == "fixture_missing"

    def test_unreachable_backend_exits_3(self, capsys):
        code = main(
            ["plan", "A hairy frog", "--backend", "http://127.0.0.1:1/nothing"]
        )
        assert code == 3
        err = json.loads(capsys.readouterr().err)
        assert err["error"]["code"] == "backend_unavailable"


class TestSimulate:
    def test_default_fixture_transitions_at_t2(self, tmp_path, concept_map, mock_config):
        out = tmp_path / "trace.ndjson"
        code = main(
            [
                "simulate",
                "--concept-map",
                concept_map,
                "--mock-config",
                mock_config,
                "--out",
                str(out),
            ]
        )
        assert code == 0
        from adapt.trace import read_trace

        trace = read_trace(out)
        assert trace.transition_log() == [(2, 1)]

    def test_r2f_stop_point_in_header(self, tmp_path, concept_map, mock_config):
        out = tmp_path / "r2f.ndjson"
        code = main(
            [
                "simulate",
                "--concept-map",
                concept_map,
                "--mock-config",
                mock_config,
                "--out",
                str(out),
                "--scheduler",
                "r2f",
                "--r2f-levels",
                "1",
            ]
        )
        assert code == 0
        from adapt.trace import read_trace

        assert read_trace(out).header["config"]["stop_points"] == [45]

    def test_negative_tau_exits_2(self, tmp_path, concept_map, mock_config, capsys):
        code = main(
            [
                "simulate",
                "--concept-map",
                concept_map,
                "--mock-config",
                mock_config,
                "--out",
                str(tmp_path / "x.ndjson"),
                "--tau-s",
                "-1",
            ]
        )
        assert code == 2

    def test_byte_identical_runs(self, tmp_path, concept_map, mock_config):
        digests = []
        for name in ("a.ndjson", "b.ndjson"):
            out = tmp_path / name
            assert (
                main(
                    [
                        "simulate",
                        "--concept-map",
                        concept_map,
                        "--mock-config",
                        mock_config,
                        "--out",
                        str(out),
                        "--seed",
                        "7",
                    ]
                )
                == 0
            )
            digests.append(hashlib.sha256(out.read_bytes()).hexdigest())
        assert digests[0] == digests[1]


class TestEmbed:
    def test_pem_worked_example(self, tmp_path, capsys):
        f_path, r_path, out = (
            str(tmp_path / n) for n in ("f.json", "r.json", "out.json")
        )
        save_vector(f_path, [1.0, 0.1])
        save_vector(r_path, [1.0, 0.3])
        code = main(
            ["embed", "pem", "--frequent", f_path, "--rare", r_path, "--out", out]
        )
        assert code == 0
        gate = json.loads(capsys.readouterr().out)
        assert gate["gamma"] == pytest.approx(0.98166, abs=1e-5)
        assert gate["delta"] == pytest.approx(1.98866, abs=1e-5)
        result = load_vector(out)
        assert result == pytest.approx([0.688187, 0.188139], abs=1e-5)

    def test_pem_identical_inputs(self, tmp_path, capsys):
        path = str(tmp_path / "v.json")
        save_vector(path, [0.5, 1.5])
        out = str(tmp_path / "out.json")
        code = main(
            ["embed", "pem", "--frequent", path, "--rare", path, "--out", out]
        )
        assert code == 0
        assert load_vector(out) == pytest.approx([0.35, 1.05], abs=1e-6)

    def test_project_zero_base_exits_2(self, tmp_path, capsys):
        a, b, out = (str(tmp_path / n) for n in ("a.json", "b.json", "o.json"))
        save_vector(a, [1.0, 2.0])
        save_vector(b, [0.0, 0.0])
        code = main(["embed", "project", "--vec-a", a, "--vec-b", b, "--out", out])
        assert code == 2
        err = json.loads(capsys.readouterr().err)
        assert err["error"]["code"] == "zero_norm_base"

    def test_lsm_identity_at_zero_lambda(self, tmp_path):
        base, attr, null, out = (
            str(tmp_path / n) for n in ("base.json", "attr.json", "null.json", "o.json")
        )
        save_vector(base, [1.0, -2.0])
        save_vector(attr, [0.5, 0.5])
        save_vector(null, [1.0, 0.0])
        code = main(
            [
                "embed", "lsm", "--base", base, "--attr", attr, "--null", null,
                "--out", out, "--lambda-attr", "0",
            ]
        )
        assert code == 0
        assert load_vector(out).tolist() == [1.0, -2.0]

    def test_gram_schmidt(self, tmp_path):
        tar, prog, out = (
            str(tmp_path / n) for n in ("tar.json", "prog.json", "o.json")
        )
        save_vector(tar, [1.0, 1.0])
        save_vector(prog, [1.0, 0.0])
        code = main(
            [
                "embed", "gram-schmidt", "--target", tar, "--prog", prog,
                "--out", out, "--mix", "0.5",
            ]
        )
        assert code == 0
        assert load_vector(out) == pytest.approx([0.5, 0.5], abs=1e-6)


class TestCompare:
    def _simulate(self, tmp_path, concept_map, mock_config, name, *extra):
        out = tmp_path / name
        code = main(
            [
                "simulate",
                "--concept-map",
                concept_map,
                "--mock-config",
                mock_config,
                "--out",
                str(out),
                *extra,
            ]
        )
        assert code == 0
        return str(out)

    def test_identical_traces(self, tmp_path, concept_map, mock_config, capsys):
        a = self._simulate(tmp_path, concept_map, mock_config, "a.ndjson")
        b = self._simulate(tmp_path, concept_map, mock_config, "b.ndjson")
        assert main(["compare", a, b]) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["divergence_count"] == 0

    def test_aps_vs_r2f_delta_and_csv(self, tmp_path, concept_map, mock_config, capsys):
        a = self._simulate(tmp_path, concept_map, mock_config, "aps.ndjson")
        b = self._simulate(
            tmp_path, concept_map, mock_config, "r2f.ndjson",
            "--scheduler", "r2f", "--r2f-levels", "1",
        )
        csv_path = tmp_path / "curves.csv"
        assert main(["compare", a, b, "--csv", str(csv_path)]) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["stop_points"]["1"] == {
            "a_offset": 48,
            "b_offset": 45,
            "delta_steps": 3,
        }
        lines = csv_path.read_text().strip().splitlines()
        assert lines[0] == "trace,t,offset,token,z,tau_s"
        assert any(line.startswith("B,") for line in lines[1:])

    def test_different_t_exits_2(self, tmp_path, concept_map, mock_config, capsys):
        a = self._simulate(tmp_path, concept_map, mock_config, "a.ndjson")
        b = self._simulate(
            tmp_path, concept_map, mock_config, "b.ndjson", "--steps", "40"
        )
        assert main(["compare", a, b]) == 2


class TestScore:
    def test_aggregation_pipeline(self, tmp_path, capsys):
        rng = np.random.default_rng(11)
        paths = []
        blocks = []
        for i in range(2):
            data = rng.random((2, 3, 3, 5)).astype(np.float32) * 0.9
            path = tmp_path / f"block{i}.json"
            save_tensor(path, AttentionTensor(data=data, axes=("head", "h", "w", "seq")))
            paths.append(str(path))
            blocks.append(data)
        code = main(
            [
                "score",
                "--block", paths[0], "--block", paths[1],
                "--positions", "1,3",
                "--labels", "hairy,frog",
                "--k", "1",
                "--tau-s", "0.025",
            ]
        )
        assert code == 0
        doc = json.loads(capsys.readouterr().out)
        merged = (blocks[0].mean(axis=0) + blocks[1].mean(axis=0)) / 2
        expected = [float(merged[:, :, p].max()) for p in (1, 3)]
        assert doc["values"] == pytest.approx(expected, abs=1e-6)
        assert doc["labels"] == ["hairy", "frog"]
        assert doc["should_transition"] is False

    def test_bad_position_exits_2(self, tmp_path, capsys):
        data = np.zeros((2, 2, 2, 3), dtype=np.float32)
        path = tmp_path / "b.json"
        save_tensor(path, AttentionTensor(data=data, axes=("head", "h", "w", "seq")))
        code = main(["score", "--block", str(path), "--positions", "9"])
        assert code == 2


class TestVersion:
    def test_version_flag(self, capsys):
        with pytest.raises(SystemExit) as info:
            main(["--version"])
        assert info.value.code == 0
