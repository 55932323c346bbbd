import json

import pytest

from placesynth.cli import main
from placesynth.config import RunConfig
from placesynth.errors import SchemaError
from placesynth.scene_graph import SceneGraph
from placesynth.scene_factory import max_penetration, read_corpus

from pipeline import run, run_pipeline, tree_bytes


def error_json(capsys):
    err = capsys.readouterr().err.strip().splitlines()[-1]
    return json.loads(err)


def test_abstract_bundled_and_roundtrip(tmp_path):
    run(["abstract", "--out", tmp_path / "g"])
    files = sorted((tmp_path / "g").glob("*.graph.json"))
    assert files
    for f in files:
        g = SceneGraph.load(f)
        g.save(tmp_path / "again.json")
        assert (tmp_path / "again.json").read_bytes() == f.read_bytes()


def test_abstract_single_scene(tmp_path):
    from placesynth import data
    src = sorted(data.data_path("demos").glob("*.json"))[0]
    (tmp_path / "in").mkdir()
    (tmp_path / "in" / src.name).write_bytes(src.read_bytes())
    # the scene may reference sibling point files
    for extra in src.parent.glob(src.stem + "*"):
        if extra != src:
            (tmp_path / "in" / extra.name).write_bytes(extra.read_bytes())
    run(["abstract", "--scenes", tmp_path / "in", "--out", tmp_path / "g"])
    assert len(list((tmp_path / "g").glob("*.graph.json"))) == 1


def test_abstract_empty_dir_errors(tmp_path, capsys):
    (tmp_path / "empty").mkdir()
    rc = main(["abstract", "--scenes", str(tmp_path / "empty"), "--out", str(tmp_path / "g")])
    assert rc != 0
    err = error_json(capsys)
    assert set(err) == {"error", "message"}


def test_augment_zero_and_reproducible(tmp_path):
    run(["abstract", "--out", tmp_path / "g"])
    run(["augment", "--graphs", tmp_path / "g", "--n-out", 0, "--out", tmp_path / "none"])
    assert list((tmp_path / "none").iterdir()) == []
    for name in ("a", "b"):
        run(["--seed", 4, "augment", "--graphs", tmp_path / "g", "--n-out", 6, "--out", tmp_path / name])
    assert tree_bytes(tmp_path / "a") == tree_bytes(tmp_path / "b")
    assert len(tree_bytes(tmp_path / "a")) == 6


def test_generate_is_collision_free_and_listed(tmp_path):
    run(["--seed", 2, "generate", "--out", tmp_path / "c", "--split", "syn_easy", "--n-scenes", 3])
    manifest = json.loads((tmp_path / "c" / "manifest.json").read_text())
    names = [e["name"] for e in manifest["samples"]]
    dirs = sorted(p.name for p in (tmp_path / "c").iterdir() if p.is_dir())
    assert sorted(names) == dirs and len(names) == 3
    for s in read_corpus(tmp_path / "c"):
        full = s.scene.replace(s.scene.objects + [s.dropped_object])
        assert max_penetration(full) <= 0.005


def test_plan_and_eval_outputs(tmp_path):
    root = run_pipeline(tmp_path / "run", seed=1, n_aug=6, n_scenes=2, candidates=2)
    result = json.loads((root / "plan.json").read_text())
    assert result["schema_version"] == 1 and len(result["candidates"]) == 2
    top = result["candidates"][0]
    assert {"t", "yaw", "final_cost", "afford_cost", "collide_cost", "diagnostics"} <= set(top)
    costs = [c["final_cost"] for c in result["candidates"]]
    assert costs == sorted(costs)
    report = json.loads((root / "report.json").read_text())
    assert report["schema_version"] == 1 and report["summary"]["cases"] == 2
    assert (root / "report.csv").exists()


def test_oracle_eval_is_perfect(tmp_path):
    run(["--seed", 3, "generate", "--out", tmp_path / "c", "--n-scenes", 3])
    run(["eval", "--benchmark", tmp_path / "c", "--planner", "oracle", "--out", tmp_path / "r.json"])
    summary = json.loads((tmp_path / "r.json").read_text())["summary"]
    assert summary["PA"] == summary["PP"] == summary["SR"] == 100.0


def test_export_ply(tmp_path):
    run(["--seed", 3, "generate", "--out", tmp_path / "c", "--n-scenes", 1])
    sample = next(p for p in (tmp_path / "c").iterdir() if p.is_dir())
    run(["export-ply", "--sample", sample, "--affordance", "--out", tmp_path / "s.ply", "--tsdf", tmp_path / "t.json"])
    assert (tmp_path / "s.ply").read_bytes().startswith(b"ply")
    assert (tmp_path / "t.json").exists()


def test_missing_input_is_json_error(tmp_path, capsys):
    rc = main(["plan", "--scene", str(tmp_path / "nope.json"), "--plans", str(tmp_path / "p.json"),
               "--object", str(tmp_path / "o.ply"), "--out", str(tmp_path / "r.json")])
    assert rc == 1
    assert error_json(capsys)["error"]


def test_bad_arguments_exit_two(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["generate"])
    assert exc.value.code == 2
    assert "error" in error_json(capsys)


# --- run config -------------------------------------------------------------------

def test_config_roundtrip(tmp_path):
    cfg = RunConfig(seed=9)
    cfg.planner.guidance.lambda_c = 12.0
    cfg.save(tmp_path / "c.json")
    back = RunConfig.load(tmp_path / "c.json")
    assert back.to_dict() == cfg.to_dict()


@pytest.mark.parametrize("mutate", [
    lambda d: d.pop("schema_version"),
    lambda d: d.update(bogus=1),
    lambda d: d["augment"].update(bogus=1),
    lambda d: d["planner"].update(bogus=1),
    lambda d: d["planner"]["guidance"].update(bogus=1),
])
def test_config_rejects_bad_documents(mutate):
    d = RunConfig().to_dict()
    mutate(d)
    with pytest.raises(SchemaError):
        RunConfig.from_dict(d)


def test_config_file_and_flag_precedence(tmp_path):
    cfg = RunConfig(seed=5)
    cfg.augment.p_m = 0.0
    cfg.save(tmp_path / "c.json")
    run(["abstract", "--out", tmp_path / "g"])
    run(["--config", tmp_path / "c.json", "augment", "--graphs", tmp_path / "g", "--n-out", 4, "--out", tmp_path / "a"])
    run(["--seed", 5, "augment", "--p-m", 0.0, "--graphs", tmp_path / "g", "--n-out", 4, "--out", tmp_path / "b"])
    assert tree_bytes(tmp_path / "a") == tree_bytes(tmp_path / "b")
    run(["--config", tmp_path / "c.json", "--seed", 6, "augment", "--graphs", tmp_path / "g", "--n-out", 4,
         "--out", tmp_path / "c"])
    assert tree_bytes(tmp_path / "c") != tree_bytes(tmp_path / "a")


def test_bad_config_file_is_json_error(tmp_path, capsys):
    (tmp_path / "c.json").write_text('{"seed": 1}')
    rc = main(["--config", str(tmp_path / "c.json"), "abstract", "--out", str(tmp_path / "g")])
    assert rc == 1
    assert error_json(capsys)["error"] == "SchemaError"
