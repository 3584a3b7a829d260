import json
import subprocess
import sys
from pathlib import Path

import pytest
from PIL import Image

from czoom.cli import main
from czoom.config import DEFAULTS, Settings, UsageError, default_ini, resolve_key

from conftest import coco_doc

SUBCOMMANDS = ["label-crops", "augment", "extract-crops", "make-work-orders", "fuse", "eval", "simulate", "stats"]
REPO = Path(__file__).resolve().parents[1]


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture
def gt_path(three_box_doc, write_json):
    return write_json("gt.json", three_box_doc)


@pytest.fixture
def stage1(tmp_path, gt_path):
    """Augmented GT, a stage-one result file with one confident crop and a stage-two result file."""
    aug = tmp_path / "aug.json"
    assert run("augment", "--in", gt_path, "--out", aug, "--workers", 1) == 0
    dets = [
        {"image_id": 1, "category_id": 1, "bbox": [100, 100, 20, 20], "score": 0.9},
        {"image_id": 1, "category_id": 2, "bbox": [80, 80, 120, 65], "score": 0.95},
        {"image_id": 1, "category_id": 2, "bbox": [600, 600, 100, 100], "score": 0.4},
    ]
    (tmp_path / "stage1.json").write_text(json.dumps(dets))
    crop_dets = [
        {"crop_id": 0, "image_id": 1, "category_id": 1, "bbox": [500, 250, 200, 200], "score": 0.8},
        {"crop_id": 0, "image_id": 1, "category_id": 1, "bbox": [200, 200, 200, 200], "score": 0.7},
    ]
    (tmp_path / "stage2.json").write_text(json.dumps(crop_dets))
    return aug


class TestHelp:
    @pytest.mark.parametrize("cmd", SUBCOMMANDS)
    def test_help_lists_defaults(self, cmd, capsys):
        with pytest.raises(SystemExit) as exc:
            main([cmd, "--help"])
        assert exc.value.code == 0
        text = capsys.readouterr().out
        for needle in ("n_steps=2", "sigma=20", "theta=0.1", "pi=0.3", "crop_confidence_threshold=0.7"):
            assert needle in text
        for section, keys in DEFAULTS.items():
            assert f"[{section}]" in text
            assert all(f"{k}=" in text for k in keys)

    def test_module_entry_point(self):
        proc = subprocess.run([sys.executable, "-m", "czoom", "--help"], capture_output=True, text=True)
        assert proc.returncode == 0
        assert all(cmd in proc.stdout for cmd in SUBCOMMANDS)


class TestUsageErrors:
    def test_unknown_subcommand(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["bogus"])
        assert exc.value.code == 1
        assert "usage" in capsys.readouterr().err

    def test_unknown_flag(self):
        with pytest.raises(SystemExit) as exc:
            main(["eval", "--gt", "a", "--dets", "b", "--frobnicate"])
        assert exc.value.code == 1

    def test_no_subcommand(self):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 1

    def test_unknown_override(self, gt_path, tmp_path, capsys):
        assert run("label-crops", "--in", gt_path, "--set", "nonsense=3") == 1
        assert "unknown config key" in capsys.readouterr().err

    def test_ambiguous_override(self):
        with pytest.raises(UsageError, match="ambiguous"):
            resolve_key("seed")
        assert resolve_key("scene.seed") == ("scene", "seed")
        assert resolve_key("theta") == ("crop_labeling", "theta")

    def test_fuse_without_crop_category(self, tmp_path):
        (tmp_path / "d.json").write_text("[]")
        assert run("fuse", "--dets", tmp_path / "d.json") == 1


class TestConfig:
    def test_default_file_matches_code(self):
        assert (REPO / "configs" / "default.ini").read_text() == default_ini()
        s = Settings()
        s.read_file(REPO / "configs" / "default.ini")
        assert s.values == DEFAULTS
        cl, fu = s.values["crop_labeling"], s.values["fusion"]
        assert (cl["n_steps"], cl["sigma"], cl["theta"], cl["pi"], fu["crop_confidence_threshold"]) == (2, 20, 0.1, 0.3, 0.7)

    def test_layering(self, tmp_path, gt_path):
        ini = tmp_path / "c.ini"
        ini.write_text("[crop_labeling]\nsigma = 0\n")
        out = tmp_path / "crops.json"
        # file says sigma 0 (no crop), flag restores 20
        assert run("label-crops", "--in", gt_path, "--out", out, "--config", ini) == 0
        assert json.loads(out.read_text()) == []
        assert run("label-crops", "--in", gt_path, "--out", out, "--config", ini, "--sigma", 20) == 0
        assert len(json.loads(out.read_text())) == 1
        assert run("label-crops", "--in", gt_path, "--out", out, "--config", ini, "--set", "sigma=20") == 0
        assert len(json.loads(out.read_text())) == 1

    def test_bad_config_file(self, tmp_path, gt_path):
        ini = tmp_path / "c.ini"
        ini.write_text("[nowhere]\nx = 1\n")
        assert run("label-crops", "--in", gt_path, "--config", ini) == 1

    def test_tuple_and_curve_values(self):
        s = Settings()
        s.apply_overrides(["object_size=4, 9", "miss_curve=5:0, 15:0.5, 30:1", "crop_category_id=7"])
        assert s.scene().object_size == (4.0, 9.0)
        assert s.detector().miss_curve == ((5.0, 0.0), (15.0, 0.5), (30.0, 1.0))
        assert s.fusion().crop_category_id == 7


class TestSubcommands:
    def test_label_crops(self, gt_path, tmp_path):
        out = tmp_path / "crops.json"
        assert run("label-crops", "--in", gt_path, "--out", out) == 0
        assert json.loads(out.read_text()) == [{"image_id": 1, "bbox": [80, 80, 120, 65], "member_count": 3}]

    def test_label_crops_stdout(self, gt_path, capsys):
        assert run("label-crops", "--in", gt_path) == 0
        assert json.loads(capsys.readouterr().out)[0]["member_count"] == 3

    def test_augment(self, stage1):
        doc = json.loads(stage1.read_text())
        assert len(doc["images"]) == 2
        assert doc["images"][1]["width"] == 1200 and doc["images"][1]["height"] == 650
        assert doc["categories"][-1] == {"id": 2, "name": "density_crop"}

    def test_extract_crops(self, stage1, tmp_path):
        (tmp_path / "img").mkdir()
        Image.new("RGB", (1000, 1000)).save(tmp_path / "img" / "img1.png")
        assert run("extract-crops", "--in", stage1, "--images", tmp_path / "img", "--out", tmp_path / "crops") == 0
        with Image.open(tmp_path / "crops" / "img1_crop0.png") as im:
            assert im.size == (1200, 650)

    def test_extract_crops_missing_parent(self, stage1, tmp_path, capsys):
        assert run("extract-crops", "--in", stage1, "--images", tmp_path / "none", "--out", tmp_path / "c") == 2
        assert "failed: img1_crop0.png" in capsys.readouterr().err

    def test_work_orders_and_fuse(self, stage1, tmp_path):
        orders = tmp_path / "orders.jsonl"
        assert run("make-work-orders", "--gt", stage1, "--dets", tmp_path / "stage1.json", "--out", orders) == 0
        recs = [json.loads(line) for line in orders.read_text().splitlines()]
        assert recs == [{"crop_box": [80, 80, 200, 145], "crop_id": 0, "image_id": 1,
                         "score": 0.95, "upscaled_extent": [1200, 650]}]
        fused = tmp_path / "fused.json"
        assert run("fuse", "--gt", stage1, "--dets", tmp_path / "stage1.json", "--orders", orders,
                   "--crop-dets", tmp_path / "stage2.json", "--out", fused) == 0
        out = json.loads(fused.read_text())
        # the 0.7 stage-two copy of the first box is suppressed by the 0.9 stage-one box
        assert out == [
            {"bbox": [100, 100, 20, 20], "category_id": 1, "image_id": 1, "score": 0.9},
            {"bbox": [130, 105, 20, 20], "category_id": 1, "image_id": 1, "score": 0.8},
        ]

    def test_fuse_mismatched_image(self, stage1, tmp_path, capsys):
        orders = tmp_path / "orders.jsonl"
        run("make-work-orders", "--gt", stage1, "--dets", tmp_path / "stage1.json", "--out", orders)
        bad = [{"crop_id": 0, "image_id": 77, "category_id": 1, "bbox": [0, 0, 5, 5], "score": 0.5}]
        (tmp_path / "bad.json").write_text(json.dumps(bad))
        code = run("fuse", "--crop-category-id", 2, "--dets", tmp_path / "stage1.json", "--orders", orders,
                   "--crop-dets", tmp_path / "bad.json")
        assert code == 2
        assert "77" in capsys.readouterr().err

    def test_eval_perfect(self, gt_path, tmp_path, capsys):
        doc = json.loads(gt_path.read_text())
        dets = [{"image_id": a["image_id"], "category_id": a["category_id"], "bbox": a["bbox"], "score": 0.9}
                for a in doc["annotations"]]
        (tmp_path / "dets.json").write_text(json.dumps(dets))
        assert run("eval", "--gt", gt_path, "--dets", tmp_path / "dets.json", "--out", tmp_path / "m.json") == 0
        head, vals = capsys.readouterr().out.splitlines()
        assert dict(zip(head.split(), vals.split()))["AP"] == "100.00"
        assert json.loads((tmp_path / "m.json").read_text())["metrics"]["AP"] == 1.0

    def test_eval_ignores_crop_class(self, stage1, tmp_path, capsys):
        dets = [{"image_id": 1, "category_id": 1, "bbox": [100, 100, 20, 20], "score": 0.9}]
        (tmp_path / "dets.json").write_text(json.dumps(dets))
        assert run("eval", "--gt", stage1, "--dets", tmp_path / "dets.json", "--out", tmp_path / "m.json") == 0
        assert list(json.loads((tmp_path / "m.json").read_text())["per_category"]) == ["1"]

    def test_eval_unknown_image(self, gt_path, tmp_path):
        (tmp_path / "dets.json").write_text(json.dumps([{"image_id": 9, "category_id": 1, "bbox": [0, 0, 1, 1],
                                                         "score": 0.5}]))
        assert run("eval", "--gt", gt_path, "--dets", tmp_path / "dets.json") == 2

    def test_data_errors(self, tmp_path):
        (tmp_path / "bad.json").write_text("{not json")
        assert run("label-crops", "--in", tmp_path / "bad.json") == 2
        assert run("stats", "--in", tmp_path / "missing.json") == 2

    def test_simulate(self, tmp_path, capsys):
        assert run("simulate", "--images", 3, "--seed", 1, "--out", tmp_path / "m.json", "--csv", tmp_path / "r.csv") == 0
        text = capsys.readouterr().out
        assert "baseline" in text and "fused" in text
        assert set(json.loads((tmp_path / "m.json").read_text())) >= {"baseline", "fused", "recall50"}
        assert (tmp_path / "r.csv").read_text().startswith("area,")

    def test_stats(self, write_json, tmp_path):
        images = [(i, 1000, 1000) for i in range(1, 11)]
        anns = [(i, 1, b) for i in range(1, 11)
                for b in ([100, 100, 20, 20], [130, 105, 20, 20], [160, 100, 20, 20])]
        path = write_json("ten.json", coco_doc(images, anns))
        assert run("stats", "--in", path, "--out", tmp_path / "s.json") == 0
        stats = json.loads((tmp_path / "s.json").read_text())
        assert stats["total_crops"] == 10 and stats["crops_per_image"] == 1.0
