"""Command-line entry point: ``czoom <subcommand> ...``.

Exit status is 0 on success, 1 on usage errors and 2 on data errors.
"""

import argparse
import json
import logging
import os
import sys
from collections import defaultdict

from . import jsonio
from .config import Settings, UsageError, describe_defaults
from .crop_labeling import crop_statistics
from .dataset import (
    augment_with_crops,
    extract_crop_rasters,
    label_dataset,
    load_dataset,
    save_dataset,
)
from .errors import CZoomError, FusionError
from .evaluation import evaluate
from .fusion import (
    CropWorkOrder,
    detections_from_results,
    detections_to_results,
    fuse,
    select_crops,
)
from .simulator import run_pipeline_experiment

log = logging.getLogger("czoom")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _read_json(path):
    with open(path, encoding="utf-8") as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise CZoomError(f"{path}: {exc}") from None


def _write(obj, path):
    if path in (None, "-"):
        sys.stdout.write(jsonio.dumps(obj))
    else:
        jsonio.dump(obj, path)


def _id_key(v):
    return (type(v).__name__, v)


def _settings(args) -> Settings:
    s = Settings()
    if args.config:
        s.read_file(args.config)
    s.apply_overrides(args.set)
    for dest, (section, key) in _FLAG_KEYS.items():
        value = getattr(args, dest, None)
        if value is not None:
            s.set(section, key, value)
    return s


def cmd_label_crops(args, s: Settings):
    ds = load_dataset(args.inp)
    out = []
    for image, crops in label_dataset(ds, s.crop_label(), args.workers, s.values["augment"]["crop_category_name"]):
        for c in crops:
            out.append({"image_id": image.id, "bbox": c.box.to_xywh(), "member_count": c.member_count})
    _write(out, args.out)
    log.info("labeled %d crops over %d images", len(out), len(ds.images))


def cmd_augment(args, s: Settings):
    ds = load_dataset(args.inp)
    aug = augment_with_crops(ds, s.augment(), workers=args.workers)
    save_dataset(aug, args.out)
    log.info("added %d images and %d annotations", len(aug.images) - len(ds.images),
             len(aug.annotations) - len(ds.annotations))


def cmd_extract_crops(args, s: Settings):
    ds = load_dataset(args.inp)
    report = extract_crop_rasters(ds, args.images, args.out, workers=args.workers)
    print(f"wrote {report.written} crop image(s)")
    for name, reason in report.failures:
        print(f"failed: {name}: {reason}", file=sys.stderr)
    return EXIT_DATA if report.failures else EXIT_OK


def _crop_category(args, s: Settings, ds=None):
    if s.values["fusion"]["crop_category_id"] is not None:
        return s.values["fusion"]["crop_category_id"]
    if ds is None and getattr(args, "gt", None):
        ds = load_dataset(args.gt)
    if ds is not None:
        cid = ds.category_id(s.values["augment"]["crop_category_name"])
        if cid is not None:
            return cid
    raise UsageError("crop category unknown: pass --crop-category-id or a --gt dataset with a "
                     f"{s.values['augment']['crop_category_name']!r} category")


def cmd_make_work_orders(args, s: Settings):
    ds = load_dataset(args.gt)
    cfg = s.fusion(_crop_category(args, s, ds))
    images = ds.image_by_id()
    by_image = defaultdict(list)
    for d in detections_from_results(_read_json(args.dets)):
        if d.image_id not in images:
            raise CZoomError(f"detection references unknown image id {d.image_id!r}")
        by_image[d.image_id].append(d)
    records = []
    for image_id in sorted(by_image, key=_id_key):
        for order in select_crops(by_image[image_id], cfg, images[image_id].extent):
            records.append(order.to_record(crop_id=len(records)))
    jsonio.dump_lines(records, args.out)
    log.info("wrote %d work orders", len(records))


def cmd_fuse(args, s: Settings):
    cfg = s.fusion(_crop_category(args, s))
    stage1 = defaultdict(list)
    for d in detections_from_results(_read_json(args.dets)):
        stage1[d.image_id].append(d)
    orders = {}
    for rec in jsonio.load_lines(args.orders) if args.orders else []:
        orders[rec["crop_id"]] = CropWorkOrder.from_record(rec)
    stage2 = defaultdict(list)
    raw2 = _read_json(args.crop_dets) if args.crop_dets else []
    for rec in raw2:
        cid = rec.get("crop_id")
        if cid not in orders:
            raise FusionError(f"crop detection references unknown crop_id {cid!r}")
        stage2[cid].extend(detections_from_results([rec]))
    per_image = defaultdict(list)
    for cid in sorted(orders):
        per_image[orders[cid].image_id].append((orders[cid], stage2.get(cid, [])))
    out = []
    for image_id in sorted(set(stage1) | set(per_image), key=_id_key):
        for order, dets in per_image.get(image_id, []):
            bad = [d.image_id for d in dets if d.image_id != order.image_id]
            if bad:
                raise FusionError(f"crop detections carry image id {bad[0]!r} but their work order "
                                  f"belongs to image id {order.image_id!r}")
        out.extend(fuse(stage1.get(image_id, []), per_image.get(image_id, []), cfg))
    _write(detections_to_results(out), args.out)


def cmd_eval(args, s: Settings):
    ds = load_dataset(args.gt)
    crop_cat = ds.category_id(s.values["augment"]["crop_category_name"])
    exclude = () if crop_cat is None else (crop_cat,)
    res = evaluate(ds, detections_from_results(_read_json(args.dets)), s.evaluation(), exclude)
    print(res.format_table())
    if args.out:
        jsonio.dump(res.to_dict(), args.out)


def cmd_simulate(args, s: Settings):
    exp = s.values["experiment"]
    n_images = args.images if args.images is not None else exp["n_images"]
    seed = args.seed if args.seed is not None else exp["seed"]
    from .simulator import CROP_CATEGORY_ID

    res = run_pipeline_experiment(s.scene(), s.detector(), s.crop_label(), s.fusion(CROP_CATEGORY_ID),
                                  n_images=n_images, seed=seed, eval_cfg=s.evaluation())
    print("baseline (single pass)")
    print(res.baseline.format_table())
    print("fused (two stage)")
    print(res.fused.format_table())
    if args.out:
        jsonio.dump(res.to_dict(), args.out)
    if args.csv:
        with open(args.csv, "w", encoding="utf-8", newline="") as fh:
            fh.write(res.recall_csv())


def cmd_stats(args, s: Settings):
    ds = load_dataset(args.inp)
    _write(crop_statistics(ds, s.crop_label(), workers=args.workers).to_dict(), args.out)


# flag dest -> (section, key)
_FLAG_KEYS = {
    "n_steps": ("crop_labeling", "n_steps"),
    "sigma": ("crop_labeling", "sigma"),
    "theta": ("crop_labeling", "theta"),
    "pi": ("crop_labeling", "pi"),
    "min_members": ("crop_labeling", "min_members"),
    "strategy": ("crop_labeling", "strategy"),
    "strategy_param": ("crop_labeling", "strategy_param"),
    "target_resolution": ("augment", "target_resolution"),
    "tau": ("fusion", "crop_confidence_threshold"),
    "crop_nms_iou": ("fusion", "crop_nms_iou"),
    "final_nms_iou": ("fusion", "final_nms_iou"),
    "crop_target_resolution": ("fusion", "crop_target_resolution"),
    "crop_category_id": ("fusion", "crop_category_id"),
    "max_dets": ("evaluation", "max_dets"),
}


def _add_label_flags(p):
    g = p.add_argument_group("crop labeling")
    g.add_argument("--n-steps", type=int, help="number of merging steps N (default: 2)")
    g.add_argument("--sigma", type=float, help="expansion in pixels (default: 20)")
    g.add_argument("--theta", type=float, help="overlap threshold (default: 0.1)")
    g.add_argument("--pi", type=float, help="maximum crop-to-image area ratio (default: 0.3)")
    g.add_argument("--min-members", type=int, help="minimum boxes per crop (default: 2)")
    g.add_argument("--strategy", choices=["iterative", "single_step_factor", "single_step_pixels"],
                   help="merging strategy (default: iterative)")
    g.add_argument("--strategy-param", type=float, help="factor or pixels for single-step strategies")


def _add_fusion_flags(p):
    g = p.add_argument_group("fusion")
    g.add_argument("--tau", type=float, help="crop confidence threshold (default: 0.7)")
    g.add_argument("--crop-nms-iou", type=float, help="NMS IoU among crops (default: 0.5)")
    g.add_argument("--final-nms-iou", type=float, help="NMS IoU after merging (default: 0.5)")
    g.add_argument("--crop-target-resolution", type=int, help="shorter edge of upscaled crops (default: 650)")
    g.add_argument("--crop-category-id", type=int, help="category id of the density crop class")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI config file")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config key (repeatable); KEY is key or section.key")
    common.add_argument("--workers", type=int, default=os.cpu_count() or 1, help="worker processes")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = _Parser(prog="czoom", description="Density-crop labeling, two-stage fusion and evaluation.")
    sub = parser.add_subparsers(dest="command", metavar="SUBCOMMAND", parser_class=_Parser)
    sub.required = True

    def add(name, help_text, fn):
        p = sub.add_parser(name, parents=[common], help=help_text, description=help_text,
                           epilog=describe_defaults(), formatter_class=argparse.RawDescriptionHelpFormatter)
        p.set_defaults(func=fn)
        return p

    p = add("label-crops", "label density crops on a COCO dataset and write a crops JSON", cmd_label_crops)
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out")
    _add_label_flags(p)

    p = add("augment", "add the density crop class and upscaled crop images to a COCO dataset", cmd_augment)
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--target-resolution", type=int, help="shorter edge of crop images (default: 650)")
    _add_label_flags(p)

    p = add("extract-crops", "write crop rasters for the crop images of an augmented dataset", cmd_extract_crops)
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--images", required=True, help="directory holding the parent images")
    p.add_argument("--out", required=True, help="output directory")

    p = add("make-work-orders", "select confident crops from stage-one results", cmd_make_work_orders)
    p.add_argument("--gt", required=True, help="COCO dataset providing image sizes")
    p.add_argument("--dets", required=True, help="stage-one COCO results JSON")
    p.add_argument("--out", required=True, help="work orders, JSON lines")
    _add_fusion_flags(p)

    p = add("fuse", "merge stage-one and re-projected stage-two detections", cmd_fuse)
    p.add_argument("--dets", required=True, help="stage-one COCO results JSON")
    p.add_argument("--orders", help="work orders, JSON lines")
    p.add_argument("--crop-dets", help="stage-two COCO results JSON; each record carries crop_id")
    p.add_argument("--gt", help="COCO dataset used to look up the crop category id")
    p.add_argument("--out")
    _add_fusion_flags(p)

    p = add("eval", "COCO-style AP of detections against a dataset", cmd_eval)
    p.add_argument("--gt", required=True)
    p.add_argument("--dets", required=True)
    p.add_argument("--out", help="metrics JSON")
    p.add_argument("--max-dets", type=int, help="detections kept per image and category (default: 500)")

    p = add("simulate", "run the synthetic single-pass vs two-stage experiment", cmd_simulate)
    p.add_argument("--images", type=int, help="number of synthetic images (default: 200)")
    p.add_argument("--seed", type=int, help="experiment seed (default: 42)")
    p.add_argument("--out", help="metrics JSON")
    p.add_argument("--csv", help="per-size recall CSV")
    _add_label_flags(p)
    _add_fusion_flags(p)

    p = add("stats", "crop statistics of a COCO dataset", cmd_stats)
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out")
    _add_label_flags(p)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s: %(message)s")
    try:
        settings = _settings(args)
        status = args.func(args, settings)
    except UsageError as exc:
        print(f"czoom {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CZoomError, OSError, KeyError, TypeError) as exc:
        print(f"czoom {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA
    return status or EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
