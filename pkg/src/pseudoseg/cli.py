"""Batch command line: gen-labels, gen-episodes, eval, synth-check.

Outputs are byte-identical for any --workers value: every item gets a seed
derived from (global seed, item identity), items write disjoint files, and
shared files (manifest, sidecars, summaries) are assembled in sorted item
order after all workers finish. One bad image never aborts a batch; it is
logged, counted, and skipped.

Verbosity comes from the IPE_LOG environment variable (DEBUG, INFO,
WARNING, ERROR; default INFO).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import multiprocessing
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import episodes as egm
from . import feature_io, imageops, metrics, synthetic
from .config import RunConfig, load_config, save_config, serialize_config
from .errors import PseudosegError, SkippedImage
from .pseudolabel import PseudoLabel, generate_pseudo_labels_with_audit
from .seeds import derive_seed

log = logging.getLogger("pseudoseg")

IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg", ".bmp")
FMAP_EXTENSION = ".fmap"


def setup_logging() -> None:
    level = os.environ.get("IPE_LOG", "INFO").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.INFO),
        format="%(levelname)s %(name)s: %(message)s",
    )


def _list_images(image_dir: Path) -> list[Path]:
    out = [
        p
        for p in sorted(image_dir.iterdir())
        if p.suffix.lower() in IMAGE_EXTENSIONS and p.is_file()
    ]
    return out


def _find_image(image_dir: Path, stem: str) -> Path | None:
    for ext in IMAGE_EXTENSIONS:
        candidate = image_dir / f"{stem}{ext}"
        if candidate.exists():
            return candidate
    return None


def _pool_map(fn, tasks: list, workers: int) -> list:
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    ctx = multiprocessing.get_context("spawn")
    with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
        return list(pool.map(fn, tasks))


# ---------------------------------------------------------------- gen-labels


def _label_task(task: tuple) -> dict:
    """Process one image: load, run the pipeline, write masks + sidecar."""
    stem, image_path, fmap_path, cfg = task
    labels_dir = Path(cfg.output_dir) / "labels"
    try:
        img = feature_io.load_image(image_path)
        img = imageops.resize_image(img, cfg.pgm.input_size, cfg.pgm.input_size)
        fmap = feature_io.load_feature_map(fmap_path)
        pgm_cfg = dataclasses.replace(
            cfg.pgm,
            spectral=dataclasses.replace(
                cfg.pgm.spectral, seed=derive_seed(cfg.global_seed, "labels", stem)
            ),
        )
        labels, audit = generate_pseudo_labels_with_audit(img, fmap, pgm_cfg, stem)
    except SkippedImage as exc:
        return {"stem": stem, "status": "skipped", "reason": str(exc.reason)}
    except Exception as exc:  # per-item isolation: one bad image never kills a batch
        return {"stem": stem, "status": "skipped", "reason": f"{type(exc).__name__}: {exc}"}
    for label in labels:
        feature_io.save_mask(label.mask, labels_dir / f"{stem}_c{label.cluster_id}.png")
    (labels_dir / f"{stem}.meta.txt").write_text(audit.to_sidecar(), encoding="utf-8")
    return {"stem": stem, "status": "ok", "labels": len(labels)}


def run_gen_labels(cfg: RunConfig, limit: int | None = None) -> dict:
    image_dir = Path(cfg.image_dir)
    feature_dir = Path(cfg.feature_dir)
    if not image_dir.is_dir() or not feature_dir.is_dir():
        raise FileNotFoundError("image_dir and feature_dir must exist")
    (Path(cfg.output_dir) / "labels").mkdir(parents=True, exist_ok=True)
    images = _list_images(image_dir)
    if limit is not None:
        images = images[:limit]
    tasks = []
    results = []
    for path in images:
        fmap_path = feature_dir / f"{path.stem}{FMAP_EXTENSION}"
        if not fmap_path.exists():
            results.append(
                {"stem": path.stem, "status": "skipped", "reason": "no matching feature map"}
            )
            continue
        tasks.append((path.stem, str(path), str(fmap_path), cfg))
    results.extend(_pool_map(_label_task, tasks, cfg.workers))
    results.sort(key=lambda r: r["stem"])

    generated = sum(r.get("labels", 0) for r in results)
    skipped = [r for r in results if r["status"] == "skipped"]
    summary = {
        "images": len(images),
        "processed": len(results) - len(skipped),
        "generated_labels": generated,
        "skipped": len(skipped),
        "skip_reasons": {},
    }
    for r in skipped:
        summary["skip_reasons"].setdefault(r["reason"], 0)
        summary["skip_reasons"][r["reason"]] += 1
        log.info("skipped %s: %s", r["stem"], r["reason"])
    log.info(
        "gen-labels: %d images, %d labels written, %d skipped",
        summary["images"],
        generated,
        summary["skipped"],
    )
    return summary


# -------------------------------------------------------------- gen-episodes

_MANIFEST_NAME = "episodes.manifest"
_MANIFEST_HEADER = (
    "# pseudo-episode store\n"
    "# fields: episode_id\tsource_image_id\tcluster_id\tk_shot\tseed\n"
    "# training mix: feed pseudo-episodes at 4x the real-episode batch size\n"
)


def _episode_task(task: tuple) -> dict:
    stem, cluster_id, image_path, mask_path, cfg = task
    episodes_dir = Path(cfg.output_dir) / "episodes"
    try:
        img = feature_io.load_image(image_path)
        mask = feature_io.load_mask(mask_path)
        img = imageops.resize_image(img, mask.shape[0], mask.shape[1])
        label = PseudoLabel(
            mask=mask,
            source_image_id=stem,
            cluster_id=cluster_id,
            d_q=0.0,
            ch_of_best=0.0,
            k_best=0,
        )
    except Exception as exc:  # per-item isolation
        return {"stem": stem, "cluster": cluster_id, "records": [], "failures": [str(exc)]}
    records = []
    failures = []
    for index in range(cfg.episodes_per_label):
        seed = derive_seed(cfg.global_seed, stem, cluster_id, index)
        episode_id = f"{stem}_c{cluster_id}_e{index:04d}"
        try:
            episode = egm.generate_episode(img, label, cfg.k_shot, cfg.transforms, seed)
        except (PseudosegError, ValueError) as exc:
            failures.append(f"{episode_id}: {exc}")
            continue
        _write_episode(episode, episodes_dir / episode_id)
        records.append(
            f"{episode_id}\t{stem}\t{cluster_id}\t{episode.k_shot}\t{episode.seed}"
        )
    return {"stem": stem, "cluster": cluster_id, "records": records, "failures": failures}


def _write_episode(episode: egm.Episode, directory: Path) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    feature_io.save_image(episode.query_image, directory / "query.png")
    feature_io.save_mask(episode.query_mask, directory / "query_mask.png")
    for i, (img, mask) in enumerate(episode.supports, start=1):
        feature_io.save_image(img, directory / f"support_{i}.png")
        feature_io.save_mask(mask, directory / f"support_{i}_mask.png")


def run_gen_episodes(
    cfg: RunConfig, labels_dir: Path | None = None, limit: int | None = None
) -> dict:
    image_dir = Path(cfg.image_dir)
    if labels_dir is None:
        labels_dir = Path(cfg.output_dir) / "labels"
    if not labels_dir.is_dir():
        raise FileNotFoundError(f"label store {labels_dir} does not exist")
    episodes_dir = Path(cfg.output_dir) / "episodes"
    episodes_dir.mkdir(parents=True, exist_ok=True)

    entries = []  # (stem, cluster_id, mask_path)
    for path in sorted(labels_dir.glob("*_c*.png")):
        stem, _, suffix = path.stem.rpartition("_c")
        if not stem or not suffix.isdigit():
            continue
        entries.append((stem, int(suffix), path))
    if limit is not None:
        keep = sorted({stem for stem, _, _ in entries})[:limit]
        entries = [e for e in entries if e[0] in set(keep)]

    tasks = []
    missing = []
    for stem, cluster_id, mask_path in entries:
        image_path = _find_image(image_dir, stem)
        if image_path is None:
            missing.append(stem)
            log.info("no source image for label %s_c%d", stem, cluster_id)
            continue
        tasks.append((stem, cluster_id, str(image_path), str(mask_path), cfg))
    results = _pool_map(_episode_task, tasks, cfg.workers)

    records = []
    failures = []
    for r in sorted(results, key=lambda r: (r["stem"], r["cluster"])):
        records.extend(r["records"])
        failures.extend(r["failures"])
    (episodes_dir / _MANIFEST_NAME).write_text(
        _MANIFEST_HEADER + "".join(line + "\n" for line in records), encoding="utf-8"
    )
    for failure in failures:
        log.info("episode failed: %s", failure)
    summary = {
        "labels": len(entries),
        "episodes": len(records),
        "failed_episodes": len(failures),
        "missing_images": len(missing),
    }
    log.info(
        "gen-episodes: %d labels, %d episodes written, %d failed",
        summary["labels"],
        summary["episodes"],
        summary["failed_episodes"],
    )
    return summary


# --------------------------------------------------------------------- eval


def run_eval(pred_dir: Path, gt_dir: Path, records_path: Path | None = None) -> dict:
    pred_names = {p.name for p in pred_dir.glob("*.png")}
    gt_names = {p.name for p in gt_dir.glob("*.png")}
    common = sorted(pred_names & gt_names)
    for name in sorted(pred_names ^ gt_names):
        log.warning("unpaired mask: %s", name)
    rows = []
    total = metrics.ConfusionCounts(0, 0, 0, 0)
    for name in common:
        counts = metrics.confusion(
            feature_io.load_mask(pred_dir / name), feature_io.load_mask(gt_dir / name)
        )
        rows.append((name, metrics.iou(counts), counts))
        total = total + counts
    mean, excluded = metrics.mean_iou_with_exclusions([iou for _, iou, _ in rows])
    fb = metrics.fb_iou(total) if common else None

    width = max([len(n) for n in common] + [4])
    print(f"{'name':<{width}}  iou")
    for name, pair_iou, _ in rows:
        text = "undefined" if pair_iou is None else f"{pair_iou:.6f}"
        print(f"{name:<{width}}  {text}")
    print(f"pairs={len(common)} excluded_undefined={excluded}")
    print("mIoU=" + ("undefined" if mean is None else f"{mean:.6f}"))
    print("FB-IoU=" + ("undefined" if fb is None else f"{fb:.6f}"))

    if records_path is not None:
        with open(records_path, "w", encoding="utf-8") as fh:
            for name, pair_iou, counts in rows:
                fh.write(
                    json.dumps(
                        {
                            "name": name,
                            "iou": pair_iou,
                            "tp": counts.tp,
                            "fp": counts.fp,
                            "fn": counts.fn,
                            "tn": counts.tn,
                        }
                    )
                    + "\n"
                )
            fh.write(
                json.dumps(
                    {"summary": {"pairs": len(common), "miou": mean, "fb_iou": fb, "excluded": excluded}}
                )
                + "\n"
            )
    return {"pairs": len(common), "miou": mean, "fb_iou": fb, "excluded": excluded}


# -------------------------------------------------------------- synth-check


def run_synth_check(out_dir: Path | None, seed: int, threshold: float = 0.9) -> dict:
    """Plant a disc, run the whole pipeline, report IoU against the truth."""
    cfg = RunConfig()
    size = cfg.pgm.input_size
    img = synthetic.disc_image(size, seed=seed)
    fmap = synthetic.disc_feature_map(size=size, seed=seed)
    truth = synthetic.disc_mask(size)
    pgm_cfg = dataclasses.replace(
        cfg.pgm,
        spectral=dataclasses.replace(cfg.pgm.spectral, seed=derive_seed(seed, "synth")),
    )
    labels, audit = generate_pseudo_labels_with_audit(img, fmap, pgm_cfg, "synthetic-disc")
    top = labels[0]
    counts = metrics.confusion(top.mask, truth)
    achieved = metrics.iou(counts)
    passed = achieved is not None and achieved >= threshold
    print(f"k_best={audit.k_best}")
    print(f"labels={len(labels)}")
    print(f"top_label_iou={achieved:.4f}")
    print(f"synth-check: {'PASS' if passed else 'FAIL'} (threshold {threshold})")
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        feature_io.save_image(img, out_dir / "image.png")
        feature_io.save_mask(truth, out_dir / "truth.png")
        for label in labels:
            feature_io.save_mask(label.mask, out_dir / f"label_c{label.cluster_id}.png")
        (out_dir / "meta.txt").write_text(audit.to_sidecar(), encoding="utf-8")
    return {"iou": achieved, "passed": passed}


# ---------------------------------------------------------------------- CLI


def _apply_overrides(cfg: RunConfig, args: argparse.Namespace) -> RunConfig:
    updates = {}
    for flag, name in (
        ("images", "image_dir"),
        ("features", "feature_dir"),
        ("out", "output_dir"),
        ("seed", "global_seed"),
        ("workers", "workers"),
        ("k_shot", "k_shot"),
        ("episodes_per_label", "episodes_per_label"),
    ):
        value = getattr(args, flag, None)
        if value is not None:
            updates[name] = value
    return dataclasses.replace(cfg, **updates) if updates else cfg


def _load_cfg(args: argparse.Namespace) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    return _apply_overrides(cfg, args)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pseudoseg",
        description="Generate pseudo segmentation labels and K-shot episodes "
        "from unlabeled images.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", type=Path, help="JSON run configuration")
        p.add_argument("--images", help="image directory (overrides config)")
        p.add_argument("--out", help="output directory (overrides config)")
        p.add_argument("--seed", type=int, help="global seed (overrides config)")
        p.add_argument("--workers", type=int, help="parallel workers (overrides config)")
        p.add_argument("--limit", type=int, help="process only the first N images")

    p = sub.add_parser("gen-labels", help="generate pseudo-label masks")
    add_common(p)
    p.add_argument("--features", help="feature-map directory (overrides config)")

    p = sub.add_parser("gen-episodes", help="generate K-shot episodes from a label store")
    add_common(p)
    p.add_argument("--labels", type=Path, help="label store (default <out>/labels)")
    p.add_argument("--k-shot", dest="k_shot", type=int, help="supports per episode")
    p.add_argument(
        "--episodes-per-label",
        dest="episodes_per_label",
        type=int,
        help="episodes per pseudo-label",
    )

    p = sub.add_parser("eval", help="score predicted masks against ground truth")
    p.add_argument("--pred", type=Path, required=True)
    p.add_argument("--gt", type=Path, required=True)
    p.add_argument("--records", type=Path, help="write line-delimited JSON records")

    p = sub.add_parser("synth-check", help="end-to-end self test on a planted disc")
    p.add_argument("--out", type=Path, help="directory for diagnostic artifacts")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("init-config", help="write a config file with all defaults")
    p.add_argument("path", type=Path)
    return parser


def main(argv: list[str] | None = None) -> int:
    setup_logging()
    args = build_parser().parse_args(argv)
    try:
        if args.command == "gen-labels":
            summary = run_gen_labels(_load_cfg(args), args.limit)
            print(json.dumps(summary, sort_keys=True))
            return 0
        if args.command == "gen-episodes":
            summary = run_gen_episodes(_load_cfg(args), args.labels, args.limit)
            print(json.dumps(summary, sort_keys=True))
            return 0
        if args.command == "eval":
            summary = run_eval(args.pred, args.gt, args.records)
            return 0 if summary["pairs"] > 0 else 1
        if args.command == "synth-check":
            return 0 if run_synth_check(args.out, args.seed)["passed"] else 1
        if args.command == "init-config":
            save_config(RunConfig(), args.path)
            print(serialize_config(RunConfig()), end="")
            return 0
    except (FileNotFoundError, ValueError, PseudosegError) as exc:
        log.error("%s", exc)
        return 2
    return 2


if __name__ == "__main__":
    sys.exit(main())
