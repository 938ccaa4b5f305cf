"""Command-line interface exposing the pipeline as subcommands.

Directory conventions (pairing is by filename stem):

* label image:   ``<stem>.npy`` (int32 map) + ``<stem>.classes.json``
* prediction:    ``<stem>.prob.npy``, ``<stem>.dist.npy``, ``<stem>.classprob.npy``
* decode output: label image convention + ``<stem>.scores.json``

Exit codes: 0 success, 1 data/processing error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import augment as augment_mod
from . import balance, metrics, tensorio, tta
from .decode import DecodeConfig, decode
from .encode import LabelImage, class_frequencies, encode_targets
from .errors import StarsegError
from .geometry import RayConfig

_RESERVED_SUFFIXES = (".prob", ".dist", ".classprob", ".labels")


def _default_threads():
    try:
        return max(1, int(os.environ.get("STARSEG_THREADS", "1")))
    except ValueError:
        return 1


def _label_stems(d: Path):
    """Stems of instance-map files, skipping tensor files in the same directory."""
    return sorted(p.stem for p in d.glob("*.npy")
                  if not p.stem.endswith(_RESERVED_SUFFIXES))


def _pred_stems(d: Path):
    return sorted(p.name[: -len(".prob.npy")] for p in d.glob("*.prob.npy"))


def _run_jobs(jobs, threads):
    """Run (stem, fn) jobs, possibly in parallel.  Returns list of (stem, error)."""
    def wrap(item):
        stem, fn = item
        try:
            fn()
            return stem, None
        except (StarsegError, OSError, ValueError) as e:
            return stem, f"{type(e).__name__}: {e}"

    if threads <= 1:
        return [wrap(j) for j in jobs]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(wrap, jobs))


def _report_failures(results):
    ok = True
    for stem, err in results:
        if err is not None:
            print(f"error: {stem}: {err}", file=sys.stderr)
            ok = False
    return 0 if ok else 1


def _read_label(d: Path, stem: str, n_classes) -> LabelImage:
    inst = tensorio.read_array(d / f"{stem}.npy")
    classes = tensorio.read_class_assignment(d / f"{stem}.classes.json", n_classes)
    lab = LabelImage(inst, classes)
    lab.validate()
    return lab


# --- subcommands ---

def cmd_encode(args) -> int:
    rays = RayConfig(args.rays)
    in_dir = Path(args.labels)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    stems = _label_stems(in_dir)
    if not stems:
        print("warning: no label images found", file=sys.stderr)
        return 0

    def job(stem):
        def run():
            lab = _read_label(in_dir, stem, args.classes)
            pred = encode_targets(lab, rays, args.classes, prob_mode=args.prob_mode)
            tensorio.write_array(out_dir / f"{stem}.prob.npy", pred.prob)
            tensorio.write_array(out_dir / f"{stem}.dist.npy", pred.dist)
            tensorio.write_array(out_dir / f"{stem}.classprob.npy", pred.classprob)
        return run

    return _report_failures(_run_jobs([(s, job(s)) for s in stems], args.threads))


def _read_pred(d: Path, stem: str):
    from .encode import PredTensors
    pred = PredTensors(
        prob=tensorio.read_array(d / f"{stem}.prob.npy"),
        dist=tensorio.read_array(d / f"{stem}.dist.npy"),
        classprob=tensorio.read_array(d / f"{stem}.classprob.npy"),
    )
    pred.validate()
    return pred


def cmd_decode(args) -> int:
    rays = RayConfig(args.rays)
    cfg = DecodeConfig(
        prob_thresh=args.prob_thresh,
        nms_thresh=args.nms_thresh,
        refine=not args.no_refine,
    )
    in_dir = Path(args.pred)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    stems = _pred_stems(in_dir)
    if not stems:
        print("warning: no prediction tensors found", file=sys.stderr)
        return 0

    def job(stem):
        def run():
            pred = _read_pred(in_dir, stem)
            result = decode(pred, cfg, rays)
            tensorio.write_array(out_dir / f"{stem}.npy", result.instance_map)
            tensorio.write_class_assignment(out_dir / f"{stem}.classes.json",
                                            result.classes)
            with open(out_dir / f"{stem}.scores.json", "w", encoding="utf-8") as f:
                json.dump({str(k): round(float(v), 6)
                           for k, v in sorted(result.scores.items())},
                          f, indent=0, sort_keys=True)
                f.write("\n")
        return run

    return _report_failures(_run_jobs([(s, job(s)) for s in stems], args.threads))


def _format_table(report: metrics.PQReport) -> str:
    d = report.to_dict()
    head = ["mPQ+", "PQ", "PQ+"] + [f"PQ+_{t+1}" for t in range(report.n_classes)]
    vals = [d["mpq_plus"], d["pq"], d["pq_plus"]] + [c["pq_plus"] for c in d["per_class"]]
    w = max(len(h) for h in head) + 2
    lines = ["".join(h.rjust(w) for h in head),
             "".join(f"{v:.4f}".rjust(w) for v in vals)]
    return "\n".join(lines)


def cmd_eval(args) -> int:
    gt_dir = Path(args.gt)
    pred_dir = Path(args.pred)
    gt_stems = _label_stems(gt_dir)
    pred_stems = _label_stems(pred_dir)
    if gt_stems != pred_stems:
        only_gt = sorted(set(gt_stems) - set(pred_stems))
        only_pred = sorted(set(pred_stems) - set(gt_stems))
        print(f"error: filename mismatch; only in gt: {only_gt}; "
              f"only in pred: {only_pred}", file=sys.stderr)
        return 1
    if not gt_stems:
        print("warning: nothing to evaluate", file=sys.stderr)
        return 0

    def load(stem):
        return (_read_label(gt_dir, stem, args.classes),
                _read_label(pred_dir, stem, args.classes))

    try:
        if args.threads > 1:
            with ThreadPoolExecutor(max_workers=args.threads) as ex:
                pairs = list(ex.map(load, gt_stems))
        else:
            pairs = [load(s) for s in gt_stems]
        gts = [p[0] for p in pairs]
        preds = [p[1] for p in pairs]
        report = metrics.evaluate(gts, preds, args.classes)
    except (StarsegError, OSError, ValueError) as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1

    out = report.to_dict()
    out["images"] = gt_stems
    if args.counts:
        out["counts"] = metrics.instance_counts(preds, args.classes).tolist()
    print(_format_table(report))
    print(f"mPQ {out['mpq']:.4f}  mPQ+ {out['mpq_plus']:.4f}")
    if args.counts:
        print("counts per class:", out["counts"])
    if args.report:
        with open(args.report, "w", encoding="utf-8") as f:
            json.dump(out, f, indent=2, sort_keys=True)
            f.write("\n")
    return 0


def _parse_merge_spec(spec: str):
    """``PREFIX[@rNf]``: tensor-triple path prefix plus the producing D4 element."""
    if "@" in spec:
        prefix, tag = spec.rsplit("@", 1)
        if not tag.startswith("r") or len(tag) < 2:
            raise ValueError(f"bad D4 tag in {spec!r} (expected e.g. @r1 or @r3f)")
        flip = tag.endswith("f")
        rot = int(tag[1:-1] if flip else tag[1:])
        return prefix, tta.D4Element(rot, flip)
    return spec, tta.IDENTITY


def cmd_merge(args) -> int:
    rays = RayConfig(args.rays)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        preds = []
        for spec in args.inputs:
            prefix, g = _parse_merge_spec(spec)
            p = _read_pred(Path(prefix).parent, Path(prefix).name)
            preds.append(tta.transform_pred(p, tta.inverse(g), rays))
        merged = tta.merge_predictions(preds)
    except (StarsegError, OSError, ValueError) as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    stem = args.stem
    tensorio.write_array(out_dir / f"{stem}.prob.npy", merged.prob.astype(np.float32))
    tensorio.write_array(out_dir / f"{stem}.dist.npy", merged.dist.astype(np.float32))
    tensorio.write_array(out_dir / f"{stem}.classprob.npy",
                         merged.classprob.astype(np.float32))
    return 0


def cmd_sample(args) -> int:
    in_dir = Path(args.labels)
    stems = _label_stems(in_dir)
    try:
        labels = [_read_label(in_dir, s, args.classes) for s in stems]
        freqs = class_frequencies(labels, args.classes)
        counts = np.zeros((len(labels), args.classes), dtype=np.int64)
        for i, lab in enumerate(labels):
            for cls in lab.classes.values():
                counts[i, cls - 1] += 1
        weights = balance.oversampling_weights(counts, freqs)
    except (StarsegError, OSError, ValueError) as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    out = {
        "class_frequencies": [round(float(f), 6) for f in freqs],
        "class_weights": [round(float(w), 6)
                          for w in balance.class_weight_report(np.maximum(freqs, 1e-12))],
        "images": {s: round(float(w), 6)
                   for s, w in zip(stems, weights.weights)},
    }
    print(json.dumps(out, indent=2, sort_keys=True))
    return 0


def cmd_augment(args) -> int:
    cfg = augment_mod.ColorAugConfig(
        mode=args.mode,
        brightness_range=(args.brightness_lo, args.brightness_hi),
        hue_range_deg=(-args.hue_deg, args.hue_deg),
        stain_range=(args.stain_lo, args.stain_hi),
        geometric=args.geometric,
        seed=args.seed,
    )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        augment_mod.augment_dataset(args.images, out_dir, cfg, args.copies)
    except (StarsegError, OSError, ValueError) as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    return 0


# --- parser ---

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="starseg",
        description="Star-convex nuclei instance segmentation and classification toolkit",
    )
    p.add_argument("--rays", type=int, default=64, help="number of radial directions")
    p.add_argument("--classes", type=int, default=6, help="number of cell classes")
    p.add_argument("--threads", type=int, default=_default_threads(),
                   help="worker threads for per-file jobs (env STARSEG_THREADS)")
    p.add_argument("--seed", type=int, default=None, help="seed for randomized steps")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("encode", help="label images -> prediction target tensors")
    e.add_argument("--labels", required=True)
    e.add_argument("--out", required=True)
    e.add_argument("--prob-mode", choices=("edt", "binary"), default="edt")
    e.set_defaults(func=cmd_encode)

    d = sub.add_parser("decode", help="prediction tensors -> classified instances")
    d.add_argument("--pred", required=True)
    d.add_argument("--out", required=True)
    d.add_argument("--prob-thresh", type=float, default=0.5)
    d.add_argument("--nms-thresh", type=float, default=0.5)
    d.add_argument("--no-refine", action="store_true",
                   help="skip majority-vote shape refinement")
    d.set_defaults(func=cmd_decode)

    v = sub.add_parser("eval", help="panoptic-quality evaluation of two label dirs")
    v.add_argument("--gt", required=True)
    v.add_argument("--pred", required=True)
    v.add_argument("--report", default=None, help="write JSON report here")
    v.add_argument("--counts", action="store_true",
                   help="also report per-class instance counts")
    v.set_defaults(func=cmd_eval)

    m = sub.add_parser("merge", help="average prediction tensor triples")
    m.add_argument("--inputs", nargs="+", required=True,
                   metavar="PREFIX[@rNf]",
                   help="tensor-triple prefix, optionally tagged with the D4 "
                        "element it was produced under (e.g. pred/a@r1f)")
    m.add_argument("--out", required=True)
    m.add_argument("--stem", default="merged")
    m.set_defaults(func=cmd_merge)

    s = sub.add_parser("sample", help="class frequencies and oversampling weights")
    s.add_argument("--labels", required=True)
    s.set_defaults(func=cmd_sample)

    a = sub.add_parser("augment", help="materialize an augmented dataset")
    a.add_argument("--images", required=True)
    a.add_argument("--out", required=True)
    a.add_argument("--mode", choices=("brightness", "brightness_hue", "brightness_he"),
                   default="brightness_he")
    a.add_argument("--copies", type=int, default=1)
    a.add_argument("--brightness-lo", type=float, default=0.7)
    a.add_argument("--brightness-hi", type=float, default=1.3)
    a.add_argument("--hue-deg", type=float, default=30.0)
    a.add_argument("--stain-lo", type=float, default=0.7)
    a.add_argument("--stain-hi", type=float, default=1.3)
    a.add_argument("--no-geometric", dest="geometric", action="store_false",
                   help="skip the random dihedral transform")
    a.set_defaults(func=cmd_augment)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
