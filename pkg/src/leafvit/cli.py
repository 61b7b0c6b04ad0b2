"""Command line: synth, extract, train, evaluate, pipeline, report.

Exit codes: 0 success, 1 usage error, 2 data/parse error, 3 numeric/shape error.
"""
import argparse
import logging
import sys

from . import formats, metrics, pipeline, preprocess
from .config import load_config
from .errors import LeafVitError
from .synth import write_synthetic_dataset
from .vit import VARIANTS


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _common(p, variant=False, arch=False):
    p.add_argument("--config", help="key=value configuration file")
    p.add_argument("--seed", type=int, help="override the configured seed")
    p.add_argument("--out", required=True, help="output path")
    if variant:
        p.add_argument("--variant", choices=VARIANTS, help="feature variant")
    if arch:
        p.add_argument("--arch", choices=("arch1", "arch2"), help="classifier architecture")


def build_parser():
    parser = _Parser(prog="leafvit", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="write a procedural PPM dataset")
    _common(p)
    p.add_argument("--classes", type=int, default=4)
    p.add_argument("--per-class", type=int, default=64)
    p.add_argument("--size", type=int, default=128)

    p = sub.add_parser("extract", help="ViT features for a dataset directory -> VITF")
    _common(p, variant=True)
    p.add_argument("--dataset", required=True, help="<root>/<class>/*.ppm")
    p.add_argument("--weights", help="VITL file with extractor weights (default: seeded random)")
    p.add_argument("--save-weights", help="also write the extractor weights used, as VITL")

    p = sub.add_parser("train", help="train a classifier head on a VITF file -> VITL")
    _common(p, arch=True)
    p.add_argument("--features", required=True)
    p.add_argument("--history", help="per-epoch CSV output")

    p = sub.add_parser("evaluate", help="report metrics on the seeded test split")
    _common(p)
    p.add_argument("--features", required=True)
    p.add_argument("--weights", required=True)
    p.add_argument("--csv", help="also write machine-readable metrics")

    p = sub.add_parser("pipeline", help="synth/extract/train/evaluate over the variant x arch grid")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="override out_dir")
    p.add_argument("--variant", choices=VARIANTS, help="restrict the grid to one variant")
    p.add_argument("--arch", choices=("arch1", "arch2"), help="restrict the grid to one architecture")

    p = sub.add_parser("report", help="render a metrics CSV as a table, or histogram an image")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--csv", help="metrics CSV written by evaluate")
    src.add_argument("--image", help="PPM image: RGB histograms before and after normalisation")
    p.add_argument("--config")
    p.add_argument("--out", help="write here instead of stdout")
    return parser


def _histogram_text(img, cfg):
    small = preprocess.thumbnail_resize(img, cfg.target_width)
    norm = preprocess.minmax_normalize(small, cfg.norm_min, cfg.norm_max, cfg.per_channel_norm)
    lines = ["stage,channel," + ",".join(str(b) for b in range(256))]
    for label, hist in (("original", preprocess.channel_histogram(img)),
                        ("normalized", preprocess.channel_histogram(norm))):
        for c, name in enumerate("RGB"):
            lines.append(f"{label},{name}," + ",".join(str(int(v)) for v in hist.counts[c]))
    return "\n".join(lines) + "\n"


def _emit(text, out):
    if out:
        formats.atomic_write(out, text.encode("utf-8"))
    else:
        sys.stdout.write(text)


def run(args):
    cmd = args.command
    if cmd == "synth":
        seed = 0 if args.seed is None else args.seed
        paths = write_synthetic_dataset(args.out, args.classes, args.per_class, args.size, seed)
        print(f"wrote {len(paths)} images to {args.out}")
        return 0

    overrides = {"seed": getattr(args, "seed", None)}
    if cmd == "pipeline":
        overrides["out_dir"] = args.out
        if args.variant:
            overrides["variants"] = (args.variant,)
        if args.arch:
            overrides["archs"] = (args.arch,)
    if cmd == "extract":
        overrides["vit_weights"] = args.weights
    cfg = load_config(args.config, **overrides)

    if cmd == "extract":
        variant = args.variant or cfg.variants[0]
        fs = pipeline.run_extract(args.dataset, args.out, cfg, variant, args.save_weights)
        print(f"wrote {len(fs.labels)} records of dim {fs.dim} ({variant}) to {args.out}")
    elif cmd == "train":
        arch = args.arch or cfg.archs[-1]
        _, history = pipeline.run_train(args.features, arch, cfg.train_config(), args.out, args.history)
        best = history.records[history.best_epoch - 1]
        print(f"best epoch {best.epoch}: val_loss={best.val_loss:.4f} val_acc={best.val_acc:.4f} "
              f"({len(history.records)} epochs run)")
    elif cmd == "evaluate":
        report = pipeline.run_evaluate(args.features, args.weights, cfg.train_config(), args.out, args.csv)
        sys.stdout.write(report.text())
    elif cmd == "pipeline":
        results = pipeline.run_pipeline(cfg)
        for (variant, arch), report in results.items():
            s = report.summary
            print(f"{variant:<10} {arch:<6} micro-F1 {s.micro_f1:.3f}  macro-F1 {s.macro_f1:.3f}  "
                  f"hamming {s.hamming_loss:.3f}")
    elif cmd == "report":
        if args.csv:
            with open(args.csv, encoding="utf-8") as fh:
                per, summary, names = metrics.parse_report_csv(fh.read())
            _emit(metrics.render_report(per, summary, names), args.out)
        else:
            _emit(_histogram_text(preprocess.read_ppm(args.image), cfg), args.out)
    return 0


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        return run(args)
    except LeafVitError as exc:
        print(f"leafvit {args.command}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"leafvit {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
