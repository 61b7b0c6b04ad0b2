"""Command implementations: extract, train, evaluate, and the full grid run."""
import contextlib
import hashlib
import logging
import os

import numpy as np

from . import cnn, formats, metrics, preprocess, trainer, vit
from .errors import DataError, ShapeError, StageError, LeafVitError
from .synth import write_synthetic_dataset

logger = logging.getLogger(__name__)

# classifier VITL files carry the feature length they were trained on
INPUT_DIM = "input.dim"


def prepare_image(img, cfg):
    small = preprocess.thumbnail_resize(img, cfg.target_width)
    return preprocess.minmax_normalize(small, cfg.norm_min, cfg.norm_max, cfg.per_channel_norm)


def load_vit_weights(vcfg, path=None):
    if not path:
        return vit.init_weights(vcfg)
    return vit.ViTWeights.from_tensors(formats.read_vitl(path), vcfg)


def extract_dataset(dataset_dir, cfg, variant, weights=None):
    """Run every image under ``dataset_dir`` through preprocessing and the extractor."""
    vcfg = cfg.vit_config(variant)
    if weights is None:
        weights = load_vit_weights(vcfg, cfg.vit_weights)
    paths, labels, class_names = preprocess.list_dataset(dataset_dir)
    feats = np.empty((len(paths), vcfg.feature_length))
    for i, path in enumerate(paths):
        try:
            img = preprocess.read_ppm(path)
        except DataError as exc:
            raise DataError(f"cannot decode {path}: {exc}") from exc
        try:
            feats[i] = vit.extract(prepare_image(img, cfg), vcfg, weights)
        except ShapeError as exc:
            raise ShapeError(f"{path}: {exc}") from exc
    return formats.FeatureSet(feats, np.asarray(labels, dtype=np.int64), tuple(class_names)), weights


def run_extract(dataset_dir, out_path, cfg, variant, save_weights=None):
    fs, weights = extract_dataset(dataset_dir, cfg, variant)
    formats.write_vitf(out_path, fs)
    if save_weights:
        formats.write_vitl(save_weights, weights.to_tensors())
    logger.info("wrote %d records of dim %d to %s", len(fs.labels), fs.dim, out_path)
    return fs


def split_features(fs, tcfg):
    return trainer.stratified_split(fs.labels, tcfg.split, tcfg.seed)


def run_train(features_path, arch, tcfg, out_weights, history_path=None):
    """Train ``arch`` on the seeded train split of a VITF file; ``tcfg`` is a TrainConfig."""
    fs = formats.read_vitf(features_path)
    tr, va, _ = split_features(fs, tcfg)
    if len(va) == 0:
        raise DataError("validation split is empty; add samples per class")
    spec = cnn.architecture(arch, len(fs.class_names))
    weights, history = trainer.train(
        fs.features[tr], fs.labels[tr], fs.features[va], fs.labels[va], spec, tcfg
    )
    formats.write_vitl(out_weights, {**weights, INPUT_DIM: np.array([fs.dim], dtype=np.float64)})
    if history_path:
        formats.atomic_write(history_path, history.to_csv().encode("ascii"))
    return weights, history


def run_evaluate(features_path, weights_path, tcfg, report_path=None, csv_path=None):
    """Predict the seeded test split and write the text report (and CSV)."""
    fs = formats.read_vitf(features_path)
    weights = formats.read_vitl(weights_path)
    trained_dim = weights.pop(INPUT_DIM, None)
    if trained_dim is not None and int(trained_dim[0]) != fs.dim:
        raise ShapeError(
            f"features have dim {fs.dim} but weights {weights_path} were trained on dim {int(trained_dim[0])}"
        )
    spec = cnn.infer_architecture(weights)
    _, _, te = split_features(fs, tcfg)
    try:
        preds = trainer.predict_batches(fs.features[te], spec, weights)
    except ShapeError as exc:
        raise ShapeError(
            f"features have dim {fs.dim} but weights {weights_path} were trained for another dim: {exc}"
        ) from exc
    if weights["out.w"].shape[1] != len(fs.class_names):
        raise ShapeError(
            f"weights predict {weights['out.w'].shape[1]} classes, features have {len(fs.class_names)}"
        )
    report = metrics.evaluate(fs.labels[te], preds, fs.class_names)
    if report_path:
        formats.atomic_write(report_path, report.text().encode("utf-8"))
    if csv_path:
        formats.atomic_write(csv_path, report.csv().encode("utf-8"))
    return report


@contextlib.contextmanager
def stage(name):
    try:
        yield
    except (LeafVitError, OSError) as exc:
        if isinstance(exc, StageError):
            raise
        raise StageError(name, exc) from exc


def _sha256(path):
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def run_pipeline(cfg):
    """Synthesize (optionally), then extract, train and evaluate every variant x arch cell.

    Returns ``{(variant, arch): EvaluationReport}``; a manifest is written to
    ``<out_dir>/manifest.txt``.
    """
    out = cfg.out_dir
    os.makedirs(out, exist_ok=True)
    dataset = cfg.dataset_root
    if cfg.synth:
        dataset = os.path.join(out, "dataset")
        with stage("synth"):
            write_synthetic_dataset(dataset, cfg.synth_classes, cfg.synth_per_class, cfg.synth_size, cfg.seed)
    with stage("config"):
        cfg.check_paths()

    produced, results = [], {}
    for variant in cfg.variants:
        fpath = os.path.join(out, f"features_{variant}.vitf")
        with stage(f"extract:{variant}"):
            run_extract(dataset, fpath, cfg, variant)
        produced.append(fpath)
        for arch in cfg.archs:
            cell = f"{variant}_{arch}"
            wpath = os.path.join(out, f"{cell}.vitl")
            hpath = os.path.join(out, f"{cell}_history.csv")
            with stage(f"train:{cell}"):
                _, history = run_train(fpath, arch, cfg.train_config(), wpath, hpath)
            rpath = os.path.join(out, f"{cell}_report.txt")
            cpath = os.path.join(out, f"{cell}_metrics.csv")
            with stage(f"evaluate:{cell}"):
                report = run_evaluate(fpath, wpath, cfg.train_config(), rpath, cpath)
            produced += [wpath, hpath, rpath, cpath]
            results[(variant, arch)] = report
            logger.info("%s: best epoch %d, micro-F1 %.3f, hamming %.3f", cell, history.best_epoch,
                        report.summary.micro_f1, report.summary.hamming_loss)

    lines = [f"config.{line}" for line in cfg.to_text().splitlines()]
    for path in produced:
        lines.append(f"sha256.{os.path.relpath(path, out)}={_sha256(path)}")
    for (variant, arch), report in results.items():
        s = report.summary
        lines.append(f"result.{variant}.{arch}.micro_f1={s.micro_f1:.6f}")
        lines.append(f"result.{variant}.{arch}.macro_f1={s.macro_f1:.6f}")
        lines.append(f"result.{variant}.{arch}.hamming_loss={s.hamming_loss:.6f}")
    formats.atomic_write(os.path.join(out, "manifest.txt"), ("\n".join(lines) + "\n").encode("utf-8"))
    return results
