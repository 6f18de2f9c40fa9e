"""``tilepath`` command line: synth, train, eval, detect, diagnose, gradcheck, augment.

Exit codes: 0 success, 2 configuration/usage, 3 I/O, 4 validation failure.
Every run writes ``config_echo.json`` into ``--out`` with all effective
parameters; ``TILEPATH_THREADS`` caps BLAS threads (0 = library default).
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .augment import AugmentConfig, augment_image, sample_augmentation
from .datagen import default_spec, ingest, synthesize, write_corpus
from .errors import (ConfigurationError, CorruptionError, DataError, DegenerateTransformError,
                     FormatError, GeometryError, TilepathError)
from .evaluation import confusion_csv, confusion_matrix, normalize_confusion, roc_curve
from .imageio import read_image, write_image
from .network import build_architecture, load_weights, save_weights
from .network.estimators import FeatureExtractor, TileClassifier
from .network.gradcheck import check_all_layers
from .network.model import FEATURE_SHAPE, fold_standardization
from .numerics import DEFAULT_SEED, make_rng
from .pipeline import detect_skin, diagnose, render_mask

log = logging.getLogger("tilepath")

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_VALIDATION = 0, 2, 3, 4


class ValidationFailure(Exception):
    pass


def _write(path: Path, text: str) -> None:
    path.write_text(text)


def _echo(args: argparse.Namespace, out: Path, extra: dict | None = None) -> None:
    body = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    body["tilepath_version"] = __version__
    if extra:
        body.update(extra)
    _write(out / "config_echo.json", json.dumps(body, indent=2, sort_keys=True, default=str) + "\n")


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _extractor(args):
    """Extractor for head models: a weight file, else seeded random weights."""
    if args.extractor:
        return FeatureExtractor(weights=args.extractor).fit()
    return FeatureExtractor(seed=args.extractor_seed).fit()


def _is_head(model) -> bool:
    return model.input_shape == FEATURE_SHAPE


def _read_image_or_io_error(path):
    try:
        return read_image(path)
    except (OSError, CorruptionError) as exc:
        raise OSError(f"cannot read image {path}: {exc}") from exc


# -- subcommands ---------------------------------------------------------------

def cmd_synth(args) -> int:
    out = _outdir(args)
    spec = default_spec(args.classes, args.per_class, args.seed)
    patches = synthesize(spec)
    paths = write_corpus(out, patches)
    _echo(args, out, {"files": len(paths)})
    print(f"wrote {len(paths)} patches in {args.classes} classes to {out}")
    return EXIT_OK


def cmd_train(args) -> int:
    out = _outdir(args)
    corpus = ingest(args.data, args.train_fraction, args.seed)
    X, y = corpus.X, corpus.y
    clf = TileClassifier(args.arch, epochs=args.epochs, batch_size=args.batch, learning_rate=args.lr,
                         optimizer="sgd-momentum" if args.momentum else "sgd", momentum=args.momentum,
                         dropout=args.dropout, train_fraction=args.train_fraction, seed=args.seed)
    probe = build_architecture(args.arch, init=False)
    extra = {}
    split = (corpus.train_index, corpus.val_index)
    if _is_head(probe):
        feats = _extractor(args).transform(X)
        mean = feats[corpus.train_index].mean(axis=0)
        scale = feats[corpus.train_index].std(axis=0)
        scale[scale == 0] = 1.0
        clf.fit((feats - mean) / scale, y, split=split)
        fold_standardization(clf.model_, mean, scale)
        X = feats
        extra["extractor_seed"] = None if args.extractor else args.extractor_seed
    else:
        clf.fit(X, y, split=split)
    save_weights(clf.model_, out / "model.tpwf")
    _write(out / "train_log.csv", clf.log_.to_csv())
    _write(out / "manifest.json", corpus.manifest.to_json())
    record = {"arch": args.arch, "classes": corpus.manifest.classes,
              "final": clf.log_.records[-1] if clf.log_.records else None}
    if clf.model_.n_outputs == 2:
        vi = corpus.val_index
        if len(np.unique(y[vi])) == 2:
            scores = clf.model_.predict_proba(X[vi])[:, args.positive_class]
            roc = roc_curve(scores, y[vi] == args.positive_class)
            record.update(positive_class=args.positive_class, **roc.to_dict())
    _write(out / "eval_record.json", json.dumps(record, indent=2) + "\n")
    _echo(args, out, extra)
    last = clf.log_.records[-1] if clf.log_.records else {}
    print(f"trained {args.arch} for {args.epochs} epochs; val_acc={last.get('val_acc', float('nan')):.4f}")
    return EXIT_OK


def _model_scores(args, X):
    model = load_weights(args.model)
    if _is_head(model):
        X = _extractor(args).transform(X)
    return model, model.predict_proba(X)


def cmd_eval(args) -> int:
    out = _outdir(args)
    corpus = ingest(args.data, args.train_fraction, args.seed)
    idx = corpus.val_index if args.subset == "val" else np.arange(len(corpus.y))
    y = corpus.y[idx]
    model, probs = _model_scores(args, corpus.X[idx])
    k = model.n_outputs
    names = corpus.manifest.classes if len(corpus.manifest.classes) == k else [f"c{i}" for i in range(k)]
    pred = probs.argmax(axis=1)
    cm = confusion_matrix(pred, y, k)
    norm = normalize_confusion(cm)
    _write(out / "confusion.csv", confusion_csv(cm, names))
    _write(out / "confusion_norm.csv", confusion_csv(norm.matrix, names))
    report = {"model": model.name, "n_samples": int(len(y)), "accuracy": float(np.mean(pred == y)),
              "class_names": list(names), "empty_rows": norm.empty_rows.tolist()}
    if k == 2:
        orientations = []
        for cls in (0, 1):
            roc = roc_curve(probs[:, cls], y == cls)
            orientations.append({"positive_class": cls, **roc.to_dict()})
            if cls == args.positive_class:
                _write(out / "roc.csv", roc.points_csv())
        report.update(positive_class=args.positive_class,
                      **{key: v for key, v in orientations[args.positive_class].items() if key != "positive_class"})
        report["orientations"] = orientations
    else:
        report["per_class_recall"] = [float(v) for v in np.diag(norm.matrix)]
    _write(out / "report.json", json.dumps(report, indent=2) + "\n")
    _echo(args, out)
    print(json.dumps({key: report[key] for key in ("accuracy", "auc") if key in report}))
    return EXIT_OK


def _threshold(args):
    if args.threshold is not None:
        return args.threshold
    if args.eval_record:
        return json.loads(Path(args.eval_record).read_text()).get("best_threshold")
    return None


def _heads(args):
    head2 = load_weights(args.head2)
    extractor = _extractor(args).model_ if _is_head(head2) else None
    return extractor, head2


def cmd_detect(args) -> int:
    img = _read_image_or_io_error(args.image)
    out = _outdir(args)
    extractor, head2 = _heads(args)
    mask = detect_skin(img, extractor, head2, _threshold(args), args.window, args.stride)
    write_image(out / "mask.ppm", render_mask(img, mask))
    write_image(out / "mask.pgm", mask.as_image())
    _write(out / "tiles.csv", mask.tile_csv())
    _echo(args, out, {"effective_threshold": mask.threshold})
    print(f"{mask.skin_count}/{len(mask.grid)} tiles marked skin (threshold {mask.threshold:.4f})")
    return EXIT_OK


def cmd_diagnose(args) -> int:
    img = _read_image_or_io_error(args.image)
    out = _outdir(args)
    extractor, head2 = _heads(args)
    head7 = load_weights(args.head7)
    if _is_head(head7) and extractor is None:
        extractor = _extractor(args).model_
    if _is_head(head7) != _is_head(head2):
        raise ConfigurationError("skin and lesion models must both be heads or both be end-to-end CNNs")
    report = diagnose(img, extractor, head2, head7, _threshold(args), args.window, args.stride)
    _write(out / "report.json", report.to_json())
    _write(out / "histogram.csv", report.histogram_csv())
    write_image(out / "mask.ppm", render_mask(img, report.mask))
    write_image(out / "mask.pgm", report.mask.as_image())
    _echo(args, out, {"effective_threshold": report.mask.threshold})
    if report.empty:
        print("no skin tiles found; report is empty")
    else:
        print(f"proportions {report.rounded()} over {report.skin_tile_count} skin tiles")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    model = build_architecture(args.arch, seed=args.seed)
    rows = check_all_layers(model, args.seed, args.samples, args.epsilon, args.tol, args.corrupt_layer)
    print(f"{'layer':<24}{'kind':<11}{'tensor':<8}{'max_rel_err':>13}  result")
    for r in rows:
        print(f"{r.layer:<24}{r.kind:<11}{r.tensor:<8}{r.max_rel_error:>13.3e}  {'pass' if r.passed else 'FAIL'}")
    if args.out:
        out = _outdir(args)
        lines = ["layer,kind,tensor,max_rel_error,passed,skipped"]
        lines += [f"{r.layer},{r.kind},{r.tensor},{r.max_rel_error!r},{int(r.passed)},{r.skipped}" for r in rows]
        _write(out / "gradcheck.csv", "\n".join(lines) + "\n")
        _echo(args, out)
    failed = [r for r in rows if not r.passed]
    if failed:
        raise ValidationFailure(f"{len(failed)} gradient checks failed")
    return EXIT_OK


def cmd_augment(args) -> int:
    src = Path(args.input)
    files = sorted(p for p in src.iterdir() if p.suffix.lower() == ".ppm") if src.is_dir() else [src]
    images = [_read_image_or_io_error(f) for f in files]
    out = _outdir(args)
    rng = make_rng(args.seed)
    entries = []
    n = 0
    for f, img in zip(files, images):
        cfg = AugmentConfig(args.theta, args.tx, args.ty, args.shear, tuple(args.zoom), args.flip,
                            image_height=img.shape[0], image_width=img.shape[1])
        for _ in range(args.count):
            s = sample_augmentation(cfg, rng)
            name = f"aug_{n:04d}.ppm"
            write_image(out / name, augment_image(img, s.matrix, s.flip, args.interpolation, args.fill))
            entries.append({"source": str(f), "output": name, "matrix": s.matrix.tolist(),
                            "flip": s.flip, "params": s.params,
                            "interpolation": args.interpolation, "fill": args.fill})
            n += 1
    _write(out / "transforms.json", json.dumps(entries, indent=2) + "\n")
    _echo(args, out)
    print(f"wrote {n} augmented images to {out}")
    return EXIT_OK


# -- parser ------------------------------------------------------------------------

def _add_extractor(p):
    p.add_argument("--extractor", help="vgg16_headless weight file for head models")
    p.add_argument("--extractor-seed", type=int, default=DEFAULT_SEED,
                   help="seed for random extractor weights when --extractor is absent")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tilepath", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic class-per-directory corpus")
    p.add_argument("--classes", type=int, choices=(2, 7), default=2)
    p.add_argument("--per-class", type=int, default=200)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train a classifier on a corpus")
    p.add_argument("--arch", required=True,
                   choices=("tiny_cnn", "tiny_cnn_7", "classifier_head_2", "classifier_head_7"))
    p.add_argument("--data", required=True)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--momentum", type=float, default=0.0)
    p.add_argument("--dropout", type=float, default=0.5)
    p.add_argument("--train-fraction", type=float, default=0.7)
    p.add_argument("--positive-class", type=int, choices=(0, 1), default=0)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    _add_extractor(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="ROC / confusion evaluation of a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--positive-class", type=int, choices=(0, 1), default=0)
    p.add_argument("--subset", choices=("all", "val"), default="all")
    p.add_argument("--train-fraction", type=float, default=0.7)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    _add_extractor(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    for name, func, help_ in (("detect", cmd_detect, "skin mask of a whole image"),
                              ("diagnose", cmd_diagnose, "skin mask plus seven-class integral report")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--image", required=True)
        p.add_argument("--head2", required=True)
        if name == "diagnose":
            p.add_argument("--head7", required=True)
        p.add_argument("--threshold", type=float)
        p.add_argument("--eval-record", help="eval_record.json whose best_threshold is used by default")
        p.add_argument("--window", type=int, default=50)
        p.add_argument("--stride", type=int)
        p.add_argument("--seed", type=int, default=DEFAULT_SEED)
        _add_extractor(p)
        p.add_argument("--out", required=True)
        p.set_defaults(func=func)

    p = sub.add_parser("gradcheck", help="finite-difference check of every layer")
    p.add_argument("--arch", required=True)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--samples", type=int, default=12)
    p.add_argument("--epsilon", type=float, default=1e-5)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--corrupt-layer", help=argparse.SUPPRESS)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("augment", help="random affine copies of PPM images")
    p.add_argument("--in", dest="input", required=True, help="PPM file or directory of PPM files")
    p.add_argument("--count", type=int, default=5)
    p.add_argument("--theta", type=float, default=0.0, help="rotation range, degrees (symmetric)")
    p.add_argument("--tx", type=float, default=0.0, help="row shift range, pixels (symmetric)")
    p.add_argument("--ty", type=float, default=0.0, help="column shift range, pixels (symmetric)")
    p.add_argument("--shear", type=float, default=0.0, help="shear range, degrees (symmetric)")
    p.add_argument("--zoom", type=float, nargs=2, default=(1.0, 1.0), metavar=("LO", "HI"))
    p.add_argument("--flip", action="store_true", help="random horizontal flip")
    p.add_argument("--interpolation", choices=("nearest", "bilinear"), default="nearest")
    p.add_argument("--fill", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_augment)
    return parser


def _thread_limit():
    n = int(os.environ.get("TILEPATH_THREADS", "0") or 0)
    if n <= 0:
        return None
    from threadpoolctl import threadpool_limits
    return threadpool_limits(limits=n)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    limiter = _thread_limit()
    try:
        return args.func(args)
    except (ConfigurationError, DegenerateTransformError, GeometryError) as exc:
        print(f"tilepath: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, FormatError, DataError) as exc:
        print(f"tilepath: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValidationFailure as exc:
        print(f"tilepath: validation failure: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except TilepathError as exc:
        print(f"tilepath: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    finally:
        if limiter is not None:
            limiter.unregister()


if __name__ == "__main__":
    sys.exit(main())
