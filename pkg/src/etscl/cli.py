"""Command line front end: data generation, vesselness, both training stages,
evaluation and a standalone mass-fusion utility.

Exit codes: 0 ok, 1 usage error, 2 input/output error, 3 numerical error.
"""
import argparse
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import evidence, frangi, imageio, metrics, synthdata
from .contrastive import EncoderConfig, embed
from .losses import LossReport
from .nn import ClassifierConfig, load_checkpoint, save_checkpoint, train_classifier
from .pipeline import MODALITIES, evaluate, train_encoders
from .seeding import substream

log = logging.getLogger("etscl")

EXIT_USAGE, EXIT_IO, EXIT_NUMERIC = 1, 2, 3


class UsageError(Exception):
    pass


class InputError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


def float_list(text):
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def int_list(text):
    if not text:
        return ()
    try:
        return tuple(int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def probability(text):
    v = float(text)
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError(f"{v} is outside [0, 1]")
    return v


def positive(kind):
    def parse(text):
        v = kind(text)
        if v <= 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return v
    return parse


def non_negative_int(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {text}")
    return v


def record_config(args):
    """Merge this run's resolved flags into <out-dir>/config.json under the command name."""
    path = args.out_dir / "config.json"
    merged = {}
    if path.exists():
        try:
            merged = json.loads(path.read_text())
        except json.JSONDecodeError:
            log.warning("overwriting unreadable %s", path)
    merged[args.command] = {k: (str(v) if isinstance(v, Path) else v)
                            for k, v in sorted(vars(args).items()) if k not in ("func", "command")}
    path.write_text(json.dumps(merged, indent=2, sort_keys=True) + "\n")


def load_dataset(path):
    try:
        return synthdata.read_dataset(path)
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read dataset: {exc}") from exc


def load_ckpt(path, branch):
    if not path.exists():
        raise InputError(f"missing checkpoint for branch '{branch}': {path}")
    try:
        return load_checkpoint(path)
    except (OSError, ValueError, KeyError) as exc:
        raise InputError(f"bad checkpoint for branch '{branch}' ({path}): {exc}") from exc


# ---------------------------------------------------------------------------
# commands


def cmd_gen_data(args):
    spec = synthdata.DatasetSpec(n_samples=args.n, n_classes=args.classes, separability=args.separability,
                                 conflict_rate=args.conflict, seed=args.seed)
    try:
        spec.validate()
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    ds = synthdata.generate(spec, substream(args.seed, "data"))
    try:
        train, test = synthdata.split(ds, args.train_fraction, substream(args.seed, "split"))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    synthdata.write_dataset(train, args.out_dir / "train.jsonl")
    synthdata.write_dataset(test, args.out_dir / "test.jsonl")
    print(f"wrote {len(train)} train / {len(test)} test records to {args.out_dir}")


def cmd_frangi(args):
    try:
        img = imageio.to_gray(imageio.read_pnm(args.input))
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read image {args.input}: {exc}") from exc
    params = frangi.FrangiParams(scales=args.scales, beta=args.beta, c=args.c, polarity=args.polarity)
    out = frangi.frangi_filter(img, params)
    output = args.output or args.out_dir / "vesselness.pgm"
    imageio.write_pgm(output, out)
    print(f"max response {out.max():.6f} written to {output}")


def cmd_train_embed(args):
    ds = load_dataset(args.data)
    modalities = MODALITIES if args.modality == "all" else (args.modality,)
    config = EncoderConfig(epochs=args.epochs, batch_size=args.batch, learning_rate=args.lr, tau=args.tau,
                           jitter_sigma=args.jitter, seed=args.seed, hidden=args.hidden,
                           projection=args.projection)
    runs = train_encoders(ds, config, modalities,
                          log=lambda m, r: log.info("%s: final loss %s", m, r.epoch_losses[-1:] or "-"))
    for m, run in runs.items():
        save_checkpoint(args.out_dir / f"encoder_{m}.json", run.params, args.seed, tau=args.tau,
                        modality=m, normalize=config.normalize)
        with open(args.out_dir / f"embed_loss_{m}.csv", "w") as fh:
            fh.write("epoch,loss\n")
            for epoch, loss in enumerate(run.epoch_losses):
                fh.write(f"{epoch},{loss!r}\n")
        print(f"{m}: {len(run.epoch_losses)} epochs, checkpoint encoder_{m}.json")


def _embeddings(ds, ckpt_dir):
    out = []
    for m in MODALITIES:
        params, meta = load_ckpt(ckpt_dir / f"encoder_{m}.json", m)
        try:
            out.append(embed(params, ds.features(m), meta.get("normalize", True)))
        except ValueError as exc:
            raise InputError(f"encoder for branch '{m}' does not fit the data: {exc}") from exc
    return out


def cmd_train_classifier(args):
    ds = load_dataset(args.data)
    if len(ds) == 0:
        raise InputError(f"{args.data} holds no records")
    ckpt_dir = args.embed_ckpt_dir or args.out_dir
    embeddings = _embeddings(ds, ckpt_dir)
    n_classes = int(ds.labels.max()) + 1
    config = ClassifierConfig(epochs=args.epochs, lr=args.lr, anneal_epochs=args.anneal, seed=args.seed,
                              hidden=args.hidden, n_classes=max(n_classes, 2))
    with open(args.out_dir / "classifier_loss.csv", "w") as fh:
        fh.write(LossReport.CSV_HEADER + "\n")
        heads, _ = train_classifier(embeddings, ds.labels, config, rng=substream(args.seed, "init:heads"),
                                    log=lambda epoch, rep: fh.write(rep.csv_row(epoch) + "\n"))
    for m, head in zip(MODALITIES, heads):
        save_checkpoint(args.out_dir / f"head_{m}.json", head, args.seed, modality=m,
                        classifier=asdict(config))
    print(f"trained {len(heads)} heads for {config.epochs} epochs, checkpoints in {args.out_dir}")


def cmd_evaluate(args):
    ds = load_dataset(args.data)
    if len(ds) == 0:
        raise InputError(f"{args.data} holds no records")
    ckpt_dir = args.ckpt_dir or args.out_dir
    embeddings = _embeddings(ds, ckpt_dir)
    heads = [load_ckpt(ckpt_dir / f"head_{m}.json", m)[0] for m in MODALITIES]
    ev = evaluate(heads, embeddings, ds.labels)
    metrics.write_confusion_csv(args.out_dir / "confusion.csv", ev.confusion)
    with open(args.out_dir / "predictions.jsonl", "w") as fh:
        for i, rid in enumerate(ds.ids):
            row = {"id": int(rid), "pred": int(ev.preds[i]), "probs": ev.probs[i].tolist(),
                   "uncertainty": float(ev.uncertainty[i]),
                   "modality_uncertainty": dict(zip(MODALITIES, ev.branch_uncertainty[i].tolist()))}
            fh.write(json.dumps(row) + "\n")
    report = ev.summary()
    flagged = ds.conflict_flags().any(axis=1)
    for name, mask in (("conflict", flagged), ("clean", ~flagged)):
        report[f"{name}_mean_uncertainty"] = float(ev.uncertainty[mask].mean()) if mask.any() else None
    (args.out_dir / "report.json").write_text(json.dumps(report, indent=2) + "\n")
    kappa = "nan" if ev.kappa is None else repr(ev.kappa)
    print("n,accuracy,kappa,mean_uncertainty")
    print(f"{ev.n},{ev.accuracy!r},{kappa},{ev.mean_uncertainty!r}")


def cmd_fuse(args):
    try:
        raw = json.loads(Path(args.masses).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read masses: {exc}") from exc
    if not isinstance(raw, list) or not raw:
        raise InputError("masses file must hold a non-empty JSON array of {\"b\": [...], \"u\": x}")
    try:
        masses = [evidence.MassSet.from_json(obj) for obj in raw]
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"invalid mass set: {exc}") from exc
    fused = evidence.fuse_all(masses)
    # argmax of b and of the Dirichlet mean agree (alpha grows monotonically with b)
    print(json.dumps({**fused.to_json(), "class": int(np.argmax(fused.b))}))


# ---------------------------------------------------------------------------


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=1, help="root seed for every random stream")
    common.add_argument("--out-dir", type=Path, default=Path("."), help="where outputs and config.json go")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = Parser(prog="etscl", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=Parser)

    p = sub.add_parser("gen-data", parents=[common], help="synthetic three-modality dataset")
    p.add_argument("--n", type=non_negative_int, default=300)
    p.add_argument("--classes", type=int, default=3)
    p.add_argument("--separability", type=float_list, default=(2.0, 1.5, 1.0), help="cfp,oct,vessel")
    p.add_argument("--conflict", type=probability, default=0.1)
    p.add_argument("--train-fraction", type=float, default=2 / 3)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("frangi", parents=[common], help="multiscale vesselness of a PGM/PPM image")
    p.add_argument("--input", type=Path, required=True)
    p.add_argument("--output", type=Path)
    p.add_argument("--scales", type=float_list, default=(1.0, 2.0, 3.0, 4.0))
    p.add_argument("--beta", type=positive(float), default=0.5)
    p.add_argument("--c", type=positive(float), default=15 / 255)
    p.add_argument("--polarity", choices=("dark", "bright"), default="dark")
    p.set_defaults(func=cmd_frangi)

    p = sub.add_parser("train-embed", parents=[common], help="stage one: contrastive encoders")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--modality", choices=(*MODALITIES, "all"), default="all")
    p.add_argument("--tau", type=positive(float), default=0.05)
    p.add_argument("--lr", type=positive(float), default=1e-3)
    p.add_argument("--batch", type=int, default=14)
    p.add_argument("--epochs", type=non_negative_int, default=10)
    p.add_argument("--jitter", type=float, default=0.1)
    p.add_argument("--hidden", type=int_list, default=(256, 128))
    p.add_argument("--projection", type=int_list, default=(128, 128))
    p.set_defaults(func=cmd_train_embed)

    p = sub.add_parser("train-classifier", parents=[common], help="stage two: evidential heads")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--embed-ckpt-dir", type=Path)
    p.add_argument("--epochs", type=non_negative_int, default=200)
    p.add_argument("--lr", type=positive(float), default=ClassifierConfig.lr)
    p.add_argument("--anneal", type=positive(int), default=10)
    p.add_argument("--hidden", type=int_list, default=())
    p.set_defaults(func=cmd_train_classifier)

    p = sub.add_parser("evaluate", parents=[common], help="fused metrics on a dataset")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--ckpt-dir", type=Path)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("fuse", parents=[common], help="combine mass sets from a JSON file")
    p.add_argument("--masses", type=Path, required=True)
    p.set_defaults(func=cmd_fuse)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        args.out_dir.mkdir(parents=True, exist_ok=True)
        record_config(args)
        args.func(args)
    except UsageError as exc:
        print(f"etscl {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InputError, OSError) as exc:
        print(f"etscl {args.command}: {exc}", file=sys.stderr)
        return EXIT_IO
    except evidence.TotalConflictError as exc:
        print(f"etscl {args.command}: total conflict: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, FloatingPointError) as exc:
        print(f"etscl {args.command}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return 0


if __name__ == "__main__":
    sys.exit(main())
