"""Command-line entry point: one subcommand per pipeline phase.

    pktembed synth --out corpus/ --files 4 --packets 500 --fraction 0.01
    pktembed build-vocab -C pipeline.cfg corpus/*.pcap
    pktembed translate -C pipeline.cfg corpus/*.pcap
    pktembed train-embeddings -C pipeline.cfg corpus/*.pcap
    pktembed featurize -C pipeline.cfg corpus/*.pcap
    pktembed label -C pipeline.cfg --attacks corpus/attacks.csv corpus/*.pcap
    pktembed train -C pipeline.cfg corpus/*.pcap
    pktembed predict -C pipeline.cfg capture.pcap
    pktembed evaluate -C pipeline.cfg --scores s.scores --labels l.labels
    pktembed bench -C pipeline.cfg --threads 1,2,4 corpus/*.pcap

Every subcommand reads the same key = value config file (-C/--config) with
-o key=value overrides; --split even|odd|all selects the train/test half
of a name-sorted capture list.
"""

import argparse
import sys
from pathlib import Path

import numpy as np

from . import pipeline
from .config import load_config
from .errors import PktembedError
from .evaluate import evaluate_scores, summary_line, write_pr_csv, write_roc_csv
from .groundtruth import load_labels
from .synth import generate_synthetic_corpus


def _add_common(parser, captures=True):
    parser.add_argument("-C", "--config", default=None,
                        help="key = value config file")
    parser.add_argument("-o", "--override", action="append", default=[],
                        metavar="KEY=VALUE", help="config override")
    if captures:
        parser.add_argument("captures", nargs="+", help="pcap files")
        parser.add_argument("--split", default="all",
                            choices=("even", "odd", "all"),
                            help="deterministic selection over sorted paths")


def _config(args):
    return load_config(args.config, args.override)


def _selected(args):
    return pipeline.split_captures(args.captures, args.split)


def cmd_synth(args):
    paths, csv_path = generate_synthetic_corpus(
        args.out, files=args.files, packets_per_file=args.packets,
        malicious_fraction=args.fraction, seed=args.seed)
    print(f"wrote {len(paths)} captures and {csv_path}")


def cmd_build_vocab(args):
    path = pipeline.phase_vocabulary(_config(args), _selected(args))
    print(f"wrote {path}")


def cmd_translate(args):
    out = pipeline.phase_translate(_config(args), _selected(args))
    print(f"wrote {2 * len(out)} token files")


def cmd_train_embeddings(args):
    path = pipeline.phase_embeddings(_config(args), _selected(args))
    print(f"wrote {path}")


def cmd_featurize(args):
    out = pipeline.phase_features(_config(args), _selected(args))
    print(f"wrote {len(out)} feature files")


def cmd_label(args):
    out = pipeline.phase_labels(_config(args), _selected(args), args.attacks)
    print(f"wrote {len(out)} label files")


def cmd_train(args):
    path = pipeline.phase_classifier(_config(args), _selected(args))
    print(f"wrote {path}")


def cmd_predict(args):
    cfg = _config(args)
    vocabulary, embeddings, model = pipeline.load_inference_artifacts(cfg)
    cfg.scores_dir.mkdir(parents=True, exist_ok=True)
    for path in _selected(args):
        scores, report = pipeline.run_inference(
            vocabulary, embeddings, model, path, workers=cfg.workers)
        out = cfg.scores_path(path)
        out.write_text("".join(f"{s:.9f}\n" for s in scores))
        print(f"{out}: {report.machine_line()}")


def cmd_evaluate(args):
    cfg = _config(args)
    scores = np.array([float(line) for line in
                       Path(args.scores).read_text().split()])
    labels = load_labels(args.labels)
    curves = evaluate_scores(scores, labels.labels)
    cfg.eval_dir.mkdir(parents=True, exist_ok=True)
    write_roc_csv(curves.roc, cfg.eval_dir / "roc.csv")
    write_pr_csv(curves.pr, cfg.eval_dir / "pr.csv")
    print(summary_line(curves.auc_roc, curves.auc_pr))


def cmd_bench(args):
    cfg = _config(args)
    vocabulary, embeddings, model = pipeline.load_inference_artifacts(cfg)
    threads = [int(t) for t in args.threads.split(",")]
    result = pipeline.bench(vocabulary, embeddings, model, _selected(args),
                            threads)
    print(result.table())
    for t, rep in zip(result.thread_counts, result.reports):
        print(rep.machine_line())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pktembed",
        description="n-gram embedding pipeline for packet captures")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic labeled corpus")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--files", type=int, default=4)
    p.add_argument("--packets", type=int, default=1000)
    p.add_argument("--fraction", type=float, default=0.01,
                   help="malicious fraction in [0, 1]")
    p.add_argument("--seed", type=int, default=1)
    p.set_defaults(func=cmd_synth)

    for name, func, help_text in (
            ("build-vocab", cmd_build_vocab, "phase 1: n-gram dictionary"),
            ("translate", cmd_translate, "phase 2: token files"),
            ("train-embeddings", cmd_train_embeddings, "phase 3: embeddings"),
            ("featurize", cmd_featurize, "phase 4: feature matrices"),
            ("train", cmd_train, "phase 5: classifier"),
            ("predict", cmd_predict, "score captures with saved artifacts"),
            ("bench", cmd_bench, "throughput/speedup benchmark")):
        p = sub.add_parser(name, help=help_text)
        _add_common(p)
        if name == "bench":
            p.add_argument("--threads", default="1,2,4",
                           help="comma-separated worker counts")
        p.set_defaults(func=func)

    p = sub.add_parser("label", help="attack-window ground truth labels")
    _add_common(p)
    p.add_argument("--attacks", required=True, help="attack CSV file")
    p.set_defaults(func=cmd_label)

    p = sub.add_parser("evaluate", help="ROC/PR curves from saved scores")
    _add_common(p, captures=False)
    p.add_argument("--scores", required=True, help="score file (one per line)")
    p.add_argument("--labels", required=True, help="label file (0/1 lines)")
    p.set_defaults(func=cmd_evaluate)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except PktembedError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
