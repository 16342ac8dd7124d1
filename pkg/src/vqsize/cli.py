"""Command-line entry point: ``vqsize <subcommand> [flags]``."""

from __future__ import annotations

import argparse
import io
import logging
import sys
from pathlib import Path

import numpy as np

from . import report
from .codebook import family_to_text
from .config import ConfigError, load_config
from .corpus import (FEATURE_MANIFEST_FIELDS, MANIFEST_FIELDS, MATCHED, MISMATCHED, TRAIN,
                     build_corpus, feature_csv_text, manifest_text, save_wav)
from .identify import distortion_histogram, report_from_table, self_distortions, stats_from_table
from .pipeline import Experiment, train_bank
from .size_select import (assignment_rate, greedy_size_search, mean_bits, per_speaker_sweep,
                          ratio_criterion_assign)

log = logging.getLogger("vqsize")


class Outputs:
    """Files collected in memory and written together at the end.

    A failure while writing removes whatever was already written.
    """

    def __init__(self, root):
        self.root = Path(root)
        self.files = {}

    def add(self, name: str, content) -> None:
        self.files[name] = content

    def commit(self) -> list:
        written = []
        try:
            for name in sorted(self.files):
                path = self.root / name
                path.parent.mkdir(parents=True, exist_ok=True)
                data = self.files[name]
                if isinstance(data, bytes):
                    path.write_bytes(data)
                else:
                    path.write_text(data)
                written.append(path)
        except BaseException:
            for p in written:
                p.unlink(missing_ok=True)
            raise
        return written


def _uniform_rows(table, max_bits, norm_mode):
    k = len(table.bank.speakers)
    return [(float(b), table.overall_rate(np.full(k, b), norm_mode), "fixed")
            for b in range(max_bits + 1)]


def cmd_synth(cfg, args, out):
    train, matched, mismatched = build_corpus(cfg.synth_spec())
    rows = []
    for u in train + matched + mismatched:
        buf = io.BytesIO()
        save_wav(buf, u.signal)
        out.add(f"corpus/{u.utterance_id}.wav", buf.getvalue())
        rows.append({"utterance_id": u.utterance_id, "speaker": u.speaker,
                     "condition": u.condition, "path": f"{u.utterance_id}.wav"})
    out.add("corpus/manifest.csv", manifest_text(rows, MANIFEST_FIELDS))
    return f"synthesized {len(rows)} utterances from {cfg.n_speakers} speakers"


def cmd_extract(cfg, args, out):
    exp = Experiment(cfg, args.manifest)
    rows = []
    for seq in exp.features:
        out.add(f"features/{seq.utterance_id}.csv", feature_csv_text(seq))
        rows.append({"utterance_id": seq.utterance_id, "speaker": seq.speaker,
                     "condition": seq.condition, "n_frames": len(seq)})
        if seq.skipped:
            log.info("%s: skipped %d degenerate frames", seq.utterance_id, seq.skipped)
    out.add("features/manifest.csv", manifest_text(rows, FEATURE_MANIFEST_FIELDS))
    return f"extracted features for {len(rows)} utterances"


def cmd_train(cfg, args, out):
    exp = Experiment(cfg, args.manifest)
    bank = train_bank(exp.by_condition(TRAIN), cfg.max_bits, cfg.lbg())
    for s, fam in zip(bank.speakers, bank.families):
        out.add(f"codebooks/{s}.csv", family_to_text(fam))
    return f"trained {len(bank.speakers)} codebook families up to {bank.max_bits} bits"


def cmd_sweep(cfg, args, out):
    exp = Experiment(cfg, args.manifest, args.codebooks)
    names = {MATCHED: ("fig1.csv", "fig2.csv"), MISMATCHED: ("fig3.csv", "fig4.csv")}
    msg = []
    for cond, (rates_name, hist_name) in names.items():
        if cond not in exp.tables:
            continue
        sw = per_speaker_sweep(exp.bank, exp.tables[cond], norm_mode=cfg.norm_mode)
        out.add(rates_name, report.sweep_rates_csv(sw))
        out.add(hist_name, report.sweep_histogram_csv(sw))
        msg.append(f"{cond}: optimal sizes {sw.histogram}")
    if not msg:
        raise ValueError("corpus has no test utterances")
    return "; ".join(msg)


def cmd_greedy(cfg, args, out):
    exp = Experiment(cfg, args.manifest, args.codebooks)
    bank = exp.bank
    tune, score = exp.tuning_and_scoring()
    rows = _uniform_rows(score, bank.max_bits, cfg.norm_mode)
    traces = []
    for k in cfg.bits_list("init_bits"):
        trace = greedy_size_search(bank, tune, k, bank.max_bits, cfg.norm_mode)
        traces.append(trace)
        rate = assignment_rate(bank, score, trace.assignment, cfg.norm_mode)
        rows.append((mean_bits(trace.assignment), rate, "variable"))
        out.add(f"greedy_assignment_{k}.csv",
                report.assignment_csv(trace.assignment, bank.speakers))
        log.info("init %d: %d iterations, increments %s", k, len(trace.iterations),
                 trace.increments())
    out.add("fig5.csv", report.size_rate_csv(rows))
    out.add("greedy_trace.csv", report.greedy_trace_csv(traces))
    return ", ".join(f"init {t.init_bits}: {len(t.iterations)} steps, "
                     f"tuning rate {t.initial_rate:.4f} -> {t.final_rate:.4f}" for t in traces)


def cmd_ratio(cfg, args, out):
    exp = Experiment(cfg, args.manifest, args.codebooks)
    bank = exp.bank
    rows = []
    for cond in (MATCHED, MISMATCHED):
        if cond not in exp.tables:
            continue
        for b in range(bank.max_bits + 1):
            for st in stats_from_table(exp.tables[cond], b):
                rows.append((st.speaker, st.bits, st.ratio, cond))
    rows.sort(key=lambda r: ((r[3] != MATCHED), bank.index(r[0]), r[1]))
    out.add("fig9.csv", report.csv_text(["speaker", "bits", "ratio", "condition"], rows))

    tune, score = exp.tuning_and_scoring("ratio_condition")
    fig10 = _uniform_rows(score, bank.max_bits, cfg.norm_mode)
    msg = []
    for k in cfg.bits_list("base_bits"):
        if k >= bank.max_bits:
            raise ValueError(f"base_bits {k} leaves no room below max_bits {bank.max_bits}")
        assignment = ratio_criterion_assign(bank, tune, k, cfg.theta, cfg.norm_mode)
        fig10.append((mean_bits(assignment), assignment_rate(bank, score, assignment, cfg.norm_mode),
                      "variable"))
        out.add(f"ratio_assignment_{k}.csv", report.assignment_csv(assignment, bank.speakers))
        n_up = sum(v > k for v in assignment.values())
        msg.append(f"base {k}: {n_up} of {len(assignment)} speakers incremented")
    out.add("fig10.csv", report.csv_text(["mean_bits", "rate", "mode"], fig10))
    return "; ".join(msg)


def cmd_stats(cfg, args, out):
    exp = Experiment(cfg, args.manifest, args.codebooks)
    bank = exp.bank
    train = np.array([f.distortions() for f in bank.families])
    out.add("fig6.csv", report.csv_text(["bits", "mean_distortion"],
                                        [(b, float(train[:, b].mean()))
                                         for b in range(bank.max_bits + 1)]))
    _, score = exp.tuning_and_scoring()
    hist_rows = []
    heavy = []
    for b in range(bank.max_bits + 1):
        counts, edges = distortion_histogram(bank, score, b, cfg.n_bins)
        hist_rows += [(b, edges[i], edges[i + 1], counts[i]) for i in range(len(counts))]
        d = self_distortions(score, b)
        heavy.append(int(np.sum(d > 2 * d.mean())))
    out.add("fig7_8.csv", report.csv_text(["bits", "bin_low", "bin_high", "count"], hist_rows))
    ratio_table = exp.table(cfg.condition("ratio_condition"))
    stats = [st for b in range(bank.max_bits + 1) for st in stats_from_table(ratio_table, b)]
    stats.sort(key=lambda st: (bank.index(st.speaker), st.bits))
    out.add("stats.csv", report.stats_csv(stats))
    return f"sentences above twice the mean distortion per size: {heavy}"


def cmd_evaluate(cfg, args, out):
    exp = Experiment(cfg, args.manifest, args.codebooks)
    bank = exp.bank
    a = args.assignment
    if a is None:
        raise ValueError("--assignment is required")
    assignment = int(a) if a.isdigit() else report.read_assignment(a)
    _, score = exp.tuning_and_scoring()
    rep = report_from_table(score, assignment, cfg.norm_mode)
    out.add("report.csv", report.report_csv(rep))
    out.add("confusion.csv", report.confusion_csv(rep))
    return f"overall identification rate {rep.overall_rate:.4f}"


COMMANDS = {
    "synth": cmd_synth,
    "extract": cmd_extract,
    "train": cmd_train,
    "sweep": cmd_sweep,
    "greedy": cmd_greedy,
    "ratio": cmd_ratio,
    "stats": cmd_stats,
    "evaluate": cmd_evaluate,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value configuration file")
    common.add_argument("--out", help="output directory (overrides VQSIZE_OUT and the file)")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override any configuration key")
    common.add_argument("-v", "--verbose", action="store_true")

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--manifest", help="corpus or feature manifest; synthesize when omitted")
    data.add_argument("--codebooks", help="directory of trained codebook files")

    p = argparse.ArgumentParser(prog="vqsize", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("synth", parents=[common], help="write a synthetic WAV corpus")
    s = sub.add_parser("extract", parents=[common], help="write the feature cache")
    s.add_argument("--manifest", required=True)
    s = sub.add_parser("train", parents=[common], help="write per-speaker codebooks")
    s.add_argument("--manifest", required=True)
    s.add_argument("--max-bits", type=int)
    sub.add_parser("sweep", parents=[common, data], help="fig1-fig4: common-size sweep")
    s = sub.add_parser("greedy", parents=[common, data], help="fig5: greedy size search")
    s.add_argument("--init-bits", help="initial size, or a comma-separated list")
    s = sub.add_parser("ratio", parents=[common, data], help="fig9/fig10: ratio criterion")
    s.add_argument("--theta", type=float)
    s.add_argument("--base-bits", help="base size, or a comma-separated list")
    sub.add_parser("stats", parents=[common, data], help="fig6-fig8: distortion statistics")
    s = sub.add_parser("evaluate", parents=[common, data], help="identification report")
    s.add_argument("--assignment", help="speaker,bits CSV or a single uniform bit count")
    return p


def _overrides(args) -> dict:
    out = {}
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        out[key.strip()] = value
    for flag, key in (("out", "out_dir"), ("max_bits", "max_bits"), ("init_bits", "init_bits"),
                      ("theta", "theta"), ("base_bits", "base_bits")):
        v = getattr(args, flag, None)
        if v is not None:
            out[key] = v if isinstance(v, str) else str(v)
    return out


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, _overrides(args))
        out = Outputs(cfg.out_dir)
        summary = COMMANDS[args.command](cfg, args, out)
        written = out.commit()
    except (ValueError, KeyError, OSError) as exc:
        msg = str(exc).strip("'\"").splitlines()[0] if str(exc) else type(exc).__name__
        print(f"vqsize {args.command}: error: {msg}", file=sys.stderr)
        return 2
    print(f"{summary} ({len(written)} files in {cfg.out_dir})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
