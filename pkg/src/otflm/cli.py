"""Command-line surface: training, lattice generation, decoding, benchmarks.

Subcommands: ``train-rnnlm``, ``train-ngram``, ``gen-lattices``,
``decode``, ``bench``, ``report``. Exit codes: 0 success, 1 runtime
failure, 2 usage or configuration error. All reports are tab-separated
UTF-8 with one ``#`` comment line echoing config and seed, then a
one-line column header; every table value is derivable from the raw
ledger dump written next to it.
"""

from __future__ import annotations

import argparse
import json
import sys
import zlib
from pathlib import Path

import numpy as np

from otflm.cache import RescoreCache, reset_utterance
from otflm.codec import TransferLedger, reduction_ratio
from otflm.config import ConfigError, RunConfig, load_config
from otflm.context_table import IndexTable
from otflm.decoder import (
    RescoreStack,
    edit_distance,
    nbest,
    rescore_onthefly,
    rescore_twopass,
)
from otflm.huffman import build_huffman
from otflm.lattice import Lattice, generate_lattice
from otflm.ngram import NgramModel, load_arpa, save_arpa, train_ngram
from otflm.rnnlm import RnnlmModel, train
from otflm.vocab import Vocabulary, build_vocabulary, read_sentences

DECODE_MODES = ("onthefly", "twopass-rnnlm", "twopass-hybrid", "ngram")


def _require(path: Path, what: str) -> Path:
    if not path.exists():
        raise ConfigError(f"{what} not found: {path}")
    return path


def _load_vocab_tree(cfg: RunConfig):
    vocab = Vocabulary.load(_require(cfg.resolve("vocab_file"), "vocabulary file"))
    return vocab, build_huffman(vocab)


def cmd_train_rnnlm(args) -> int:
    cfg = load_config(args.config)
    corpus = _require(Path(cfg.corpus) if cfg.corpus else Path(""), "corpus")
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    vocab = build_vocabulary(corpus, cfg.min_count)
    vocab.save(cfg.resolve("vocab_file"))
    tree = build_huffman(vocab)
    model = RnnlmModel.new(
        vocab.size, hidden_size=cfg.hidden_size, maxent_order=cfg.maxent_order,
        maxent_table_bits=cfg.maxent_table_bits, seed=cfg.seed)
    valid = None
    if cfg.valid_corpus:
        valid = read_sentences(_require(Path(cfg.valid_corpus), "validation corpus"), vocab)
    model, log = train(model, str(corpus), vocab, tree,
                       epochs=cfg.epochs, learn_rate=cfg.learn_rate,
                       bptt_steps=cfg.bptt_steps, valid_sentences=valid)
    model_path = cfg.resolve("rnnlm_model")
    model.save(model_path)
    ppl_path = out_dir / "rnnlm_ppl.tsv"
    with open(ppl_path, "w", encoding="utf-8") as fh:
        fh.write(f"# seed={cfg.seed} {cfg.echo()}\n")
        fh.write("epoch\ttrain_ppl\tvalid_ppl\n")
        for epoch, train_ppl, valid_ppl in log:
            vp = "" if valid_ppl is None else f"{valid_ppl:.6f}"
            fh.write(f"{epoch}\t{train_ppl:.6f}\t{vp}\n")
    print(f"wrote {model_path} (vocab {vocab.size}, H={cfg.hidden_size})")
    print(f"wrote {ppl_path}")
    return 0


def cmd_train_ngram(args) -> int:
    cfg = load_config(args.config)
    corpus = _require(Path(cfg.corpus) if cfg.corpus else Path(""), "corpus")
    Path(cfg.output_dir).mkdir(parents=True, exist_ok=True)
    vocab_path = cfg.resolve("vocab_file")
    if vocab_path.exists():
        vocab = Vocabulary.load(vocab_path)
    else:
        vocab = build_vocabulary(corpus, cfg.min_count)
        vocab.save(vocab_path)
    if args.role == "lattice":
        order, out = cfg.lattice_lm_order, cfg.resolve("lattice_lm")
    else:
        order, out = cfg.ngram_order, cfg.resolve("ngram_model")
    model = train_ngram(str(corpus), vocab, order, smoothing=cfg.smoothing)
    save_arpa(model, vocab, out)
    print(f"wrote {out} (order {order}, {cfg.smoothing})")
    return 0


def cmd_gen_lattices(args) -> int:
    cfg = load_config(args.config)
    corpus = _require(Path(cfg.corpus) if cfg.corpus else Path(""), "corpus")
    vocab, _ = _load_vocab_tree(cfg)
    small_lm = load_arpa(_require(cfg.resolve("lattice_lm"), "lattice LM"), vocab)
    lat_dir = cfg.resolve("lattice_dir")
    lat_dir.mkdir(parents=True, exist_ok=True)

    lines = [ln.strip() for ln in open(corpus, encoding="utf-8") if ln.strip()]
    count = args.count or cfg.utterance_count
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    picks = rng.integers(0, len(lines), size=count)
    refs_path = lat_dir / "refs.tsv"
    with open(refs_path, "w", encoding="utf-8") as refs:
        for i, pick in enumerate(picks):
            line = lines[int(pick)]
            utt = f"utt{i:05d}"
            # identical reference text yields an identical lattice
            noise = (cfg.seed * 1000003) ^ zlib.crc32(line.encode("utf-8"))
            lat = generate_lattice(vocab.tokenize(line), vocab, small_lm,
                                   cfg.confusion_breadth, noise)
            lat.save(lat_dir / f"{utt}.lat")
            refs.write(f"{utt}\t{line}\n")
    print(f"wrote {count} lattices to {lat_dir}")
    return 0


def _lattice_files(cfg: RunConfig, positional: list[str]) -> list[Path]:
    if positional:
        return [Path(p) for p in positional]
    lat_dir = _require(cfg.resolve("lattice_dir"), "lattice directory")
    files = sorted(lat_dir.glob("*.lat"))
    if not files:
        raise ConfigError(f"no .lat files in {lat_dir}")
    return files


def _fresh_stack(cfg: RunConfig, model, tree, capacity_bytes: int = 0) -> RescoreStack:
    return RescoreStack(
        model=model, tree=tree,
        table=IndexTable(model.hidden_size, model.maxent_order),
        cache=RescoreCache(capacity_bytes=capacity_bytes),
        ledger=TransferLedger())


def cmd_decode(args) -> int:
    cfg = load_config(args.config)
    beam = args.beam or cfg.beam
    vocab, tree = _load_vocab_tree(cfg)
    small_lm = load_arpa(_require(cfg.resolve("lattice_lm"), "lattice LM"), vocab)
    model = None
    if args.mode != "ngram":
        model = RnnlmModel.load(_require(cfg.resolve("rnnlm_model"), "recurrent LM model"))
    comparison_lm = small_lm
    if args.mode == "twopass-hybrid":
        comparison_lm = load_arpa(_require(cfg.resolve("ngram_model"), "comparison LM"), vocab)

    files = _lattice_files(cfg, args.lattices)
    stack = _fresh_stack(cfg, model, tree) if args.mode == "onthefly" else None
    total_expansions = 0
    for path in files:
        lat = Lattice.load(path)
        if args.mode == "onthefly":
            hyp, report = rescore_onthefly(lat, small_lm, stack,
                                           lm_weight=cfg.lm_weight, beam=beam)
            total_expansions += report.expansions
            reset_utterance(stack.cache, stack.table,
                            retain=cfg.retain_across_utterances)
        elif args.mode == "ngram":
            hyp = nbest(lat, 1, lm_weight=cfg.lm_weight)[0]
        else:
            hyps = nbest(lat, cfg.nbest_n, lm_weight=cfg.lm_weight)
            mode = "rnnlm" if args.mode == "twopass-rnnlm" else "hybrid"
            hyp = rescore_twopass(hyps, mode, model, tree, comparison_lm,
                                  interp_weight=cfg.interp_weight,
                                  lm_weight=cfg.lm_weight)
        words = " ".join(vocab.words[w] for w in hyp.words)
        print(f"{path.stem}\t{words}\t{hyp.combined_score:.6f}")
    print(f"# mode={args.mode} beam={beam} utterances={len(files)}")
    if stack is not None:
        print(f"# cache {stack.cache.cumulative_stats().line()}")
        print(f"# transfer requests={stack.ledger.requests} "
              f"bytes_indexed={stack.ledger.bytes_indexed} "
              f"bytes_full_baseline={stack.ledger.bytes_full_baseline} "
              f"expansions={total_expansions}")
    return 0


# -- bench ------------------------------------------------------------------


def _decode_all_onthefly(cfg: RunConfig, files, small_lm, model, tree,
                         capacity_kb: int, retain: bool):
    """One sweep configuration over all utterances; per-utterance records."""
    stack = _fresh_stack(cfg, model, tree, capacity_bytes=capacity_kb * 1024)
    records = []
    for path in files:
        lat = Lattice.load(path)
        req_before = stack.ledger.requests
        bytes_before = stack.ledger.bytes_indexed
        hyp, report = rescore_onthefly(lat, small_lm, stack,
                                       lm_weight=cfg.lm_weight, beam=cfg.beam)
        stats = stack.cache.stats()
        records.append({
            "utt": path.stem,
            "lookups": stats.lookups, "hits": stats.hits,
            "misses": stats.misses, "evictions": stats.evictions,
            "entries": len(stack.cache),
            "resident_bytes": stack.cache.resident_bytes,
            "table_entries": len(stack.table),
            "table_bytes": stack.table.memory_report()[2],
            "requests": stack.ledger.requests - req_before,
            "bytes_indexed": stack.ledger.bytes_indexed - bytes_before,
            "expansions": report.expansions,
            "score": hyp.combined_score,
            "words": list(hyp.words),
        })
        reset_utterance(stack.cache, stack.table, retain=retain)
    ledger = {
        "requests": stack.ledger.requests,
        "bytes_indexed": stack.ledger.bytes_indexed,
        "bytes_full_baseline": stack.ledger.bytes_full_baseline,
        "context_bytes": stack.table.element_bytes,
    }
    return records, ledger


def render_sweep_table(raw: dict) -> str:
    lines = [f"# seed={raw['seed']} {raw['config']}",
             "capacity_kb\tavg_entries\tavg_resident_mb\tcomputes\trequests"
             "\thit_ratio_pooled\thit_ratio_mean_per_utt"]
    for run in raw["sweep"]:
        utts = run["utterances"]
        n = len(utts)
        avg_entries = sum(u["entries"] for u in utts) / n
        avg_mb = sum(u["resident_bytes"] for u in utts) / n / 1e6
        computes = sum(u["misses"] for u in utts)
        lookups = sum(u["lookups"] for u in utts)
        hits = sum(u["hits"] for u in utts)
        pooled = hits / lookups if lookups else 0.0
        mean_ratio = sum(
            (u["hits"] / u["lookups"] if u["lookups"] else 0.0) for u in utts) / n
        lines.append(f"{run['capacity_kb']}\t{avg_entries:.1f}\t{avg_mb:.4f}"
                     f"\t{computes}\t{lookups}\t{pooled:.4f}\t{mean_ratio:.4f}")
    return "\n".join(lines) + "\n"


def render_transfer_table(raw: dict) -> str:
    t = raw["transfer"]
    ratio = t["bytes_full_baseline"] / t["bytes_indexed"]
    lines = [f"# seed={raw['seed']} {raw['config']}",
             "requests\tbytes_indexed\tbytes_full_baseline\tcontext_bytes\treduction_ratio",
             f"{t['requests']}\t{t['bytes_indexed']}\t{t['bytes_full_baseline']}"
             f"\t{t['context_bytes']}\t{ratio:.4f}"]
    return "\n".join(lines) + "\n"


def render_comparison_table(raw: dict) -> str:
    lines = [f"# seed={raw['seed']} {raw['config']}",
             "pass_model\ttoken_error_rate\tmean_score\tcomputes"]
    for row in raw["comparison"]:
        utts = row["utterances"]
        errors = sum(u["errors"] for u in utts)
        ref_len = sum(u["ref_len"] for u in utts)
        ter = errors / ref_len if ref_len else 0.0
        mean_score = sum(u["score"] for u in utts) / len(utts)
        lines.append(f"{row['name']}\t{ter:.4f}\t{mean_score:.4f}\t{row['computes']}")
    return "\n".join(lines) + "\n"


def cmd_bench(args) -> int:
    cfg = load_config(args.config)
    vocab, tree = _load_vocab_tree(cfg)
    small_lm = load_arpa(_require(cfg.resolve("lattice_lm"), "lattice LM"), vocab)
    comparison_lm = load_arpa(_require(cfg.resolve("ngram_model"), "comparison LM"), vocab)
    model = RnnlmModel.load(_require(cfg.resolve("rnnlm_model"), "recurrent LM model"))
    files = _lattice_files(cfg, [])
    refs_path = _require(cfg.resolve("lattice_dir") / "refs.tsv", "references file")
    refs = {}
    for line in open(refs_path, encoding="utf-8"):
        utt, _, text = line.rstrip("\n").partition("\t")
        refs[utt] = vocab.tokenize(text)
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    raw = {"seed": cfg.seed, "config": cfg.echo(), "sweep": [], "comparison": []}

    # (a) cache capacity sweep; capacity 0 = unbounded with per-utterance
    # reset, positive capacities retain entries across utterances
    for cap_kb in cfg.cache_capacity_kb:
        retain = cap_kb > 0
        records, ledger = _decode_all_onthefly(
            cfg, files, small_lm, model, tree, cap_kb, retain)
        raw["sweep"].append({"capacity_kb": cap_kb, "retain": retain,
                             "utterances": records, "ledger": ledger})

    # (b) transfer accounting from the first sweep run
    raw["transfer"] = raw["sweep"][0]["ledger"]

    # (c) Table-2-shaped comparison rows
    def comparison_row(name, decode_one, computes=0):
        utts = []
        for path in files:
            lat = Lattice.load(path)
            hyp = decode_one(lat)
            ref = refs.get(path.stem, [])
            utts.append({"utt": path.stem, "score": hyp.combined_score,
                         "errors": edit_distance(ref, list(hyp.words)),
                         "ref_len": len(ref), "words": list(hyp.words)})
        return {"name": name, "utterances": utts, "computes": computes}

    raw["comparison"].append(comparison_row(
        "1/ngram", lambda lat: nbest(lat, 1, lm_weight=cfg.lm_weight)[0]))

    onefly_stack = _fresh_stack(cfg, model, tree)

    def decode_onthefly(lat):
        hyp, _ = rescore_onthefly(lat, small_lm, onefly_stack,
                                  lm_weight=cfg.lm_weight, beam=cfg.beam)
        reset_utterance(onefly_stack.cache, onefly_stack.table,
                        retain=cfg.retain_across_utterances)
        return hyp

    row = comparison_row("1/rnnlm", decode_onthefly)
    row["computes"] = onefly_stack.cache.cumulative_stats().misses
    raw["comparison"].append(row)

    for name, mode in (("2/hybrid", "hybrid"), ("2/rnnlm", "rnnlm")):
        def decode_twopass(lat, mode=mode):
            hyps = nbest(lat, cfg.nbest_n, lm_weight=cfg.lm_weight)
            return rescore_twopass(hyps, mode, model, tree, comparison_lm,
                                   interp_weight=cfg.interp_weight,
                                   lm_weight=cfg.lm_weight)
        raw["comparison"].append(comparison_row(name, decode_twopass))

    raw_path = out_dir / "bench_raw.json"
    raw_path.write_text(json.dumps(raw, indent=1), encoding="utf-8")
    tables = {
        "bench_cache_sweep.tsv": render_sweep_table(raw),
        "bench_transfer.tsv": render_transfer_table(raw),
        "bench_comparison.tsv": render_comparison_table(raw),
    }
    for name, text in tables.items():
        (out_dir / name).write_text(text, encoding="utf-8")
        print(f"== {name}")
        sys.stdout.write(text)
    print(f"wrote {raw_path}")
    return 0


def cmd_report(args) -> int:
    cfg = load_config(args.config)
    raw_path = _require(Path(cfg.output_dir) / "bench_raw.json", "raw benchmark dump")
    raw = json.loads(raw_path.read_text(encoding="utf-8"))
    for name, render in (("cache_sweep", render_sweep_table),
                         ("transfer", render_transfer_table),
                         ("comparison", render_comparison_table)):
        print(f"== {name}")
        sys.stdout.write(render(raw))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="otflm",
        description="train, decode and benchmark the on-the-fly rescoring stack")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train-rnnlm", help="train the recurrent LM")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_train_rnnlm)

    p = sub.add_parser("train-ngram", help="train a backoff n-gram LM")
    p.add_argument("--config", required=True)
    p.add_argument("--role", choices=("comparison", "lattice"), default="comparison",
                   help="comparison model (ngram_order) or lattice small LM")
    p.set_defaults(func=cmd_train_ngram)

    p = sub.add_parser("gen-lattices", help="generate synthetic lattices")
    p.add_argument("--config", required=True)
    p.add_argument("--count", type=int, default=0,
                   help="override utterance_count from the config")
    p.set_defaults(func=cmd_gen_lattices)

    p = sub.add_parser("decode", help="decode lattices")
    p.add_argument("--config", required=True)
    p.add_argument("--mode", choices=DECODE_MODES, default="onthefly")
    p.add_argument("--beam", type=int, default=0, help="override config beam")
    p.add_argument("lattices", nargs="*", help="lattice files (default: lattice_dir)")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("bench", help="cache sweep, transfer and comparison tables")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("report", help="re-render tables from the raw dump")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failures
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
