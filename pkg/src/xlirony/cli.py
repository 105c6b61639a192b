"""Command-line entry point: ``xlirony <command> [<action>] [options]``.

Exit status is 0 on success, 1 on a domain error (bad data, failed fit) and
2 on a usage error. Every command that writes files also writes a run
manifest next to its output, or to ``--manifest-out``.
"""

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

import yaml

from . import LANGS, __version__
from .errors import IronyError
from .manifest import RunManifest, digests

log = logging.getLogger("xlirony")


# --- helpers -----------------------------------------------------------------

def _write_text(path, text: str) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(text, encoding="utf-8")


def _emit(text: str, out) -> None:
    if out:
        _write_text(out, text)
    else:
        sys.stdout.write(text)


def _manifest(args, config: dict, inputs, default_path=None) -> None:
    path = args.manifest_out or default_path
    if path is None:
        return
    m = RunManifest(command=args.command_line, config=config, input_digests=digests(inputs), seed=args.seed)
    m.write(path)
    log.info("manifest written to %s", path)


def _parent(path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)


def _beside(out) -> Path:
    return Path(str(out) + ".manifest.json")


def _read_yaml(path) -> dict:
    try:
        raw = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    except OSError as exc:
        raise IronyError(f"{path}: cannot read ({exc.strerror})") from exc
    except yaml.YAMLError as exc:
        raise IronyError(f"{path}: invalid YAML ({exc})") from exc
    if not isinstance(raw, dict):
        raise IronyError(f"{path}: expected a mapping")
    return raw


def _embedding_args(values, corpus_langs) -> dict:
    """``LANG=PATH`` entries, or a bare PATH when the corpus has a single language."""
    out = {}
    for v in values or []:
        lang, sep, path = v.partition("=")
        if not sep:
            if len(corpus_langs) != 1:
                raise IronyError("several corpus languages: give embeddings as LANG=PATH")
            lang, path = next(iter(corpus_langs)), v
        if lang not in LANGS:
            raise IronyError(f"unknown embedding language {lang!r}")
        out[lang] = path
    return out


def _lexicons(directory, langs) -> dict:
    from .features import bundled_lexicons, load_lexicons
    return {l: load_lexicons(directory, l) if directory else bundled_lexicons(l) for l in langs}


# --- corpus ------------------------------------------------------------------

def cmd_corpus_stats(args) -> None:
    from .corpus import concat, load_corpus, stats
    st = stats(concat([load_corpus(p) for p in args.inputs]))
    rows = [("Language", "Ironic", "Non-ironic", "Total")]
    rows += [(l, v["ironic"], v["non_ironic"], v["total"]) for l, v in st.per_lang.items()]
    if len(st.per_lang) > 1:
        rows.append(("all", st.n_ironic, st.n_non_ironic, st.n_total))
    if args.format == "csv":
        buf = io.StringIO()
        csv.writer(buf, lineterminator="\n").writerows(rows)
        text = buf.getvalue()
    else:
        widths = [max(len(str(r[i])) for r in rows) for i in range(4)]
        text = "\n".join("  ".join(str(c).ljust(w) if i == 0 else f"{c:,}".rjust(w) if isinstance(c, int)
                                   else str(c).rjust(w) for i, (c, w) in enumerate(zip(r, widths)))
                         for r in rows) + "\n"
    _emit(text, args.out)
    _manifest(args, {"inputs": args.inputs, "format": args.format}, args.inputs,
              _beside(args.out) if args.out else None)


def cmd_corpus_preprocess(args) -> None:
    from .corpus import default_preprocess_config, load_corpus, load_preprocess_config, preprocess_dataset, save_corpus
    cfg = load_preprocess_config(args.config) if args.config else default_preprocess_config()
    ds = load_corpus(args.input)
    out = preprocess_dataset(ds, cfg)
    _parent(args.out)
    save_corpus(out, args.out)
    log.info("%d of %d tweets kept", len(out), len(ds))
    _manifest(args, {"input": args.input, "config": args.config}, [args.input, args.config], _beside(args.out))


def cmd_corpus_split(args) -> None:
    from .corpus import load_corpus, save_corpus, split
    ds = load_corpus(args.input)
    s = split(ds, args.n_train, args.n_test, args.seed)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = Path(args.input).stem
    save_corpus(s.train, out / f"{stem}_train.csv")
    save_corpus(s.test, out / f"{stem}_test.csv")
    _manifest(args, {"input": args.input, "n_train": args.n_train, "n_test": args.n_test},
              [args.input], out / f"{stem}_split.manifest.json")


# --- features / embeddings ---------------------------------------------------

def cmd_features_extract(args) -> None:
    from .corpus import load_corpus
    from .features import CROSSLINGUAL_SLOTS, SLOTS, feature_matrix
    ds = load_corpus(args.corpus)
    slots = CROSSLINGUAL_SLOTS if args.surface else SLOTS
    X = feature_matrix(ds, _lexicons(args.lexicons, {t.lang for t in ds}), slots)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("id", "lang", "label") + tuple(slots))
    for t, row in zip(ds, X):
        w.writerow((t.id, t.lang, t.label) + tuple(int(v) if float(v).is_integer() else v for v in row))
    _emit(buf.getvalue(), args.out)
    _manifest(args, {"corpus": args.corpus, "lexicons": args.lexicons, "slots": list(slots)},
              [args.corpus], _beside(args.out) if args.out else None)


def cmd_embeddings_coverage(args) -> None:
    from .corpus import load_corpus
    from .embeddings import coverage, load_embeddings
    rep = coverage(load_corpus(args.corpus), load_embeddings(args.embeddings, args.max_vocab))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("oov_word", "count"))
    w.writerows(rep.oov_types)
    _emit(buf.getvalue(), args.out)
    print(f"token_coverage={rep.token_coverage:.4f} type_coverage={rep.type_coverage:.4f} "
          f"tokens={rep.n_tokens} types={rep.n_types} oov_types={len(rep.oov_types)}", file=sys.stderr)
    _manifest(args, {"corpus": args.corpus, "embeddings": args.embeddings, "max_vocab": args.max_vocab},
              [args.corpus, args.embeddings], _beside(args.out) if args.out else None)


# --- align -------------------------------------------------------------------

def cmd_align_fit(args) -> None:
    from .align import fit_procrustes, load_dictionary, refine, save_map
    from .embeddings import load_embeddings, normalize
    src = normalize(load_embeddings(args.src, args.max_vocab))
    tgt = normalize(load_embeddings(args.tgt, args.max_vocab))
    m = fit_procrustes(src, tgt, load_dictionary(args.dict), args.src_lang, args.tgt_lang)
    log.info("fitted on %d pairs, residual %.6g", m.n_pairs, m.residual)
    if args.refine:
        m, residuals = refine(src, tgt, m, args.refine)
        log.info("refinement residuals: %s", ", ".join(f"{r:.6g}" for r in residuals))
    _parent(args.out)
    save_map(m, args.out)
    _manifest(args, {"src": args.src, "tgt": args.tgt, "dict": args.dict, "refine": args.refine,
                     "max_vocab": args.max_vocab}, [args.src, args.tgt, args.dict], _beside(args.out))


def cmd_align_apply(args) -> None:
    from .align import load_map, map_table
    from .embeddings import load_embeddings, normalize, save_embeddings
    _parent(args.out)
    save_embeddings(map_table(normalize(load_embeddings(args.src, args.max_vocab)), load_map(args.map)), args.out)
    _manifest(args, {"src": args.src, "map": args.map, "max_vocab": args.max_vocab},
              [args.src, args.map], _beside(args.out))


def cmd_align_neighbors(args) -> None:
    from .align import CslsConfig, CslsIndex, load_map, map_table
    from .embeddings import load_embeddings, normalize
    src = map_table(normalize(load_embeddings(args.src, args.max_vocab)), load_map(args.map))
    tgt = normalize(load_embeddings(args.tgt, args.max_vocab))
    i = src.index(args.word)
    if i is None:
        raise IronyError(f"{args.word!r} is not in the source vocabulary")
    index = CslsIndex(tgt, src.matrix, CslsConfig(k=args.csls_k))
    lines = [f"{w}\t{s:.6f}" for w, s in index.neighbors(src.matrix[i], args.k)]
    _emit("\n".join(lines) + "\n", args.out)
    _manifest(args, {"src": args.src, "tgt": args.tgt, "map": args.map, "word": args.word, "k": args.k,
                     "csls_k": args.csls_k}, [args.src, args.tgt, args.map],
              _beside(args.out) if args.out else None)


# --- models ------------------------------------------------------------------

def cmd_train(args) -> None:
    from .corpus import load_corpus
    ds = load_corpus(args.corpus)
    langs = {t.lang for t in ds}
    options = _read_yaml(args.config) if args.config else {}
    inputs = [args.corpus, args.config]
    if args.model == "rf":
        from .features import CROSSLINGUAL_SLOTS, SLOTS, feature_matrix
        from .models import rf
        try:
            params = rf.RFParams(**options)
        except TypeError as exc:
            raise IronyError(f"bad forest options: {exc}") from None
        slots = CROSSLINGUAL_SLOTS if args.surface else SLOTS
        model = rf.rf_train(feature_matrix(ds, _lexicons(args.lexicons, langs), slots),
                            [t.label for t in ds], params, args.seed, slots)
        text = rf.dumps(model)
    else:
        from .embeddings import load_embeddings
        from .models import cnn
        emb = _embedding_args(args.embeddings, langs)
        missing = langs - set(emb)
        if missing:
            raise IronyError(f"no embeddings for {sorted(missing)}")
        tables = {l: load_embeddings(p, args.max_vocab, lang=l) for l, p in emb.items()}
        cfg = cnn.TrainConfig.from_dict({**options, "seed": args.seed})
        result = cnn.cnn_train(ds, tables, cfg)
        log.info("best epoch %d, validation macro-F %s", result.best_epoch, result.best_val_macro_f1)
        text = cnn.dumps(result.model)
        inputs += list(emb.values())
    _write_text(args.out, text)
    _manifest(args, {"model": args.model, "corpus": args.corpus, "config": options,
                     "embeddings": args.embeddings, "lexicons": args.lexicons, "surface": args.surface,
                     "max_vocab": args.max_vocab}, inputs, _beside(args.out))


def load_model(path):
    """(family, model) from a model file, dispatching on its header line."""
    from .models import cnn, rf
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IronyError(f"{path}: cannot read model ({exc.strerror})") from exc
    head = text.split(maxsplit=1)[0] if text.strip() else ""
    if head == rf.FORMAT:
        return "rf", rf.loads(text)
    if head == cnn.FORMAT:
        return "cnn", cnn.loads(text)
    raise IronyError(f"{path}: unrecognised model file")


def cmd_predict(args) -> None:
    from .corpus import load_corpus
    from .eval.experiment import predictions_csv
    ds = load_corpus(args.corpus)
    family, model = load_model(args.model_file)
    if family == "rf":
        from .features import feature_matrix
        from .models import rf
        X = feature_matrix(ds, _lexicons(args.lexicons, {t.lang for t in ds}), model.slots)
        labels, proba = rf.rf_predict(model, X, model.slots)
        p_ironic = proba[:, model.classes.index("ironic")] if "ironic" in model.classes else [0.0] * len(ds)
    else:
        from .models import cnn
        labels, p_ironic = cnn.cnn_predict(model, ds)
    _write_text(args.out, predictions_csv([(t.id, t.label, l, float(p))
                                           for t, l, p in zip(ds, labels, p_ironic)]))
    _manifest(args, {"model_file": args.model_file, "corpus": args.corpus, "lexicons": args.lexicons},
              [args.model_file, args.corpus], _beside(args.out))


def cmd_tune(args) -> None:
    from .corpus import load_corpus
    from .embeddings import load_embeddings
    from .models.cnn import TrainConfig
    from .models.tuning import DEFAULT_SPACE, tune_random_search
    ds = load_corpus(args.corpus)
    emb = _embedding_args(args.embeddings, {t.lang for t in ds})
    tables = {l: load_embeddings(p, args.max_vocab, lang=l) for l, p in emb.items()}
    space = _read_yaml(args.space) if args.space else DEFAULT_SPACE
    base = TrainConfig.from_dict({**(_read_yaml(args.config) if args.config else {}), "seed": args.seed})
    best, trials = tune_random_search(ds, tables, space, args.budget, args.seed, base)
    _write_text(args.out, yaml.safe_dump(best.to_dict(), sort_keys=True))
    _write_text(str(args.out) + ".trials.json", json.dumps(trials, sort_keys=True, indent=2) + "\n")
    _manifest(args, {"corpus": args.corpus, "embeddings": args.embeddings, "space": space,
                     "budget": args.budget, "config": args.config, "max_vocab": args.max_vocab},
              [args.corpus, args.space, args.config] + list(emb.values()), _beside(args.out))


# --- experiments -------------------------------------------------------------

def cmd_experiment_run(args) -> None:
    from .eval import config as mcfg
    from .eval.experiment import run_matrix
    if args.manifest:
        m = RunManifest.read(args.manifest)
        stale = m.stale_inputs()
        if stale:
            raise IronyError("inputs changed since the manifest was written: " + ", ".join(stale))
        cfg = m.config
        args.seed = m.seed
    else:
        cfg = mcfg.read_matrix(args.matrix)
        if args.seed is None:
            args.seed = int(cfg.get("seed", 42))
    cfg["seed"] = args.seed
    specs, res = mcfg.load(cfg)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    results = run_matrix(specs, res, out, args.jobs)
    if not args.quiet:
        from .eval.report import to_text
        sys.stdout.write(to_text([(r.spec, r.metrics, r.confusion) for r in results]))
    _manifest(args, cfg, mcfg.input_files(cfg), out / "manifest.json")


def cmd_experiment_report(args) -> None:
    from .eval import report
    results = report.load_results(args.in_dir)
    text = report.to_csv(results) if args.format == "csv" else report.to_text(results)
    _emit(text, args.out)
    figs = []
    if not args.no_figures:
        from .eval.plots import render
        figs = render(results, args.fig_dir or Path(args.in_dir) / "figures", args.fig_format)
        for f in figs:
            log.info("figure written to %s", f)
    metric_files = sorted(Path(args.in_dir, "metrics").glob("*.json"))
    _manifest(args, {"in_dir": args.in_dir, "format": args.format}, metric_files,
              _beside(args.out) if args.out else None)


def cmd_synth(args) -> None:
    from .synthetic import make_world, write_world
    world = make_world(n_tweets=args.n_tweets, dim=args.dim, seed=args.world_seed)
    path = write_world(world, args.out_dir, n_test=args.n_test, seed=args.seed)
    print(path)
    _manifest(args, {"n_tweets": args.n_tweets, "dim": args.dim, "world_seed": args.world_seed,
                     "n_test": args.n_test}, [], Path(args.out_dir) / "synth.manifest.json")


# --- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("global options")
    g.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="random seed (default 42)")
    g.add_argument("--jobs", type=int, default=argparse.SUPPRESS, help="parallel experiments")
    g.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS, help="warnings and errors only")
    g.add_argument("--manifest-out", default=argparse.SUPPRESS, metavar="PATH", help="where to write the run manifest")

    p = argparse.ArgumentParser(prog="xlirony", parents=[common],
                                description="Cross-lingual irony detection toolkit.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", metavar="COMMAND", required=True)

    def group(name, help_):
        sp = sub.add_parser(name, help=help_, parents=[common])
        return sp.add_subparsers(dest="action", metavar="ACTION", required=True)

    def leaf(parent, name, fn, help_):
        sp = parent.add_parser(name, help=help_, parents=[common])
        sp.set_defaults(func=fn)
        return sp

    c = group("corpus", "corpus statistics, cleaning and splitting")
    sp = leaf(c, "stats", cmd_corpus_stats, "ironic / non-ironic counts per language")
    sp.add_argument("--in", dest="inputs", nargs="+", required=True, metavar="CSV")
    sp.add_argument("--format", choices=("txt", "csv"), default="txt")
    sp.add_argument("--out")
    sp = leaf(c, "preprocess", cmd_corpus_preprocess, "strip irony hashtags, mentions, URLs, foreign tokens")
    sp.add_argument("--in", dest="input", required=True, metavar="CSV")
    sp.add_argument("--out", required=True)
    sp.add_argument("--config", help="YAML preprocessing config")
    sp = leaf(c, "split", cmd_corpus_split, "seeded train/test split")
    sp.add_argument("--in", dest="input", required=True, metavar="CSV")
    sp.add_argument("--n-train", type=int, required=True)
    sp.add_argument("--n-test", type=int, required=True)
    sp.add_argument("--out-dir", required=True)

    f = group("features", "surface and lexicon features")
    sp = leaf(f, "extract", cmd_features_extract, "one feature row per tweet (CSV)")
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--lexicons", help="lexicon root directory (bundled lists otherwise)")
    sp.add_argument("--surface", action="store_true", help="language-independent slots only")
    sp.add_argument("--out")

    e = group("embeddings", "embedding tables")
    sp = leaf(e, "coverage", cmd_embeddings_coverage, "OOV list (CSV) and a coverage summary line")
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--embeddings", required=True)
    sp.add_argument("--max-vocab", type=int)
    sp.add_argument("--out")

    a = group("align", "bilingual embedding alignment")
    sp = leaf(a, "fit", cmd_align_fit, "orthogonal map from a seed dictionary")
    sp.add_argument("--src", required=True)
    sp.add_argument("--tgt", required=True)
    sp.add_argument("--dict", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--src-lang", choices=LANGS)
    sp.add_argument("--tgt-lang", choices=LANGS)
    sp.add_argument("--refine", type=int, default=0, metavar="ROUNDS", help="CSLS refinement rounds")
    sp.add_argument("--max-vocab", type=int)
    sp = leaf(a, "apply", cmd_align_apply, "map a table into the target space")
    sp.add_argument("--src", required=True)
    sp.add_argument("--map", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--max-vocab", type=int)
    sp = leaf(a, "neighbors", cmd_align_neighbors, "CSLS translations of a source word")
    sp.add_argument("--word", required=True)
    sp.add_argument("--src", required=True)
    sp.add_argument("--tgt", required=True)
    sp.add_argument("--map", required=True)
    sp.add_argument("--k", type=int, default=10, help="neighbours to list")
    sp.add_argument("--csls-k", type=int, default=10, help="neighbourhood size for the hubness penalty")
    sp.add_argument("--max-vocab", type=int)
    sp.add_argument("--out")

    sp = sub.add_parser("train", help="train a forest or CNN", parents=[common])
    sp.set_defaults(func=cmd_train)
    sp.add_argument("--model", choices=("rf", "cnn"), required=True)
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--embeddings", action="append", metavar="[LANG=]PATH")
    sp.add_argument("--config", help="YAML model options")
    sp.add_argument("--lexicons")
    sp.add_argument("--surface", action="store_true", help="forest on language-independent slots")
    sp.add_argument("--max-vocab", type=int)
    sp.add_argument("--out", required=True)

    sp = sub.add_parser("predict", help="label a corpus with a trained model", parents=[common])
    sp.set_defaults(func=cmd_predict)
    sp.add_argument("--model-file", required=True)
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--lexicons")
    sp.add_argument("--out", required=True)

    sp = sub.add_parser("tune", help="random search over CNN options", parents=[common])
    sp.set_defaults(func=cmd_tune)
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--embeddings", action="append", required=True, metavar="[LANG=]PATH")
    sp.add_argument("--space", help="YAML mapping option -> list of choices")
    sp.add_argument("--config", help="YAML base options")
    sp.add_argument("--budget", type=int, default=10)
    sp.add_argument("--max-vocab", type=int)
    sp.add_argument("--out", required=True, help="best configuration (YAML)")

    x = group("experiment", "experiment matrices")
    sp = leaf(x, "run", cmd_experiment_run, "run a matrix and write predictions, metrics and logs")
    src = sp.add_mutually_exclusive_group(required=True)
    src.add_argument("--matrix", help="YAML experiment matrix")
    src.add_argument("--manifest", help="re-run from a previous run's manifest")
    sp.add_argument("--out-dir", required=True)
    sp = leaf(x, "report", cmd_experiment_report, "result tables and figures")
    sp.add_argument("--in-dir", required=True)
    sp.add_argument("--format", choices=("csv", "txt"), default="txt")
    sp.add_argument("--out")
    sp.add_argument("--fig-dir")
    sp.add_argument("--fig-format", choices=("png", "svg", "pdf"), default="png")
    sp.add_argument("--no-figures", action="store_true")

    sp = sub.add_parser("synth", help="write a synthetic three-language demo world", parents=[common])
    sp.set_defaults(func=cmd_synth)
    sp.add_argument("--out-dir", required=True)
    sp.add_argument("--n-tweets", type=int, default=600)
    sp.add_argument("--n-test", type=int, default=150)
    sp.add_argument("--dim", type=int, default=20)
    sp.add_argument("--world-seed", type=int, default=0)
    return p


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    if not argv:
        parser.print_usage(sys.stderr)
        return 2
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    explicit_seed = hasattr(args, "seed")
    args.seed = getattr(args, "seed", None)
    if not explicit_seed and args.func is not cmd_experiment_run:
        args.seed = 42
    args.jobs = getattr(args, "jobs", 1)
    args.quiet = getattr(args, "quiet", False)
    args.manifest_out = getattr(args, "manifest_out", None)
    args.command_line = " ".join(["xlirony"] + argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr, force=True)
    if args.jobs < 1:
        parser.print_usage(sys.stderr)
        print("xlirony: error: --jobs must be >= 1", file=sys.stderr)
        return 2
    try:
        args.func(args)
    except IronyError as exc:
        print(f"xlirony: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"xlirony: error: {exc.filename or ''}: {exc.strerror}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
