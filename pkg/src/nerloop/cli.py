"""The nerloop command line.

Subcommands cover the whole workflow: generate a synthetic corpus, run the
annotation loop (simulated or human-backed), train/evaluate/analyze
taggers, extract entities corpus-wide with two-model voting, compare
against reference lists, export datasets, and serve the review queue.

Options can come from a YAML config file (--config; keys nested per
subcommand) and from NERLOOP_* environment variables.
"""

from __future__ import annotations

from pathlib import Path

import click
import yaml

from .annotations import export_iob_csv, read_dataset, write_dataset
from .corpus import Paragraph, load_corpus, read_documents
from .evaluation import (
    ContextScope,
    context_frequencies,
    evaluate_model,
    kfold_run,
    prf1,
)
from .extraction import (
    compare_reference,
    extract_corpus,
    read_report_csv,
    write_report_csv,
)
from .lexicon import has_code, load_lexicon
from .loop import (
    IdentityAnnotator,
    LoopParams,
    SimulatedAnnotator,
    TaggerTrainer,
    load_state,
    run_workflow,
)
from .service import ReviewQueue, ServiceAnnotator, create_app
from .synthetic import generate, load_truth
from .tagger import TaggerModel, TrainConfig, train


def _load_config(ctx: click.Context, param: click.Parameter, value: str | None):
    if not value:
        return None
    with open(value, "r", encoding="utf-8") as f:
        config = yaml.safe_load(f) or {}
    ctx.default_map = config
    return value


@click.group(context_settings={"auto_envvar_prefix": "NERLOOP"})
@click.option(
    "--config",
    type=click.Path(exists=True, dir_okay=False),
    callback=_load_config,
    expose_value=False,
    is_eager=True,
    help="YAML config file; top-level keys are subcommand names.",
)
def main() -> None:
    """Model-in-the-loop NER annotation toolkit."""


train_options = [
    click.option("--variant", type=click.Choice(["a", "b"]), default="a", show_default=True),
    click.option("--max-epochs", type=int, default=64, show_default=True),
    click.option("--l2", type=float, default=1e-3, show_default=True),
    click.option("--learning-rate", type=float, default=0.5, show_default=True),
    click.option("--validation-split", type=float, default=0.1, show_default=True),
    click.option("--train-seed", type=int, default=13, show_default=True),
]


def with_options(options):
    def wrap(fn):
        for option in reversed(options):
            fn = option(fn)
        return fn

    return wrap


def _train_config(variant, max_epochs, l2, learning_rate, validation_split, train_seed) -> TrainConfig:
    return TrainConfig(
        max_epochs=max_epochs,
        l2=l2,
        learning_rate=learning_rate,
        validation_split=validation_split,
        seed=train_seed,
        variant=variant,
    )


@main.command()
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True)
@click.option("--paragraphs", type=int, default=5000, show_default=True)
@click.option("--terms", type=int, default=300, show_default=True)
@click.option("--extra-terms", type=int, default=150, show_default=True)
@click.option("--seed", type=int, default=7, show_default=True)
def synth(out_dir, paragraphs, terms, extra_terms, seed):
    """Generate a synthetic corpus, gazetteer, reference list, and truth file."""
    corpus = generate(
        n_paragraphs=paragraphs, n_lexicon_terms=terms, n_extra_terms=extra_terms, seed=seed
    )
    paths = corpus.write(out_dir)
    for name, path in paths.items():
        click.echo(f"{name}: {path}")


@main.command()
@click.option("--corpus", "corpus_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--lexicon", "lexicon_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--annotator", type=click.Choice(["simulated", "identity", "service"]), default="simulated", show_default=True)
@click.option("--truth", "truth_path", type=click.Path(exists=True, dir_okay=False), help="Truth file for the simulated annotator.")
@click.option("--error-rate", type=float, default=0.2, show_default=True)
@click.option("--annotator-seed", type=int, default=21, show_default=True)
@click.option("--state", "state_path", type=click.Path(dir_okay=False), required=True)
@click.option("--resume", is_flag=True, help="Continue from the saved state file.")
@click.option("--n0", type=int, default=278, show_default=True)
@click.option("--n", type=int, default=120, show_default=True)
@click.option("--nt", type=int, default=500, show_default=True)
@click.option("--epsilon", type=float, default=0.0, show_default=True)
@click.option("--conf-min", type=float, default=0.45, show_default=True)
@click.option("--conf-max", type=float, default=0.55, show_default=True)
@click.option("--stream-seed", type=int, default=42, show_default=True)
@click.option("--run-seed", type=int, default=13, show_default=True)
@with_options(train_options)
@click.option("--serve-host", default="127.0.0.1", show_default=True)
@click.option("--serve-port", type=int, default=8000, show_default=True)
@click.option("--report-dir", type=click.Path(file_okay=False))
@click.option("--export-gold", type=click.Path(dir_okay=False))
@click.option("--export-test", type=click.Path(dir_okay=False))
def run(
    corpus_path,
    lexicon_path,
    annotator,
    truth_path,
    error_rate,
    annotator_seed,
    state_path,
    resume,
    n0,
    n,
    nt,
    epsilon,
    conf_min,
    conf_max,
    stream_seed,
    run_seed,
    variant,
    max_epochs,
    l2,
    learning_rate,
    validation_split,
    train_seed,
    serve_host,
    serve_port,
    report_dir,
    export_gold,
    export_test,
):
    """Run (or resume) the three-phase annotation workflow."""
    state = None
    if resume:
        state = load_state(state_path)
        stream_seed = state.stream_seed
    stream = load_corpus(corpus_path, seed=stream_seed)
    lexicon = load_lexicon(lexicon_path)
    params = LoopParams(
        n0=n0, n=n, nt=nt, epsilon=epsilon, conf_min=conf_min, conf_max=conf_max
    )
    trainer = TaggerTrainer(
        cfg=_train_config(variant, max_epochs, l2, learning_rate, validation_split, train_seed),
        lexicon=lexicon,
    )

    if annotator == "simulated":
        if not truth_path:
            raise click.UsageError("--annotator simulated requires --truth")
        annot = SimulatedAnnotator(load_truth(truth_path), error_rate=error_rate, seed=annotator_seed)
    elif annotator == "identity":
        annot = IdentityAnnotator()
    else:
        annot = _start_service_annotator(state_path, serve_host, serve_port)

    final = run_workflow(
        stream,
        lexicon,
        annot,
        trainer,
        params=params,
        run_seed=run_seed,
        state=state,
        state_path=state_path,
    )
    click.echo(f"phase: {final.phase.value}")
    click.echo(f"test set: {len(final.test)}  gold set: {len(final.gold)}")
    for round_no, f1 in final.f1_history:
        click.echo(f"round {round_no}: F1 = {f1:.4f}")
    if final.flags:
        click.echo(f"flags: {final.flags}")
    if report_dir:
        from .reports import write_f1_history

        paths = write_f1_history(final, report_dir)
        click.echo(f"report: {paths['csv']} {paths['png']}")
    if export_gold:
        write_dataset(final.gold, export_gold)
        click.echo(f"gold dataset: {export_gold}")
    if export_test:
        write_dataset(final.test, export_test)
        click.echo(f"test dataset: {export_test}")


def _start_service_annotator(state_path, host, port):
    import threading

    import uvicorn

    log_path = Path(state_path).with_suffix(".events.jsonl")
    queue = ReviewQueue(log_path=log_path)
    static = Path(__file__).resolve().parents[2] / "frontend" / "dist"
    app = create_app(queue, static_dir=static if static.is_dir() else None)
    server = uvicorn.Server(uvicorn.Config(app, host=host, port=port, log_level="warning"))
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    click.echo(f"review service listening on http://{host}:{port}")
    return ServiceAnnotator(queue)


@main.command(name="train")
@click.option("--in", "data_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--out", "model_path", type=click.Path(dir_okay=False), required=True)
@click.option("--lexicon", "lexicon_path", type=click.Path(exists=True, dir_okay=False))
@with_options(train_options)
def train_cmd(data_path, model_path, lexicon_path, variant, max_epochs, l2, learning_rate, validation_split, train_seed):
    """Train a tagger on a labeled dataset and write a checkpoint."""
    data = read_dataset(data_path)
    lexicon = load_lexicon(lexicon_path) if lexicon_path else None
    cfg = _train_config(variant, max_epochs, l2, learning_rate, validation_split, train_seed)
    model = train(data, cfg, lexicon=lexicon)
    model.save(model_path)
    meta = model.training_meta
    click.echo(
        f"trained on {len(data)} paragraphs; best epoch {meta['best_epoch']} "
        f"(val loss {meta['best_validation_loss']:.4f}); saved to {model_path}"
    )


@main.command(name="eval")
@click.option("--model", "model_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--data", "data_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--kfold", type=int, help="Run k-fold cross validation instead of a single evaluation.")
@click.option("--test-data", type=click.Path(exists=True, dir_okay=False), help="Index-aligned dataset whose folds are scored (defaults to --data).")
@click.option("--lexicon", "lexicon_path", type=click.Path(exists=True, dir_okay=False))
@with_options(train_options)
@click.option("--report-dir", type=click.Path(file_okay=False))
def eval_cmd(model_path, data_path, kfold, test_data, lexicon_path, variant, max_epochs, l2, learning_rate, validation_split, train_seed, report_dir):
    """Score a model on a dataset, or cross-validate with k folds."""
    data = read_dataset(data_path)
    lexicon = load_lexicon(lexicon_path) if lexicon_path else None
    if kfold:
        cfg = _train_config(variant, max_epochs, l2, learning_rate, validation_split, train_seed)
        test_set = read_dataset(test_data) if test_data else data

        def train_fold(fold_data, seed):
            return train(fold_data, cfg, lexicon=lexicon)

        result = kfold_run(data, test_set, kfold, train_fn=train_fold, base_seed=train_seed)
        for fold in result.folds:
            click.echo(
                f"fold {fold.fold + 1}: P={fold.precision * 100:.1f} "
                f"R={fold.recall * 100:.1f} F1={fold.f1 * 100:.1f}"
            )
        click.echo(f"average F1: {result.mean_f1 * 100:.1f}")
        if report_dir:
            from .reports import write_kfold_report

            paths = write_kfold_report(result, report_dir)
            click.echo(f"report: {paths['csv']} {paths['png']}")
        return
    if not model_path:
        raise click.UsageError("provide --model, or --kfold for cross validation")
    model = TaggerModel.load(model_path)
    counts, f1 = evaluate_model(model, data)
    p, r, _ = prf1(counts)
    click.echo(f"tp={counts.tp} fp={counts.fp} fn={counts.fn} (boundary overlaps: {counts.boundary_overlaps})")
    click.echo(f"P={p * 100:.1f} R={r * 100:.1f} F1={f1 * 100:.1f}")


@main.command()
@click.option("--model", "model_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--data", "data_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--window", "windows", type=int, multiple=True, default=(1, 3, 5), show_default=True)
@click.option("--keep-stopwords", is_flag=True, help="Count stopwords and punctuation too.")
@click.option("--scope", type=click.Choice(["incorrect", "correct"]), default="incorrect", show_default=True)
@click.option("--top", type=int, default=10, show_default=True)
@click.option("--report-dir", type=click.Path(file_okay=False))
def analyze(model_path, data_path, windows, keep_stopwords, scope, top, report_dir):
    """Frequency tables of tokens near (in)correctly predicted entities."""
    model = TaggerModel.load(model_path)
    data = read_dataset(data_path)
    pairs = [(lp, model.decode_spans(lp.tokens).spans) for lp in data]
    scope_enum = ContextScope.AROUND_INCORRECT if scope == "incorrect" else ContextScope.AROUND_CORRECT
    stats_list = [
        context_frequencies(pairs, window=w, include_stopwords=keep_stopwords, scope=scope_enum)
        for w in windows
    ]
    for stats in stats_list:
        click.echo(f"window size = {stats.window}")
        for rank, (token, count) in enumerate(stats.top(top), start=1):
            click.echo(f"  {rank:2d}. {token}  {count}")
    if report_dir:
        from .reports import write_context_report

        paths = write_context_report(stats_list, report_dir, top_n=top)
        click.echo(f"report: {paths['csv']} {paths['png']}")


@main.command()
@click.option("--in", "data_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--out", "csv_path", type=click.Path(dir_okay=False), required=True)
def export(data_path, csv_path):
    """Convert a JSONL dataset to the sentence-segmented IOB CSV."""
    data = read_dataset(data_path)
    export_iob_csv(data, csv_path)
    click.echo(f"wrote {csv_path}")


@main.command()
@click.option("--corpus", "corpus_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--model-a", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--model-b", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--workers", type=int, default=1, show_default=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True)
@click.option("--report-dir", type=click.Path(file_okay=False))
def extract(corpus_path, model_a, model_b, workers, out_path, report_dir):
    """Apply two taggers across a corpus and tally detections per entity."""
    docs = read_documents(corpus_path)
    paragraphs = [
        Paragraph(doc_id=doc_id, para_index=i, text=text)
        for doc_id, paras in docs
        for i, text in enumerate(paras)
        if text.strip()
    ]
    report = extract_corpus(
        paragraphs, TaggerModel.load(model_a), TaggerModel.load(model_b), workers=workers
    )
    write_report_csv(report, out_path)
    click.echo(f"{len(report.tallies)} entities ({len(report.balanced)} balanced) -> {out_path}")
    if report_dir:
        from .reports import write_extraction_report

        paths = write_extraction_report(report, report_dir)
        click.echo(f"report: {paths['csv']} {paths['png']}")


@main.command()
@click.option("--report", "report_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--ref", "ref_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--top-k", type=int, default=100, show_default=True)
@click.option("--pool", "pools", type=click.Choice(["all", "balanced"]), multiple=True, default=("all", "balanced"), show_default=True)
@click.option("--report-dir", type=click.Path(file_okay=False))
def compare(report_path, ref_path, top_k, pools, report_dir):
    """Match the top-ranked extracted entities against a reference list."""
    report = read_report_csv(report_path)
    ref = load_lexicon(ref_path)
    all_rates = []
    for pool in pools:
        rates = compare_reference(report, ref, top_k=top_k, pool=pool)
        all_rates.append(rates)
        click.echo(
            f"{rates.pool} top-{rates.top_k}: exact {rates.exact * 100:.0f}% "
            f"exact+partial {rates.exact_plus_partial * 100:.0f}%"
        )
    if report_dir:
        from .reports import write_match_report

        paths = write_match_report(all_rates, report_dir)
        click.echo(f"report: {paths['csv']} {paths['png']}")


@main.command()
@click.option("--log", "log_path", type=click.Path(dir_okay=False), default="review-events.jsonl", show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--static", "static_dir", type=click.Path(file_okay=False), help="Directory with the reviewer UI build.")
def serve(log_path, host, port, static_dir):
    """Run the review-queue service standalone."""
    import uvicorn

    queue = ReviewQueue(log_path=log_path)
    app = create_app(queue, static_dir=static_dir)
    uvicorn.run(app, host=host, port=port)


@main.group()
def lexicon() -> None:
    """Gazetteer utilities."""


@lexicon.command(name="load")
@click.option("--path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--filter", "filter_name", type=click.Choice(["none", "has-code"]), default="none", show_default=True)
def lexicon_load(path, filter_name):
    """Load a term file and report what it contains."""
    lex = load_lexicon(path, filter=has_code if filter_name == "has-code" else None)
    click.echo(f"terms: {len(lex.terms)}")
    click.echo(f"aliases: {len(lex.aliases)}")
    click.echo(f"skipped rows: {lex.skipped_rows}")
    multiword = sum(1 for t in lex.terms if " " in t)
    click.echo(f"multi-word terms: {multiword}")


if __name__ == "__main__":
    main()
