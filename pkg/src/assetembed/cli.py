"""
Command-line interface.

    assetembed [--config FILE] [--seed N] [--out DIR] <command> [flags]

Settings come from, in increasing priority: built-in defaults, a flat
``key = value`` config file, and command-line flags.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import analysis, classify, hedge, synthetic
from .analysis import SimilarityMethod
from .data import (
    DataError, compute_returns, date_split, load_prices, write_metadata,
    write_prices, write_returns,
)
from .model import TrainConfig, TrainingDiverged, load_embeddings, save_embeddings
from .pipeline import VARIANTS, fit_embeddings, fit_variant

logger = logging.getLogger("assetembed")


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    prices: str = "prices.csv"
    metadata: str = "metadata.csv"
    out: str = "out"
    embeddings: str = ""
    start: str = ""
    end: str = ""
    # model
    C: int = 3
    N: int = 20
    learning_rate: float = 0.025
    epochs: int = 10
    use_iqr: bool = True
    use_weighting: bool = True
    shuffle: bool = True
    seed: int = 0
    # experiments
    train_fraction: float = 0.7
    knn_k: int = 3
    graph_threshold: float = 0.7
    mismatch_threshold: float = 0.9
    pool: int = 25
    runs: int = 100
    alpha: float = 0.01
    resamples: int = hedge.N_RESAMPLES
    folds: int = 5
    smote_k: int = 5
    clf_epochs: int = 200
    clf_lr: float = 0.01
    clf_reg: float = 1e-3

    def validate(self) -> None:
        if not 0 < self.train_fraction < 1:
            raise UsageError(f"train_fraction must be in (0, 1), got {self.train_fraction}")
        for name in ("graph_threshold", "mismatch_threshold"):
            v = getattr(self, name)
            if not -1 < v < 1:
                raise UsageError(f"{name} must be in (-1, 1), got {v}")
        if not 0 < self.alpha < 1:
            raise UsageError(f"alpha must be in (0, 1), got {self.alpha}")
        for name in ("epochs", "knn_k", "pool", "runs", "resamples", "smote_k", "clf_epochs", "C", "N"):
            if getattr(self, name) < 1:
                raise UsageError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.folds < 2:
            raise UsageError(f"folds must be >= 2, got {self.folds}")
        if self.learning_rate <= 0:
            raise UsageError(f"learning_rate must be > 0, got {self.learning_rate}")

    @property
    def train_config(self) -> TrainConfig:
        return TrainConfig(C=self.C, N=self.N, learning_rate=self.learning_rate, epochs=self.epochs,
                           seed=self.seed, use_iqr=self.use_iqr, use_weighting=self.use_weighting,
                           shuffle=self.shuffle)

    @property
    def out_dir(self) -> Path:
        return Path(self.out)

    @property
    def embeddings_path(self) -> Path:
        return Path(self.embeddings) if self.embeddings else self.out_dir / "embeddings.csv"


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}


def _coerce(name: str, text: str):
    kind = _FIELDS[name].type
    text = text.strip()
    if kind == "bool":
        low = text.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise UsageError(f"{name}: expected a boolean, got {text!r}")
    try:
        return {"int": int, "float": float}.get(kind, str)(text)
    except ValueError:
        raise UsageError(f"{name}: cannot parse {text!r} as {kind}") from None


def read_config(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    for lineno, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _FIELDS:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = _coerce(key, value)
    return values


def _bool_flag(text: str) -> bool:
    try:
        return _coerce("use_iqr", text)
    except UsageError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    common = _Parser(add_help=False)
    common.add_argument("--config", default=S, help="flat key = value config file")
    common.add_argument("--seed", type=int, default=S)
    common.add_argument("--out", default=S, help="output directory")
    common.add_argument("--prices", default=S)
    common.add_argument("--metadata", default=S)
    common.add_argument("--start", default=S, help="first date (ISO)")
    common.add_argument("--end", default=S, help="last date (ISO)")
    common.add_argument("--embeddings", default=S, help="embedding file (default OUT/embeddings.csv)")

    model = _Parser(add_help=False)
    model.add_argument("--C", "--context-size", dest="C", type=int, default=S)
    model.add_argument("--N", "--dim", dest="N", type=int, default=S)
    model.add_argument("--learning-rate", "--lr", dest="learning_rate", type=float, default=S)
    model.add_argument("--epochs", type=int, default=S)
    model.add_argument("--use-iqr", type=_bool_flag, default=S)
    model.add_argument("--use-weighting", type=_bool_flag, default=S)
    model.add_argument("--shuffle", type=_bool_flag, default=S)
    model.add_argument("--train-fraction", type=float, default=S)

    parser = _Parser(prog="assetembed", description="Learn asset embeddings from daily returns.",
                     parents=[common])
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True

    sub.add_parser("ingest", parents=[common], help="validate prices and write returns")
    sub.add_parser("train", parents=[common, model], help="train embeddings on the full period")

    p = sub.add_parser("knn", parents=[common], help="nearest neighbours of a ticker")
    p.add_argument("--ticker", required=True)
    p.add_argument("--k", dest="knn_k", type=int, default=S)

    p = sub.add_parser("analogy", parents=[common], help="A is to B as C is to ?")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--c", required=True)
    p.add_argument("--k", dest="knn_k", type=int, default=S)

    p = sub.add_parser("graph", parents=[common], help="similarity graph edge list")
    p.add_argument("--threshold", dest="graph_threshold", type=float, default=S)

    p = sub.add_parser("mismatch", parents=[common], help="high-similarity cross-sector pairs")
    p.add_argument("--threshold", dest="mismatch_threshold", type=float, default=S)

    classify_flags = _Parser(add_help=False)
    classify_flags.add_argument("--folds", type=int, default=S)
    classify_flags.add_argument("--smote-k", type=int, default=S)
    classify_flags.add_argument("--clf-epochs", type=int, default=S)
    classify_flags.add_argument("--clf-lr", type=float, default=S)
    classify_flags.add_argument("--clf-reg", type=float, default=S)
    sub.add_parser("classify", parents=[common, classify_flags], help="sector classification (k-fold)")

    hedge_flags = _Parser(add_help=False)
    hedge_flags.add_argument("--pool", type=int, default=S)
    hedge_flags.add_argument("--runs", type=int, default=S)
    hedge_flags.add_argument("--alpha", type=float, default=S)
    hedge_flags.add_argument("--resamples", type=int, default=S)
    sub.add_parser("hedge", parents=[common, model, hedge_flags], help="hedged-portfolio experiment")

    sub.add_parser("report", parents=[common, model, classify_flags, hedge_flags],
                   help="run the whole pipeline")

    p = sub.add_parser("make-fixture", parents=[common])  # hidden: no help entry
    p.add_argument("--kind", choices=["sector", "hedge"], default="sector")
    p.add_argument("--n-sectors", type=int, default=4)
    p.add_argument("--per-sector", type=int, default=5)
    p.add_argument("--T", type=int, default=300)
    sub._choices_actions = [a for a in sub._choices_actions if a.dest != "make-fixture"]
    return parser


def resolve(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    ns = vars(args)
    if "config" in ns:
        for k, v in read_config(ns["config"]).items():
            setattr(cfg, k, v)
    for k, v in ns.items():
        if k in _FIELDS:
            setattr(cfg, k, v)
    cfg.validate()
    return cfg


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _fmt(x: float) -> str:
    return format(x, ".17g")


def _table(header, rows) -> str:
    rows = [[str(c) for c in r] for r in rows]
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h) for i, h in enumerate(header)]
    line = lambda cells: "  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip()
    return "\n".join([line(header), line(["-" * w for w in widths])] + [line(r) for r in rows])


def _returns(cfg: RunConfig):
    for name in ("prices", "metadata"):
        if not Path(getattr(cfg, name)).is_file():
            raise UsageError(f"{name} file not found: {getattr(cfg, name)}")
    table = load_prices(cfg.prices, cfg.metadata, cfg.start or None, cfg.end or None)
    return table, compute_returns(table)


def _embeddings(cfg: RunConfig):
    path = cfg.embeddings_path
    if not path.is_file():
        raise UsageError(f"embedding file not found: {path} (run `train` first)")
    return load_embeddings(path)


def _lookup(assets, ticker: str) -> int:
    for a in assets:
        if a.ticker == ticker:
            return a.index
    raise UsageError(f"unknown ticker {ticker!r}")


def cmd_ingest(cfg: RunConfig) -> None:
    table, r = _returns(cfg)
    write_returns(r, cfg.out_dir / "returns.csv")
    write_metadata(r.assets, cfg.out_dir / "assets.csv")
    _write_csv(cfg.out_dir / "dropped.csv", ["ticker"], [[t] for t in table.dropped])
    print(f"{r.n_assets} assets, {len(table.dates)} dates ({table.dates[0]} to {table.dates[-1]}), "
          f"{r.T} returns each; {len(table.dropped)} dropped")


def cmd_train(cfg: RunConfig) -> None:
    _, r = _returns(cfg)
    E = fit_embeddings(r, cfg.train_config)
    save_embeddings(E, r.assets, cfg.embeddings_path)
    _write_csv(cfg.out_dir / "train_loss.csv", ["epoch", "mean_loss"],
               [[i + 1, _fmt(v)] for i, v in enumerate(E.loss_history)])
    print(_table(["epoch", "mean_loss"], [[i + 1, f"{v:.6f}"] for i, v in enumerate(E.loss_history)]))
    print(f"wrote {cfg.embeddings_path} ({E.shape[0]} x {E.shape[1]})")


def cmd_knn(cfg: RunConfig, ticker: str) -> None:
    E, assets = _embeddings(cfg)
    q = _lookup(assets, ticker)
    if not 1 <= cfg.knn_k < len(assets):
        raise UsageError(f"k must be in [1, {len(assets) - 1}]")
    rows = [[ticker, rank, assets[j].ticker, assets[j].sector, assets[j].industry, _fmt(s)]
            for rank, (j, s) in enumerate(analysis.knn(E, q, cfg.knn_k), start=1)]
    _write_csv(cfg.out_dir / f"knn_{ticker}.csv",
               ["query_ticker", "rank", "neighbor_ticker", "sector", "industry", "similarity"], rows)
    print(f"{ticker} ({assets[q].sector} - {assets[q].industry})")
    print(_table(["rank", "neighbour", "sector", "industry", "similarity"],
                 [[r[1], r[2], r[3], r[4], f"{float(r[5]):.2f}"] for r in rows]))


def cmd_analogy(cfg: RunConfig, a: str, b: str, c: str) -> None:
    E, assets = _embeddings(cfg)
    ia, ib, ic = (_lookup(assets, t) for t in (a, b, c))
    if len({ia, ib, ic}) != 3:
        raise UsageError("analogy needs three distinct tickers")
    res = analysis.analogy(E, ia, ib, ic, cfg.knn_k)
    rows = [[a, b, c, rank, assets[j].ticker, assets[j].sector, _fmt(s)]
            for rank, (j, s) in enumerate(res, start=1)]
    _write_csv(cfg.out_dir / "analogy.csv",
               ["a", "b", "c", "rank", "candidate_ticker", "sector", "similarity"], rows)
    print(f"{a} is to {b} as {c} is to ...")
    print(_table(["rank", "candidate", "sector", "similarity"],
                 [[r[3], r[4], r[5], f"{float(r[6]):.2f}"] for r in rows]))


def cmd_graph(cfg: RunConfig) -> None:
    E, assets = _embeddings(cfg)
    edges = analysis.similarity_graph(E, cfg.graph_threshold)
    analysis.write_edges(edges, assets, cfg.out_dir / "graph_edges.csv")
    same = sum(assets[i].sector == assets[j].sector for i, j, _ in edges)
    print(f"{len(edges)} edges above cosine {cfg.graph_threshold}; {same} within a sector")


def cmd_mismatch(cfg: RunConfig) -> None:
    E, assets = _embeddings(cfg)
    pairs = analysis.mismatches(E, assets, cfg.mismatch_threshold)
    rows = [[assets[i].ticker, assets[i].sector, assets[i].industry,
             assets[j].ticker, assets[j].sector, assets[j].industry, _fmt(s)] for i, j, s in pairs]
    _write_csv(cfg.out_dir / "mismatches.csv",
               ["ticker_a", "sector_a", "industry_a", "ticker_b", "sector_b", "industry_b", "similarity"], rows)
    print(f"{len(pairs)} cross-sector pairs above cosine {cfg.mismatch_threshold}")
    if rows:
        print(_table(["stock A", "sector A", "stock B", "sector B", "similarity"],
                     [[r[0], r[1], r[3], r[4], f"{float(r[6]):.2f}"] for r in rows[:20]]))


def _classify(cfg: RunConfig, E, assets, path: Path):
    labels = np.array([a.sector for a in assets])
    rep = classify.kfold_eval(E, labels, cfg.folds, cfg.seed, cfg.smote_k,
                              cfg.clf_epochs, cfg.clf_lr, cfg.clf_reg)
    classify.write_report(rep, path)
    return rep


def cmd_classify(cfg: RunConfig) -> None:
    E, assets = _embeddings(cfg)
    rep = _classify(cfg, E, assets, cfg.out_dir / "classification.csv")
    print(f"{rep.n_folds}-fold sector classification ({rep.averaging}-averaged)")
    print(_table(["label", "precision", "recall", "f1", "support"],
                 [[k, f"{m['precision']:.2f}", f"{m['recall']:.2f}", f"{m['f1']:.2f}", m["support"]]
                  for k, m in rep.per_class.items()]
                 + [[f"{rep.averaging} avg", f"{rep.precision:.2f}", f"{rep.recall:.2f}", f"{rep.f1:.2f}",
                     int(rep.confusion.sum())]]))
    print(f"accuracy {rep.accuracy:.1%}")


def cmd_hedge(cfg: RunConfig) -> None:
    _, r = _returns(cfg)
    train_r, test_r = date_split(r, cfg.train_fraction)
    if cfg.pool >= r.n_assets:
        raise UsageError(f"pool must be < number of assets ({r.n_assets})")
    methods = {
        "pearson": SimilarityMethod.pearson(train_r),
        "spearman": SimilarityMethod.spearman(train_r),
        "geometric_proxy": SimilarityMethod.geometric(train_r),
    }
    for variant in VARIANTS:
        methods[variant] = SimilarityMethod.embedding(fit_variant(train_r, cfg.train_config, variant))
    scores = {k: analysis.pairwise_scores(m) for k, m in methods.items()}
    results = hedge.run_experiment(methods, test_r, scores)
    comparisons = hedge.significance_test({res.method: res.volatilities for res in results},
                                          cfg.alpha, cfg.resamples, cfg.seed)
    robust = hedge.robustness_rerun(scores, test_r, cfg.runs, cfg.pool, cfg.seed)

    out = cfg.out_dir
    hedge.write_results(results, r.tickers, out / "hedge_results.csv")
    hedge.write_summary(results, comparisons, out / "hedge_summary.csv")
    _write_csv(out / "hedge_pairwise.csv", ["method_a", "method_b", "mean_diff", "p_raw", "p_holm", "reject"],
               [[c.a, c.b, _fmt(c.mean_diff), _fmt(c.p_value), _fmt(c.p_adjusted), str(c.reject).lower()]
                for c in comparisons])
    _write_csv(out / "hedge_robustness.csv", ["method", "run", "mean_annualized_volatility"],
               [[rb.method, i + 1, _fmt(v)] for rb in robust for i, v in enumerate(rb.mean_volatilities)])
    for res in results:
        hedge.write_histogram(res.volatilities, out / f"hedge_hist_{res.method}.csv")

    vs = {c.b: c for c in comparisons if c.a == "pearson"}
    rob = {rb.method: rb.mean_volatilities for rb in robust}
    print(f"train {train_r.dates[0]}..{train_r.dates[-1]}, test {test_r.dates[0]}..{test_r.dates[-1]}; "
          f"volatility annualised (sqrt {hedge.TRADING_DAYS}); permutation test + Holm (Tukey HSD stand-in)")
    print(_table(["method", "avg volatility", f"rerun mean ({cfg.runs}x, pool {cfg.pool})",
                  "p vs pearson", f"significant @ {cfg.alpha}"],
                 [[res.method, f"{res.mean_volatility:.1%}", f"{rob[res.method].mean():.1%}",
                   f"{vs[res.method].p_adjusted:.4f}" if res.method in vs else "-",
                   ("yes" if vs[res.method].reject else "no") if res.method in vs else "-"]
                  for res in results]))


def cmd_report(cfg: RunConfig) -> None:
    cmd_ingest(cfg)
    cmd_train(cfg)
    cmd_graph(cfg)
    cmd_mismatch(cfg)
    cmd_classify(cfg)
    # classification of each model variant side by side
    _, r = _returns(cfg)
    rows = []
    for variant in VARIANTS:
        E = fit_variant(r, cfg.train_config, variant)
        rep = _classify(cfg, E, r.assets, cfg.out_dir / f"classification_{variant}.csv")
        rows.append([variant, _fmt(rep.precision), _fmt(rep.recall), _fmt(rep.f1), _fmt(rep.accuracy)])
    _write_csv(cfg.out_dir / "classification_summary.csv",
               ["model", "precision", "recall", "f1", "accuracy"], rows)
    print(_table(["model", "precision", "recall", "f1", "accuracy"],
                 [[m, f"{float(p):.2f}", f"{float(rc):.2f}", f"{float(f):.2f}", f"{float(a):.0%}"]
                  for m, p, rc, f, a in rows]))
    cmd_hedge(cfg)


def cmd_make_fixture(cfg: RunConfig, kind: str, n_sectors: int, per_sector: int, T: int) -> None:
    if kind == "sector":
        r = synthetic.sector_returns(n_sectors, per_sector, T, seed=cfg.seed)
    else:
        if n_sectors % 2:
            raise UsageError("hedge fixtures need an even number of sectors")
        r = synthetic.hedge_returns(n_sectors // 2, per_sector, T, train_fraction=cfg.train_fraction,
                                    seed=cfg.seed)
    table = synthetic.prices_from_returns(r)
    write_prices(table.dates, table.tickers, table.prices, cfg.out_dir / "prices.csv")
    write_metadata(table.assets, cfg.out_dir / "metadata.csv")
    print(f"wrote {len(table.assets)} assets x {len(table.dates)} dates to {cfg.out_dir}")


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        args = build_parser().parse_args(argv)
        cfg = resolve(args)
        cfg.out_dir.mkdir(parents=True, exist_ok=True)
        cmd = args.command
        if cmd == "knn":
            cmd_knn(cfg, args.ticker)
        elif cmd == "analogy":
            cmd_analogy(cfg, args.a, args.b, args.c)
        elif cmd == "make-fixture":
            cmd_make_fixture(cfg, args.kind, args.n_sectors, args.per_sector, args.T)
        else:
            globals()[f"cmd_{cmd}"](cfg)
    except UsageError as exc:
        print(f"assetembed: error: {exc}", file=sys.stderr)
        return 2
    except (DataError, TrainingDiverged, ValueError, OSError) as exc:
        print(f"assetembed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
