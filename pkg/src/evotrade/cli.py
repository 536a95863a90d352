"""Command-line pipeline: evolve -> corpus -> backtest -> analyze.

Every command takes --config/--seed/--out/--jobs, writes its artifacts into
the output directory together with a manifest that reproduces the run on
the same build, and exits nonzero with a one-line diagnostic on error.
"""
from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import analysis, backtest, kernels, marginalize, neural
from .config import ConfigError, load_config, write_manifest
from .evolution import rng_from, run_evolution


def _add_common(parser):
    parser.add_argument("--config", help="YAML config file (defaults apply when omitted)")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--out", default=None, help="output directory (created if missing)")
    parser.add_argument("--jobs", type=int, default=0,
                        help="worker processes (0 = one per CPU, capped at the market count)")


def _prepare(args, default_out):
    cfg = load_config(args.config)
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError("seed must be nonnegative")
        cfg.seed = args.seed
        cfg.evolution.seed = args.seed
    out = Path(args.out if args.out else default_out)
    out.mkdir(parents=True, exist_ok=True)
    return cfg, out


def _jobs(args, cap):
    n = args.jobs if args.jobs > 0 else (os.cpu_count() or 1)
    return max(1, min(n, cap))


# ---------------------------------------------------------------------- #


def cmd_evolve(args) -> int:
    cfg, out = _prepare(args, "runs/evolve")
    jobs = _jobs(args, cfg.evolution.markets)
    records = run_evolution(cfg.evolution, mechanism=args.mechanism, jobs=jobs)

    analysis.write_wealth_csv(records, out / "wealth.csv")
    analysis.write_prices_csv(records, out / "prices.csv")
    best = [
        neural.GenomeRecord(cfg.seed, rec.generation, rec.best_fitness, rec.best_genome)
        for rec in records
        if rec.best_genome is not None
    ]
    neural.save_genomes(best, out / "genomes.csv")
    write_manifest(cfg, out / "manifest.yaml", "evolve", kernels.BACKEND,
                   {"mechanism": args.mechanism})

    last = records[-1] if records else None
    best_fit = last.best_fitness if last else float("nan")
    print(
        f"evolve: {len(records)} generations x {cfg.evolution.markets} markets, "
        f"best fitness {best_fit:.6g}, artifacts in {out}"
    )
    return 0


def cmd_corpus(args) -> int:
    cfg, out = _prepare(args, "runs/corpus")
    genomes = None
    if args.genomes:
        recs = neural.load_genomes(args.genomes)
        if not recs:
            raise ConfigError(f"{args.genomes}: no genomes")
        genomes = [r.params for r in recs]
    corpus = marginalize.generate_corpus(
        cfg.evolution, n_runs=cfg.corpus.n_runs, seed=cfg.seed, genomes=genomes
    )
    marginalize.save_corpus(corpus, out / "corpus.csv")
    write_manifest(cfg, out / "manifest.yaml", "corpus", kernels.BACKEND,
                   {"rows": len(corpus), "runs": cfg.corpus.n_runs})
    print(f"corpus: {len(corpus)} rows from {cfg.corpus.n_runs} runs, artifacts in {out}")
    return 0


def _discover_episodes(tick_dir, months):
    """(pair, month, path) for every data file whose month is in scope."""
    tick_dir = Path(tick_dir)
    if not tick_dir.is_dir():
        raise ConfigError(f"tick directory {tick_dir} does not exist")
    found = {}
    for path in sorted(tick_dir.glob("*.csv")):
        parts = path.stem.rsplit("-", 2)
        if len(parts) != 3:
            continue
        pair, year, mon = parts
        month = f"{year}-{mon}"
        if month not in months:
            continue
        if (pair, month) in found:
            raise ConfigError(f"duplicate tick file for {pair} {month}: {path}")
        found[(pair, month)] = path
    return [(p, m, found[(p, m)]) for p, m in sorted(found)]


def cmd_backtest(args) -> int:
    cfg, out = _prepare(args, "runs/backtest")
    bt = cfg.backtest
    if args.split == "validation":
        months = set(backtest.months_in_range(bt.validation_start, bt.validation_end))
    else:
        months = set(backtest.months_in_range(bt.test_start, bt.test_end))

    genome_recs = neural.load_genomes(args.genomes)
    corpus = marginalize.load_corpus(args.corpus)
    index = marginalize.NeighborIndex(corpus.dx)

    episodes = []
    rejected = 0
    for pair, month, path in _discover_episodes(args.ticks, months):
        records, n_rej = backtest.load_ticks(path)
        rejected += n_rej
        episodes.append(
            backtest.build_episode(
                records, pair, month, bt.episode_seconds, bt.bucket_seconds, bt.base_price
            )
        )
    if not episodes:
        raise ConfigError(f"no tick files in {args.ticks} cover the {args.split} split")

    pairs_seen = sorted({e.pair for e in episodes})
    missing = 0
    for pair in pairs_seen:
        have = {e.month for e in episodes if e.pair == pair}
        for month in sorted(months - have):
            print(f"warning: no tick file for {pair} {month}", file=sys.stderr)
            missing += 1

    results = []
    for i, rec in enumerate(genome_recs):
        gid = f"{rec.sim_id}-g{rec.generation}-{i}"
        algo = marginalize.MarginalizedAlgo(
            rec.params, index, corpus, k=cfg.corpus.k_neighbors,
            tick=cfg.evolution.tick_size,
        )
        for ep in episodes:
            results.append(backtest.run_episode(algo, ep, cfg.risk, genome_id=gid))

    backtest.write_results_csv(results, out / "results.csv")
    if args.split == "validation":
        elite = backtest.select_elite(results, bt.elite_k)
        with open(out / "elite.csv", "w", newline="") as fh:
            fh.write("rank,genome_id,total_profit\n")
            for rank, (gid, total) in enumerate(elite, start=1):
                fh.write(f"{rank},{gid},{float(total)!r}\n")
    write_manifest(cfg, out / "manifest.yaml", "backtest", kernels.BACKEND,
                   {"split": args.split, "episodes": len(episodes),
                    "genomes": len(genome_recs), "rejected_ticks": rejected,
                    "missing_months": missing})
    print(
        f"backtest: {len(genome_recs)} genomes x {len(episodes)} episodes "
        f"({args.split} split), {missing} months missing, {rejected} crossed ticks "
        f"dropped, artifacts in {out}"
    )
    return 0


def _read_prices_csv(path):
    import csv as _csv

    by_gen: dict = {}
    with open(path, newline="") as fh:
        reader = _csv.reader(fh)
        header = next(reader, None)
        if header != ["generation", "market", "timestep", "price"]:
            raise ConfigError(f"{path}: expected columns generation,market,timestep,price")
        for row in reader:
            g, k, t, p = int(row[0]), int(row[1]), int(row[2]), float(row[3])
            by_gen.setdefault(g, {}).setdefault(k, []).append((t, p))
    out = {}
    for g, markets in sorted(by_gen.items()):
        series = []
        for k in sorted(markets):
            pts = sorted(markets[k])
            series.append(np.array([p for _, p in pts]))
        out[g] = series
    return out


def _read_results_csv(path):
    import csv as _csv

    with open(path, newline="") as fh:
        reader = _csv.reader(fh)
        header = next(reader, None)
        if not header or "final_profit" not in header:
            raise ConfigError(f"{path}: expected a results CSV with a final_profit column")
        col = header.index("final_profit")
        vals = []
        for row in reader:
            vals.append(float(row[col]))
    if not vals:
        raise ConfigError(f"{path}: no result rows")
    return np.array(vals)


def cmd_analyze(args) -> int:
    cfg, out = _prepare(args, "runs/analyze")
    wrote = []

    if args.prices:
        fits = []
        for g, series in sorted(_read_prices_csv(args.prices).items()):
            fits.append((g, analysis.msd_exponent(series)))
        analysis.write_msd_csv(fits, out / "msd.csv")
        wrote.append("msd.csv")

    labels = []
    samples = {}
    for item in args.results or []:
        if "=" not in item:
            raise ConfigError(f"--results wants LABEL=PATH, got {item!r}")
        label, path = item.split("=", 1)
        if label in samples:
            raise ConfigError(f"duplicate results label {label!r}")
        labels.append(label)
        samples[label] = _read_results_csv(path)

    if labels:
        for label in labels:
            analysis.write_ecdf_csv(samples[label], out / f"ecdf_{label}.csv")
            wrote.append(f"ecdf_{label}.csv")
        with open(out / "ks.csv", "w", newline="") as fh:
            fh.write("a,b,d\n")
            for a in labels:
                for b in labels:
                    d = 0.0 if a == b else analysis.ks_statistic(samples[a], samples[b])
                    fh.write(f"{a},{b},{float(d)!r}\n")
        wrote.append("ks.csv")
        with open(out / "bootstrap.csv", "w", newline="") as fh:
            fh.write("label,mean,p_positive\n")
            for i, label in enumerate(labels):
                res = analysis.bootstrap_mean(
                    samples[label], n_boot=args.n_boot, rng=rng_from(cfg.seed, 6, i)
                )
                fh.write(f"{label},{float(res.mean)!r},{float(res.p_positive)!r}\n")
        wrote.append("bootstrap.csv")
        if len(labels) > 1:
            with open(out / "bootstrap_pairs.csv", "w", newline="") as fh:
                fh.write("a,b,p_a_gt_b\n")
                n = 0
                for i, a in enumerate(labels):
                    for b in labels[i + 1:]:
                        p = analysis.bootstrap_compare(
                            samples[a], samples[b], n_boot=args.n_boot,
                            rng=rng_from(cfg.seed, 7, n),
                        )
                        fh.write(f"{a},{b},{float(p)!r}\n")
                        n += 1
            wrote.append("bootstrap_pairs.csv")

    if not wrote:
        raise ConfigError("nothing to analyze: pass --prices and/or --results")
    write_manifest(cfg, out / "manifest.yaml", "analyze", kernels.BACKEND,
                   {"outputs": wrote})
    print(f"analyze: wrote {', '.join(wrote)} in {out}")
    return 0


# ---------------------------------------------------------------------- #


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="evotrade",
        description="Evolve neural trading agents in a batch-auction market, "
        "distill them into standalone algorithms, and backtest on tick data.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("evolve", help="run the generational market loop")
    _add_common(p)
    p.add_argument("--mechanism", choices=["tournament", "identity"], default="tournament")
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("corpus", help="harvest a (dx, dvb, dva) corpus from identity runs")
    _add_common(p)
    p.add_argument("--genomes", help="genome file; each run embeds one genome round-robin")
    p.set_defaults(func=cmd_corpus)

    p = sub.add_parser("backtest", help="run marginalized genomes over tick-data episodes")
    _add_common(p)
    p.add_argument("--genomes", required=True, help="genome file from evolve")
    p.add_argument("--corpus", required=True, help="corpus CSV from corpus")
    p.add_argument("--ticks", required=True, help="directory of PAIR-YYYY-MM.csv tick files")
    p.add_argument("--split", choices=["validation", "test"], default="validation")
    p.set_defaults(func=cmd_backtest)

    p = sub.add_parser("analyze", help="diffusion exponents, ECDFs, KS, bootstrap")
    _add_common(p)
    p.add_argument("--prices", help="prices.csv from evolve")
    p.add_argument("--results", action="append", metavar="LABEL=PATH",
                   help="results.csv from backtest; repeatable")
    p.add_argument("--n-boot", type=int, default=10_000)
    p.set_defaults(func=cmd_analyze)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
