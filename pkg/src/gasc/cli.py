"""Command-line interface.

Subcommands: ``train``, ``detect``, ``baseline``, ``evaluate``, ``simulate``
and ``replay``. Each writes its outputs plus a ``manifest.json`` into a fresh
directory that appears atomically once the command succeeds.

Exit codes: 0 success, 1 internal error, 2 input error, 3 model/numeric
error, 4 partial failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from urllib.parse import quote, unquote

import numpy as np

from . import __version__
from .changepoint import RULES, SIGMAS, decisions_to_tsv, detect_change_batch, read_predictions
from .corpus import Document, GenreIndex, bin_time, build_vocabulary, extract_snippets, ingest, write_jsonl
from .embeddings import (GENRE_FILTERS, SGNSParams, filter_genres, gamma_threshold_decisions,
                         score_targets, series_to_tsv)
from .embeddings.pipeline import MODES
from .errors import GascError, InputError, PartialFailure
from .evaluation import confusion, load_gold, prf, report
from .gibbs import PRESETS, PosteriorTrajectory, SamplerConfig, preset, run_chain
from .manifest import RunManifest, atomic_output_dir, finish, sha256_file
from .model import ModelConfig, TrajectorySpec, forward_simulate

OUTPUT_ENV = "GASC_OUTPUT_DIR"
SIM_TARGET = "target"
TRAJ_SUFFIX = ".trajectory.csv"


def _csv_list(text):
    return [x.strip() for x in text.split(",") if x.strip()] if text else []


def _edges(text):
    try:
        edges = [int(x) for x in _csv_list(text)]
    except ValueError:
        raise InputError(f"--bins expects comma-separated integers, got {text!r}") from None
    if len(edges) < 2:
        raise InputError("--bins needs at least two edges")
    return edges


def _safe_name(lemma: str) -> str:
    return quote(lemma, safe="")


def _targets(args) -> list[str]:
    targets = list(args.targets or [])
    if args.targets_file:
        try:
            lines = Path(args.targets_file).read_text(encoding="utf-8").splitlines()
        except OSError as exc:
            raise InputError(f"cannot read targets file: {exc}") from None
        targets += [ln.strip() for ln in lines if ln.strip() and not ln.startswith("#")]
    if not targets:
        raise InputError("no targets given (use --targets or --targets-file)")
    return sorted(set(targets))


def _genre_sets(args):
    inc = list(args.genre_include or [])
    exc = list(args.genre_exclude or [])
    name = getattr(args, "genre_filter", None)
    if name:
        i, e = GENRE_FILTERS[name]
        inc += sorted(i)
        exc += sorted(e)
    return sorted(set(inc)), sorted(set(exc))


def _input_digests(paths) -> dict:
    out = {}
    for p in paths:
        if p is None:
            continue
        try:
            out[str(p)] = sha256_file(p)
        except OSError as exc:
            raise InputError(f"cannot read {p}: {exc}") from None
    return out


def _write(out: Path, name: str, text: str) -> None:
    (out / name).write_text(text, encoding="utf-8")


# --- train -----------------------------------------------------------------

def _train_one(job):
    lemma, snippets, V, cfg_dict, sc_dict = job
    store, traj = run_chain(snippets, ModelConfig(**cfg_dict), SamplerConfig(**sc_dict))
    return lemma, store.to_json(), traj.to_csv()


def cmd_train(args, out: Path, manifest: RunManifest):
    p = preset(args.preset)
    for key in ("n_iterations", "burn_in"):
        if getattr(args, key) is not None:
            p[key] = getattr(args, key)
    docs = ingest(args.corpus)
    inc, exc = _genre_sets(args)
    if inc or exc:
        docs = filter_genres(docs, inc, exc)
    binning, bins = bin_time(docs, _edges(args.bins))
    genres = GenreIndex((d.genre for d in docs), scan=p["scan"])
    sc = SamplerConfig(n_iterations=p["n_iterations"], burn_in=p["burn_in"], thinning=args.thinning,
                       seed=args.seed, init=args.init)
    jobs, vocabs, configs = [], {}, {}
    for lemma in _targets(args):
        snippets = extract_snippets(docs, lemma, args.window, bins, genres)
        if not snippets:
            raise InputError(f"no snippets for target {lemma!r}")
        vocab, indexed = build_vocabulary(snippets, args.min_count)
        cfg = ModelConfig(K=args.K, G=len(genres), T=binning.bin_count, V=vocab.size, W=args.window,
                          a=p["a"], b=p["b"], kappa_psi=p["kappa_psi"])
        vocabs[lemma] = vocab
        configs[lemma] = cfg.to_dict()
        jobs.append((lemma, indexed, vocab.size, cfg.to_dict(), sc.to_dict()))
    manifest.config = {"preset": args.preset, "preset_values": p, "sampler": sc.to_dict(),
                       "bin_edges": list(binning.bin_edges), "genres": list(genres.labels),
                       "genre_include": inc, "genre_exclude": exc, "window": args.window,
                       "min_count": args.min_count, "models": configs}
    if args.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(args.workers) as ex:
            results = list(ex.map(_train_one, jobs))
    else:
        results = [_train_one(j) for j in jobs]
    for lemma, ckpt, csv_text in results:
        name = _safe_name(lemma)
        _write(out, f"{name}.checkpoint.json", ckpt)
        _write(out, name + TRAJ_SUFFIX, csv_text)
        _write(out, f"{name}.vocabulary.txt", "\n".join(vocabs[lemma].lemmas) + "\n")


# --- detect ----------------------------------------------------------------

def cmd_detect(args, out: Path, manifest: RunManifest):
    trajs, errors = {}, {}
    for path in args.trajectories:
        name = Path(path).name
        lemma = unquote(name[:-len(TRAJ_SUFFIX)] if name.endswith(TRAJ_SUFFIX) else Path(path).stem)
        try:
            trajs[lemma] = PosteriorTrajectory.from_csv(Path(path).read_text(encoding="utf-8"))
        except (OSError, UnicodeDecodeError) as exc:
            errors[lemma] = f"cannot read {path}: {exc}"
        except GascError as exc:
            errors[lemma] = f"{path}: {exc}"
    decisions, errs = detect_change_batch(trajs, rule=args.rule, sigma=args.sigma) if trajs else ({}, {})
    errors.update(errs)
    manifest.config = {"rule": args.rule, "sigma": args.sigma, "n_sigma": 2.0}
    _write(out, "decisions.tsv", decisions_to_tsv(decisions))
    if errors:
        _write(out, "errors.tsv", "".join(f"{k}\t{v}\n" for k, v in sorted(errors.items())))
        for k, v in sorted(errors.items()):
            print(f"gasc detect: {k}: {v}", file=sys.stderr)
        if not decisions:
            raise InputError("no trajectory file could be processed")
        return PartialFailure.exit_code
    return 0


# --- baseline --------------------------------------------------------------

def cmd_baseline(args, out: Path, manifest: RunManifest):
    docs = ingest(args.corpus)
    binning, _ = bin_time(docs, _edges(args.bins))
    if binning.bin_count < 2:
        raise InputError("the baseline compares two time bins; --bins gives only one")
    inc, exc = _genre_sets(args)
    params = SGNSParams(dim=args.dim, window=args.window, negatives=args.negatives, epochs=args.epochs,
                        min_count=args.min_count, seed=args.seed)
    t2 = binning.bin_count - 1 if args.t2 is None else args.t2
    targets = _targets(args)
    manifest.config = {"mode": args.mode, "sgns": params.to_dict(), "bin_edges": list(binning.bin_edges),
                       "t1": args.t1, "t2": t2, "genre_filter": args.genre_filter,
                       "genre_include": inc, "genre_exclude": exc, "gamma_shift": args.shift,
                       "gamma_fit": args.fit, "quantile": 0.75, "workers": args.workers}
    res = score_targets(args.mode, docs, targets, binning, params, inc or None, exc or None,
                        t1=args.t1, t2=t2, workers=args.workers)
    decisions, fit = gamma_threshold_decisions(res.series, shift=args.shift, method=args.fit)
    manifest.config["gamma"] = {"shape": fit.shape, "rate": fit.rate, "threshold": fit.threshold,
                                "degenerate": fit.degenerate}
    _write(out, "similarities.tsv", series_to_tsv(res.series))
    lines = ["lemma\tchanged\tsense\tgenre\tt1\tt2\tdirection\tmagnitude\n"]
    lines += [f"{w}\t{int(decisions[w])}\t\t\t\t\t\t\n" for w in sorted(decisions)]
    _write(out, "decisions.tsv", "".join(lines))
    if res.missing:
        _write(out, "missing.txt", "\n".join(res.missing) + "\n")
        print(f"gasc baseline: targets missing from a bin vocabulary: {', '.join(res.missing)}",
              file=sys.stderr)


# --- evaluate --------------------------------------------------------------

def cmd_evaluate(args, out: Path, manifest: RunManifest):
    try:
        preds = read_predictions(Path(args.decisions).read_text(encoding="utf-8"))
    except OSError as exc:
        raise InputError(f"cannot read {args.decisions}: {exc}") from None
    gold = load_gold(args.gold)
    m = confusion(preds, gold)
    scores = prf(m)
    meta = {"decisions": Path(args.decisions).name, "gold": Path(args.gold).name}
    if args.label:
        meta["label"] = args.label
    text, doc = report(m, scores, meta)
    manifest.config = {"positive_class": "changed", "averaging": "micro"}
    _write(out, "report.txt", text)
    _write(out, "report.json", json.dumps(doc, indent=2, sort_keys=True) + "\n")
    sys.stdout.write(text)


# --- simulate --------------------------------------------------------------

def cmd_simulate(args, out: Path, manifest: RunManifest):
    cfg = ModelConfig(K=args.K, G=args.G, T=args.T, V=args.V, W=args.W, a=args.a, b=args.b,
                      kappa_psi=args.kappa_psi, sigma0=args.sigma0)
    spec = TrajectorySpec()
    if args.spec:
        try:
            spec = TrajectorySpec.from_dict(json.loads(Path(args.spec).read_text(encoding="utf-8")))
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read trajectory spec: {exc}") from None
    if spec.snippet_length not in (None, 2 * cfg.W):
        raise InputError("simulated documents need snippet_length == 2 * W")
    counts = np.full((cfg.T, cfg.G), args.per_cell) if args.per_cell is not None else args.n_per_bin
    sim = forward_simulate(cfg, spec, counts, seed=args.seed)
    manifest.config = {"model": cfg.to_dict(), "spec": spec.to_dict(), "n_per_bin": args.n_per_bin,
                       "per_cell": args.per_cell, "target": SIM_TARGET}

    wid = max(3, len(str(cfg.V - 1)))
    gid = max(3, len(str(cfg.G - 1)))
    lemmas = [f"w{v:0{wid}d}" for v in range(cfg.V)]
    docs = []
    for s in sim.snippets:
        ctx = [lemmas[v] for v in s.context]
        docs.append(Document(s.snippet_id, int(s.time_bin), f"g{s.genre:0{gid}d}",
                             tuple(ctx[:cfg.W] + [SIM_TARGET] + ctx[cfg.W:])))
    write_jsonl(docs, out / "corpus.jsonl")
    _write(out, "true_state.json", sim.true_state.to_json())
    _write(out, "true_z.tsv", "snippet_id\tz\n" + "".join(
        f"{s.snippet_id}\t{int(z)}\n" for s, z in zip(sim.snippets, sim.true_z)))
    _write(out, "vocabulary.txt", "\n".join(lemmas) + "\n")
    _write(out, "bins.txt", ",".join(str(t) for t in range(cfg.T + 1)) + "\n")


# --- argument parsing --------------------------------------------------------

COMMANDS = {"train": cmd_train, "detect": cmd_detect, "baseline": cmd_baseline,
            "evaluate": cmd_evaluate, "simulate": cmd_simulate}
INPUT_ARGS = {"train": ("corpus", "targets_file"), "detect": ("trajectories",),
              "baseline": ("corpus", "targets_file"), "evaluate": ("decisions", "gold"),
              "simulate": ("spec",)}


def _add_common(p, seed=True):
    p.add_argument("-o", "--out", help=f"output directory (default: ${OUTPUT_ENV}/<command>)")
    p.add_argument("--overwrite", action="store_true", help="replace a non-empty output directory")
    if seed:
        p.add_argument("--seed", type=int, default=0)


def _add_targets(p):
    p.add_argument("--targets", type=_csv_list, help="comma-separated target lemmas")
    p.add_argument("--targets-file", help="file with one target lemma per line")


def _add_genres(p):
    p.add_argument("--genre-include", type=_csv_list, help="keep only these genres (comma-separated)")
    p.add_argument("--genre-exclude", type=_csv_list, help="drop these genres (comma-separated)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gasc", description=__doc__.split("\n\n")[0])
    ap.add_argument("--version", action="version", version=f"gasc {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fit the Bayesian sense-change model per target")
    p.add_argument("corpus")
    _add_targets(p)
    p.add_argument("--bins", required=True, help="comma-separated time-bin edges")
    p.add_argument("--preset", choices=sorted(PRESETS), default="latin-default")
    p.add_argument("-K", type=int, default=4, help="number of senses")
    p.add_argument("--window", type=int, default=5)
    p.add_argument("--min-count", type=int, default=2)
    p.add_argument("--n-iterations", type=int, help="override the preset's sweep count")
    p.add_argument("--burn-in", type=int, help="override the preset's burn-in")
    p.add_argument("--thinning", type=int, default=1)
    p.add_argument("--init", choices=("data", "prior"), default="data")
    p.add_argument("--workers", type=int, default=1,
                   help="targets trained in parallel processes (results do not depend on it)")
    _add_genres(p)
    _add_common(p)

    p = sub.add_parser("detect", help="two-sigma change decisions from trajectory CSVs")
    p.add_argument("trajectories", nargs="+")
    p.add_argument("--rule", choices=RULES, default="any-pair")
    p.add_argument("--sigma", choices=SIGMAS, default="max")
    _add_common(p, seed=False)

    p = sub.add_parser("baseline", help="SGNS baseline (TR or OP) with Gamma-threshold decisions")
    p.add_argument("corpus")
    _add_targets(p)
    p.add_argument("--mode", choices=MODES, default="TR")
    p.add_argument("--bins", required=True, help="comma-separated time-bin edges")
    p.add_argument("--t1", type=int, default=0)
    p.add_argument("--t2", type=int, help="default: last bin")
    p.add_argument("--genre-filter", choices=sorted(GENRE_FILTERS))
    _add_genres(p)
    p.add_argument("--dim", type=int, default=100)
    p.add_argument("--window", type=int, default=5)
    p.add_argument("--negatives", type=int, default=5)
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--min-count", type=int, default=2)
    p.add_argument("--shift", type=float, default=1.0, help="added to similarities before the Gamma fit")
    p.add_argument("--fit", choices=("moments", "mle"), default="moments")
    p.add_argument("--workers", type=int, default=1,
                   help="SGNS threads; more than 1 is faster but not reproducible")
    _add_common(p)

    p = sub.add_parser("evaluate", help="precision/recall/F1 against a gold standard")
    p.add_argument("decisions")
    p.add_argument("gold")
    p.add_argument("--label", help="free-text label stored in the report")
    _add_common(p, seed=False)

    p = sub.add_parser("simulate", help="sample a synthetic corpus from the generative model")
    for name, typ, default in (("K", int, 3), ("G", int, 1), ("T", int, 2), ("V", int, 50),
                               ("W", int, 5), ("a", float, 1.0), ("b", float, 1.0),
                               ("kappa-psi", float, 100.0), ("sigma0", float, 10.0)):
        p.add_argument(f"--{name}", type=typ, default=default)
    p.add_argument("--spec", help="JSON trajectory spec (phi, psi, genre_proportions)")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--n-per-bin", type=int, default=100, help="snippets per time bin")
    g.add_argument("--per-cell", type=int, help="exact snippets per (bin, genre)")
    _add_common(p)

    p = sub.add_parser("replay", help="rerun the command recorded in a manifest")
    p.add_argument("manifest")
    _add_common(p, seed=False)
    return ap


def _resolve_out(args) -> Path:
    if args.out:
        return Path(args.out)
    base = os.environ.get(OUTPUT_ENV)
    if not base:
        raise InputError(f"no output directory: pass --out or set {OUTPUT_ENV}")
    return Path(base) / args.command


def _run(args) -> int:
    if args.command == "replay":
        old = RunManifest.load(args.manifest)
        for path, digest in old.inputs.items():
            if not Path(path).exists() or sha256_file(path) != digest:
                raise InputError(f"input {path} is missing or differs from the manifest")
        replay = argparse.Namespace(**old.args)
        replay.command = old.command
        replay.out = args.out
        replay.overwrite = args.overwrite
        args = replay
    out_dir = _resolve_out(args)
    recorded = {k: v for k, v in vars(args).items() if k not in ("out", "overwrite", "command")}
    inputs = []
    for key in INPUT_ARGS[args.command]:
        val = getattr(args, key, None)
        inputs += val if isinstance(val, list) else [val]
    manifest = RunManifest(args.command, recorded, {}, _input_digests(inputs), getattr(args, "seed", None))
    with atomic_output_dir(out_dir, args.overwrite) as tmp:
        code = COMMANDS[args.command](args, tmp, manifest) or 0
        finish(manifest, tmp)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _run(args)
    except GascError as exc:
        print(f"gasc {args.command}: error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
