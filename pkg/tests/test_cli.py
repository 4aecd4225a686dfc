import json
import subprocess
import sys

import jsonschema
import numpy as np
import pytest

from gasc.cli import main
from gasc.corpus import Document, build_vocabulary, extract_snippets, ingest, write_jsonl
from gasc.evaluation import report_schema
from gasc.gibbs import PosteriorTrajectory
from gasc.manifest import RunManifest
from gasc.model import ModelState

TIMESTAMPS = ("started_at", "finished_at")


def run(*argv):
    return main([str(a) for a in argv])


def files(d):
    return {p.relative_to(d).as_posix(): p.read_bytes() for p in sorted(d.rglob("*")) if p.is_file()}


def manifest(d):
    return json.loads((d / "manifest.json").read_text())


def assert_replay_identical(out, tmp_path):
    again = tmp_path / (out.name + "-replay")
    assert run("replay", out / "manifest.json", "-o", again) in (0, 4)
    a, b = files(out), files(again)
    ma, mb = json.loads(a.pop("manifest.json")), json.loads(b.pop("manifest.json"))
    assert a == b
    for m in (ma, mb):
        for k in TIMESTAMPS:
            m.pop(k)
    assert ma == mb


@pytest.fixture(scope="module")
def sim(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli") / "sim"
    assert run("simulate", "-o", out, "--K", 2, "--G", 2, "--T", 3, "--V", 12, "--W", 2,
               "--per-cell", 15, "--seed", 3) == 0
    return out


def small_train_args(corpus, out, *extra):
    return ("train", corpus, "--targets", "target", "--bins", "0,1,2,3", "-K", 2, "--window", 2,
            "--min-count", 1, "--n-iterations", 60, "--burn-in", 10, "-o", out, *extra)


# ---- simulate -------------------------------------------------------------

def test_simulate_outputs(sim):
    assert sorted(files(sim)) == ["bins.txt", "corpus.jsonl", "manifest.json", "true_state.json",
                                  "true_z.tsv", "vocabulary.txt"]
    m = RunManifest.load(sim / "manifest.json")
    assert m.command == "simulate" and m.seed == 3 and m.config["model"]["K"] == 2
    assert set(m.outputs) == set(files(sim)) - {"manifest.json"}


def test_simulate_round_trips_through_ingest(sim):
    docs = ingest(sim / "corpus.jsonl")
    assert len(docs) == 3 * 2 * 15
    state = ModelState.from_json((sim / "true_state.json").read_text())
    assert state.chi.shape == (3, 2, 12) and state.zeta.shape == (3, 2, 2)
    z = [line.split("\t") for line in (sim / "true_z.tsv").read_text().splitlines()[1:]]
    assert [d.doc_id for d in docs] == [row[0] for row in z]
    vocab = (sim / "vocabulary.txt").read_text().split()
    snippets = extract_snippets(docs, "target", 2)
    assert all(len(s.context) == 4 and set(s.context) <= set(vocab) for s in snippets)


def test_simulate_seed_determinism(tmp_path):
    args = ("simulate", "--K", 3, "--V", 20, "--n-per-bin", 30, "--seed", 9)
    run(*args, "-o", tmp_path / "a")
    run(*args, "-o", tmp_path / "b")
    a, b = files(tmp_path / "a"), files(tmp_path / "b")
    a.pop("manifest.json"), b.pop("manifest.json")
    assert a == b
    run("simulate", "--K", 3, "--V", 20, "--n-per-bin", 30, "--seed", 10, "-o", tmp_path / "c")
    assert files(tmp_path / "c")["corpus.jsonl"] != a["corpus.jsonl"]


def test_simulate_single_sense(tmp_path):
    assert run("simulate", "--K", 1, "--T", 3, "--n-per-bin", 20, "-o", tmp_path / "k1") == 0
    rows = (tmp_path / "k1" / "true_z.tsv").read_text().splitlines()[1:]
    assert len(rows) == 60 and all(r.endswith("\t0") for r in rows)


def test_simulate_with_spec(tmp_path):
    spec = {"phi": [[[0.9, 0.1]], [[0.1, 0.9]]]}
    (tmp_path / "spec.json").write_text(json.dumps(spec))
    assert run("simulate", "--K", 2, "--T", 2, "--V", 8, "--spec", tmp_path / "spec.json",
               "--n-per-bin", 200, "--seed", 1, "-o", tmp_path / "s") == 0
    rows = [r.split("\t") for r in (tmp_path / "s" / "true_z.tsv").read_text().splitlines()[1:]]
    early = [int(z) for sid, z in rows if "-t0-" in sid]
    assert abs(np.mean(early) - 0.1) < 0.08


# ---- train ----------------------------------------------------------------

def test_train_writes_checkpoint_and_trajectory(sim, tmp_path):
    out = tmp_path / "train"
    assert run(*small_train_args(sim / "corpus.jsonl", out)) == 0
    names = sorted(files(out))
    assert names == ["manifest.json", "target.checkpoint.json", "target.trajectory.csv",
                     "target.vocabulary.txt"]
    traj = PosteriorTrajectory.from_csv((out / "target.trajectory.csv").read_text())
    assert traj.mean.shape == (3, 2, 2)
    cfg = manifest(out)["config"]
    assert cfg["sampler"]["n_iterations"] == 60 and cfg["genres"] == ["g000", "g001"]
    assert_replay_identical(out, tmp_path)


def test_train_greek_preset_recorded(sim, tmp_path):
    out = tmp_path / "greek"
    assert run("train", sim / "corpus.jsonl", "--targets", "target", "--bins", "0,1,2,3", "-K", 2,
               "--window", 2, "--min-count", 1, "--preset", "greek-gasc", "-o", out) == 0
    p = manifest(out)["config"]["preset_values"]
    assert (p["a"], p["b"], p["kappa_psi"], p["n_iterations"]) == (7, 3, 10, 10000)
    assert manifest(out)["config"]["sampler"]["n_iterations"] == 10000


def test_train_scan_preset_uses_one_genre(sim, tmp_path):
    out = tmp_path / "scan"
    assert run(*small_train_args(sim / "corpus.jsonl", out, "--preset", "scan")) == 0
    cfg = manifest(out)["config"]
    assert cfg["models"]["target"]["G"] == 1 and cfg["preset_values"]["scan"] is True
    assert PosteriorTrajectory.from_csv((out / "target.trajectory.csv").read_text()).mean.shape[1] == 1


def test_train_missing_target_leaves_nothing(sim, tmp_path, capsys):
    out = tmp_path / "nothing"
    code = run("train", sim / "corpus.jsonl", "--targets", "target,absent", "--bins", "0,1,2,3",
               "-K", 2, "--window", 2, "--n-iterations", 20, "--burn-in", 5, "-o", out)
    assert code == 2 and "absent" in capsys.readouterr().err
    assert not out.exists()
    assert not [p for p in tmp_path.iterdir() if p.name.startswith(".nothing")]


def test_train_workers_do_not_change_results(sim, tmp_path):
    docs = ingest(sim / "corpus.jsonl")
    twin = [Document(d.doc_id + "b", d.time_value, d.genre,
                     tuple("other" if w == "target" else w for w in d.lemmas)) for d in docs]
    corpus = tmp_path / "two.jsonl"
    write_jsonl(docs + twin, corpus)
    base = ("train", corpus, "--targets", "target,other", "--bins", "0,1,2,3", "-K", 2, "--window", 2,
            "--min-count", 1, "--n-iterations", 40, "--burn-in", 10)
    assert run(*base, "-o", tmp_path / "w1") == 0
    assert run(*base, "--workers", 2, "-o", tmp_path / "w2") == 0
    a, b = files(tmp_path / "w1"), files(tmp_path / "w2")
    a.pop("manifest.json"), b.pop("manifest.json")
    assert a == b and len(a) == 6


def test_output_dir_guard_and_env(sim, tmp_path, monkeypatch):
    out = tmp_path / "guarded"
    out.mkdir()
    (out / "keep.txt").write_text("x")
    assert run(*small_train_args(sim / "corpus.jsonl", out)) == 2
    assert (out / "keep.txt").exists()
    assert run(*small_train_args(sim / "corpus.jsonl", out), "--overwrite") == 0
    assert not (out / "keep.txt").exists()
    monkeypatch.setenv("GASC_OUTPUT_DIR", str(tmp_path / "env"))
    assert run("simulate", "--n-per-bin", 5) == 0
    assert (tmp_path / "env" / "simulate" / "corpus.jsonl").exists()
    monkeypatch.delenv("GASC_OUTPUT_DIR")
    assert run("simulate", "--n-per-bin", 5) == 2


# ---- detect ---------------------------------------------------------------

def write_traj(path, mean, std):
    path.write_text(PosteriorTrajectory(np.asarray(mean), np.asarray(std), 100).to_csv())
    return path


def flat_traj(path, T=4):
    return write_traj(path, np.tile([[[0.3, 0.7]]], (T, 1, 1)), np.full((T, 1, 2), 0.05))


def rising_religious(path):
    # genre 0 stays put; in genre 1 sense 2 rises from ~0 to dominant at the
    # expense of the other two
    T = 5
    p = np.array([0.01, 0.05, 0.2, 0.5, 0.8])
    mean = np.zeros((T, 2, 3))
    mean[:, 0] = [0.5, 0.3, 0.2]
    mean[:, 1, 0], mean[:, 1, 1], mean[:, 1, 2] = (1 - p) / 2, (1 - p) / 2, p
    return write_traj(path, mean, np.full((T, 2, 3), 0.04))


def test_detect_constant_and_rising(tmp_path):
    flat = flat_traj(tmp_path / "flat.trajectory.csv")
    rise = rising_religious(tmp_path / "cruc.trajectory.csv")
    out = tmp_path / "det"
    assert run("detect", flat, rise, "-o", out) == 0
    rows = [r.split("\t") for r in (out / "decisions.tsv").read_text().splitlines()]
    assert rows[1][:7] == ["cruc", "1", "2", "1", "0", "4", "rise"]
    assert rows[2][:2] == ["flat", "0"]
    only_flat = tmp_path / "det-flat"
    assert run("detect", flat, "-o", only_flat) == 0
    assert (only_flat / "decisions.tsv").read_text().splitlines()[1:] == ["flat\t0\t\t\t\t\t\t"]
    assert_replay_identical(out, tmp_path)


def test_detect_partial_failure(tmp_path, capsys):
    good = flat_traj(tmp_path / "good.trajectory.csv")
    short = flat_traj(tmp_path / "short.trajectory.csv", T=1)
    junk = tmp_path / "junk.trajectory.csv"
    junk.write_text("not,a,trajectory\n1,2,3\n")
    out = tmp_path / "det"
    assert run("detect", good, short, junk, "-o", out) == 4
    errors = (out / "errors.tsv").read_text()
    assert errors.startswith("junk\t") and "\nshort\t" in errors
    assert "good\t0" in (out / "decisions.tsv").read_text()
    assert "short" in capsys.readouterr().err
    assert run("detect", junk, "-o", tmp_path / "none") == 2
    assert not (tmp_path / "none").exists()


def test_detect_rule_flags_recorded(tmp_path):
    path = write_traj(tmp_path / "hump.trajectory.csv",
                      [[[0.1, 0.9]], [[0.8, 0.2]], [[0.1, 0.9]]], np.full((3, 1, 2), 0.05))
    run("detect", path, "-o", tmp_path / "any")
    run("detect", path, "--rule", "endpoints", "-o", tmp_path / "end")
    assert "hump\t1" in (tmp_path / "any" / "decisions.tsv").read_text()
    assert "hump\t0" in (tmp_path / "end" / "decisions.tsv").read_text()
    assert manifest(tmp_path / "end")["config"]["rule"] == "endpoints"


# ---- baseline -------------------------------------------------------------

@pytest.fixture(scope="module")
def genre_corpus(tmp_path_factory):
    from synthetic import graded_tr_corpus
    docs = graded_tr_corpus(0, n_targets=4, per_bin=40)
    docs = [Document(d.doc_id, d.time_value, "Christian" if i % 3 == 0 else "prose", d.lemmas)
            for i, d in enumerate(docs)]
    path = tmp_path_factory.mktemp("base") / "corpus.jsonl"
    write_jsonl(docs, path)
    return path


def test_baseline_tr_with_genre_filter(genre_corpus, tmp_path):
    out = tmp_path / "tr"
    assert run("baseline", genre_corpus, "--targets", "x0,x1,x2,x3", "--bins", "0,1,2",
               "--genre-filter", "NOT-christian", "--dim", 10, "--epochs", 2, "-o", out) == 0
    cfg = manifest(out)["config"]
    assert cfg["genre_exclude"] == ["christian"] and cfg["genre_include"] == []
    assert cfg["genre_filter"] == "NOT-christian" and cfg["mode"] == "TR"
    sims = (out / "similarities.tsv").read_text().splitlines()
    assert len(sims) == 5 and sims[0] == "lemma\tsimilarity"
    decisions = (out / "decisions.tsv").read_text().splitlines()
    assert [r.split("\t")[0] for r in decisions[1:]] == ["x0", "x1", "x2", "x3"]
    assert_replay_identical(out, tmp_path)


def test_baseline_op_runs_and_needs_two_bins(genre_corpus, tmp_path, capsys):
    out = tmp_path / "op"
    assert run("baseline", genre_corpus, "--targets", "x0,x1,x2,x3", "--bins", "0,1,2", "--mode", "OP",
               "--dim", 5, "--epochs", 2, "-o", out) == 0
    assert manifest(out)["config"]["mode"] == "OP"
    code = run("baseline", genre_corpus, "--targets", "x0", "--bins", "0,2", "--mode", "OP",
               "-o", tmp_path / "op1")
    assert code == 2 and "two time bins" in capsys.readouterr().err
    assert not (tmp_path / "op1").exists()


# ---- evaluate -------------------------------------------------------------

def scan_like(tmp_path):
    gold_lines, dec_lines = [], ["lemma\tchanged\tsense\tgenre\tt1\tt2\tdirection\tmagnitude"]
    for i in range(40):
        truth = i < 26
        pred = truth or i < 38            # 12 false positives, 2 true negatives
        gold_lines.append(f"l{i:02d}\t{int(truth)}")
        dec_lines.append(f"l{i:02d}\t{int(pred)}\t\t\t\t\t\t")
    gold = tmp_path / "gold.tsv"
    gold.write_text("\n".join(gold_lines) + "\n")
    dec = tmp_path / "decisions.tsv"
    dec.write_text("\n".join(dec_lines) + "\n")
    return dec, gold


def test_evaluate_reproduces_scan_row(tmp_path, capsys):
    dec, gold = scan_like(tmp_path)
    out = tmp_path / "ev"
    assert run("evaluate", dec, gold, "--label", "SCAN", "-o", out) == 0
    text = (out / "report.txt").read_text()
    assert "F1 0.813" in text and "TP 26  TN 2  FP 12  FN 0" in text
    assert "F1 0.813" in capsys.readouterr().out
    doc = json.loads((out / "report.json").read_text())
    jsonschema.validate(doc, report_schema())
    assert doc["metadata"]["label"] == "SCAN"
    assert_replay_identical(out, tmp_path)


def test_evaluate_missing_lemma(tmp_path, capsys):
    dec, gold = scan_like(tmp_path)
    lines = dec.read_text().splitlines()
    dec.write_text("\n".join(l for l in lines if not l.startswith("l07")) + "\n")
    assert run("evaluate", dec, gold, "-o", tmp_path / "ev") == 2
    assert "l07" in capsys.readouterr().err
    assert not (tmp_path / "ev").exists()


def test_replay_rejects_changed_inputs(tmp_path):
    dec, gold = scan_like(tmp_path)
    assert run("evaluate", dec, gold, "-o", tmp_path / "ev") == 0
    gold.write_text(gold.read_text().replace("l00\t1", "l00\t0"))
    assert run("replay", tmp_path / "ev" / "manifest.json", "-o", tmp_path / "again") == 2


def test_console_script_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "gasc.cli", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.startswith("gasc ")
    res = subprocess.run([sys.executable, "-m", "gasc.cli", "evaluate", str(tmp_path / "nope.tsv"),
                          str(tmp_path / "gold.tsv"), "-o", str(tmp_path / "x")],
                         capture_output=True, text=True)
    assert res.returncode == 2 and "error" in res.stderr


def test_simulated_corpus_trains(sim):
    # the simulated files feed straight back into snippet extraction
    docs = ingest(sim / "corpus.jsonl")
    vocab, indexed = build_vocabulary(extract_snippets(docs, "target", 2), 1)
    assert vocab.size <= 12 and len(indexed) == 90
