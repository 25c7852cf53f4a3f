"""End-to-end checks of the flamm command-line tool: exit codes, report
schema, config precedence, reproducibility and the model file pipeline."""

import json
import os
import subprocess
import sys
import tempfile

FLAMM, MAKE_PLANTED = sys.argv[1], sys.argv[2]
failures = []


def run(*args, expect=0):
    proc = subprocess.run([FLAMM, *map(str, args)], capture_output=True, text=True)
    if proc.returncode != expect:
        failures.append(f"{' '.join(map(str, args))}: exit {proc.returncode}, wanted {expect}\n{proc.stderr}")
    return proc


def check(cond, what):
    if not cond:
        failures.append(what)


with tempfile.TemporaryDirectory() as tmp:
    subprocess.run([MAKE_PLANTED, tmp, "3"], check=True)
    src, tgt = os.path.join(tmp, "source.txt"), os.path.join(tmp, "target.txt")
    base = ["--source", src, "--target", tgt]
    one = ["--gamma1", "0.1", "--gamma2", "1", "--layers", "2"]

    # usage errors
    run("--help")
    run(expect=1)
    run("run", "--bogus", expect=1)
    run("run", *base, "--method", "msda", expect=1)
    run("run", *base, "--reg-c", "0", "--method", "raw", expect=1)
    run("run", *base, "--gamma1", "1,,2", expect=1)
    run("fit", *base, "--out", os.path.join(tmp, "m.flam"), expect=1)  # default grid is not a single point

    # report schema
    proc = run("run", *base, "--method", "flamm", *one, "--val-size", "50", "--seed", "3")
    report = json.loads(proc.stdout or "{}")
    for key in ("method", "params", "accuracy", "n_test", "distances", "seed", "version"):
        check(key in report, f"report lacks {key}")
    check(report.get("method") == "flamm", "method echoed")
    check(report.get("params", {}).get("gamma1") == 0.1, "gamma1 echoed")
    check(report.get("params", {}).get("layers") == 2, "layers echoed")
    check(0.0 <= report.get("accuracy", -1) <= 1.0, "accuracy in [0, 1]")
    check(report.get("n_test") == 150, "n_test is pool minus validation")
    check(len(report.get("distances", [])) == 3, "K + 1 distances")
    check(report.get("seed") == 3, "seed echoed")

    biased = json.loads(run("run", *base, "--method", "flamm", *one, "--val-size", "50",
                            "--constant-row", "true").stdout or "{}")
    check(biased.get("constant_row") is True and report.get("constant_row") is False, "constant-row echoed")

    proc = run("run", *base, "--method", "raw", "--val-size", "20", "--format", "csv")
    lines = proc.stdout.strip().splitlines()
    check(len(lines) == 2 and lines[0].startswith("method,accuracy,n_test"), "csv report layout")

    # reproducibility
    a = run("run", *base, "--method", "flamm", "--gamma1", "0.1,1", "--gamma2", "0.1,1", "--layers", "1,2",
            "--val-size", "40", "--no-timings").stdout
    b = run("run", *base, "--method", "flamm", "--gamma1", "0.1,1", "--gamma2", "0.1,1", "--layers", "1,2",
            "--val-size", "40", "--no-timings").stdout
    check(a == b and a, "identical runs give identical reports")

    # config file, flags override
    cfg = os.path.join(tmp, "run.cfg")
    with open(cfg, "w") as f:
        f.write(f"# experiment\nsource = {src}\ntarget = {tgt}\nmethod = sfl\ngamma1 = 5\nlayers = 3\n"
                "val-size = 30\nseed = 9\n")
    report = json.loads(run("run", "--config", cfg, "--seed", "4").stdout or "{}")
    check(report.get("method") == "sfl", "config sets method")
    check(report.get("params", {}).get("gamma1") == 5, "config sets gamma1")
    check(report.get("seed") == 4, "flag overrides config")
    out = os.path.join(tmp, "report.json")
    run("run", "--config", cfg, "--out", out)
    check(os.path.exists(out) and json.load(open(out)).get("seed") == 9, "--out writes the report")
    bad_cfg = os.path.join(tmp, "bad.cfg")
    with open(bad_cfg, "w") as f:
        f.write("colour = blue\n")
    run("run", "--config", bad_cfg, expect=1)
    run("run", "--config", os.path.join(tmp, "missing.cfg"), expect=1)

    # data errors
    run("run", "--source", os.path.join(tmp, "nope.txt"), "--target", tgt, "--method", "raw", expect=2)
    broken = os.path.join(tmp, "broken.txt")
    with open(broken, "w") as f:
        f.write("#d 3\n+1 4:1\n")
    run("run", "--source", broken, "--target", tgt, "--method", "raw", expect=2)
    one_class = os.path.join(tmp, "one_class.txt")
    with open(one_class, "w") as f:
        f.write("#d 10\n" + "+1 1:1\n" * 5)
    run("train", "--source", one_class, "--out", os.path.join(tmp, "x.lmdl"), expect=2)

    # numerical failure: rank-deficient covariance with no CORAL ridge
    dup_s, dup_t = os.path.join(tmp, "dup_s.txt"), os.path.join(tmp, "dup_t.txt")
    with open(dup_s, "w") as f:
        f.write("#d 2\n" + "".join(f"{'+1' if i % 2 else '-1'} 1:{i + 1} 2:{i + 1}\n" for i in range(10)))
    with open(dup_t, "w") as f:
        f.write("#d 2\n" + "".join(f"{'+1' if i % 2 else '-1'} 1:{i + 1} 2:{(i * 7) % 5 + 1}\n" for i in range(10)))
    run("run", "--source", dup_s, "--target", dup_t, "--method", "coral", "--coral-lambda", "0",
        "--val-size", "4", expect=3)

    # model files: fit -> transform -> train -> eval
    model = os.path.join(tmp, "m.flam")
    run("fit", *base, *one, "--out", model)
    first = open(model, "rb").read()
    run("fit", *base, *one, "--out", model)
    check(first == open(model, "rb").read() and first[:4] == b"FLAM", "fit is byte-reproducible")
    ts, tt = os.path.join(tmp, "ts.txt"), os.path.join(tmp, "tt.txt")
    run("transform", "--model", model, "--input", src, "--out", ts)
    run("transform", "--model", model, "--input", tgt, "--out", tt)
    clf = os.path.join(tmp, "c.lmdl")
    run("train", "--source", ts, "--out", clf)
    check(open(clf, "rb").read()[:4] == b"LMDL", "classifier file magic")
    ev = json.loads(run("eval", "--model", clf, "--target", tt).stdout or "{}")
    check(0.0 <= ev.get("accuracy", -1) <= 1.0 and ev.get("n_test") == 200, "eval report")
    run("eval", "--model", model, "--target", tt, expect=2)  # wrong file type

    # curve and grid
    curve = json.loads(run("curve", *base, "--method", "sfl", "--gamma1", "4", "--layers", "5").stdout or "{}")
    dist = [p["distance"] for p in curve.get("curve", [])]
    check(len(dist) == 6 and all(b <= a + 1e-9 for a, b in zip(dist, dist[1:])), "sfl curve non-increasing")
    run("curve", *base, "--method", "raw", expect=1)
    grid = json.loads(run("grid", *base, "--method", "flamm", "--gamma1", "0.1,1", "--gamma2", "1",
                          "--layers", "1", "--val-size", "50").stdout or "{}")
    check(len(grid.get("grid", [])) == 2 and "best" in grid, "grid report")

    # raw corpus ingestion
    corpus = os.path.join(tmp, "corpus")
    texts = {("source", "pos"): ["good great fine", "great good"], ("source", "neg"): ["bad awful", "awful poor bad"],
             ("target", "pos"): ["great kettle", "good kettle great"], ("target", "neg"): ["bad kettle", "awful poor"]}
    for (split, label), docs in texts.items():
        os.makedirs(os.path.join(corpus, split, label))
        for i, text in enumerate(docs):
            with open(os.path.join(corpus, split, label, f"{label}{i}.txt"), "w") as f:
                f.write(text)
    ingested = os.path.join(tmp, "ingested")
    run("ingest", "--corpus", corpus, "--vocab-size", "6", "--out", ingested)
    for name in ("source.txt", "target.txt", "vocab.txt"):
        check(os.path.exists(os.path.join(ingested, name)), f"ingest wrote {name}")
    check(len(open(os.path.join(ingested, "vocab.txt")).read().splitlines()) == 6, "vocabulary size")
    run("run", "--source", os.path.join(ingested, "source.txt"), "--target", os.path.join(ingested, "target.txt"),
        "--method", "raw", "--val-size", "1")
    run("ingest", "--out", ingested, expect=1)

if failures:
    print("\n".join(failures))
    sys.exit(1)
print("cli smoke test passed")
