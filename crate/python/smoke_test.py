"""Smoke test for the emcomp extension module.

Build first:  pip install --no-build-isolation -e crates/py
CLI parity needs the emcomp binary (cargo build -p emcomp-cli); set EMCOMP_BIN to override.
"""

import csv
import json
import os
import pathlib
import subprocess
import sys
import tempfile

import numpy as np

import emcomp

ROOT = pathlib.Path(__file__).resolve().parent.parent
PLANTED = (2, 5)


def planted_db(path, n=12, m=8, seed=3):
    rng = np.random.default_rng(seed)
    q = rng.normal(size=n)
    q /= np.linalg.norm(q)
    rows = []
    for i in range(m):
        cos = 0.9 if i in PLANTED else -0.3
        r = rng.normal(size=n)
        r -= r.dot(q) * q
        r /= np.linalg.norm(r)
        rows.append([str(i)] + list(cos * q + np.sqrt(1 - cos * cos) * r))
    with open(path, "w", newline="") as fh:
        csv.writer(fh).writerows(rows)
    return [float(x) for x in q]


def cli_binary():
    if "EMCOMP_BIN" in os.environ:
        return os.environ["EMCOMP_BIN"]
    for profile in ("release", "debug"):
        p = ROOT / "target" / profile / "emcomp"
        if p.exists():
            return str(p)
    return None


def check(cond, what):
    print(("PASS " if cond else "FAIL ") + what)
    return cond


def main():
    ok = True
    with tempfile.TemporaryDirectory() as tmp:
        tmp = pathlib.Path(tmp)
        db = tmp / "db.csv"
        q = planted_db(db)

        ok &= check(emcomp.run_query(str(db), q) == list(PLANTED), "indices mode finds planted matches")
        ok &= check(emcomp.run_query(str(db), q, mode="bit") is True, "bit mode reports a match")

        with emcomp.Session(str(db), protocol="ss") as s:
            ok &= check(s.query(q, seed=1) == list(PLANTED), "session query")
            ok &= check(s.config["m"] == 8 and s.mode == "indices", "config echo")
        try:
            s.query(q)
            ok &= check(False, "closed session raises")
        except emcomp.ConfigError:
            ok &= check(True, "closed session raises")

        try:
            emcomp.run_query(str(db), q, protocol="nope")
            ok &= check(False, "bad protocol raises")
        except emcomp.ConfigError as e:
            ok &= check(e.code == 2, "bad protocol raises with code 2")

        rows = emcomp.bench(profile=["lan"], m=4, n=6, runs=1, threads=1)
        cols = ["profile", "protocol", "output", "sim_ms", "compute_ms", "total_ms", "rounds", "payload_bytes", "frame_bytes"]
        ok &= check(len(rows) == 6 and all(list(r) == cols for r in rows), "bench keys match CLI columns")
        try:
            emcomp.bench(profile=["nowhere"], m=4, n=6, runs=1)
            ok &= check(False, "bad profile raises")
        except emcomp.ConfigError:
            ok &= check(True, "bad profile raises")

        rep = emcomp.attack_demo(n=8, m=4)
        ok &= check(rep["max_error_real"] < 1e-9, "attack demo recovers the database")

        exe = cli_binary()
        if exe is None:
            print("SKIP CLI parity: no emcomp binary")
        else:
            qfile = tmp / "q.csv"
            with open(qfile, "w", newline="") as fh:
                csv.writer(fh).writerow(["q"] + q)
            same = 0
            for seed in range(20):
                mode = "bit" if seed % 2 else "indices"
                proto = ["fss", "fss-direct", "ss"][seed % 3]
                args = [exe, "run", "--db", str(db), "--query", str(qfile), "--seed", str(seed), "--mode", mode, "--protocol", proto]
                out = json.loads(subprocess.run(args, check=True, capture_output=True).stdout)
                with emcomp.Session(str(db), mode=mode, protocol=proto) as s:
                    got = s.query(q, seed=seed)
                    stats = s.last_stats()
                want = out["indices"] if mode == "indices" else out["any"]
                same += got == want and stats["rounds"] == out["rounds"] and list(stats["payload_bytes"]) == out["payload_bytes"]
            ok &= check(same == 20, f"CLI parity on 20 seeded runs ({same}/20)")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
