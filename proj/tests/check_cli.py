#!/usr/bin/env python3
"""Runs the CLI on every shipped config and checks exit codes, schema validity and
byte-identical results across thread counts."""
import argparse
import json
import pathlib
import shutil
import subprocess
import sys

import jsonschema


def run(cli, config, out, threads=1, extra=()):
    cmd = [cli, "--config", str(config), "--out", str(out), "--threads", str(threads), *extra]
    return subprocess.run(cmd, capture_output=True, text=True).returncode


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--cli", required=True)
    ap.add_argument("--schema", required=True)
    ap.add_argument("--configs", required=True)
    ap.add_argument("--work", required=True)
    args = ap.parse_args()

    work = pathlib.Path(args.work)
    shutil.rmtree(work, ignore_errors=True)
    work.mkdir(parents=True)
    schema = json.loads(pathlib.Path(args.schema).read_text())
    validator = jsonschema.Draft7Validator(schema)
    failures = []

    def check(name, cond, msg=""):
        print(f"{'ok  ' if cond else 'FAIL'} {name} {msg}")
        if not cond:
            failures.append(name)

    def validate(name, path):
        doc = json.loads(path.read_text())
        errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.path))
        check(f"{name}: schema", not errors, "; ".join(e.message for e in errors[:3]))
        return doc

    printed = subprocess.run([args.cli, "--schema"], capture_output=True, text=True)
    check("--schema", printed.returncode == 0 and json.loads(printed.stdout) == schema)

    for config in sorted(pathlib.Path(args.configs).glob("*.json")):
        name = config.stem
        a, b = work / f"{name}_t1", work / f"{name}_t3"
        code = run(args.cli, config, a, 1)
        check(f"{name}: exit", code == 0, f"exit {code}")
        validate(name, a / "result.json")
        manifest = json.loads((a / "manifest.json").read_text())
        check(f"{name}: manifest", {"config", "versions", "seed", "wall_time_seconds", "exit_code"} <= manifest.keys())
        if name == "diagnose_oscillation":
            continue  # slowest config; thread invariance is covered by the others
        run(args.cli, config, b, 3)
        check(f"{name}: threads 1 vs 3", (a / "result.json").read_bytes() == (b / "result.json").read_bytes())

    mesh = json.loads((work / "mesh_t1" / "result.json").read_text())["mesh"]
    check("mesh disk level 0", mesh["nodes"] == 7 and mesh["triangles"] == 6)
    energy = json.loads((work / "minimize_exp_t1" / "result.json").read_text())["minimization"]["energy"]
    check("minimize exp energy", abs(energy - 23.2134) < 0.01 * 23.2134, f"{energy}")
    diag = json.loads((work / "diagnose_oscillation_t1" / "result.json").read_text())["diagnosis"]
    gap = diag["hypotheses"]["energy_convergence"]["gap"]
    check("oscillation verdict", diag["verdict"] == "EnergyGap" and abs(gap - 0.5) < 0.025, f"gap {gap}")

    bad = work / "bad.json"
    bad.write_text("{ not json")
    code = run(args.cli, bad, work / "bad")
    check("malformed config exit 2", code == 2, f"exit {code}")
    doc = validate("malformed config", work / "bad" / "result.json")
    check("malformed config status", doc["status"] == "validation_error")
    check("malformed config reason", "failure_reason" in json.loads((work / "bad" / "manifest.json").read_text()))

    unknown = work / "unknown.json"
    unknown.write_text(json.dumps({"command": "fly"}))
    check("unknown command exit 2", run(args.cli, unknown, work / "unknown") == 2)
    validate("unknown command", work / "unknown" / "result.json")

    domain = work / "domain.json"
    domain.write_text(json.dumps({"command": "hopf", "domain": {"kind": "disk", "level": 2},
                                  "hopf": {"weight": "hyperbolic", "map": {"tag": "affine", "a": 2.0, "b": 0.1}}}))
    check("domain error exit 3", run(args.cli, domain, work / "domain") == 3)
    validate("domain error", work / "domain" / "result.json")

    (work / "blocker").write_text("x")
    check("unwritable out exit 2", run(args.cli, pathlib.Path(args.configs) / "mesh.json", work / "blocker" / "out") == 2)

    seeded = work / "seeded"
    run(args.cli, pathlib.Path(args.configs) / "oracle.json", seeded, 1, ["--seed", "123"])
    check("seed override", json.loads((seeded / "result.json").read_text())["seed"] == 123)

    print(f"{len(failures)} failures")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
