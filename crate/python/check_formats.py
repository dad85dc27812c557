"""Validate the JSON written by a seawatch run against docs/formats.

    python3 python/check_formats.py FILE...

The schema is chosen from the file name or, for the binary containers
(.mdl1, .cnn1, .smp1), from the magic; their embedded manifests are
extracted and checked. .pat1 rasters are checked through their .json
sidecar. Files that match no schema are reported and skipped.
"""

import json
import os
import struct
import sys

from jsonschema import Draft202012Validator, FormatChecker
from referencing import Registry, Resource

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
FORMATS = os.path.join(ROOT, "docs", "formats")

BY_NAME = {
    "simulation.json": "simulation_output",
    "index.json": "map_index",
    "dataset.json": "dataset_report",
    "train_report.json": "train_report",
    "equivalence.json": "equivalence_report",
    "quant.json": "quant_report",
    "bench.json": "bench_report",
}


def registry():
    resources = []
    for name in os.listdir(FORMATS):
        if name.endswith(".schema.json"):
            with open(os.path.join(FORMATS, name)) as f:
                resources.append((name, Resource.from_contents(json.load(f))))
    return Registry().with_resources(resources)


def container_manifest(path):
    with open(path, "rb") as f:
        data = f.read()
    magic = data[:4]
    if magic in (b"MDL1", b"CNN1"):
        (n,) = struct.unpack_from("<I", data, 4)
        return magic.decode().lower() + "_manifest", json.loads(data[8 : 8 + n])
    if magic == b"SMP1":
        count, _, reclen, n = struct.unpack_from("<IIIQ", data, 4)
        start = 32 + count * reclen
        return "smp1_manifest", json.loads(data[start : start + n])
    raise ValueError(f"unknown magic {magic!r}")


def instances(path):
    """(schema name, document) pairs for one file."""
    base = os.path.basename(path)
    ext = os.path.splitext(base)[1]
    if ext in (".mdl1", ".cnn1", ".smp1"):
        yield container_manifest(path)
    elif ext == ".pat1":
        with open(os.path.splitext(path)[0] + ".json") as f:
            yield "pat1_sidecar", json.load(f)
    elif ext == ".jsonl":
        with open(path) as f:
            for line in f:
                yield "alert_message", json.loads(line)
    elif base in BY_NAME:
        with open(path) as f:
            yield BY_NAME[base], json.load(f)


def check(paths):
    reg = registry()
    failures = 0
    for path in paths:
        found = False
        for schema_name, doc in instances(path):
            found = True
            schema = reg.contents(schema_name + ".schema.json")
            v = Draft202012Validator(schema, registry=reg, format_checker=FormatChecker())
            for e in v.iter_errors(doc):
                failures += 1
                where = "/".join(map(str, e.absolute_path)) or "<root>"
                print(f"{path}: {schema_name}: {where}: {e.message}")
        if not found:
            print(f"{path}: no schema, skipped")
    return failures


def main():
    if len(sys.argv) < 2:
        sys.exit(__doc__)
    failures = check(sys.argv[1:])
    if failures:
        sys.exit(f"{failures} violation(s)")
    print(f"{len(sys.argv) - 1} file(s) conform")


if __name__ == "__main__":
    main()
