#!/usr/bin/env python3
"""Fetch the Piedmont wines and Australian athletes data and write CSVs.

    python scripts/fetch_datasets.py [--out data] [--only wines|ais]

Outputs ``<out>/wines.csv`` (178 rows; the fits use columns ``uronic`` and
``hue``) and ``<out>/ais.csv`` (202 rows; columns ``bmi`` and ``lbm``).

Sources, tried in order:

* wines: the ``wines`` data object of the CRAN package ``sn``.  The source
  tarball is downloaded and ``data/wines.rda`` is decoded with the
  ``rdata`` package (``pip install rdata``).
* ais: the ``rdatasets`` package (``pip install rdatasets``), which ships the
  ``DAAG::ais`` table; otherwise the Rdatasets CSV mirror.

After writing, the sample means are compared with the published values and
a mismatch aborts with exit code 1.
"""

from __future__ import annotations

import argparse
import csv
import io
import re
import sys
import tarfile
import urllib.request
from pathlib import Path

CRAN = "https://cloud.r-project.org/src/contrib"
RDATASETS_CSV = "https://vincentarelbundock.github.io/Rdatasets/csv/DAAG/ais.csv"
TIMEOUT = 60

# column -> (expected mean, tolerance) used as a sanity check on the download
EXPECTED = {
    "wines": {"uronic": (0.915, 0.0005), "hue": (0.957, 0.0005)},
    "ais": {"bmi": (22.956, 0.0005), "lbm": (64.874, 0.0005)},
}


def _get(url: str) -> bytes:
    with urllib.request.urlopen(url, timeout=TIMEOUT) as resp:
        return resp.read()


def _write(rows: list[dict], path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)


def _records(df) -> list[dict]:
    df = df.reset_index(drop=True)
    if "rownames" in df.columns:
        df = df.drop(columns=["rownames"])
    return df.to_dict(orient="records")


def fetch_wines() -> list[dict]:
    import rdata  # optional; only needed here

    index = _get(f"{CRAN}/PACKAGES").decode()
    m = re.search(r"^Package: sn\nVersion: (\S+)", index, re.M)
    if not m:
        raise RuntimeError("package sn not listed on CRAN")
    blob = _get(f"{CRAN}/sn_{m.group(1)}.tar.gz")
    with tarfile.open(fileobj=io.BytesIO(blob), mode="r:gz") as tar:
        raw = tar.extractfile("sn/data/wines.rda").read()
    converted = rdata.conversion.convert(rdata.parser.parse_data(raw))
    return _records(converted["wines"])


def fetch_ais() -> list[dict]:
    try:
        import rdatasets
    except ImportError:
        text = _get(RDATASETS_CSV).decode()
        rows = list(csv.DictReader(io.StringIO(text)))
        for r in rows:
            r.pop("rownames", None)
            r.pop("", None)
        return rows
    return _records(rdatasets.data("DAAG", "ais"))


def _check(name: str, rows: list[dict]) -> None:
    for col, (mean, tol) in EXPECTED[name].items():
        vals = [float(r[col]) for r in rows]
        got = sum(vals) / len(vals)
        if abs(got - mean) > tol:
            raise RuntimeError(f"{name}.{col}: mean {got:.4f}, expected {mean}")


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="data", type=Path)
    ap.add_argument("--only", choices=sorted(EXPECTED))
    args = ap.parse_args(argv)
    status = 0
    for name, fetch in (("wines", fetch_wines), ("ais", fetch_ais)):
        if args.only and name != args.only:
            continue
        try:
            rows = fetch()
            _check(name, rows)
        except Exception as exc:  # report and move on to the next dataset
            print(f"{name}: failed: {exc}", file=sys.stderr)
            status = 1
            continue
        _write(rows, args.out / f"{name}.csv")
        print(f"{name}: wrote {len(rows)} rows to {args.out / f'{name}.csv'}")
    return status


if __name__ == "__main__":
    sys.exit(main())
