#!/usr/bin/env python3
"""Download the public benchmark datasets into a local data directory.

Nothing here runs automatically; tests and the CLI only read what this
script has already placed on disk. Layout produced::

    <root>/cora/cora.content, cora.cites
    <root>/citeseer/citeseer.content, citeseer.cites
    <root>/stargazers/git_edges.json, git_target.csv

Each downloaded archive's SHA-256 is written to ``<root>/checksums.json``;
later runs verify against it, and ``--sha256`` pins an expected digest.
"""

from __future__ import annotations

import argparse
import hashlib
import io
import json
import sys
import tarfile
import urllib.request
import zipfile
from pathlib import Path

SOURCES = {
    "cora": ("https://linqs-data.soe.ucsc.edu/public/lbc/cora.tgz", ["cora.content", "cora.cites"]),
    "citeseer": ("https://linqs-data.soe.ucsc.edu/public/lbc/citeseer.tgz",
                 ["citeseer.content", "citeseer.cites"]),
    # No stable default mirror; pass --url pointing at an archive holding both files.
    "stargazers": (None, ["git_edges.json", "git_target.csv"]),
}


def _extract(blob: bytes, wanted: list[str], dest: Path) -> None:
    dest.mkdir(parents=True, exist_ok=True)
    found = {}
    if zipfile.is_zipfile(io.BytesIO(blob)):
        with zipfile.ZipFile(io.BytesIO(blob)) as zf:
            for name in zf.namelist():
                base = Path(name).name
                if base in wanted:
                    found[base] = zf.read(name)
    else:
        with tarfile.open(fileobj=io.BytesIO(blob)) as tf:
            for member in tf.getmembers():
                base = Path(member.name).name
                if member.isfile() and base in wanted:
                    found[base] = tf.extractfile(member).read()
    missing = sorted(set(wanted) - set(found))
    if missing:
        raise SystemExit(f"archive lacks {', '.join(missing)}")
    for base, content in found.items():
        (dest / base).write_bytes(content)


def fetch(name: str, root: Path, url: str | None, sha256: str | None) -> None:
    default_url, wanted = SOURCES[name]
    url = url or default_url
    if url is None:
        raise SystemExit(f"{name}: no default source, pass --url")
    print(f"{name}: downloading {url}")
    with urllib.request.urlopen(url, timeout=120) as resp:
        blob = resp.read()
    digest = hashlib.sha256(blob).hexdigest()
    sums_path = root / "checksums.json"
    sums = json.loads(sums_path.read_text()) if sums_path.exists() else {}
    expected = sha256 or sums.get(name)
    if expected and expected != digest:
        raise SystemExit(f"{name}: checksum mismatch (expected {expected}, got {digest})")
    _extract(blob, wanted, root / name)
    sums[name] = digest
    root.mkdir(parents=True, exist_ok=True)
    sums_path.write_text(json.dumps(sums, indent=2, sort_keys=True) + "\n")
    print(f"{name}: ok, sha256 {digest}")


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("datasets", nargs="+", choices=sorted(SOURCES))
    p.add_argument("--root", default="data", type=Path)
    p.add_argument("--url", help="override the download URL (single dataset only)")
    p.add_argument("--sha256", help="expected archive digest (single dataset only)")
    args = p.parse_args(argv)
    if (args.url or args.sha256) and len(args.datasets) != 1:
        p.error("--url and --sha256 apply to a single dataset")
    for name in args.datasets:
        fetch(name, args.root, args.url, args.sha256)
    return 0


if __name__ == "__main__":
    sys.exit(main())
