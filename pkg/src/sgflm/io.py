"""On-disk formats: function-grid CSVs, dataset files, and case manifests.

Every file carries the config hash and seed of the run that produced it,
either as a JSON field or as a leading ``#`` comment line in CSVs.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .basis import FunctionGrid
from .lattice import lattice_from_spec
from .model import Dataset

__all__ = [
    "config_hash",
    "write_function_grid",
    "read_function_grid",
    "write_dataset",
    "read_dataset",
    "write_case",
    "read_case",
]


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


def _provenance_line(meta: dict) -> str:
    return f"# config_hash={meta.get('config_hash', '')} seed={meta.get('seed', '')}\n"


def write_function_grid(fg: FunctionGrid, path, meta: dict | None = None) -> None:
    path = Path(path)
    with path.open("w") as fh:
        if meta:
            fh.write(_provenance_line(meta))
        fh.write("t,value\n")
        for t, v in zip(fg.grid_points, fg.values):
            fh.write(f"{t:.17g},{v:.17g}\n")


def read_function_grid(path) -> FunctionGrid:
    data = np.loadtxt(path, delimiter=",", skiprows=0, comments="#",
                      dtype=str)
    # first non-comment row is the header
    body = data[1:].astype(float)
    return FunctionGrid(body[:, 0], body[:, 1])


def write_dataset(ds: Dataset, outdir, stem: str, extra_meta: dict | None = None) -> None:
    """Write one replicate as scores/responses CSVs plus a metadata JSON."""
    outdir = Path(outdir)
    meta = dict(ds.meta)
    if extra_meta:
        meta.update(extra_meta)
    meta_json = {k: (v.tolist() if isinstance(v, np.ndarray) else v)
                 for k, v in meta.items()}

    J = ds.num_scores
    with (outdir / f"{stem}_scores.csv").open("w") as fh:
        fh.write(_provenance_line(meta_json))
        fh.write(",".join(f"eps{j}" for j in range(1, J + 1)) + "\n")
        for row in ds.scores:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
    with (outdir / f"{stem}_responses.csv").open("w") as fh:
        fh.write(_provenance_line(meta_json))
        fh.write("site,y\n")
        for i, y in enumerate(ds.responses):
            fh.write(f"{i},{int(y)}\n")
    with (outdir / f"{stem}_meta.json").open("w") as fh:
        json.dump(meta_json, fh, sort_keys=True, indent=2)
        fh.write("\n")


def read_dataset(outdir, stem: str) -> Dataset:
    outdir = Path(outdir)
    try:
        with (outdir / f"{stem}_meta.json").open() as fh:
            meta = json.load(fh)
        scores = np.loadtxt(outdir / f"{stem}_scores.csv", delimiter=",",
                            skiprows=0, comments="#", dtype=str)[1:].astype(float)
        resp = np.loadtxt(outdir / f"{stem}_responses.csv", delimiter=",",
                          skiprows=0, comments="#", dtype=str)[1:].astype(float)
    except (OSError, ValueError, KeyError) as exc:
        raise ValueError(f"corrupt or missing dataset files for {stem!r}: {exc}") from exc
    lattice = lattice_from_spec(meta["lattice"])
    if "xbar_scores" in meta:
        meta = dict(meta)
        meta["xbar_scores"] = np.asarray(meta["xbar_scores"], dtype=float)
    return Dataset(lattice, scores, resp[:, 1], meta=meta)


def write_case(datasets, outdir, manifest: dict) -> None:
    """Write all replicates of a case plus a ``manifest.json``."""
    outdir = Path(outdir)
    stems = []
    for k, ds in enumerate(datasets):
        stem = f"replicate{k:03d}"
        write_dataset(ds, outdir, stem, extra_meta={
            "config_hash": manifest.get("config_hash", ""),
            "seed": manifest.get("seed", ""),
        })
        stems.append(stem)
    manifest = dict(manifest)
    manifest["replicate_stems"] = stems
    with (outdir / "manifest.json").open("w") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=2)
        fh.write("\n")


def read_case(outdir) -> tuple[list, dict]:
    outdir = Path(outdir)
    try:
        with (outdir / "manifest.json").open() as fh:
            manifest = json.load(fh)
        datasets = [read_dataset(outdir, stem) for stem in manifest["replicate_stems"]]
    except (OSError, ValueError, KeyError) as exc:
        raise ValueError(f"cannot read case from {outdir}: {exc}") from exc
    return datasets, manifest
