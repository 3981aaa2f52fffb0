"""On-disk run artifacts with content-hash chaining.

Each pipeline stage writes one JSON manifest plus raw .npy blocks for its
vectors and matrices.  The manifest lists the sha256 of every block it
owns and the sha256 of the manifest of the stage it was computed from, so
a later stage can refuse to run against artifacts that were regenerated
with different inputs.  Nothing here carries a timestamp: rerunning a
stage with the same configuration reproduces every byte.
"""

import hashlib
import json
import math
import os

import numpy as np

from .errors import ArtifactError


def file_hash(path):
    """sha256 hex digest of a file's bytes."""
    h = hashlib.sha256()
    try:
        with open(path, "rb") as fh:
            for chunk in iter(lambda: fh.read(1 << 20), b""):
                h.update(chunk)
    except OSError as exc:
        raise ArtifactError(f"cannot hash {path}: {exc}")
    return h.hexdigest()


def jsonable(value):
    """Recursively convert numpy / complex values into JSON-safe ones.

    Complex numbers become [re, im] pairs; non-finite floats become the
    strings 'nan', 'inf', '-inf' so the JSON stays strictly standard.
    """
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [jsonable(v) for v in value.tolist()]
    if isinstance(value, (complex, np.complexfloating)):
        return [jsonable(float(value.real)), jsonable(float(value.imag))]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    return value


def save_json(path, payload):
    text = json.dumps(jsonable(payload), sort_keys=True, indent=2) + "\n"
    with open(path, "w") as fh:
        fh.write(text)
    return path


def load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ArtifactError(f"missing artifact {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise ArtifactError(f"corrupt artifact {path}: {exc}")


def save_arrays(out_dir, arrays):
    """Write each named array as <name>.npy; return {name: {file, sha256}}."""
    entries = {}
    for name, arr in arrays.items():
        fname = f"{name}.npy"
        path = os.path.join(out_dir, fname)
        np.save(path, np.ascontiguousarray(arr))
        entries[name] = {"file": fname, "sha256": file_hash(path)}
    return entries


def load_array(out_dir, manifest, name):
    """Load one block listed in a manifest, verifying its recorded hash."""
    files = manifest.get("files", {})
    if name not in files:
        raise ArtifactError(f"manifest lists no block named {name!r}")
    entry = files[name]
    path = os.path.join(out_dir, entry["file"])
    actual = file_hash(path)
    if actual != entry["sha256"]:
        raise ArtifactError(
            f"block {entry['file']} was modified after its manifest was "
            f"written (hash {actual[:12]}.. != recorded {entry['sha256'][:12]}..)"
        )
    return np.load(path)


def check_upstream(manifest, upstream_path, stage):
    """Abort unless the manifest's recorded upstream hash matches the file."""
    recorded = manifest.get("upstream_sha256")
    if recorded is None:
        raise ArtifactError(f"{stage} manifest has no upstream hash")
    actual = file_hash(upstream_path)
    if actual != recorded:
        raise ArtifactError(
            f"{stage} artifacts were built from a different upstream: "
            f"{os.path.basename(upstream_path)} hashes to {actual[:12]}.. "
            f"but {recorded[:12]}.. was recorded; rerun the earlier stage"
        )


def complex_pairs(values):
    """[[re, im], ...] for a complex vector, in the given order."""
    arr = np.asarray(values, complex).ravel()
    return [[float(v.real), float(v.imag)] for v in arr]


def pairs_to_complex(pairs):
    return np.array([complex(re, im) for re, im in pairs])
