"""JSON artifacts, run manifests and CSV tables.

Every artifact file is an envelope::

    {"schema": "jdmd.model", "schema_version": "1.0",
     "sha256": "<hex digest of the canonical payload>", "payload": {...}}

Arrays are stored as ``{"shape": [...], "data": [...]}`` with ``data`` in
row-major order. Floats are written with Python's shortest round-trip
``repr`` so every value reloads bit-for-bit; non-finite values are written as
the strings ``"inf"``, ``"-inf"`` and ``"nan"``.
"""

from __future__ import annotations

import csv
import hashlib
import io as _io
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional

import numpy as np

from .bilinear import BilinearModel
from .control import ClosedLoopResult, ReferenceTrajectory
from .errors import SchemaError
from .lifting import LiftingMap
from .regression import Trajectory, TrajectoryDataset

SCHEMA_VERSION = "1.0"
MANIFEST_NAME = "manifest.json"


def code_version() -> str:
    try:
        from importlib.metadata import version
        return version("artifact")
    except Exception:
        return "unknown"


# ---------------------------------------------------------------------------
# encoding


def _float(v: float):
    if math.isfinite(v):
        return v
    return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")


def to_jsonable(obj):
    """Recursively convert numpy values and non-finite floats to plain JSON types."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _float(float(obj))
    return obj


def encode_array(a) -> dict:
    a = np.asarray(a, dtype=float)
    return {"shape": list(a.shape), "data": [_float(v) for v in a.ravel().tolist()]}


def decode_array(d: dict) -> np.ndarray:
    try:
        data = np.array([float(v) for v in d["data"]], dtype=float)
        return data.reshape([int(n) for n in d["shape"]])
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"malformed array: {exc}") from exc


def _canonical(payload) -> bytes:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"),
                      allow_nan=False).encode()


def digest_payload(payload) -> str:
    return hashlib.sha256(_canonical(payload)).hexdigest()


def dumps_artifact(schema: str, payload: dict) -> str:
    payload = to_jsonable(payload)
    env = {"schema": schema, "schema_version": SCHEMA_VERSION,
           "sha256": digest_payload(payload), "payload": payload}
    return json.dumps(env, indent=1, sort_keys=True, allow_nan=False) + "\n"


def loads_artifact(text: str, schema: str) -> dict:
    """Parse an envelope, refusing wrong schemas, other major versions and bad digests."""
    try:
        env = json.loads(text)
    except ValueError as exc:
        raise SchemaError(f"not valid JSON: {exc}") from exc
    if not isinstance(env, dict) or "payload" not in env:
        raise SchemaError("missing artifact envelope")
    if env.get("schema") != schema:
        raise SchemaError(f"expected schema {schema!r}, found {env.get('schema')!r}")
    version = str(env.get("schema_version", ""))
    if version.split(".")[0] != SCHEMA_VERSION.split(".")[0]:
        raise SchemaError(f"schema version {version!r} is incompatible with {SCHEMA_VERSION}")
    if digest_payload(env["payload"]) != env.get("sha256"):
        raise SchemaError("payload digest mismatch; file is corrupted or was edited")
    return env["payload"]


def _write(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path


# ---------------------------------------------------------------------------
# artifacts


def lifting_to_dict(lifting: LiftingMap) -> dict:
    d = lifting.to_dict()
    d["scales"] = encode_array(lifting.scales)
    d["G"] = encode_array(lifting.G)
    return d


def lifting_from_dict(d: dict) -> LiftingMap:
    d = dict(d)
    d["scales"] = decode_array(d["scales"])
    lifting = LiftingMap.from_dict(d)
    if "G" in d and not np.array_equal(decode_array(d["G"]), lifting.G):
        raise SchemaError("stored G does not match the lifting map")
    return lifting


def model_to_dict(model: BilinearModel) -> dict:
    return {"E": encode_array(model.E), "lifting": lifting_to_dict(model.lifting),
            "N_x": model.n_x, "N_y": model.n_y, "N_u": model.n_u, "dt": model.dt}


def model_from_dict(d: dict) -> BilinearModel:
    try:
        model = BilinearModel(decode_array(d["E"]), lifting_from_dict(d["lifting"]),
                              int(d["N_u"]), float(d["dt"]))
    except KeyError as exc:
        raise SchemaError(f"model is missing field {exc}") from exc
    if model.n_y != int(d["N_y"]) or model.n_x != int(d["N_x"]):
        raise SchemaError("model dimensions do not match its fields")
    return model


def save_model(model: BilinearModel, path) -> Path:
    return _write(path, dumps_artifact("jdmd.model", model_to_dict(model)))


def load_model(path) -> BilinearModel:
    return model_from_dict(loads_artifact(Path(path).read_text(), "jdmd.model"))


def dataset_to_dict(ds: TrajectoryDataset) -> dict:
    out = {
        "sample_rate_hz": ds.sample_rate_hz,
        "trajectories": [{"states": encode_array(t.states), "controls": encode_array(t.controls)}
                         for t in ds.trajectories],
        "metadata": ds.metadata,
    }
    if ds.has_prior:
        out["jac_x"] = encode_array(ds.jac_x)
        out["jac_u"] = encode_array(ds.jac_u)
    return out


def dataset_from_dict(d: dict) -> TrajectoryDataset:
    try:
        trajs = [Trajectory(decode_array(t["states"]), decode_array(t["controls"]))
                 for t in d["trajectories"]]
        jx = decode_array(d["jac_x"]) if "jac_x" in d else None
        ju = decode_array(d["jac_u"]) if "jac_u" in d else None
        return TrajectoryDataset(trajs, float(d["sample_rate_hz"]), jx, ju,
                                 dict(d.get("metadata", {})))
    except KeyError as exc:
        raise SchemaError(f"dataset is missing field {exc}") from exc


def save_dataset(ds: TrajectoryDataset, path) -> Path:
    return _write(path, dumps_artifact("jdmd.dataset", dataset_to_dict(ds)))


def load_dataset(path) -> TrajectoryDataset:
    return dataset_from_dict(loads_artifact(Path(path).read_text(), "jdmd.dataset"))


def reference_to_dataset(ref: ReferenceTrajectory) -> TrajectoryDataset:
    return TrajectoryDataset([Trajectory(ref.states, ref.controls)], 1.0 / ref.dt,
                             metadata={"kind": "reference"})


def dataset_to_reference(ds: TrajectoryDataset) -> ReferenceTrajectory:
    t = ds.trajectories[0]
    return ReferenceTrajectory(t.states, t.controls, ds.dt)


def result_to_dataset(result: ClosedLoopResult) -> TrajectoryDataset:
    """Closed-loop rollouts in dataset form, errors kept in the metadata block."""
    states = np.reshape(result.states, (-1,) + result.states.shape[-2:])
    controls = np.reshape(result.controls, (-1,) + result.controls.shape[-2:])
    trajs = [Trajectory(s, c) for s, c in zip(states, controls)]
    meta = {"kind": "closed_loop",
            "tracking_error": to_jsonable(np.atleast_1d(result.tracking_error)),
            "diverged": to_jsonable(np.atleast_1d(result.diverged))}
    return TrajectoryDataset(trajs, 1.0 / result.dt, metadata=meta)


def save_report(report: dict, path) -> Path:
    return _write(path, dumps_artifact("jdmd.report", report))


def load_report(path) -> dict:
    return loads_artifact(Path(path).read_text(), "jdmd.report")


def write_csv(rows: List[dict], path, columns: Optional[Iterable[str]] = None) -> Path:
    """Write ``rows`` with a fixed column order; output bytes depend only on the rows."""
    columns = list(columns) if columns is not None else list(rows[0]) if rows else []
    buf = _io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    for r in rows:
        w.writerow({k: _csv_cell(r.get(k)) for k in columns})
    return _write(path, buf.getvalue())


def _csv_cell(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


# ---------------------------------------------------------------------------
# manifests


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunManifest:
    """Provenance of one output directory: config, seed, code version, digests."""

    command: str
    config: dict
    seed: int
    version: str = field(default_factory=code_version)
    started: str = ""
    finished: str = ""
    inputs: Dict[str, str] = field(default_factory=dict)
    outputs: Dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"command": self.command, "config": self.config, "seed": self.seed,
                "version": self.version, "started": self.started,
                "finished": self.finished, "inputs": self.inputs, "outputs": self.outputs}

    @classmethod
    def from_dict(cls, d: dict) -> "RunManifest":
        return cls(d["command"], d["config"], int(d["seed"]), d["version"], d["started"],
                   d["finished"], dict(d["inputs"]), dict(d["outputs"]))


def timestamp() -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())


def write_manifest(out_dir, manifest: RunManifest, inputs: Iterable = (),
                   outputs: Iterable = ()) -> Path:
    """Digest ``inputs`` and ``outputs`` and write the directory's single manifest.

    Output paths are recorded relative to ``out_dir``.
    """
    out_dir = Path(out_dir)
    manifest.inputs = {str(Path(p).resolve()): file_digest(p) for p in inputs}
    manifest.outputs = {str(Path(p).relative_to(out_dir)): file_digest(p) for p in outputs}
    manifest.finished = manifest.finished or timestamp()
    return _write(out_dir / MANIFEST_NAME,
                  dumps_artifact("jdmd.manifest", manifest.to_dict()))


def load_manifest(out_dir, verify: bool = True) -> RunManifest:
    """Load ``out_dir``'s manifest and, by default, check every output digest."""
    out_dir = Path(out_dir)
    m = RunManifest.from_dict(loads_artifact((out_dir / MANIFEST_NAME).read_text(),
                                             "jdmd.manifest"))
    if verify:
        for rel, digest in m.outputs.items():
            p = out_dir / rel
            if not p.exists() or file_digest(p) != digest:
                raise SchemaError(f"output {rel} does not match its manifest digest")
    return m
