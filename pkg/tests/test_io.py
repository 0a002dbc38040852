import json

import numpy as np
import pytest

from jdmd import io
from jdmd.bilinear import BilinearModel, z_dim
from jdmd.control import ClosedLoopResult, ReferenceTrajectory
from jdmd.errors import SchemaError
from jdmd.lifting import build_cartpole_map
from jdmd.regression import Trajectory, TrajectoryDataset


@pytest.fixture
def model(rng):
    lifting = build_cartpole_map([[-2, 2], [-1, 4.5], [-3, 3], [-8, 8]])
    E = rng.standard_normal((33, z_dim(33, 1))) * 10.0 ** rng.uniform(-12, 3, (33, 67))
    return BilinearModel(E, lifting, 1, 0.04)


def test_model_round_trip_is_bitwise(model, tmp_path):
    path = io.save_model(model, tmp_path / "m.json")
    back = io.load_model(path)
    assert back.E.tobytes() == model.E.tobytes()
    assert back.lifting == model.lifting and back.dt == model.dt


def test_model_file_fields(model, tmp_path):
    env = json.loads(io.save_model(model, tmp_path / "m.json").read_text())
    assert env["schema"] == "jdmd.model" and env["schema_version"] == "1.0"
    p = env["payload"]
    assert (p["N_x"], p["N_y"], p["N_u"]) == (4, 33, 1)
    assert p["E"]["shape"] == [33, 67]
    assert p["lifting"]["G"]["shape"] == [4, 33]


def test_dataset_round_trip_with_prior(rng, tmp_path):
    trajs = [Trajectory(rng.standard_normal((6, 4)), rng.standard_normal((5, 1)))
             for _ in range(2)]
    ds = TrajectoryDataset(trajs, 25.0, rng.standard_normal((10, 4, 4)),
                           rng.standard_normal((10, 4, 1)), {"note": "x"})
    back = io.load_dataset(io.save_dataset(ds, tmp_path / "d.json"))
    for a, b in zip(back.trajectories, ds.trajectories):
        assert a.states.tobytes() == b.states.tobytes()
    assert back.jac_u.tobytes() == ds.jac_u.tobytes()
    assert back.metadata == {"note": "x"} and back.sample_rate_hz == 25.0


def test_non_finite_values_survive(tmp_path):
    report = {"errors": np.array([1.0, np.inf, np.nan, -np.inf])}
    text = io.save_report(report, tmp_path / "r.json").read_text()
    assert "Infinity" not in text and "NaN" not in text
    back = io.load_report(tmp_path / "r.json")
    assert back["errors"] == [1.0, "inf", "nan", "-inf"]
    arr = io.decode_array(io.encode_array([np.inf, 2.0]))
    assert np.isinf(arr[0]) and arr[1] == 2.0


def test_edited_payload_is_refused(model, tmp_path):
    path = io.save_model(model, tmp_path / "m.json")
    env = json.loads(path.read_text())
    env["payload"]["dt"] = 0.05
    path.write_text(json.dumps(env))
    with pytest.raises(SchemaError, match="digest"):
        io.load_model(path)


def test_major_version_and_schema_checks(model, tmp_path):
    path = io.save_model(model, tmp_path / "m.json")
    env = json.loads(path.read_text())
    env["schema_version"] = "2.0"
    path.write_text(json.dumps(env))
    with pytest.raises(SchemaError, match="version"):
        io.load_model(path)
    env["schema_version"] = "1.7"
    path.write_text(json.dumps(env))
    io.load_model(path)
    with pytest.raises(SchemaError, match="schema"):
        io.load_dataset(path)
    path.write_text("{not json")
    with pytest.raises(SchemaError):
        io.load_model(path)


def test_reference_and_result_conversion(rng):
    ref = ReferenceTrajectory(rng.standard_normal((5, 4)), rng.standard_normal((4, 1)), 0.04)
    back = io.dataset_to_reference(io.reference_to_dataset(ref))
    np.testing.assert_array_equal(back.states, ref.states)
    assert back.dt == pytest.approx(0.04)
    res = ClosedLoopResult(rng.standard_normal((3, 5, 4)), rng.standard_normal((3, 4, 1)),
                           np.array([0.1, np.inf, 0.2]), np.array([False, True, False]), 0.04)
    ds = io.result_to_dataset(res)
    assert len(ds.trajectories) == 3
    assert ds.metadata["tracking_error"] == [0.1, "inf", 0.2]


def test_csv_is_deterministic(tmp_path):
    rows = [{"a": 0.1, "b": True, "c": None}, {"a": 1e-17, "b": False, "c": "fail"}]
    p = io.write_csv(rows, tmp_path / "t.csv", ["a", "b", "c"])
    assert p.read_bytes() == b"a,b,c\n0.1,true,\n1e-17,false,fail\n"


def test_manifest_records_and_verifies_outputs(tmp_path):
    out = tmp_path / "run"
    out.mkdir()
    f = out / "a.csv"
    f.write_text("x\n1\n")
    cfg = tmp_path / "c.toml"
    cfg.write_text("seed = 1\n")
    m = io.RunManifest("collect", {"seed": 1}, 1, started="t0")
    io.write_manifest(out, m, [cfg], [f])
    back = io.load_manifest(out)
    assert back.outputs == {"a.csv": io.file_digest(f)}
    assert list(back.inputs.values()) == [io.file_digest(cfg)]
    assert back.version
    f.write_text("x\n2\n")
    with pytest.raises(SchemaError):
        io.load_manifest(out)
    io.load_manifest(out, verify=False)
