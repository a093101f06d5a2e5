import json
import math
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import k2_kernel
from markov_infogeo import EdgeFunction, ExponentialFamily, KernelGraph, edge_measure
from markov_infogeo import io
from markov_infogeo.cli import run
from markov_infogeo.rng import Xorshift64Star, random_family, random_graph, random_kernel


def write(path, doc):
    path.write_text(io.dumps(doc), encoding="utf-8")
    return str(path)


def call(argv, capsys):
    code = run(argv)
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def files(tmp_path):
    g = KernelGraph.complete(2)
    fam = ExponentialFamily.from_arrays(g, np.zeros(4), [[0.0, 1.0, 0.0, 0.0]])
    return {
        "w0": write(tmp_path / "w0.json", io.kernel_to_doc(k2_kernel(0.5, 0.5))),
        "w1": write(tmp_path / "w1.json", io.kernel_to_doc(k2_kernel(1 / 3, 1 / 3))),
        "fam": write(tmp_path / "fam.json", io.family_to_doc(fam)),
        "f": write(tmp_path / "f.json", io.edge_function_to_doc(EdgeFunction(g, [1.0, math.e, 1.0, 1.0]))),
        "dir": tmp_path,
    }


# serialization


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_float_format_round_trips(x):
    assert json.loads(io.dumps([x])) == [x]


def test_dumps_is_sorted_and_stable():
    doc = {"b": 1.0, "a": [0.1, 2], "c": {"y": None, "x": True}}
    text = io.dumps(doc)
    assert text == io.dumps(json.loads(text))
    assert text.index('"a"') < text.index('"b"') < text.index('"c"')
    assert "0.10000000000000001" in text


def test_dumps_rejects_non_finite():
    with pytest.raises(ValueError):
        io.dumps([float("nan")])


@given(st.integers(0, 10_000), st.integers(2, 6), st.sampled_from(["complete", "sparse"]))
def test_documents_round_trip(seed, n, kind):
    rng = Xorshift64Star(seed)
    g = random_graph(rng, n, kind)
    w = random_kernel(rng, g)
    assert io.kernel_from_doc(json.loads(io.dumps(io.kernel_to_doc(w)))) == w
    m = edge_measure(w)
    assert io.edge_measure_from_doc(json.loads(io.dumps(io.edge_measure_to_doc(m)))) == m
    f = EdgeFunction(g, np.asarray(rng.normal(size=g.n_edges)))
    assert io.edge_function_from_doc(json.loads(io.dumps(io.edge_function_to_doc(f)))) == f
    d = min(g.n_edges - n, 3)
    fam = random_family(rng, g, d)
    assert io.family_from_doc(json.loads(io.dumps(io.family_to_doc(fam)))) == fam


def test_edge_order_in_document_does_not_matter():
    doc = {
        "states": ["a", "b"],
        "edges": [
            {"from": "b", "to": "a", "p": 1.0},
            {"from": "a", "to": "b", "p": 0.25},
            {"from": "a", "to": "a", "p": 0.75},
        ],
    }
    w = io.kernel_from_doc(doc)
    np.testing.assert_array_equal(w.probs, [0.75, 0.25, 1.0])


def test_family_arrays_follow_listed_edge_order():
    doc = {
        "graph": {"states": ["0", "1"], "edges": [{"from": "1", "to": "0"}, {"from": "0", "to": "1"}, {"from": "0", "to": "0"}]},
        "carrier": [3.0, 2.0, 1.0],
        "basis": [[0.0, 1.0, 0.0]],
    }
    fam = io.family_from_doc(doc)
    np.testing.assert_array_equal(fam.carrier.values, [1.0, 2.0, 3.0])
    np.testing.assert_array_equal(fam.basis_matrix, [[0.0, 1.0, 0.0]])


@pytest.mark.parametrize(
    "doc",
    [
        {"states": ["0", "1"]},
        {"states": ["0", "1"], "edges": [], "extra": 1},
        {"states": ["0", "1"], "edges": [{"from": "0", "to": "1"}]},
        {"states": ["0", "1"], "edges": [{"from": "0", "to": "1", "p": 1.0, "q": 2}]},
    ],
)
def test_invalid_documents(doc):
    with pytest.raises(io.InvalidDocument):
        io.kernel_from_doc(doc)


def test_trajectory_files(tmp_path):
    path = tmp_path / "t.txt"
    io.write_trajectory(path, ["a", "b", "a"])
    path.write_text(path.read_text() + "\n\n", encoding="utf-8")
    assert io.read_trajectory(path) == ["a", "b", "a"]


# command line


def test_geodesic_m_midpoint(files, capsys):
    code, out, _ = call(["geodesic", "--kind", "m", "--t", "0.5", files["w0"], files["w1"]], capsys)
    assert code == 0
    env = json.loads(out)
    assert env["command"] == "geodesic"
    edges = env["result"]["points"][0]["kernel"]["edges"]
    p01 = [e["p"] for e in edges if (e["from"], e["to"]) == ("0", "1")][0]
    assert p01 == pytest.approx(5 / 12, abs=1e-15)


def test_divergence_of_identical_kernels(files, capsys):
    code, out, _ = call(["divergence", files["w0"], files["w0"]], capsys)
    assert code == 0
    assert json.loads(out)["result"]["value"] == 0.0


def test_divergence_with_family(files, capsys):
    code, out, _ = call(["divergence", files["w0"], files["w1"], "--family", files["fam"]], capsys)
    assert code == 0
    env = json.loads(out)
    assert env["result"]["value"] == pytest.approx(0.5 * math.log(9 / 8), abs=1e-14)
    assert env["diagnostics"]["residual"] <= 1e-9
    assert [i["path"] for i in env["inputs"]] == [files["w0"], files["w1"], files["fam"]]


def test_inputs_are_hashed(files, capsys):
    _, out, _ = call(["stationary", files["w0"]], capsys)
    env = json.loads(out)
    assert env["inputs"][0]["sha256"] == io.sha256_file(files["w0"])


def test_normalize(files, capsys):
    code, out, _ = call(["normalize", files["f"]], capsys)
    res = json.loads(out)["result"]
    assert code == 0
    assert math.exp(res["log_perron"]) == pytest.approx(1 + math.exp(0.5), abs=1e-14)
    code, out, _ = call(["normalize", "--log", files["f"]], capsys)
    assert code == 0


def test_coords_and_fisher(files, capsys):
    _, out, _ = call(["coords", files["fam"], "--eta", "0.3333333333333333"], capsys)
    assert json.loads(out)["result"]["theta"][0] == pytest.approx(2 * math.log(2), abs=1e-9)
    _, out, _ = call(["fisher", files["fam"], "--theta", "0"], capsys)
    res = json.loads(out)["result"]
    assert res["direct"][0][0] == pytest.approx(1 / 16, abs=1e-9)
    assert res["discrepancy"] <= 1e-5


def test_eval_family_and_fit(files, capsys, tmp_path):
    _, out, _ = call(["eval-family", files["fam"], "--theta", "1"], capsys)
    res = json.loads(out)["result"]
    assert res["psi"] == pytest.approx(math.log(1 + math.exp(0.5)), abs=1e-14)
    kernel = io.kernel_from_doc(res["kernel"])
    m = write(tmp_path / "m.json", io.edge_measure_to_doc(edge_measure(kernel)))
    _, out, _ = call(["fit", files["fam"], "--edge-measure", m], capsys)
    assert json.loads(out)["result"]["theta"][0] == pytest.approx(1.0, abs=1e-8)
    traj = tmp_path / "t.txt"
    io.write_trajectory(traj, ["0", "1", "1", "0", "0", "1", "0"])
    code, out, _ = call(["fit", files["fam"], "--trajectory", str(traj)], capsys)
    assert code == 0
    assert json.loads(out)["diagnostics"]["transitions"] == 6


def test_kl_joint_csv(files, capsys):
    code, out, _ = call(["kl-joint", files["w0"], files["w1"], "--n", "1,4", "--format", "csv"], capsys)
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "n,kl,kl_per_step"
    n4 = float(lines[2].split(",")[1])
    assert n4 == pytest.approx(3 * 0.5 * math.log(9 / 8), abs=1e-14)


def test_decompose_and_edge_measure(files, capsys):
    assert call(["decompose", files["f"]], capsys)[0] == 0
    code, out, _ = call(["edge-measure", files["w1"], "--format", "csv"], capsys)
    assert code == 0
    assert out.splitlines()[2].startswith("0,1,0.1666666666666666")


def test_output_file(files, capsys):
    target = files["dir"] / "out.json"
    code, out, _ = call(["stationary", files["w0"], "-o", str(target)], capsys)
    assert code == 0 and out == ""
    assert json.loads(target.read_text())["result"]["p"] == [0.5, 0.5]


def test_timing_only_on_request(files, capsys):
    _, out, _ = call(["stationary", files["w0"]], capsys)
    assert "wall_clock_seconds" not in out
    _, out, _ = call(["stationary", files["w0"], "--timing"], capsys)
    assert "wall_clock_seconds" in json.loads(out)["diagnostics"]


def test_output_is_byte_identical(files, capsys):
    argv = ["geodesic", "--kind", "e", "--t", "0,0.25,0.5,2", files["w0"], files["w1"]]
    assert call(argv, capsys)[1] == call(argv, capsys)[1]


def test_domain_error_object(files, capsys, tmp_path):
    bad = write(tmp_path / "cycle.json", {"states": ["0", "1"], "edges": [{"from": "0", "to": "1", "p": 1.0}, {"from": "1", "to": "0", "p": 1.0}]})
    code, out, _ = call(["divergence", files["w0"], bad], capsys)
    assert code == 1
    err = json.loads(out)["error"]
    assert err["code"] == "graph_mismatch"
    assert set(err) == {"code", "message", "context"}


def test_not_strongly_connected_input(capsys, tmp_path):
    bad = write(tmp_path / "sink.json", {"states": ["0", "1"], "edges": [{"from": "0", "to": "1", "p": 1.0}, {"from": "1", "to": "1", "p": 1.0}]})
    code, out, _ = call(["stationary", bad], capsys)
    assert code == 1
    assert json.loads(out)["error"]["code"] == "not_strongly_connected"


def test_missing_file_is_domain_error(capsys):
    code, out, _ = call(["stationary", "/nonexistent/w.json"], capsys)
    assert code == 1
    assert json.loads(out)["error"]["code"] == "invalid_document"


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["bogus"],
        ["geodesic", "--kind", "x", "--t", "0.5", "a", "b"],
        ["geodesic", "--kind", "e", "--t", "abc", "a", "b"],
        ["coords", "fam.json"],
        ["verify", "--sizes", "1"],
    ],
)
def test_usage_errors(argv, capsys):
    assert call(argv, capsys)[0] == 2


def test_theta_dimension_checked(files, capsys):
    assert call(["eval-family", files["fam"], "--theta", "1,2"], capsys)[0] == 2


def test_verify_random(capsys):
    code, out, _ = call(["verify", "--seed", "7", "--sizes", "2,4,6"], capsys)
    report = json.loads(out)["result"]
    assert code == 0
    assert report["all_passed"]
    assert all(f["checks"] > 0 for f in report["families"].values())


def test_verify_given_inputs(files, capsys):
    code, out, _ = call(["verify", files["w0"], files["w1"], "--family", files["fam"]], capsys)
    report = json.loads(out)["result"]
    assert code == 0 and report["all_passed"]
    assert "fisher_cross_oracle" in report["families"]


def test_verify_threads_do_not_change_report(capsys):
    a = call(["verify", "--seed", "3", "--sizes", "2,3", "--workers", "1"], capsys)[1]
    b = call(["verify", "--seed", "3", "--sizes", "2,3", "--workers", "3"], capsys)[1]
    assert a == b


def test_module_entry_point(files):
    env = dict(os.environ)
    proc = subprocess.run(
        [sys.executable, "-m", "markov_infogeo", "divergence", files["w0"], files["w0"]],
        capture_output=True,
        text=True,
        env=env,
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["result"]["value"] == 0.0
