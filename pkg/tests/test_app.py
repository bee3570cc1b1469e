import json

import pytest

from app import main
from config import EXIT_DATA, EXIT_OK, EXIT_USAGE
from data.network import NodeFields, WeightedNetwork
from services.io_service import parse_data_matrix, read_network, sidecar_path, write_network


@pytest.fixture
def planted(tmp_path):
    path = tmp_path / "truth.tsv"
    net = WeightedNetwork.from_edges(3, [(0, 1, 1.2), (1, 2, -1.0)])
    write_network(path, net, NodeFields(3))
    return path


@pytest.fixture
def kinetic_file(tmp_path, planted):
    out = tmp_path / "x.tsv"
    assert main(["sample", "--net", str(planted), "--kinetic", "300", "--seed", "4", "--out", str(out)]) == EXIT_OK
    return out


def test_plant_then_eval_identical(tmp_path, capsys):
    net_path = tmp_path / "karate.tsv"
    code = main(["plant", "--graph", "karate", "--mean", "0.22", "--sigma", "0.01", "--seed", "1", "--out", str(net_path)])
    assert code == EXIT_OK
    net, _, _ = read_network(net_path)
    assert (net.n_nodes, net.E) == (34, 78)

    capsys.readouterr()
    assert main(["eval", "--true", str(net_path), "--hat", str(net_path)]) == EXIT_OK
    summary = json.loads(capsys.readouterr().out)
    assert summary["jaccard_weighted"] == 1.0
    assert summary["jaccard_binary"] == 1.0


def test_plant_from_edge_list_with_inverse_degree(tmp_path):
    edges = tmp_path / "g.txt"
    edges.write_text("# nodes 4\n0 1\n1 2\n")
    out = tmp_path / "net.tsv"
    assert main(["plant", "--edges", str(edges), "--mean-invk", "--sigma", "0", "--out", str(out)]) == EXIT_OK
    net, _, _ = read_network(out)
    assert net.n_nodes == 4
    assert net.categories.values == [1.0]


def test_sample_kinetic_writes_m_plus_one_columns(kinetic_file):
    data = parse_data_matrix(kinetic_file)
    assert data.states.shape == (3, 301)


def test_reconstruct_writes_report_and_network(tmp_path, kinetic_file):
    report_path = tmp_path / "report.json"
    net_path = tmp_path / "hat.tsv"
    args = ["reconstruct", "--data", str(kinetic_file), "--model", "kinetic", "--seed", "0", "--stable"]
    code = main(args + ["--out", str(report_path), "--net-out", str(net_path)])
    assert code == EXIT_OK
    report = json.loads(report_path.read_text())
    assert "wall_time" not in report
    assert report["model"] == "kinetic"
    assert report["E"] >= 1
    assert sidecar_path(net_path).exists()
    net, _, _ = read_network(net_path)
    assert net.E == report["E"]


def test_stable_reports_are_byte_identical(tmp_path, kinetic_file):
    outputs = []
    for name in ("a.json", "b.json"):
        out = tmp_path / name
        main(["reconstruct", "--data", str(kinetic_file), "--model", "kinetic", "--seed", "3", "--stable", "--out", str(out)])
        outputs.append(out.read_bytes())
    assert outputs[0] == outputs[1]


def test_reconstruct_l1_with_fixed_lambda(kinetic_file, capsys):
    code = main(["reconstruct-l1", "--data", str(kinetic_file), "--model", "kinetic", "--lambda", "1e5"])
    assert code == EXIT_OK
    assert json.loads(capsys.readouterr().out) == {"E": 0, "lambda": 1e5}


def test_decimate_writes_a_table(tmp_path, kinetic_file):
    out = tmp_path / "d.tsv"
    args = ["decimate", "--data", str(kinetic_file), "--model", "kinetic", "--step", "0.5", "--no-plateau"]
    assert main(args + ["--out", str(out)]) == EXIT_OK
    lines = out.read_text().splitlines()
    assert lines[0] == "# stop: exhausted"
    assert lines[2].startswith("3\t")


def test_perturb_single_node(tmp_path, capsys):
    path = tmp_path / "net.tsv"
    write_network(path, WeightedNetwork(3), NodeFields(3, theta=[20.0] * 3))
    args = ["perturb", "--net", str(path), "--node", "1", "--t-relax", "10", "--measure", "50", "--seed", "0"]
    assert main(args) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines[1].startswith("1\t0\t0\t1")


def test_unknown_model_is_a_usage_error(kinetic_file):
    with pytest.raises(SystemExit) as exc:
        main(["reconstruct", "--data", str(kinetic_file), "--model", "bogus"])
    assert exc.value.code == EXIT_USAGE


def test_l1_needs_lambda_or_cv(kinetic_file):
    with pytest.raises(SystemExit) as exc:
        main(["reconstruct-l1", "--data", str(kinetic_file), "--model", "kinetic"])
    assert exc.value.code == EXIT_USAGE


def test_invalid_numeric_option_exits_with_usage(kinetic_file):
    code = main(["reconstruct-l1", "--data", str(kinetic_file), "--model", "kinetic", "--lambda", "-1"])
    assert code == EXIT_USAGE


def test_bad_data_file_exits_with_data_error(tmp_path):
    path = tmp_path / "bad.tsv"
    path.write_text("1 -1\n1 2\n")
    assert main(["reconstruct", "--data", str(path), "--model", "equilibrium"]) == EXIT_DATA
    assert main(["reconstruct", "--data", str(tmp_path / "absent.tsv"), "--model", "equilibrium"]) == EXIT_DATA
