import json
import os
import subprocess

import pytest

import ringshift


def pair_profiles():
    return {
        "j2": ringshift.square_wave("j2", 60, 10, 40.0),
        "j1": ringshift.square_wave("j1", 40, 10, 40.0),
    }


def sync_trace(iterations=100):
    profile = ringshift.square_wave("sq", 200, 52, 45.0)
    job = lambda i, servers: {"id": i, "kind": "sq", "workers": 2, "iterations": iterations, "servers": servers}
    return {
        "profiles": {"sq": profile},
        "events": [
            {"at_ms": 0, "kind": "arrival", "job": job("a", ["s0", "s2"])},
            {"at_ms": 0, "kind": "arrival", "job": job("b", ["s1", "s3"])},
        ],
    }


def dumbbell():
    return ringshift.two_tier(2, 2, nic_gbps=45.0, oversubscription=2.0)


def p90(report):
    values = sorted(v for j in report["jobs"] for v in j["iteration_ms"])
    pos = 0.9 * (len(values) - 1)
    lo = int(pos)
    hi = min(lo + 1, len(values) - 1)
    return values[lo] + (values[hi] - values[lo]) * (pos - lo)


def test_score_interleaves_pair():
    sol = ringshift.score(pair_profiles(), 50.0)
    assert sol["perimeter_ms"] == 120
    assert sol["score"] == 1.0
    assert sol["jobs"][1]["time_shift_ms"] == 10


def test_import_profile_recovers_square_wave():
    samples = [(float(t), 40.0 if t % 40 < 10 else 0.0) for t in range(800)]
    profile = ringshift.import_profile(samples, kind="x")
    assert profile["iter_time_ms"] == 40
    assert profile["compute_time_ms"] == 30


def test_time_shifts_on_chain():
    graph = {
        "jobs": [{"id": "a", "iter_time_ms": 40}, {"id": "b", "iter_time_ms": 40}],
        "links": [{"id": "l", "perimeter_ms": 40}],
        "edges": [{"job": "a", "link": "l", "weight_ms": 0}, {"job": "b", "link": "l", "weight_ms": 10}],
    }
    out = ringshift.time_shifts(graph)
    assert out["shifts"] == {"a": 0, "b": 10}
    assert out["violations"] == 0


def test_rank_on_testbed():
    jobs = [{"id": "a", "kind": "resnet50", "workers": 4}, {"id": "b", "kind": "vgg16", "workers": 2}]
    out = ringshift.rank(ringshift.testbed(), jobs, n_max=4)
    assert 0.0 <= out["aggregate_score"] <= 1.0
    assert set(out["top_placement"]["assignment"]) == {"a", "b"}


def test_simulate_interleaves_and_is_deterministic():
    base = ringshift.simulate(sync_trace(), dumbbell(), scheduler="baseline", seed=3)
    cas = ringshift.simulate(sync_trace(), dumbbell(), scheduler="cassini", seed=3)
    assert 1.15 <= p90(base) / p90(cas) <= 1.40
    shared = {l["id"]: l["congestion_events"] for l in cas["links"]}
    assert shared["tor0->agg0"] == 0
    again = ringshift.simulate(sync_trace(), dumbbell(), scheduler="cassini", seed=3)
    assert json.dumps(again) == json.dumps(cas)
    summary = ringshift.summarize([base, cas])
    assert any(row["job"] == "*" for row in summary["comparisons"])


def test_fair_share():
    flows = [ringshift.FluidFlow(45.0, [(0, 1)]), ringshift.FluidFlow(45.0, [(0, 1)])]
    assert ringshift.max_min_allocation(flows, [45.0]) == pytest.approx([22.5, 22.5], abs=1e-9)


def test_errors_carry_codes():
    with pytest.raises(ringshift.RingshiftError, match="InvalidInput"):
        ringshift.score(pair_profiles(), 50.0, precision_deg=7.0)


cli = os.environ.get("RINGSHIFT_CLI")
needs_cli = pytest.mark.skipif(not cli, reason="command-line tool not built")


@needs_cli
def test_cli_usage_and_unknown_command():
    assert subprocess.run([cli], capture_output=True).returncode == 2
    bad = subprocess.run([cli, "frobnicate"], capture_output=True, text=True)
    assert bad.returncode == 2
    assert json.loads(bad.stderr.strip())["code"] == "UnknownCommand"


@needs_cli
def test_cli_score_and_simulate(tmp_path):
    for name, profile in pair_profiles().items():
        (tmp_path / f"{name}.json").write_text(json.dumps(profile))
    out = subprocess.run(
        [cli, "score", "--link", "capacity=50", "--profiles", f"{tmp_path}/j2.json,{tmp_path}/j1.json"],
        capture_output=True, text=True, check=True)
    assert json.loads(out.stdout)["score"] == 1.0

    (tmp_path / "trace.json").write_text(json.dumps(sync_trace(50)))
    (tmp_path / "topo.json").write_text(json.dumps(dumbbell()))
    reports = []
    for i in range(2):
        path = tmp_path / f"r{i}.json"
        subprocess.run([cli, "simulate", "--trace", str(tmp_path / "trace.json"), "--topology",
                        str(tmp_path / "topo.json"), "--scheduler", "cassini", "--seed", "7", "--jitter", "0.01",
                        "--out", str(path)], check=True)
        reports.append(path.read_bytes())
    assert reports[0] == reports[1]

    table = subprocess.run([cli, "report", str(tmp_path / "r0.json"), "--format", "csv"],
                           capture_output=True, text=True, check=True).stdout.splitlines()
    assert len(table) == 3


@needs_cli
def test_cli_config_precedence(tmp_path):
    for name, profile in pair_profiles().items():
        (tmp_path / f"{name}.json").write_text(json.dumps(profile))
    (tmp_path / "cfg.json").write_text(json.dumps({"precision_deg": 10}))
    args = [cli, "score", "--link", "capacity=50", "--profiles", f"{tmp_path}/j2.json,{tmp_path}/j1.json"]
    from_file = json.loads(subprocess.run(args + ["--config", str(tmp_path / "cfg.json")],
                                          capture_output=True, text=True, check=True).stdout)
    assert from_file["precision_deg"] == 10.0
    flag = json.loads(subprocess.run(args + ["--config", str(tmp_path / "cfg.json"), "--precision", "2"],
                                     capture_output=True, text=True, check=True).stdout)
    assert flag["precision_deg"] == 2.0
    default = json.loads(subprocess.run(args, capture_output=True, text=True, check=True).stdout)
    assert default["precision_deg"] == 5.0
