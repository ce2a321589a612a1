import csv
import json

import numpy as np
import pytest

from multilsm.io import (
    chain_manifest,
    load_chain,
    read_chain_csv,
    read_coordinates,
    read_truth,
    sample_columns,
    write_chain_csv,
    write_json,
    write_latent_long,
    write_trace_long,
    write_truth,
)
from multilsm.model import Hyperparameters, ModelSpec
from multilsm.sampler import McmcConfig, run_chain
from multilsm.simulation import TruthConfig, draw_truth, simulate_multiplex


def short_chain(code="CV", directed=True, F=0, store_latent=True):
    spec = ModelSpec.from_code(code, directed=directed, F=F)
    rng = np.random.default_rng(0)
    truth = draw_truth(TruthConfig(7, 2, spec), rng)
    x = rng.random((F, 7, 7)) if F else None
    if F and not directed:
        x = x + x.transpose(0, 2, 1)
    m = simulate_multiplex(truth, spec, rng, x=x)
    cfg = McmcConfig(iterations=12, burn_in=2, thin=2, seed=3, store_latent=store_latent)
    return truth, spec, m, run_chain(m, spec, Hyperparameters.for_views(2), cfg)


@pytest.mark.parametrize("code,directed,F,store", [("CV", True, 1, True), ("VV", False, 0, True),
                                                    ("NN", True, 0, False), ("VC", True, 2, True)])
def test_chain_roundtrip(tmp_path, code, directed, F, store):
    _, spec, _, chain = short_chain(code, directed, F, store)
    write_chain_csv(chain, tmp_path / "chain.csv")
    write_json(chain_manifest(chain), tmp_path / "manifest.json")
    back = load_chain(tmp_path / "chain.csv", tmp_path / "manifest.json")
    assert back.spec == chain.spec and back.n_samples == chain.n_samples
    assert set(back.samples) == set(chain.samples)
    for key, arr in chain.samples.items():
        np.testing.assert_array_equal(back.samples[key], arr, err_msg=key)
    np.testing.assert_array_equal(back.sweeps, chain.sweeps)
    np.testing.assert_array_equal(back.final_state.alpha, chain.final_state.alpha)
    assert back.final_state.aliased == chain.final_state.aliased
    assert back.references.to_dict() == chain.references.to_dict()


def test_column_names():
    _, _, _, chain = short_chain("CV", F=1)
    names, M = sample_columns(chain)
    assert names[:4] == ["alpha_1", "alpha_2", "beta_1", "beta_2"]
    assert "theta_7" in names and "theta_7_1" not in names
    assert "gamma_7_2" in names and "lambda_1" in names and "z_7_2" in names and names[-1] == "loglik"
    assert M.shape == (chain.n_samples, len(names))
    _, _, _, und = short_chain("VV", directed=False)
    assert "delta_3_2" in sample_columns(und)[0]


def test_trace_and_latent_long(tmp_path):
    _, _, m, chain = short_chain("CV")
    write_trace_long(chain, tmp_path / "trace.csv")
    rows = list(csv.DictReader(open(tmp_path / "trace.csv")))
    names, _ = sample_columns(chain, include_latent=False)
    assert len(rows) == chain.n_samples * len(names) and rows[0].keys() == {"sweep", "parameter", "value"}
    write_latent_long(chain, tmp_path / "latent.csv", m.node_labels)
    rows = list(csv.DictReader(open(tmp_path / "latent.csv")))
    assert len(rows) == 7 * 2 * (1 + chain.n_samples)
    assert rows[0]["sweep"] == "mean" and float(rows[0]["value"]) == chain.z_mean[0, 0]


def test_truth_roundtrip(tmp_path):
    truth, spec, _, _ = short_chain("VV", directed=False)
    write_truth(tmp_path / "truth.json", truth, spec, {"seed": 1})
    state, spec2 = read_truth(tmp_path / "truth.json")
    assert spec2 == spec and state.aliased
    np.testing.assert_array_equal(state.theta, truth.theta)
    write_json({"kind": "chain"}, tmp_path / "other.json")
    with pytest.raises(ValueError):
        read_truth(tmp_path / "other.json")


def test_manifest_contents():
    _, _, _, chain = short_chain("CV")
    man = json.loads(json.dumps(chain_manifest(chain, {"data": "x.csv"})))
    assert man["config"]["seed"] == 3 and man["data"] == "x.csv"
    assert {"multilsm", "numpy", "scipy"} <= set(man["versions"])
    assert set(man["acceptance"]) >= {"alpha_beta", "latent"}


def test_bad_chain_csv(tmp_path):
    (tmp_path / "x.csv").write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        read_chain_csv(tmp_path / "x.csv")


class TestCoordinates:
    def test_header_and_order(self, tmp_path):
        p = tmp_path / "c.csv"
        p.write_text("label,lon,lat\nB,3,4\nA,1,2\n")
        np.testing.assert_array_equal(read_coordinates(p, ["A", "B"]), [[1, 2], [3, 4]])

    def test_no_header(self, tmp_path):
        p = tmp_path / "c.csv"
        p.write_text("A,1,2\nB,3,4\n")
        assert read_coordinates(p, ["B"]).tolist() == [[3, 4]]

    def test_missing_label(self, tmp_path):
        p = tmp_path / "c.csv"
        p.write_text("A,1,2\n")
        with pytest.raises(ValueError, match="missing"):
            read_coordinates(p, ["A", "C"])
