import numpy as np
import pytest

import opflow


def test_opinion_algebra():
    w = opflow.consensus(opflow.Opinion(0.8, 0.0, 0.2), opflow.Opinion(0.0, 0.8, 0.2))
    assert w.b == pytest.approx(4 / 9)
    assert w.u == pytest.approx(1 / 9)
    d = opflow.discount(opflow.Opinion.vacuous(), w)
    assert d.u == 1.0
    e = opflow.from_evidence(38, 0)
    assert e.u == pytest.approx(0.05)
    with pytest.raises(opflow.OpflowError):
        opflow.Opinion(0.5, 0.5, 0.5)


def test_graph_and_convolution():
    g = opflow.Graph(3, [(0, 1), (1, 2)])
    assert g.num_edges == 2
    assert opflow.lambda_max(g, normalized=False) == pytest.approx(3.0, rel=1e-6)
    x = np.arange(6, dtype=float).reshape(3, 2)
    np.testing.assert_allclose(opflow.cheb_apply(g, [1.0], x), x)
    assert opflow.line_graph(opflow.Graph(3, [(0, 1), (1, 2)], directed=True)).num_nodes == 2


def test_pipeline():
    data = opflow.generate_dataset(arcs=80, times=6, window=8, seed=3)
    truth = data.truth
    assert truth.b.shape == (6, 80)
    assert truth.observed.dtype == np.bool_
    plan = opflow.make_split(truth, 0.3, 1)
    view = opflow.training_view(truth, plan)
    mask = opflow.test_mask(truth, plan)
    model = opflow.train(data.model_graph, view, max_iters=5, hidden=4, seed=2)
    assert len(model.loss_history) == 5
    pred = model.predict(view)
    assert pred.observed.all()
    b = opflow.b_mae(pred, truth, mask)
    assert 0.0 <= b <= 1.0
    sl = opflow.sl_predict(data.model_graph, view)
    assert 0.0 <= opflow.u_mae(sl, truth, mask) <= 1.0


def test_field_roundtrip(tmp_path):
    f = opflow.random_field(3, 5, 0.6, 4)
    path = str(tmp_path / "f.csv")
    opflow.write_opinion_csv(path, f)
    back = opflow.read_opinion_csv(path)
    np.testing.assert_array_equal(back.observed, f.observed)
    np.testing.assert_allclose(back.b, f.b, atol=1e-9)


def test_experiment(tmp_path):
    results = opflow.run_experiment(
        {
            "dataset": {"nodes": 50, "window": 8, "sim": {"realizations": 12}},
            "methods": ["sl"],
            "test_ratios": [0.3],
            "seeds": [1],
            "out_dir": str(tmp_path),
        }
    )
    assert len(results) == 1
    assert results[0]["ok"]
    assert (tmp_path / "results.csv").exists()
