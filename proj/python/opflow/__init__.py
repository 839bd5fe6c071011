"""Opinion inference on dynamic graphs."""

import json

from . import _opflow
from ._opflow import (
    Dataset,
    Graph,
    Model,
    Opinion,
    OpinionField,
    OpflowError,
    SplitPlan,
    b_mae,
    cheb_apply,
    consensus,
    discount,
    from_evidence,
    generate_dataset,
    inject_conflicts,
    lambda_max,
    line_graph,
    load_dataset,
    make_split,
    projected_probability,
    random_field,
    read_opinion_csv,
    save_dataset,
    test_mask,
    training_view,
    u_mae,
    write_opinion_csv,
)

__all__ = [name for name in dir(_opflow) if not name.startswith("_")] + ["train", "sl_predict", "run_experiment"]


def train(graph, field, **config):
    """Train a model; keyword arguments override the training config (eta, max_iters, method, ...)."""
    return _opflow.train(graph, field, json.dumps(config) if config else "")


def sl_predict(graph, field, **config):
    return _opflow.sl_predict(graph, field, json.dumps(config) if config else "")


def run_experiment(config):
    """Run an experiment matrix described by a dict; returns one result dict per cell."""
    return json.loads(_opflow.run_experiment(json.dumps(config)))
