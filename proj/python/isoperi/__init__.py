"""Python bindings for the isoperi C++ core.

Models are plain dicts in the same layout as the CLI config, e.g.

    {"covariance": {"kind": "spherical", "s": 0.2},
     "theta1": [1, 0, 0, 0, 0], "theta0": 0.0, "link": "logistic"}
"""

import json

import numpy as np

from . import _isoperi
from ._isoperi import ConfigError, NumericalError, philox4x32, rademacher_bound  # noqa: F401

__version__ = _isoperi.__version__


def _m(model):
    return model if isinstance(model, str) else json.dumps(model)


def model_json(model):
    return json.loads(_isoperi.model_json(_m(model)))


def sample_dataset(model, n, seed):
    return _isoperi.sample_dataset(_m(model), n, seed)


def mgf(model, t):
    return _isoperi.mgf(_m(model), np.asarray(t, dtype=float))


def tilde_m_inverse(model):
    return _isoperi.tilde_m_inverse(_m(model))


def chi2_conditional(model, y):
    return _isoperi.chi2_conditional(_m(model), y)


def label_prob(model):
    return _isoperi.label_prob(_m(model))


def p_exceed(model):
    return _isoperi.p_exceed(_m(model))


def k_constants(model, strategy_p="bakry_emery", strategy_ls="bakry_emery", c_kls_user=None, k_p=None, k_ls=None):
    return json.loads(_isoperi.k_constants(_m(model), strategy_p, strategy_ls, c_kls_user, k_p, k_ls))


def best_residual(model, r_w, r_b, n, delta, loss="logistic_loss", strategy_p="bakry_emery",
                  strategy_ls="bakry_emery", c_kls_user=None):
    return json.loads(_isoperi.best_residual(_m(model), r_w, r_b, n, delta, loss, strategy_p, strategy_ls,
                                             c_kls_user))


def population_risk(model, loss, w, b):
    return _isoperi.population_risk(_m(model), loss, np.asarray(w, dtype=float), b)


def empirical_risk(x, y, loss, w, b):
    return _isoperi.empirical_risk(np.asarray(x, dtype=float), np.asarray(y, dtype=float), loss,
                                   np.asarray(w, dtype=float), b)


def sup_gap(x, y, model, loss, r_w, r_b, seed=0, restarts=24):
    return _isoperi.sup_gap(np.asarray(x, dtype=float), np.asarray(y, dtype=float), _m(model), loss, r_w, r_b,
                            seed, restarts)


def grid_oracle_sup(x, y, model, loss, r_w, r_b, resolution=51):
    return _isoperi.grid_oracle_sup(np.asarray(x, dtype=float), np.asarray(y, dtype=float), _m(model), loss, r_w,
                                    r_b, resolution)


def gradient_check(model, loss, w, b):
    return _isoperi.gradient_check(_m(model), loss, np.asarray(w, dtype=float), b)


def run_trials(model, loss, r_w, r_b, n, trials, seed, threads=0):
    """Returns the batch as JSON-lines text (header line, then one line per trial)."""
    return _isoperi.run_trials(_m(model), loss, r_w, r_b, n, trials, seed, threads)


def batch_records(batch_jsonl):
    lines = [json.loads(line) for line in batch_jsonl.splitlines() if line]
    return lines[0], lines[1:]


def tail_check(batch_jsonl, deltas, negative_control=False, allow_small_batch=False):
    return json.loads(_isoperi.tail_check(batch_jsonl, list(deltas), negative_control, allow_small_batch))


def independence_check(model, n, repetitions, seed, allow_bias=False, threads=0):
    reps, rejections, rate = _isoperi.independence_check(_m(model), n, repetitions, seed, allow_bias, threads)
    return {"repetitions": reps, "rejections": rejections, "rate": rate}


def fi_check(model, family_size=50, n_mc=100000, seed=1, c=2.0):
    return json.loads(_isoperi.fi_check(_m(model), family_size, n_mc, seed, c))
