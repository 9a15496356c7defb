"""Langevin small-mass hierarchy simulations.

Thin wrapper over the C++ core: coefficient fields of the Langevin system,
exponential/Euler integrators for the underdamped reference, the hierarchy of
corrected first-order equations, and coupled Monte Carlo convergence studies.
"""

import json as _json

from ._core import (
    Model,
    SmallmassError,
    WienerGrid,
    cutoff_model,
    fit_slope,
    make_model,
    mat_exp,
    noise_induced_drift,
    qg_tensor,
    run_level,
    simulate_homogenized,
    simulate_underdamped,
    solve_lyapunov,
    tilde_gamma,
    total_force,
)
from ._core import convergence_study_json as _convergence_study_json
from ._core import prob_convergence_study_json as _prob_convergence_study_json
from ._core import validate_model_json as _validate_model_json


def convergence_study(config, threads=0):
    """Run a coupled mass sweep; `config` is a flat key -> value mapping using
    the same keys as the CLI configuration files (model.name, sim.T, ...).
    Returns the report as a dict."""
    return _json.loads(_convergence_study_json(config, threads))


def prob_convergence_study(config, threads=0):
    """Exceedance table for the convergence-in-probability experiment."""
    return _json.loads(_prob_convergence_study_json(config, threads))


def validate_model(config, probes=100, radius=2.5, tmax=1.0):
    """Probe-based coefficient checks; returns the validation report dict."""
    return _json.loads(_validate_model_json(config, probes, radius, tmax))


__all__ = [
    "Model",
    "SmallmassError",
    "WienerGrid",
    "convergence_study",
    "cutoff_model",
    "fit_slope",
    "make_model",
    "mat_exp",
    "noise_induced_drift",
    "prob_convergence_study",
    "qg_tensor",
    "run_level",
    "simulate_homogenized",
    "simulate_underdamped",
    "solve_lyapunov",
    "tilde_gamma",
    "total_force",
    "validate_model",
]
