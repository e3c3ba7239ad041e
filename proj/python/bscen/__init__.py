"""Scenario analysis with linear or tree-ensemble conditional means.

Conditional forecasts and generalized impulse responses are drawn with a
particle Gibbs sampler; the linear Gaussian case has closed forms for checking.
"""

from ._bscen import (
    DomainError,
    Error,
    GaussianPath,
    InputError,
    LinearSystem,
    NumericalError,
    Panel,
    Posterior,
    RestrictionSet,
    closed_form_conditional_forecast,
    closed_form_irf,
    conditional_forecast,
    estimate,
    load_csv,
    load_restrictions,
    panel_from_matrix,
    run_command,
    sgirf,
    simulate_linear,
    standard_normal_quantile,
    unconditional_path,
)

__all__ = [name for name in dir() if not name.startswith("_")]
