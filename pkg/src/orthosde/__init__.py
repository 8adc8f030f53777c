"""Weak Euler-Maruyama simulation with Haar and Walsh increments drawn from
one uniform word per time step."""

from .errors import CapacityError, DomainError, NumericalError
from .harness import (McConfig, McResult, bench, convergence_study, run_mc, stopping_time_experiment,
                      trial_values)
from .increments import GeneratorSpec, Scheme, default_K, sample, sample_batch
from .moments import (closed_form_M2p, enumerated_M2p, exact_terminal_expectation, fourth_moment_bias,
                      mixed_moments, verify_moment_conditions)
from .rng import StreamBlock, UniformSource
from .sde import (COS_SUM, FOURTH_NORM, MODELS, SCALED_SQUARE_NORM, SQUARE_NORM, SdeModel, TestFunction,
                  em_step, model_brownian, model_case1, model_case2, model_ou, reference_expectation,
                  simulate_terminal, simulate_terminal_batch)
from .systems import IndexSet, is_odd_ordered, phi_bitmask, phi_gray, psi

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
