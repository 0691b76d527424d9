"""Causally regularized regression toolkit.

Subpackages: synthetic scenario sampling (``scenarios``), the neural
causality detector (``detector``, on the ``nn`` engine), weighted-penalty
GLMs (``glm``), closed-form accuracy theory and its Monte Carlo
verification (``theory``), non-linear and hypothesis-generating models
(``nonlin``, ``hypgen``), metrics and data plumbing (``metrics``,
``data``), and experiment orchestration (``experiment``, ``cli``).
"""

__version__ = "0.1.0"

from . import accel, data, detector, errors, glm, hypgen, metrics, nn, nonlin, scenarios, theory  # noqa: E402,F401
from .detector import CausalWeights, DetectorModel, empirical_joint, score_all, train_detector  # noqa: F401
from .glm import FitConfig, GlmFit, fit_causal_logistic, fit_plain_l1, fit_two_step, predict  # noqa: F401
from .scenarios import BenchmarkSpec, Scenario, generate_semisynthetic_benchmark, sample_scenario  # noqa: F401
from .theory import TheoremConfig, causal_accuracy_closed_form, simulate_causal_accuracy  # noqa: F401
