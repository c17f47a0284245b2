"""causalscope: causal graphs, identification and estimation for small discrete problems."""

from .data import Dataset, categorical, continuous, fit_cpt, fit_linear, fit_logistic, predict, read_csv
from .discovery import ChiSquareCi, Cpdag, OracleCi, ci_query, ci_test, cpdag_of, pc_learn
from .errors import CausalError
from .estimate import (
    EffectEstimate,
    bootstrap_ci,
    check_positivity,
    diff_in_means,
    gformula_mean,
    ipw_mean,
    transport_mean,
)
from .graph import CausalGraph, Edge, Variable, build_graph, construct_swig, d_separated, parse_graph
from .identify import (
    Estimand,
    find_backdoor_set,
    identify_effect,
    identify_sequential,
    identify_transport,
    verify_backdoor,
)
from .longitudinal import PolicySpec, Regime, naive_regression_contrast, policy_value, sequential_gformula
from .measurement import MisclassificationMatrix, corrected_effect, corrected_joint, invert_misclassification
from .scm import StructuralModel, exact_joint, fixture, intervene, sample, true_counterfactual_mean

__version__ = "0.1.0"
