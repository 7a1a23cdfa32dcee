"""Uncertainty reasoning on probabilistic condition/event nets.

The posterior over markings is held symbolically as a modular Bayesian
network and queried by generalized variable elimination; a dense Markov
chain engine over the full marking space doubles as ground truth.
"""
from .bitmatrix import (ProbVector, TypedMatrix, compose, constant,
                        dump_matrix, dump_vector, normalize, parse_vector,
                        tensor)
from .causality import CausalityGraph, Generator, Wire
from .chain import build_F, build_P, marginal_of, replay_trace, update
from .eliminate import (ElimOrder, Factor, TreeDecomposition,
                        elimination_width_exact, initial_factors,
                        min_degree_order, order_from_term, order_width,
                        run_elimination, scheduled_eliminate, term_width,
                        tree_decomposition_from_order,
                        validate_tree_decomposition)
from .errors import (BadOrder, InconsistentEvidence, InvalidArity,
                     MissingPlace, NotEnabled, PnbayesError, TooLarge,
                     TypeMismatch, ValidationError)
from .mbn import (MBN, attach_update, build_update, eval_naive, is_obn,
                  prior_independent, prior_joint, prior_point, terminate,
                  uniform_prior)
from .petri import (CENet, Marking, StepSpec, Transition, enabled, fire,
                    net_from_json, net_to_json, relevant_sets)
from .reason import (ObservationTrace, Posterior, PriorSpec, dense_posterior,
                     load_trace, parse_trace, run)

__version__ = "0.1.0"
