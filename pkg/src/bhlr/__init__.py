"""Hyperlink regression over U-tuples with Bregman-divergence losses.

Learn a symmetric similarity function that predicts the association weight
of a U-tuple of data vectors by minimizing any divergence of the Bregman
family, with full-batch or entry-fixing minibatch stochastic optimization.
Covers Poisson / logistic / least-squares regression (U=1), graph embedding
and matrix factorization (U=2), and tensor factorization (U>=2) as
configurations of one pipeline.
"""

from .divergence import GeneratingFunction, make_generator
from .errors import BhlrError
from .hypernet import (
    Hypernetwork,
    TupleView,
    canonicalize,
    enumerate_index_set,
    from_tensor,
    index_set_size,
    load_hyperedges,
    load_vectors,
)
from .loss import LossSpec, full_gradient, full_loss, model_scores, \
    specialized_loss, validate_spec
from .metrics import mean_squared_error, roc_auc
from .optim import AdamState, Projection, Schedule, TrainResult, adam_step, \
    sample_tau, sgd_step, tau_probabilities, train
from .sampler import Minibatch, MinibatchSampler, SamplerConfig, fixed_slice, \
    stochastic_gradient, support_set
from .simfn import SimilarityModel, multiway_inner
from .synth import PlantedModel, generate, lift_links_to_hyperlinks, \
    negative_candidate_protocol

__version__ = "0.1.0"

__all__ = [
    "AdamState",
    "BhlrError",
    "GeneratingFunction",
    "Hypernetwork",
    "LossSpec",
    "Minibatch",
    "MinibatchSampler",
    "PlantedModel",
    "Projection",
    "SamplerConfig",
    "Schedule",
    "SimilarityModel",
    "TrainResult",
    "TupleView",
    "adam_step",
    "canonicalize",
    "enumerate_index_set",
    "fixed_slice",
    "from_tensor",
    "full_gradient",
    "full_loss",
    "generate",
    "index_set_size",
    "lift_links_to_hyperlinks",
    "load_hyperedges",
    "load_vectors",
    "make_generator",
    "mean_squared_error",
    "model_scores",
    "multiway_inner",
    "negative_candidate_protocol",
    "roc_auc",
    "sample_tau",
    "sgd_step",
    "specialized_loss",
    "stochastic_gradient",
    "support_set",
    "tau_probabilities",
    "train",
    "validate_spec",
]
