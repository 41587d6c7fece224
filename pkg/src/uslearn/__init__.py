"""uslearn: joint learning of a parametric pairwise similarity and a spectral clustering."""

from .cluster import CandidateSet, Clustering, classification_error, cluster_spectral, kmeans
from .criteria import Objective, cut, eigengap, evaluate, f_alpha, f_tilde, gap, grad_f, mncut, weighted_objective
from .data import GaussianSpec, PointSet, gen_gaussians, pairwise_features
from .learn import LearnConfig, LearnResult, TargetSet, run
from .simgraph import (
    FeatureTensor,
    ParamMode,
    ParamSet,
    SimilarityMatrix,
    build_similarity,
    similarity_gradient,
    transition,
)
from .spectra import EigSelection, SpectralDecomp, decompose, eigenvalue_gradient, pc_index, select_eigenvectors

__version__ = "0.1.0"

__all__ = [
    "CandidateSet",
    "Clustering",
    "EigSelection",
    "FeatureTensor",
    "GaussianSpec",
    "LearnConfig",
    "LearnResult",
    "Objective",
    "ParamMode",
    "ParamSet",
    "PointSet",
    "SimilarityMatrix",
    "SpectralDecomp",
    "TargetSet",
    "build_similarity",
    "classification_error",
    "cluster_spectral",
    "cut",
    "decompose",
    "eigengap",
    "eigenvalue_gradient",
    "evaluate",
    "f_alpha",
    "f_tilde",
    "gap",
    "gen_gaussians",
    "grad_f",
    "kmeans",
    "mncut",
    "pairwise_features",
    "pc_index",
    "run",
    "select_eigenvectors",
    "similarity_gradient",
    "transition",
    "weighted_objective",
]
