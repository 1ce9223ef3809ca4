"""Fitness-weighted growing simplicial complexes and (r,k)-bootstrap percolation."""

from .config import (
    ConfigError,
    FaceType,
    FitnessFunction,
    ModelConfig,
    WeightDistribution,
    enumerate_face_types,
    load_config,
    ran_config,
    two_point_config,
    validate,
)
from .urn import (
    build_main_urn,
    build_star_urn,
    critical_probability,
    dominant_eigenpair,
    lambda_star,
)
from .complex import (
    Complex,
    build_complex,
    degree,
    empirical_type_measure,
    grow,
    grow_step,
    link,
    new_complex,
    run_star_process,
    sample_face,
    star,
)

__version__ = "0.1.0"
