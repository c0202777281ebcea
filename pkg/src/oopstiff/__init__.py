"""Surrogate-based design of soft pneumatic bending actuators.

Sample a box-and-constraint design space, evaluate an expensive (or
synthetic) simulator, fit thin-plate-spline surrogates, rank parameters
by one-at-a-time sensitivity and maximize out-of-plane stiffness at a
prescribed bending angle.
"""
from .design_space import (
    DesignSpace,
    ParameterDef,
    StrictLinearConstraint,
    denormalize,
    full_space,
    is_feasible,
    normalize,
    perturb_around,
    reduced_space,
    sobol_sample,
)
from .evaluation import SplitSpec, cov_error, learning_curve, split, validate
from .exceptions import OopstiffError
from .optimization import (
    OptimizationResult,
    OptimizerSettings,
    StiffnessObjective,
    multistart,
    response_surface,
    solve,
    stiffness,
    target_angle,
)
from .oracle import (
    DatasetOracle,
    FunctionOracle,
    NonConvergence,
    RetryPolicy,
    SampleRecord,
    SyntheticOracle,
    generate_dataset,
    load_dataset,
    write_dataset,
)
from .sensitivity import rank_and_reduce, sensitivity_study
from .surrogate import KernelSpec, RbfSurrogate, SurrogateTriple, fit, fit_triple, load_model, save_model

__version__ = "0.1.0"
