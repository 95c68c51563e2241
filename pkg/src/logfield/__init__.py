"""Moving averages of log-correlated Gaussian fields: variograms, sampling,
continuity moduli and graph resistance."""

from .errors import (DegenerateModulus, DisconnectedGraph, DomainError, LogFieldError,
                     NonConvergence, NotPSD, ParseError, RankDeficiency, SingularSystem,
                     TailBoundViolation)
from .kernels import CovarianceModel, Family, MetricProfile, metric_profile
from .numerics import QuadratureSpec, double_integral_oracle, integrate_1d, integrate_semi_infinite
from .regularity import (CoveringProfile, Modulus, ModulusForm, covering_number, covering_profile,
                         dudley_integral, lipschitz_statistic, modulus, refinement_study)
from .resistance import (Graph, gaussian_variance_mc, laplacian, metric_check, pseudoinverse_G,
                         resistance, variational_resistance)
from .sampling import FourierFieldSpec, Method, PathSample, replica_rng

__version__ = "0.1.0"
