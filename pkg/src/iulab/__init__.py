"""Desk-scale numerics for Schroedinger semigroups: ground states, heat
kernels, ground-state transforms and the inequalities that bound them."""

from .auxmath import (IteratedLogParams, RosenConstants, exponent_path, f_km, g_km,
                      gross_N, iter_exp, iter_log, rosen_beta, rosen_gamma)
from .discretize import Grid, SparseHamiltonian, assemble, matvec
from .eigensolve import EigenPair, GroundState, ground_state, lowest_eigenpairs
from .errors import (CapacityError, ConfigError, ConvergenceError, DomainError,
                     GapWarning, PositivityError, QuadratureError, ShapeError)
from .potential import (EnvelopeSpec, PotentialSpec, check_admissibility,
                        envelope_integral, legacy_lower_bound, lower_envelope)
from .semigroup import (SpectralPropagator, WeightedSpace, kernel, propagate,
                        weighted_kernel_norms, weighted_norm, weighted_propagate)
from .verify import VerificationReport

__version__ = "0.1.0"
