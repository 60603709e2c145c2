"""Non-real eigenvalues and complex ghosts of indefinite Sturm-Liouville problems."""

from .ghosts import (GhostDecomposition, GhostReport, ZeroList, analyze_ghost,
                     check_interior_interlacing, classify_left_endpoint, classify_right_endpoint,
                     compute_G, decompose, endpoint_nonseparation_audit, identity_residual,
                     interior_vanish_count, locate_zeros)
from .integrator import IntegrationError, State, Trajectory, integrate, shoot, variational_integrate
from .oracles import (airy_pair, constant_weight_eigs, dispersion_exa1, dispersion_exa3,
                      eigenfunction_exa2, example_problem)
from .problem import PiecewisePoly, ProblemFormatError, SLProblem, classify_weight, is_nondefinite
from .spectrum import (EigenPair, Rect, SpectrumReport, count_in_box, find_nonreal, find_real,
                       full_spectrum_report, miss_distance, richardson_count_N)

__version__ = "0.1.0"
