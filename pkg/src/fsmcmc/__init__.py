"""Function-space Metropolis-Hastings with operator-weighted proposals."""

from .spectral import (Basis, SpectralField, GaussianMeasure, whiten, unwhiten, sample_gaussian,
                       sobolev_norm, grid_evaluate)
from .proposals import (WeightOperator, build_B_scalar, build_B_truncated, build_B_hessian, propose,
                        search_direction_covariance)
from .heat import HeatModel
from .navier_stokes import NavierStokesModel, NSConfig
from .curvature import LowRankCurvature, lowrank_eigs, choose_rank, gauss_newton_operator
from .mcmc import (Potential, ChainRecord, AdaptationSchedule, Recorder, mh_step, run_chain, run_ensemble,
                   substream)
from .diagnostics import acf, iact, ess, psrf, relative_error_curve

__version__ = "0.1.0"
