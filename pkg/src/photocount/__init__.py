"""Continuous photodetection statistics for cavity fields."""

from .emodel import (EModelKernels, e_count_distribution, e_count_prob,
                     e_kernels, e_moments, e_ncav, e_nocount, e_wt_curve)
from .errors import (InsufficientStatisticsError, PhotocountError,
                     PlateauUndefinedError, QuadratureError, TruncationError,
                     UndefinedStatisticError)
from .fock import (PhotonDistribution, default_n_max, factorial_moment,
                   make_coherent, make_number, make_thermal, mandel_q)
from .kernels import (DiagonalShiftPowers, apply_a_power, apply_eps_power,
                      e_semigroup, eps_resolvent_series)
from .microdetector import (DetectorParams, DressedEval, FieldMode, QjsTable,
                            SnrScanResult, bright_coeff,
                            brightness_vs_wavelength, dark_coeff,
                            dressed_eval, emission_coeff, qjs_table, snr_scan)
from .oracle import (ClickRecord, JointState, markov_counts, markov_joint,
                     mc_trajectories, mc_waiting_time, mc_wt_delays)
from .sdmodel import (CountStats, IdealizedDetector, WaitingTimeCurve,
                      WtKernels, sd_count_distribution, sd_count_prob,
                      sd_moments, sd_ncav, sd_nocount, sd_wt_curve,
                      sd_wt_kernels)

__version__ = "0.1.0"
