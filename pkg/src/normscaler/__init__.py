"""Minimum-lp interpolation in overparameterized Gaussian designs.

Library layout:

- ``model``:   synthetic instances, lr norms, exact population risk
- ``solver``:  dual-ascent minimum-lp interpolator with KKT certificates
- ``theory``:  closed-form norm-scaling predictions (ray scale, n_star, r_star)
- ``dln``:     two-layer diagonal linear networks under gradient descent
- ``calib``:   data-free alpha -> p_eff slope-matching map and its inverse
- ``harness``: sweep orchestration, log-log fits, elbow detection, CSV schema
- ``cli``:     command-line adapters over all of the above
"""

__version__ = "0.1.0"

from .calib import CalibrationConfig, CalibrationCurve, alpha_for_p, hyp_potential_q, p_eff, potential_on_probe
from .dln import DlnConfig, DlnState, TrainReport, dln_init, dln_step, dln_train
from .harness import (
    ConcentrationReport,
    ElbowFit,
    Selector,
    SweepConfig,
    SweepRecord,
    detect_elbow,
    diagnose_concentration,
    fit_loglog_slope,
    read_csv,
    run_sweep,
    write_csv,
)
from .model import (
    DesignSpec,
    empirical_test_mse,
    ProblemInstance,
    TargetSpec,
    gen_instance,
    gen_target,
    lr_norm,
    population_risk,
)
from .solver import (
    InterpolatorSolution,
    SolverOptions,
    conjugate_exponent,
    dual_objective,
    kkt_map,
    min_l2_closed_form,
    ray_scale,
    solve_min_lp,
)
from .theory import (
    Prediction,
    TheoryInputs,
    bulk_dominated_prediction,
    gaussian_abs_moment,
    r_threshold,
    ray_scale_prediction,
    regime_prediction,
    spike_dominated_prediction,
    theory_inputs,
    transition_n_star,
    unified_norm_prediction,
)
