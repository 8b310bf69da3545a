"""Finite Gaussian process lab: widths, Bayesian channel curves,
self-coupled rate distortion, and chaining functionals, with an audit suite
tying them together."""
from ._kernels import BACKEND, HAS_NUMBA
from ._version import __version__
from .audit import (
    ALL_CHECKS,
    AuditReport,
    CheckRecord,
    default_lambdas,
    export_curves,
    report_json,
    report_to_dict,
    run_audit,
    write_report,
)
from .bayes_channel import (
    BinaryChannelPoint,
    ChannelSample,
    SnrCurve,
    SnrIntegral,
    binary_channel_curve,
    binary_channel_exact,
    binary_mmse_integral,
    channel_curves,
    default_snr_grid,
    integrate_snr_curve,
    least_favorable_search,
    mle_point,
    mmse_curve,
    mse_mle_curve,
    mse_tail_bound,
    mutual_info_curve,
    posterior_weights,
    sample_observation,
    tail_smax,
)
from .errors import (
    BadParams,
    DistinctnessViolation,
    IoError,
    MalformedStep,
    MmtLabError,
    NoConvergence,
    NotPSD,
    NotSymmetric,
    TailNotCertified,
    TooLarge,
)
from .functionals import (
    MeasureOnT,
    ft_grid_search,
    ft_optimize,
    ft_value,
    gamma2_part_exact,
    make_measure,
    penalized_functional,
    psi_gibbs,
    step_function_integral,
)
from .instances import (
    FAMILIES,
    Instance,
    generate_instance,
    instance_from_dict,
    instance_json,
    instance_prior,
    instance_process,
    instance_to_dict,
    load_instance,
    save_instance,
)
from .process_core import (
    EmbeddedProcess,
    FiniteMetric,
    Prior,
    embed,
    entropy,
    make_prior,
    metric_of,
    process_from_points,
    uniform_prior,
    validate_covariance,
)
from .rate_distortion import (
    Coupling,
    RDCurve,
    coupling_stats,
    distortion_at_rate,
    gibbs_coupling,
    layer_cake_integral,
    pareto_trace,
    prod_distortion_sq,
    rate_at_distortion,
    sqrt_rate_integral,
    two_point_rd_exact,
)
from .width import WidthEstimate, width_iid_max_exact, width_mc, width_two_point_exact

__all__ = [name for name in dir() if not name.startswith("_")]
