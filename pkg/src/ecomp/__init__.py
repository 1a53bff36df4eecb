"""Extended COM-Poisson (ECOMP) distribution toolkit."""

from .core import (
    EcompParams,
    PmfTable,
    SampleConfig,
    TailExtrapolationWarning,
    build_table,
    ratio,
    validate_params,
)
from .conditional import (
    EnhgParams,
    FiniteDist,
    conditional_bruteforce,
    convolve_sum_pmf,
    enhg_pmf,
    reconstruct_marginals,
)
from .stein import SteinReport, stein_expectation, stein_suite, verify_recurrence
from .divisibility import (
    ConcavityVerdict,
    DcpParams,
    classify_concavity,
    dcp_decompose_logpgf,
    dcp_decompose_panjer,
    dcp_reconstruct,
    id_verdict,
    ratio_of_ratios,
    theorem_c_condition,
)
from .birthdeath import BdRates, make_rates, simulate, stationary
from .inference import CountData, FitResult, fit_mle, log_likelihood

__version__ = "0.1.0"
