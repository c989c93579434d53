"""dcprox: difference-of-convex solver with Bregman primal-dual inner loops.

The outer loop linearizes the concave part of a DC objective and hands the
convex subproblem to a primal-dual hybrid-gradient method whose prox steps
are closed-form generalized projections under log-det Bregman kernels.
Shipped problem classes are three constrained log-det matrix programs from
network information theory; a diagnostics layer estimates the empirical
linear rate and verifies the conjugate identities behind it.
"""

from .symmat import (
    InvalidInput,
    NotPd,
    NotPsd,
    SpectralDecomp,
    frob_inner,
    inv_pd,
    logdet_pd,
    sym_eig,
    sym_sqrt,
    symmetrize,
)
from .cones import (
    EUCLIDEAN,
    KernelSpec,
    OutOfDomain,
    Unbounded,
    bregman_distance,
    logdet_barrier,
    logdet_shifted,
    project_cap,
    project_psd,
    prox_conj_indicator,
    prox_logdet_barrier,
    prox_logdet_cap,
    prox_logdet_psd,
    prox_logdet_quadratic,
)
from .pdhg import (
    InnerStats,
    LinearMapSpec,
    NoConvergence,
    PdhgConfig,
    PdhgState,
    SubproblemSpec,
    identity_map,
    pdhg_solve,
    residual,
    stepsize_init,
)
from .dca import DcProgram, DcaTrace, dca_solve, linearized_objective, objective
from .problems import (
    KINDS,
    VARIANTS,
    BcCommonInstance,
    BcPrivateInstance,
    BrascampLiebInstance,
    bc_common_program,
    bc_private_program,
    build_program,
    gbl_program,
    gen_synthetic,
    instance_from_dict,
    instance_to_dict,
    load_instance,
    save_instance,
)
from .diagnostics import (
    HConjugate,
    InsufficientData,
    PlEstimate,
    check_bregman_identity,
    conjugate_logdet,
    estimate_pl,
    fit_rate,
    h_conjugate_for,
    kkt_residual,
)

__version__ = "0.1.0"
