"""Star-Toeplitz determinants: exact oracles and asymptotic predictions."""

from .errors import (
    BranchCutError,
    ConfigError,
    FactorizationError,
    InversionError,
    PoleProximityError,
    QuadratureError,
    RangeError,
    StarSzegoError,
)
from .symbol import (
    ProjectionKind,
    SmoothSymbol,
    SymbolGrid,
    project,
    reflect,
    sample_symbol,
    shift,
    smooth_to_grid,
)
from .moyal import (
    BchOrder,
    WindowSpec,
    moyal_bracket,
    phi_bch,
    semiclassical_inverse,
    semiclassical_log,
    semiclassical_product,
    star_exp,
    star_inverse,
    star_log,
    star_product,
)
from .wiener_hopf import (
    LEFT,
    RIGHT,
    FactorPair,
    TridiagonalSpec,
    log_factor_sum,
    numeric_factorize,
    psi_expansion,
    tridiagonal_factorize,
    tridiagonal_symbol,
)
from .finite_sections import (
    BlockSymbolGrid,
    DenseComplexMatrix,
    LogDet,
    bocg_evaluate,
    build_block_Tn,
    build_hankel,
    build_Tn,
    hankel_decay_probe,
    logdet,
)
from .asymptotics import (
    EMSeries,
    Prediction,
    block_boundary_formula,
    e_classical,
    euler_maclaurin_sum,
    gauge_split,
    locally_half_prediction,
    locally_toeplitz_prediction,
    semiclassical_prediction,
    strong_formula,
    weak_ratio_prediction,
)

__version__ = "0.1.0"
