from pyebh.analyze.knockoff_filter import (  # noqa
    knockoff_filter,
    knockoff_select,
    knockoff_stats,
    knockoff_threshold,
    lasso_path,
)
from pyebh.analyze.methods import ALL_METHODS, METHOD_NAMES, apply_methods  # noqa
from pyebh.analyze.procedures import (  # noqa
    DecisionReport,
    adaptive_bh,
    adaptive_bon_bh,
    adaptive_weighted_bh,
    bh,
    bon_bh,
    ep_bh,
    ep_storey,
    method1,
    method2,
    method3,
    storey_pi0,
    weighted_bh,
)
