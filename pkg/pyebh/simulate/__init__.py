from pyebh.simulate.harness import (  # noqa
    SimResult,
    SimSetting,
    extended_settings,
    run_grid,
    run_replication,
    run_simulation,
    sparse_settings,
)
