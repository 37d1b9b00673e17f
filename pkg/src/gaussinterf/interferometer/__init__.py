from .expected import active_variances, expected_active, expected_direct, expected_passive, passive_variances
from .oracle import QuadratureError, oracle_direct, oracle_expected
from .setup import BS, OPA, ProcessParams, SchemeConfig, build_chain, detector_forms
from .shots import (
    DIRECT_SHOT_LIMIT,
    ExperimentPlan,
    Setting,
    SettingStats,
    ShotStats,
    block_rng,
    exact_stats,
    shot_moments,
    simulate_shots,
)
