"""Auction-based flow allocation for parabolic-trough solar fields.

Physical loop models (static, lumped, distributed), the market allocator,
defocusing mechanisms, a Levenberg-Marquardt-trained imitation controller,
and a scenario-driven simulation harness. Flow rates are m³/h everywhere.
"""

from .auction import (
    AuctionBook,
    AuctionConfig,
    allocate,
    auction_price,
    auction_round,
    equal_flows,
    flows_from_valves,
    make_static_predictor,
    probe_flows,
    valves_from_flows,
)
from .defocus import (
    DefocusLimits,
    InterceptFactor,
    block_outlet_temps,
    collector_defocus_step,
    filter_if,
    lumped_defocus,
    lumped_step_defocus,
)
from .imitation import (
    ApertureImitator,
    Dataset,
    TrainingReport,
    generate_dataset,
    load_dataset_csv,
    train_imitator,
)
from .network import MlpRegressor, RangeScaler, correlation_coefficients
from .physics import (
    FluidSample,
    SolarGeometry,
    convective_coeff,
    fluid_density,
    fluid_heat_capacity,
    fluid_sample,
    geometric_efficiency,
    solar_angles,
    solar_geometry,
    thermal_loss_coeff,
)
from .plant import (
    DistributedState,
    LoopParams,
    LumpedState,
    PowerReport,
    distributed_step,
    field_power,
    lumped_step,
    static_outlet,
    step_profiles,
    thermal_power,
    uniform_profile,
)
from .scenario import (
    FlowSchedule,
    Profile,
    Scenario,
    campaign_profiles,
    clear_sky_profile,
    load_profile,
    sample_faults,
    save_profile,
    scenario_from_config,
    substream,
    with_controller,
)
from .simulate import (
    ComparisonReport,
    RunMetrics,
    build_features,
    compare_runs,
    feature_names,
    run_scenario,
    weighted_mean,
)

__version__ = "0.1.0"
