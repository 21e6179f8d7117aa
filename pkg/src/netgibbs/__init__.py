"""netgibbs: stochastic best-response network formation.

Exact Gibbs stationary measures for reversible formation chains,
conservativeness certification with witnesses, discrete and continuous
Monte Carlo, asymptotic partition densities, and the trade / planner /
noisy-response / forward-looking model variants.
"""

__version__ = "0.1.0"

from .graphs import (
    Dyad,
    Network,
    StateSpaceOverflowError,
    TypeProfile,
    enumerate_networks,
    out_subgraph,
    switch_link,
    typed_outdegrees,
)
from .choice import (
    ConstantUtility,
    ContinuousMeetings,
    CustomShocks,
    DegenerateProbabilityError,
    DiscreteChoiceModel,
    DiscreteMeetings,
    HomophilyUtility,
    LinearOutDegreeUtility,
    LogitShocks,
    PerDyadUtility,
    PlannerUtility,
    TableIsolatedUtility,
    TradeUtility,
    conditional_meeting_distribution,
    phi_value,
    switching_probability,
    verify_isolated,
)
from .potential import (
    ConservativenessReport,
    GibbsTable,
    NotConservativeError,
    build_aggregating_function,
    check_conservative,
    detailed_balance_residual,
    ensemble_average,
    local_maxima_are_nash,
    log_partition_exact,
    potential_game_check,
)
from .dynamics import (
    TransitionOperator,
    Trajectory,
    build_transition_operator,
    simulate_continuous,
    simulate_discrete,
    stationary_exact,
    tv_distance,
)
from .asymptotics import (
    LimitModel,
    ZetaResult,
    bernoulli_entropy,
    density_and_distance,
    dilog,
    zeta_continuous,
    zeta_continuous_uniform_circle,
    zeta_discrete_homophily,
    zeta_isolated,
)
from .applications import (
    TradeModel,
    TradeSolution,
    linear_response,
    trade_fixed_point,
    trade_shares_asymptotic,
    zeta_trade,
)
from .extensions import (
    EpsilonDeviationModel,
    MpeProblem,
    SwitchingCostModel,
    central_planner_table,
    epsilon_aggregating,
    mpe_solve,
    mpe_stationary,
    switching_cost_chi,
)
