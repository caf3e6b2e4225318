"""Active learning for fair and stable online allocation.

Dueling upper/lower-confidence-bound learners for max-min fairness (unit
demand and bundles), envy minimization and stable-matching feasibility
testing, under the constraint that feedback is collected from one (or a few)
agents per epoch — plus the exact oracles, baselines and simulation harness
needed to verify sub-linear regret.
"""

from .confidence import ConfidenceState, confidence_bonus
from .errors import (
    BudgetExceededError,
    FairallocError,
    InfeasibleError,
    InputError,
    UnpulledArmError,
)
from .markets import MarriageMarket, matching_margin, theta_stable_set
from .model import (
    Allocation,
    BundleFamily,
    GapParameters,
    ProblemInstance,
    allocation_envy,
    dump_instance,
    envy_between,
    evaluate_reward,
    group_benefit,
    load_instance,
)
from .oracles import (
    BundleSearchSpace,
    FeasibilityDecision,
    OracleResult,
    bundle_maxmin,
    feasibility_oracle,
    max_envy_pair,
    maxmin_assignment,
    min_envy_allocation,
    pick_min,
    pick_min_bundle,
)
from .rewards import (
    ClippedSquareReward,
    ExpectedFReward,
    LinearReward,
    PowerReward,
    RewardFunction,
)

__version__ = "0.1.0"
