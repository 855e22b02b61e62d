"""Causal bandit algorithms on binary Bayesian networks.

Simple- and cumulative-regret minimisation over do-interventions when only
the causal graph (not the distribution) is known, plus the observational
reward-estimation pipeline, baselines, instance generators, an experiment
harness and a CLI.
"""

from .admg import (
    Admg,
    NodeId,
    SemiMarkovViolation,
    StructuralError,
    c_components,
    check_identifiability,
    latent_projection,
    pa,
    pa_plus_and_pa_c,
    reduce_graph,
    topological_order,
)
from .cbn import (
    Arm,
    Cbn,
    Cpt,
    EnumerationInfeasible,
    OBSERVE,
    ObsRecord,
    PositivityViolation,
    arms_of,
    backdoor_reward,
    exact_q_and_m,
    exact_reward,
    joint_table,
    load_cbn,
    sample,
    sample_batch,
    save_cbn,
)
from .bandits import (
    BanditEnv,
    CrmState,
    RegretTrace,
    SrmOutput,
    run_crm,
    run_srm,
    run_successive_rejects,
    run_ucb1,
    run_uniform_exploration,
    theorem_bounds,
    update_crm_estimates,
)
from .obs_estimation import estimate_all_rewards, estimate_arm_reward
from .harness import ExperimentPlan, RegretReport, execute, mix_seed, overlay_bounds
from .instances import (
    InfeasibleTarget,
    gen_experiment1,
    gen_experiment2,
    gen_experiment3,
    gen_experiment5,
    gen_sparse_chain,
    gen_tree_lower_bound,
)

__version__ = "0.1.0"
