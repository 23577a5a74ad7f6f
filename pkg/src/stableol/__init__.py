"""Stability-audited online learning.

Divergence computation on discrete distributions, perturbed- and
regularized-leader prediction for experts, bandits, and bandits with expert
advice, objective-perturbation online convex optimization, and a harness
that measures one-step stability levels and regret scaling empirically.
"""

from .bandit import (
    GeometricResamplingCfg,
    LossEstimate,
    default_gr_cap,
    geometric_resampling,
    importance_weighted_estimate,
    lemma7_audit,
    run_bandit,
    run_bandit_batch,
)
from .bwe import (
    ClipConfig,
    actions_to_experts,
    clip,
    experts_to_actions,
    planted_good_expert,
    run_bwe,
    uniform_advice,
)
from .divergence import (
    DiscreteDist,
    DivergenceQuery,
    divergence_of_pushforward,
    max_divergence,
    tsallis_log,
)
from .gbpa import (
    FTPL,
    FTRL,
    LogBarrier,
    Potential,
    ProbeConfig,
    RunRecord,
    Shannon,
    TsallisEntropy,
    best_arm_loss,
    btl_audit,
    ftpl_gradient_quadrature,
    ftpl_sample_action,
    ftrl_gradient,
    gumbel_softmax_gradient,
    potential_gradient,
    preset_epsilon_scale,
    probe_stability,
    run_experts,
    stability_level,
)
from .harness import (
    AdversarySpec,
    ExperimentConfig,
    audit_key_lemma,
    audit_lemma2,
    load_config,
    parse_potential,
    run_experiment,
    scaling_fit,
)
from .oco import (
    BallDomain,
    ConvexLossSpec,
    OcoRunRecord,
    linear_shifted_losses,
    objpert_step,
    offline_opt,
    run_oco,
)
from .perturbation import (
    ObjPertNoiseSpec,
    PerturbationSpec,
    sample_objpert_noise,
    sample_scalar,
    table1_preset,
)
from .rng import StreamFactory, stream

__all__ = [name for name in dir() if not name.startswith("_")]
