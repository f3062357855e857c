//! Closed-loop execution: plan in symbolic space, run each primitive's
//! controller, re-ground the neural predicates, verify the expected
//! effects and replan from the current belief when verification fails.
//!
//! A verification failure after a successful controller means the
//! action's optimistic effects did not materialize; the immediate replan
//! excludes that action so the planner routes around it instead of
//! re-issuing it forever (Approach claims alignment it cannot deliver).
//! The exclusion lasts for one replan only. Controller faults replan
//! over the full action set.

use crate::belief::{refresh, BeliefState, GrounderConfig};
use crate::pddl::{Domain, Problem};
use crate::planner::{plan, satisfaction, PlanError, PlannerConfig};
use crate::simworld::{
    ctl_approach, ctl_disassemble, ctl_insert, ctl_mate, ctl_push, observe, world_hash,
    ControllerOutcome, TraceRecord, WorldConfig, WorldState,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExecutorConfig {
    /// Maximum number of plan-from-scratch repairs per episode.
    pub replan_budget: usize,
    /// Minimum post-refresh probability for a positive effect to count
    /// as achieved (negated effects must be below the complement).
    pub verify_threshold: f64,
}

impl Default for ExecutorConfig {
    fn default() -> Self {
        ExecutorConfig {
            replan_budget: 10,
            verify_threshold: 0.5,
        }
    }
}

/// All module configs an episode needs.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StackConfig {
    pub planner: PlannerConfig,
    pub executor: ExecutorConfig,
    pub grounder: GrounderConfig,
    pub world: WorldConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureReason {
    NoPlan,
    ReplanBudgetExhausted,
    ControllerFaultUnrecoverable,
}

impl std::fmt::Display for FailureReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            FailureReason::NoPlan => "no_plan",
            FailureReason::ReplanBudgetExhausted => "replan_budget_exhausted",
            FailureReason::ControllerFaultUnrecoverable => "controller_fault_unrecoverable",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone)]
pub struct EpisodeResult {
    pub success: bool,
    pub steps_executed: usize,
    pub replans: usize,
    pub actions: Vec<String>,
    pub failure_reason: Option<FailureReason>,
    pub trace: Vec<TraceRecord>,
}

impl std::fmt::Display for EpisodeResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "success={} steps={} replans={} actions={} failure={}",
            self.success,
            self.steps_executed,
            self.replans,
            if self.actions.is_empty() {
                "-".to_string()
            } else {
                self.actions.join(",")
            },
            self.failure_reason
                .map(|r| r.to_string())
                .unwrap_or_else(|| "-".to_string()),
        )
    }
}

fn dispatch(
    name: &str,
    world: &WorldState,
    cfg: &WorldConfig,
    rng: &mut impl Rng,
) -> ControllerOutcome {
    match name {
        "Approach" => ctl_approach(world, world.believed_bolt_pos, cfg),
        "Mate" => ctl_mate(world, cfg, rng),
        "Push" => ctl_push(world, cfg),
        "Insert" => ctl_insert(world, cfg),
        "Disassemble" => ctl_disassemble(world, cfg),
        other => panic!("no controller for action `{other}`"),
    }
}

struct Episode<'a> {
    domain: &'a Domain,
    cfg: &'a StackConfig,
    world: WorldState,
    belief: BeliefState,
    rng: ChaCha8Rng,
    actions: Vec<String>,
    trace: Vec<TraceRecord>,
    replans: usize,
}

impl Episode<'_> {
    fn record(&mut self, action: &str, outcome: &ControllerOutcome, pre_hash: u64) {
        let obs = observe(&outcome.world, &self.cfg.world, &mut self.rng);
        self.trace.push(TraceRecord {
            step: self.actions.len(),
            action: action.to_string(),
            succeeded: outcome.succeeded,
            fault_reason: outcome.fault_reason,
            e_mm: obs.e_mm,
            d_mm: obs.d_mm,
            pre_hash,
            post_hash: world_hash(&outcome.world),
        });
    }

    fn refresh_belief(&mut self) {
        self.belief = refresh(
            &self.belief,
            &self.world,
            &self.cfg.world,
            &self.cfg.grounder,
            &mut self.rng,
        );
    }

    fn finish(self, success: bool, failure_reason: Option<FailureReason>) -> EpisodeResult {
        EpisodeResult {
            success,
            steps_executed: self.actions.len(),
            replans: self.replans,
            actions: self.actions,
            failure_reason,
            trace: self.trace,
        }
    }
}

/// Runs one closed-loop episode: refresh, plan, execute step by step
/// with per-step verification, replan on failure. Terminates with
/// success when the believed goal satisfaction clears the planner's
/// goal threshold, with failure when the replan budget runs out or no
/// plan exists.
pub fn run_episode(
    domain: &Domain,
    problem: &Problem,
    world: WorldState,
    cfg: &StackConfig,
    seed: u64,
) -> EpisodeResult {
    let mut ep = Episode {
        domain,
        cfg,
        world,
        belief: BeliefState::from_init(&problem.init),
        rng: ChaCha8Rng::seed_from_u64(seed),
        actions: Vec::new(),
        trace: Vec::new(),
        replans: 0,
    };
    // action excluded from the next replan after its verification failed
    let mut excluded: Option<String> = None;

    'replan: loop {
        ep.refresh_belief();
        if satisfaction(&ep.belief, &problem.goal) >= cfg.planner.goal_threshold {
            return ep.finish(true, None);
        }
        let current_plan = {
            let planning_domain = match excluded.take() {
                Some(name) => {
                    let mut d = ep.domain.clone();
                    d.actions.retain(|a| a.name != name);
                    std::borrow::Cow::Owned(d)
                }
                None => std::borrow::Cow::Borrowed(ep.domain),
            };
            match plan(&planning_domain, &ep.belief, &problem.goal, &cfg.planner) {
                Ok(p) => p,
                Err(PlanError::NoPlanFound(_)) => {
                    return ep.finish(false, Some(FailureReason::NoPlan))
                }
                Err(e) => unreachable!("planner returned {e}"),
            }
        };

        for step in &current_plan.steps {
            let action = ep
                .domain
                .action(step)
                .expect("planned action exists in the domain");
            // the belief may have drifted since planning
            if satisfaction(&ep.belief, &action.pre) < cfg.planner.prune_threshold {
                ep.replans += 1;
                if ep.replans > cfg.executor.replan_budget {
                    return ep.finish(false, Some(FailureReason::ReplanBudgetExhausted));
                }
                continue 'replan;
            }
            let pre_hash = world_hash(&ep.world);
            let outcome = dispatch(step, &ep.world, &cfg.world, &mut ep.rng);
            ep.record(step, &outcome, pre_hash);
            ep.actions.push(step.clone());
            ep.world = outcome.world.clone();
            if outcome.succeeded {
                for eff in &action.eff {
                    ep.belief = ep.belief.assert_literal(eff);
                }
            }
            ep.refresh_belief();

            let verified = outcome.succeeded
                && action.eff.iter().all(|eff| {
                    let p = ep.belief.prob(&eff.atom);
                    if eff.negated {
                        p <= 1.0 - cfg.executor.verify_threshold
                    } else {
                        p >= cfg.executor.verify_threshold
                    }
                });
            if !verified {
                if outcome.succeeded {
                    excluded = Some(step.clone());
                }
                ep.replans += 1;
                if ep.replans > cfg.executor.replan_budget {
                    let reason = if outcome.succeeded {
                        FailureReason::ReplanBudgetExhausted
                    } else {
                        FailureReason::ControllerFaultUnrecoverable
                    };
                    return ep.finish(false, Some(reason));
                }
                continue 'replan;
            }
            if satisfaction(&ep.belief, &problem.goal) >= cfg.planner.goal_threshold {
                return ep.finish(true, None);
            }
        }
        // plan ran dry without reaching the goal in belief space
        ep.replans += 1;
        if ep.replans > cfg.executor.replan_budget {
            return ep.finish(false, Some(FailureReason::ReplanBudgetExhausted));
        }
    }
}

/// Open-loop classic baseline: Approach, Insert, Disassemble against the
/// noisy believed pose, with no verification and no replanning. Succeeds
/// iff all three controllers succeed.
pub fn run_baseline_episode(world: WorldState, cfg: &StackConfig, seed: u64) -> EpisodeResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = world;
    let mut actions = Vec::new();
    let mut trace = Vec::new();
    for step in ["Approach", "Insert", "Disassemble"] {
        let pre_hash = world_hash(&w);
        let outcome = dispatch(step, &w, &cfg.world, &mut rng);
        actions.push(step.to_string());
        let obs = observe(&outcome.world, &cfg.world, &mut rng);
        trace.push(TraceRecord {
            step: actions.len() - 1,
            action: step.to_string(),
            succeeded: outcome.succeeded,
            fault_reason: outcome.fault_reason,
            e_mm: obs.e_mm,
            d_mm: obs.d_mm,
            pre_hash,
            post_hash: world_hash(&outcome.world),
        });
        w = outcome.world.clone();
        if !outcome.succeeded {
            return EpisodeResult {
                success: false,
                steps_executed: actions.len(),
                replans: 0,
                actions,
                failure_reason: Some(FailureReason::ControllerFaultUnrecoverable),
                trace,
            };
        }
    }
    EpisodeResult {
        success: true,
        steps_executed: actions.len(),
        replans: 0,
        actions,
        failure_reason: None,
        trace,
    }
}
