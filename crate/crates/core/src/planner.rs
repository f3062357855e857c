//! Likelihood-pruned forward state-space search over belief states.
//!
//! The search runs breadth-first, one depth layer at a time. Expanding a
//! node applies every ground action whose precondition satisfaction
//! probability clears `prune_threshold`, multiplies the node likelihood
//! by that satisfaction, and sorts the surviving successors by likelihood
//! before they are enqueued. The first layer containing a node whose goal
//! satisfaction clears `goal_threshold` wins; within that layer the
//! highest-likelihood goal node is returned, ties resolved by action
//! declaration order. Effects are optimistic deterministic assertions;
//! execution-time uncertainty is the executor's verify-replan loop.

use crate::belief::BeliefState;
use crate::pddl::{ActionSchema, Domain, Literal};
use serde::Deserialize;
use std::collections::HashSet;

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerConfig {
    /// Minimum precondition satisfaction for a successor to survive.
    pub prune_threshold: f64,
    /// Minimum goal satisfaction for a node to count as a solution.
    pub goal_threshold: f64,
    /// Depth cap on the search.
    pub max_depth: usize,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            prune_threshold: 0.5,
            goal_threshold: 0.5,
            max_depth: 12,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PlanError {
    #[error("no plan found within depth {0}")]
    NoPlanFound(usize),
    #[error("precondition satisfaction {satisfaction:.4} below threshold {threshold}")]
    PreconditionBelowThreshold { satisfaction: f64, threshold: f64 },
}

/// A search node: belief reached so far, the action prefix that reached
/// it and the product of per-step precondition satisfactions.
#[derive(Debug, Clone)]
pub struct PlanNode {
    pub belief: BeliefState,
    pub op_list: Vec<String>,
    pub likelihood: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub steps: Vec<String>,
    pub likelihood: f64,
}

/// Probability that every literal in the set holds, under per-literal
/// independence: the product of p(atom) for positive literals and
/// 1 - p(atom) for negated ones. Empty set gives 1.
pub fn satisfaction(belief: &BeliefState, literals: &[Literal]) -> f64 {
    literals
        .iter()
        .map(|lit| {
            let p = belief.prob(&lit.atom);
            if lit.negated {
                1.0 - p
            } else {
                p
            }
        })
        .product()
}

/// Asserts every effect literal into the belief (positive to 1, negated
/// to 0); everything else is unchanged.
pub fn apply_effects(belief: &BeliefState, action: &ActionSchema) -> BeliefState {
    let mut next = belief.clone();
    for lit in &action.eff {
        next = next.assert_literal(lit);
    }
    next
}

/// Precondition-checked application.
pub fn apply(
    belief: &BeliefState,
    action: &ActionSchema,
    prune_threshold: f64,
) -> Result<BeliefState, PlanError> {
    let sat = satisfaction(belief, &action.pre);
    if sat < prune_threshold {
        return Err(PlanError::PreconditionBelowThreshold {
            satisfaction: sat,
            threshold: prune_threshold,
        });
    }
    Ok(apply_effects(belief, action))
}

/// Instantiates every schema with the domain's object constants, in
/// declaration order. The bolt domain quantifies over nothing, so the
/// schemas are already ground; this is the substitution point if
/// variables ever show up.
pub fn ground_actions(domain: &Domain) -> Vec<ActionSchema> {
    domain.actions.clone()
}

/// Exact belief signature used for visited-state pruning. Within a
/// search, probabilities only change by assertion to 0/1, so the
/// signature space is finite and the search terminates.
fn signature(belief: &BeliefState) -> Vec<(String, u64)> {
    belief
        .atoms()
        .map(|(a, p)| (a.to_string(), p.to_bits()))
        .collect()
}

/// Forward search from `s0` to a belief whose goal satisfaction clears
/// the threshold. Returns the shortest plan; among equal-length plans,
/// the one with the highest likelihood.
pub fn plan(
    domain: &Domain,
    s0: &BeliefState,
    goal: &[Literal],
    cfg: &PlannerConfig,
) -> Result<Plan, PlanError> {
    let actions = ground_actions(domain);
    if satisfaction(s0, goal) >= cfg.goal_threshold {
        return Ok(Plan {
            steps: Vec::new(),
            likelihood: 1.0,
        });
    }
    let mut visited: HashSet<Vec<(String, u64)>> = HashSet::new();
    visited.insert(signature(s0));
    let mut frontier = vec![PlanNode {
        belief: s0.clone(),
        op_list: Vec::new(),
        likelihood: 1.0,
    }];

    for _depth in 1..=cfg.max_depth {
        let mut goal_hits: Vec<PlanNode> = Vec::new();
        let mut successors: Vec<PlanNode> = Vec::new();
        for node in &frontier {
            for action in &actions {
                let sat = satisfaction(&node.belief, &action.pre);
                if sat < cfg.prune_threshold {
                    continue;
                }
                let belief = apply_effects(&node.belief, action);
                let mut op_list = node.op_list.clone();
                op_list.push(action.name.clone());
                let next = PlanNode {
                    likelihood: node.likelihood * sat,
                    belief,
                    op_list,
                };
                if satisfaction(&next.belief, goal) >= cfg.goal_threshold {
                    goal_hits.push(next);
                } else {
                    successors.push(next);
                }
            }
        }
        if let Some(best) = max_by_likelihood(goal_hits) {
            return Ok(Plan {
                steps: best.op_list,
                likelihood: best.likelihood,
            });
        }
        // keep one node per belief signature (highest likelihood, first
        // on ties), drop beliefs already reached at a shallower depth
        let mut layer: Vec<PlanNode> = Vec::new();
        let mut layer_sigs: Vec<Vec<(String, u64)>> = Vec::new();
        for node in successors {
            let sig = signature(&node.belief);
            if visited.contains(&sig) {
                continue;
            }
            match layer_sigs.iter().position(|s| *s == sig) {
                Some(i) => {
                    if node.likelihood > layer[i].likelihood {
                        layer[i] = node;
                    }
                }
                None => {
                    layer_sigs.push(sig);
                    layer.push(node);
                }
            }
        }
        for sig in layer_sigs {
            visited.insert(sig);
        }
        // sort_and_filter: order the new frontier by likelihood, stable
        layer.sort_by(|a, b| b.likelihood.partial_cmp(&a.likelihood).unwrap());
        if layer.is_empty() {
            break;
        }
        frontier = layer;
    }
    Err(PlanError::NoPlanFound(cfg.max_depth))
}

fn max_by_likelihood(nodes: Vec<PlanNode>) -> Option<PlanNode> {
    let mut best: Option<PlanNode> = None;
    for node in nodes {
        match &best {
            Some(b) if node.likelihood <= b.likelihood => {}
            _ => best = Some(node),
        }
    }
    best
}
