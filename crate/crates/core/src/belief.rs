//! Probabilistic belief state over ground atoms, plus the neural-predicate
//! grounders.
//!
//! The grounders stand in for trained perception networks: a logistic
//! model of the geometric truth produces a softmax-like binary
//! distribution, and a label-swap channel emulates classifier mistakes at
//! the configured error rate. The planner only ever sees a probability
//! vector, which this preserves.

use crate::pddl::{Atom, Domain, Literal};
use crate::simworld::{observe, WorldConfig, WorldState};
use rand::Rng;
use serde::Deserialize;
use std::collections::BTreeMap;

/// The single sensor/robot object of the bolt task.
pub const SENSOR: &str = "sensor";

pub fn atom_target_aim() -> Atom {
    Atom::new("target_aim", &[SENSOR])
}

pub fn atom_target_clear() -> Atom {
    Atom::new("target_clear", &[SENSOR])
}

/// Probability assignment over ground atoms. Atoms absent from the map
/// have probability 0 (closed world). Immutable: operations return new
/// states.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BeliefState {
    probs: BTreeMap<Atom, f64>,
}

impl BeliefState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Belief with every positive init literal at probability 1 and every
    /// negated one at 0.
    pub fn from_init(init: &[Literal]) -> Self {
        let mut b = BeliefState::new();
        for lit in init {
            b = b.assert_literal(lit);
        }
        b
    }

    pub fn prob(&self, atom: &Atom) -> f64 {
        self.probs.get(atom).copied().unwrap_or(0.0)
    }

    /// Argmax projection for a binary predicate: true iff p > 0.5.
    pub fn holds(&self, atom: &Atom) -> bool {
        self.prob(atom) > 0.5
    }

    pub fn with_prob(&self, atom: Atom, p: f64) -> Self {
        debug_assert!((0.0..=1.0).contains(&p), "probability out of range: {p}");
        let mut next = self.clone();
        next.probs.insert(atom, p);
        next
    }

    /// Sets the atom's probability to 1 (positive literal) or 0 (negated).
    pub fn assert_literal(&self, literal: &Literal) -> Self {
        let p = if literal.negated { 0.0 } else { 1.0 };
        self.with_prob(literal.atom.clone(), p)
    }

    pub fn atoms(&self) -> impl Iterator<Item = (&Atom, f64)> {
        self.probs.iter().map(|(a, &p)| (a, p))
    }
}

/// Grounder parameters. Thresholds and steepness in mm, error rates as
/// probabilities of an argmax label swap.
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GrounderConfig {
    /// Alignment error at which target_aim is 50/50.
    pub aim_threshold_e0_mm: f64,
    pub aim_steepness_k_mm: f64,
    /// Clearance at which target_clear is 50/50.
    pub clear_threshold_d0_mm: f64,
    pub clear_steepness_k_mm: f64,
    pub aim_error_rate: f64,
    pub clear_error_rate: f64,
}

impl Default for GrounderConfig {
    fn default() -> Self {
        GrounderConfig {
            aim_threshold_e0_mm: 2.0,
            aim_steepness_k_mm: 0.5,
            clear_threshold_d0_mm: 12.0,
            clear_steepness_k_mm: 2.0,
            aim_error_rate: 0.02,
            clear_error_rate: 0.04,
        }
    }
}

impl GrounderConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.aim_steepness_k_mm <= 0.0 || self.clear_steepness_k_mm <= 0.0 {
            return Err("grounder steepness must be > 0".into());
        }
        for (name, rate) in [
            ("aim_error_rate", self.aim_error_rate),
            ("clear_error_rate", self.clear_error_rate),
        ] {
            if !(0.0..0.5).contains(&rate) {
                return Err(format!("{name} must be in [0, 0.5), got {rate}"));
            }
        }
        Ok(())
    }
}

/// Softmax-like output of one grounder: a distribution over the
/// predicate's groundings. Binary predicates use [p_true, p_false].
#[derive(Debug, Clone, PartialEq)]
pub struct GrounderOutput {
    pub atom: Atom,
    pub distribution: Vec<f64>,
}

impl GrounderOutput {
    pub fn p_true(&self) -> f64 {
        self.distribution[0]
    }

    pub fn argmax_true(&self) -> bool {
        self.p_true() > 0.5
    }
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn binary(atom: Atom, p_true: f64) -> GrounderOutput {
    GrounderOutput {
        atom,
        distribution: vec![p_true, 1.0 - p_true],
    }
}

/// Grounds target_aim from an observed alignment error `e_mm >= 0`.
/// p_true = logistic((e0 - e)/k), label-swapped with `aim_error_rate`.
pub fn ground_target_aim(e_mm: f64, cfg: &GrounderConfig, rng: &mut impl Rng) -> GrounderOutput {
    debug_assert!(e_mm >= 0.0, "alignment error must be non-negative");
    let mut p = logistic((cfg.aim_threshold_e0_mm - e_mm) / cfg.aim_steepness_k_mm);
    if rng.random::<f64>() < cfg.aim_error_rate {
        p = 1.0 - p;
    }
    binary(atom_target_aim(), p)
}

/// Grounds target_clear from an observed minimal clearance `d_mm` (may be
/// infinite). p_true = logistic((d - d0)/k), label-swapped with
/// `clear_error_rate`. With no obstacle in view (infinite d) the output
/// is the fixed confident distribution [1 - err, err]: nothing visible
/// can be misread as blocking.
pub fn ground_target_clear(d_mm: f64, cfg: &GrounderConfig, rng: &mut impl Rng) -> GrounderOutput {
    debug_assert!(d_mm >= 0.0, "clearance must be non-negative");
    if d_mm.is_infinite() {
        return binary(atom_target_clear(), 1.0 - cfg.clear_error_rate);
    }
    let mut p = logistic((d_mm - cfg.clear_threshold_d0_mm) / cfg.clear_steepness_k_mm);
    if rng.random::<f64>() < cfg.clear_error_rate {
        p = 1.0 - p;
    }
    binary(atom_target_clear(), p)
}

/// Overwrites every neural atom from its grounder given a fresh noisy
/// observation of the world; symbolic atoms are untouched.
pub fn refresh(
    belief: &BeliefState,
    world: &WorldState,
    world_cfg: &WorldConfig,
    grounder_cfg: &GrounderConfig,
    rng: &mut impl Rng,
) -> BeliefState {
    let obs = observe(world, world_cfg, rng);
    let aim = ground_target_aim(obs.e_mm, grounder_cfg, rng);
    let clear = ground_target_clear(obs.d_mm, grounder_cfg, rng);
    belief
        .with_prob(aim.atom.clone(), aim.p_true())
        .with_prob(clear.atom.clone(), clear.p_true())
}

/// Names of the predicates expected to be declared `neural` in the
/// domain file; used to sanity-check a loaded domain against the
/// grounders actually available.
pub fn check_neural_predicates(domain: &Domain) -> Result<(), String> {
    for name in ["target_aim", "target_clear"] {
        if !domain.is_neural(name) {
            return Err(format!("domain does not declare `{name}` as neural"));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simworld::{Obstacle, WorldState};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn no_swap() -> GrounderConfig {
        GrounderConfig {
            aim_error_rate: 0.0,
            clear_error_rate: 0.0,
            ..GrounderConfig::default()
        }
    }

    #[test]
    fn aim_at_threshold_is_even() {
        let cfg = no_swap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = ground_target_aim(cfg.aim_threshold_e0_mm, &cfg, &mut rng);
        assert!((out.p_true() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn aim_at_zero_error_matches_logistic() {
        let cfg = no_swap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = ground_target_aim(0.0, &cfg, &mut rng);
        // logistic(4.0)
        let expected = 1.0 / (1.0 + (-4.0f64).exp());
        assert!((out.p_true() - expected).abs() < 1e-12);
        assert!(out.p_true() > 0.98 && out.p_true() < 0.983);
    }

    #[test]
    fn clear_at_threshold_is_even() {
        let cfg = no_swap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = ground_target_clear(cfg.clear_threshold_d0_mm, &cfg, &mut rng);
        assert!((out.p_true() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn clear_with_no_obstacle_is_always_clear() {
        let cfg = GrounderConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..1000 {
            let out = ground_target_clear(f64::INFINITY, &cfg, &mut rng);
            assert!(out.argmax_true());
            assert!(out.p_true() >= 0.9);
        }
    }

    #[test]
    fn distributions_sum_to_one() {
        let cfg = GrounderConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for i in 0..1000 {
            let e = i as f64 * 0.01;
            let out = ground_target_aim(e, &cfg, &mut rng);
            assert!(out.distribution.iter().all(|&p| p >= 0.0));
            assert!((out.distribution.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            let out = ground_target_clear(e, &cfg, &mut rng);
            assert!(out.distribution.iter().all(|&p| p >= 0.0));
            assert!((out.distribution.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn same_seed_same_outputs() {
        let cfg = GrounderConfig::default();
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..100)
                .map(|i| ground_target_aim(i as f64 * 0.1, &cfg, &mut rng).p_true())
                .collect::<Vec<_>>()
        };
        assert_eq!(run(11), run(11));
    }

    #[test]
    fn assert_literal_sets_and_is_idempotent() {
        let b = BeliefState::new();
        let cramped = Literal::pos(Atom::new("cramped", &[SENSOR]));
        let once = b.assert_literal(&cramped);
        assert_eq!(once.prob(&cramped.atom), 1.0);
        assert_eq!(once.assert_literal(&cramped), once);
        let not_above = Literal::neg(Atom::new("above_bolt", &[SENSOR]));
        assert_eq!(once.assert_literal(&not_above).prob(&not_above.atom), 0.0);
    }

    #[test]
    fn closed_world_default_is_zero() {
        let b = BeliefState::new();
        assert_eq!(b.prob(&Atom::new("anything", &[])), 0.0);
        assert!(!b.holds(&Atom::new("anything", &[])));
    }

    #[test]
    fn refresh_overwrites_neural_and_keeps_symbolic() {
        let wcfg = WorldConfig::default();
        let gcfg = GrounderConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let cramped = Atom::new("cramped", &[SENSOR]);
        let belief = BeliefState::new().with_prob(cramped.clone(), 1.0);

        let mut world = WorldState::new([100.0, 100.0, 0.0], [100.0, 100.0, 0.0], vec![], &wcfg);
        world.nutrunner_pos = [100.0, 100.0, 30.0]; // perfectly aligned
        let refreshed = refresh(&belief, &world, &wcfg, &gcfg, &mut rng);
        assert!(refreshed.holds(&atom_target_aim()));
        assert!(refreshed.holds(&atom_target_clear()));
        assert_eq!(refreshed.prob(&cramped), 1.0);
    }

    #[test]
    fn refresh_flags_zero_clearance_obstacle() {
        let wcfg = WorldConfig::default();
        let gcfg = GrounderConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut world = WorldState::new(
            [100.0, 100.0, 0.0],
            [100.0, 100.0, 0.0],
            vec![Obstacle {
                center: [105.0, 100.0],
                radius_mm: 5.0,
                movable: true,
            }],
            &wcfg,
        );
        world.nutrunner_pos = [100.0, 100.0, 30.0];
        let n = 10_000;
        let mut not_clear = 0;
        for _ in 0..n {
            let b = refresh(&BeliefState::new(), &world, &wcfg, &gcfg, &mut rng);
            if !b.holds(&atom_target_clear()) {
                not_clear += 1;
            }
        }
        let rate = not_clear as f64 / n as f64;
        assert!(rate >= 1.0 - gcfg.clear_error_rate - 0.01, "rate {rate}");
    }

    #[test]
    fn aim_monotone_in_error_without_swap() {
        let cfg = no_swap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut last = f64::INFINITY;
        for i in 0..200 {
            let p = ground_target_aim(i as f64 * 0.05, &cfg, &mut rng).p_true();
            assert!(p <= last + 1e-15);
            last = p;
        }
    }

    #[test]
    fn clear_monotone_in_clearance_without_swap() {
        let cfg = no_swap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut last = -1.0;
        for i in 0..200 {
            let p = ground_target_clear(i as f64 * 0.2, &cfg, &mut rng).p_true();
            assert!(p >= last - 1e-15);
            last = p;
        }
    }

    #[test]
    fn config_validation_rejects_bad_rates() {
        let mut cfg = GrounderConfig::default();
        cfg.aim_error_rate = 0.5;
        assert!(cfg.validate().is_err());
        cfg.aim_error_rate = 0.02;
        cfg.clear_steepness_k_mm = 0.0;
        assert!(cfg.validate().is_err());
        assert!(GrounderConfig::default().validate().is_ok());
    }
}
