//! Kinematic ground-truth world and the five primitive controllers.
//!
//! Geometry is desk-scale: positions in millimetres, the bolt axis
//! vertical, obstacles modeled as vertical cylinders (discs in plan
//! view). Controllers are the only mutators of [`WorldState`]; a failed
//! controller leaves everything unchanged except the fault flag.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::Deserialize;

/// Physical parameters of the world and controllers. All lengths in mm.
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldConfig {
    /// Hover height above the believed bolt position after Approach.
    pub h_hover_mm: f64,
    /// Maximum alignment error the passive-compliant socket absorbs
    /// during Insert.
    pub compliance_radius_mm: f64,
    /// Radial clearance the nutrunner sleeve needs around the bolt axis.
    pub d_required_mm: f64,
    /// Extra clearance Push leaves beyond `d_required_mm`.
    pub push_margin_mm: f64,
    /// Thread pitch of the bolt (M10 coarse by default).
    pub thread_pitch_mm: f64,
    /// Number of engaged turns a fastened bolt starts with.
    pub engaged_turns: f64,
    /// Unscrew speed in turns per second.
    pub unscrew_rate_tps: f64,
    /// Torque anomaly cutoff during Insert.
    pub torque_limit_nm: f64,
    /// Contact depth below the bolt-head top during Insert.
    pub insert_depth_mm: f64,
    /// Std dev of additive Gaussian noise on observed e and d.
    pub sigma_obs_mm: f64,
    /// Residual alignment error after Mate is |N(0, sigma^2)| with this
    /// sigma.
    pub mate_sigma_mm: f64,
    /// Chance that Mate fails when an obstacle overlaps the bolt axis
    /// and blocks the regional camera view. Set to 0 to disable.
    pub mate_block_fail_rate: f64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            h_hover_mm: 30.0,
            compliance_radius_mm: 4.0,
            d_required_mm: 10.0,
            push_margin_mm: 5.0,
            thread_pitch_mm: 1.5,
            engaged_turns: 8.0,
            unscrew_rate_tps: 2.0,
            torque_limit_nm: 5.0,
            insert_depth_mm: 1.0,
            sigma_obs_mm: 0.3,
            mate_sigma_mm: 0.2,
            mate_block_fail_rate: 0.2,
        }
    }
}

/// Vertical cylinder obstacle, seen as a disc in plan view.
#[derive(Debug, Clone, PartialEq)]
pub struct Obstacle {
    pub center: [f64; 2],
    pub radius_mm: f64,
    pub movable: bool,
}

/// Continuous ground truth for one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    /// True bolt-head top position.
    pub bolt_pos: [f64; 3],
    pub thread_pitch_mm: f64,
    pub engaged_turns: f64,
    pub nutrunner_pos: [f64; 3],
    /// The noisy estimate the robot acts on.
    pub believed_bolt_pos: [f64; 3],
    pub obstacles: Vec<Obstacle>,
    pub inserted: bool,
    pub disassembled: bool,
    pub fault: bool,
}

impl WorldState {
    pub fn new(
        bolt_pos: [f64; 3],
        believed_bolt_pos: [f64; 3],
        obstacles: Vec<Obstacle>,
        cfg: &WorldConfig,
    ) -> Self {
        WorldState {
            bolt_pos,
            thread_pitch_mm: cfg.thread_pitch_mm,
            engaged_turns: cfg.engaged_turns,
            // parked well above the workspace
            nutrunner_pos: [0.0, 0.0, bolt_pos[2] + 200.0],
            believed_bolt_pos,
            obstacles,
            inserted: false,
            disassembled: false,
            fault: false,
        }
    }

    /// Horizontal distance between the nutrunner axis and the bolt axis.
    pub fn alignment_error(&self) -> f64 {
        let dx = self.nutrunner_pos[0] - self.bolt_pos[0];
        let dy = self.nutrunner_pos[1] - self.bolt_pos[1];
        (dx * dx + dy * dy).sqrt()
    }

    /// Minimal free radial distance between the bolt axis and any
    /// obstacle surface; infinite with no obstacles. Negative when an
    /// obstacle overlaps the axis.
    pub fn clearance(&self) -> f64 {
        self.obstacles
            .iter()
            .map(|o| {
                let dx = o.center[0] - self.bolt_pos[0];
                let dy = o.center[1] - self.bolt_pos[1];
                (dx * dx + dy * dy).sqrt() - o.radius_mm
            })
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaultReason {
    TorqueExceeded,
    NotEngaged,
    Blocked,
}

impl std::fmt::Display for FaultReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            FaultReason::TorqueExceeded => "torque_exceeded",
            FaultReason::NotEngaged => "not_engaged",
            FaultReason::Blocked => "blocked",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone)]
pub struct ControllerOutcome {
    pub world: WorldState,
    pub succeeded: bool,
    pub fault_reason: Option<FaultReason>,
}

impl ControllerOutcome {
    fn ok(world: WorldState) -> Self {
        ControllerOutcome {
            world,
            succeeded: true,
            fault_reason: None,
        }
    }

    fn fault(mut world: WorldState, reason: FaultReason) -> Self {
        world.fault = true;
        ControllerOutcome {
            world,
            succeeded: false,
            fault_reason: Some(reason),
        }
    }
}

/// Moves the nutrunner to hover height above `target`; no interaction
/// with the bolt or obstacles.
pub fn ctl_approach(world: &WorldState, target: [f64; 3], cfg: &WorldConfig) -> ControllerOutcome {
    let mut w = world.clone();
    w.nutrunner_pos = [target[0], target[1], target[2] + cfg.h_hover_mm];
    ControllerOutcome::ok(w)
}

/// Visual-servo emulation: re-centers the nutrunner on the true bolt axis
/// up to a residual error |N(0, mate_sigma^2)|. An obstacle overlapping
/// the bolt axis blocks the regional view with `mate_block_fail_rate`
/// chance; retries are allowed.
pub fn ctl_mate(world: &WorldState, cfg: &WorldConfig, rng: &mut impl Rng) -> ControllerOutcome {
    let view_blocked = world.obstacles.iter().any(|o| {
        let dx = o.center[0] - world.bolt_pos[0];
        let dy = o.center[1] - world.bolt_pos[1];
        (dx * dx + dy * dy).sqrt() < o.radius_mm
    });
    if view_blocked && rng.random::<f64>() < cfg.mate_block_fail_rate {
        return ControllerOutcome::fault(world.clone(), FaultReason::Blocked);
    }
    let normal = Normal::new(0.0, cfg.mate_sigma_mm).expect("mate sigma must be finite");
    let residual: f64 = normal.sample(rng).abs();
    let angle = rng.random::<f64>() * std::f64::consts::TAU;
    let mut w = world.clone();
    w.nutrunner_pos = [
        w.bolt_pos[0] + residual * angle.cos(),
        w.bolt_pos[1] + residual * angle.sin(),
        w.bolt_pos[2] + cfg.h_hover_mm,
    ];
    ControllerOutcome::ok(w)
}

/// Relocates every movable obstacle inside the required envelope radially
/// outward until its clearance is `d_required + push_margin`. An
/// immovable obstacle inside the envelope fails the whole push.
pub fn ctl_push(world: &WorldState, cfg: &WorldConfig) -> ControllerOutcome {
    let in_envelope = |o: &Obstacle| {
        let dx = o.center[0] - world.bolt_pos[0];
        let dy = o.center[1] - world.bolt_pos[1];
        (dx * dx + dy * dy).sqrt() - o.radius_mm < cfg.d_required_mm
    };
    if world.obstacles.iter().any(|o| in_envelope(o) && !o.movable) {
        return ControllerOutcome::fault(world.clone(), FaultReason::Blocked);
    }
    let mut w = world.clone();
    for o in w.obstacles.iter_mut() {
        let dx = o.center[0] - w.bolt_pos[0];
        let dy = o.center[1] - w.bolt_pos[1];
        let dist = (dx * dx + dy * dy).sqrt();
        if dist - o.radius_mm >= cfg.d_required_mm {
            continue;
        }
        let target_dist = cfg.d_required_mm + cfg.push_margin_mm + o.radius_mm;
        let (ux, uy) = if dist > 1e-9 {
            (dx / dist, dy / dist)
        } else {
            (1.0, 0.0) // obstacle dead on the axis; push along +x
        };
        o.center = [
            w.bolt_pos[0] + ux * target_dist,
            w.bolt_pos[1] + uy * target_dist,
        ];
    }
    ControllerOutcome::ok(w)
}

/// Descends to contact depth against the gasket and engages the socket.
/// Misalignment beyond the compliance radius spikes the torque above the
/// cutoff; insufficient clearance blocks the sleeve.
pub fn ctl_insert(world: &WorldState, cfg: &WorldConfig) -> ControllerOutcome {
    let e = world.alignment_error();
    if e > cfg.compliance_radius_mm {
        return ControllerOutcome::fault(world.clone(), FaultReason::TorqueExceeded);
    }
    if world.clearance() < cfg.d_required_mm {
        return ControllerOutcome::fault(world.clone(), FaultReason::Blocked);
    }
    let mut w = world.clone();
    // the compliant socket pulls the sleeve onto the bolt axis
    w.nutrunner_pos = [
        w.bolt_pos[0],
        w.bolt_pos[1],
        w.bolt_pos[2] - cfg.insert_depth_mm,
    ];
    w.inserted = true;
    ControllerOutcome::ok(w)
}

/// Counterclockwise rotation with retraction matched to the thread
/// pitch; removes the bolt.
pub fn ctl_disassemble(world: &WorldState, cfg: &WorldConfig) -> ControllerOutcome {
    if !world.inserted {
        return ControllerOutcome::fault(world.clone(), FaultReason::NotEngaged);
    }
    let (retraction, _duration) = disassembly_motion(world.engaged_turns, cfg);
    let mut w = world.clone();
    w.nutrunner_pos[2] += retraction;
    w.engaged_turns = 0.0;
    w.disassembled = true;
    ControllerOutcome::ok(w)
}

/// Retraction distance (mm) and duration (s) of unscrewing
/// `engaged_turns` turns at the configured rate and pitch.
pub fn disassembly_motion(engaged_turns: f64, cfg: &WorldConfig) -> (f64, f64) {
    let retraction = engaged_turns * cfg.thread_pitch_mm;
    let duration = engaged_turns / cfg.unscrew_rate_tps;
    (retraction, duration)
}

/// Noisy scalar observation of alignment error and clearance.
#[derive(Debug, Clone, Copy)]
pub struct Observation {
    pub e_mm: f64,
    pub d_mm: f64,
}

/// Observes e and d corrupted with N(0, sigma_obs^2), clamped to be
/// non-negative. Infinite clearance stays infinite.
pub fn observe(world: &WorldState, cfg: &WorldConfig, rng: &mut impl Rng) -> Observation {
    let normal = Normal::new(0.0, cfg.sigma_obs_mm).expect("sigma_obs must be finite");
    let e = (world.alignment_error() + normal.sample(rng)).max(0.0);
    let d = world.clearance();
    let d = if d.is_finite() {
        (d + normal.sample(rng)).max(0.0)
    } else {
        f64::INFINITY
    };
    Observation { e_mm: e, d_mm: d }
}

/// Stable 64-bit hash of the world, for trace records. FNV-1a over the
/// raw field bits; independent of the process hasher seed.
pub fn world_hash(world: &WorldState) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    let mut eat = |bits: u64| {
        for byte in bits.to_le_bytes() {
            h ^= byte as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
    };
    for v in world.bolt_pos.iter().chain(&world.nutrunner_pos).chain(&world.believed_bolt_pos) {
        eat(v.to_bits());
    }
    eat(world.thread_pitch_mm.to_bits());
    eat(world.engaged_turns.to_bits());
    for o in &world.obstacles {
        eat(o.center[0].to_bits());
        eat(o.center[1].to_bits());
        eat(o.radius_mm.to_bits());
        eat(o.movable as u64);
    }
    eat(world.inserted as u64);
    eat(world.disassembled as u64);
    eat(world.fault as u64);
    h
}

/// One line of an episode trace.
#[derive(Debug, Clone)]
pub struct TraceRecord {
    pub step: usize,
    pub action: String,
    pub succeeded: bool,
    pub fault_reason: Option<FaultReason>,
    pub e_mm: f64,
    pub d_mm: f64,
    pub pre_hash: u64,
    pub post_hash: u64,
}

impl std::fmt::Display for TraceRecord {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "step={} action={} ok={} fault={} e={:.3} d={:.3} pre={:016x} post={:016x}",
            self.step,
            self.action,
            self.succeeded,
            self.fault_reason
                .map(|r| r.to_string())
                .unwrap_or_else(|| "-".to_string()),
            self.e_mm,
            self.d_mm,
            self.pre_hash,
            self.post_hash,
        )
    }
}
