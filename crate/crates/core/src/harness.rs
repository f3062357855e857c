//! Monte-Carlo experiment harness: success rate and step count versus
//! pose noise, with and without obstacles, for the closed-loop
//! neurosymbolic stack and the open-loop classic baseline. Emits CSV
//! tables and self-contained SVG plots.
//!
//! Episode seeds are derived per index from the master seed, so results
//! are bit-identical regardless of thread count or episode order.

use crate::belief::{
    check_neural_predicates, ground_target_aim, ground_target_clear, GrounderConfig,
};
use crate::executor::{run_baseline_episode, run_episode, EpisodeResult, StackConfig};
use crate::pddl::{parse_domain, parse_problem, Domain, Problem};
use crate::simworld::{ctl_approach, observe, Obstacle, WorldConfig, WorldState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::Deserialize;
use std::io::Write;
use std::path::Path;

pub const DEFAULT_SIGMA_LIST: [f64; 6] = [0.5, 1.0, 2.0, 3.0, 4.0, 5.0];
pub const DEFAULT_MASTER_SEED: u64 = 5;

/// Side length of the square workspace the bolt is placed in.
pub const WORKSPACE_MM: f64 = 200.0;

/// Obstacle radii sampled in `with_obstacles` mode: a loose bolt, a nut
/// and a wooden block.
pub const OBSTACLE_RADII_MM: [f64; 3] = [5.0, 4.0, 20.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[clap(rename_all = "snake_case")]
pub enum Mode {
    NoObstacles,
    WithObstacles,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[clap(rename_all = "snake_case")]
pub enum Method {
    Neurosymbolic,
    Baseline,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::NoObstacles => "no_obstacles",
            Mode::WithObstacles => "with_obstacles",
        })
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Neurosymbolic => "neurosymbolic",
            Method::Baseline => "baseline",
        })
    }
}

/// Full definition of one sweep.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub sigma_list: Vec<f64>,
    pub episodes_per_sigma: usize,
    pub mode: Mode,
    pub method: Method,
    pub master_seed: u64,
    pub stack: StackConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            sigma_list: DEFAULT_SIGMA_LIST.to_vec(),
            episodes_per_sigma: 200,
            mode: Mode::NoObstacles,
            method: Method::Neurosymbolic,
            master_seed: DEFAULT_MASTER_SEED,
            stack: StackConfig::default(),
        }
    }
}

/// The shipped bolt-disassembly domain, embedded so the harness works
/// from any working directory.
pub fn bolt_domain() -> Domain {
    parse_domain(
        include_str!("../../../domains/bolt_disassembly.pddl"),
        false,
    )
    .expect("embedded domain parses")
}

/// The shipped task for [`bolt_domain`].
pub fn bolt_problem(domain: &Domain) -> Problem {
    parse_problem(include_str!("../../../domains/bolt_task.pddl"), domain, false)
        .expect("embedded problem parses")
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-episode seed: a splitmix64 chain over (master, method, mode,
/// sigma index, episode index). Independent of every other episode.
pub fn episode_seed(
    master: u64,
    method: Method,
    mode: Mode,
    sigma_idx: usize,
    ep_idx: usize,
) -> u64 {
    let mut h = splitmix64(master);
    for v in [
        method as u64 + 1,
        mode as u64 + 101,
        sigma_idx as u64,
        ep_idx as u64,
    ] {
        h = splitmix64(h ^ v);
    }
    h
}

/// Samples one episode's world: bolt uniform in the workspace, believed
/// pose corrupted with N(0, sigma^2) per horizontal axis, and in
/// `with_obstacles` mode one movable obstacle (radius uniform over
/// [`OBSTACLE_RADII_MM`]) dropped near the bolt with the same noise.
pub fn generate_scene(
    sigma: f64,
    mode: Mode,
    cfg: &WorldConfig,
    rng: &mut impl Rng,
) -> WorldState {
    let bolt = [
        rng.random::<f64>() * WORKSPACE_MM,
        rng.random::<f64>() * WORKSPACE_MM,
        0.0,
    ];
    let noise = Normal::new(0.0, sigma).expect("sigma must be finite and >= 0");
    let believed = [bolt[0] + noise.sample(rng), bolt[1] + noise.sample(rng), 0.0];
    let obstacles = match mode {
        Mode::NoObstacles => Vec::new(),
        Mode::WithObstacles => {
            let radius = OBSTACLE_RADII_MM[rng.random_range(0..OBSTACLE_RADII_MM.len())];
            vec![Obstacle {
                center: [bolt[0] + noise.sample(rng), bolt[1] + noise.sample(rng)],
                radius_mm: radius,
                movable: true,
            }]
        }
    };
    WorldState::new(bolt, believed, obstacles, cfg)
}

/// Runs the episode at (sigma_idx, ep_idx) of a sweep. Pure function of
/// the config and the two indices.
pub fn run_indexed_episode(cfg: &ExperimentConfig, sigma_idx: usize, ep_idx: usize) -> EpisodeResult {
    let seed = episode_seed(cfg.master_seed, cfg.method, cfg.mode, sigma_idx, ep_idx);
    let mut scene_rng = ChaCha8Rng::seed_from_u64(seed);
    let world = generate_scene(cfg.sigma_list[sigma_idx], cfg.mode, &cfg.stack.world, &mut scene_rng);
    let exec_seed = splitmix64(seed);
    match cfg.method {
        Method::Baseline => run_baseline_episode(world, &cfg.stack, exec_seed),
        Method::Neurosymbolic => {
            let domain = bolt_domain();
            let problem = bolt_problem(&domain);
            run_episode(&domain, &problem, world, &cfg.stack, exec_seed)
        }
    }
}

/// One aggregated row of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub sigma: f64,
    pub episodes: usize,
    pub successes: usize,
    pub sr: f64,
    pub mean_steps: f64,
    pub mean_replans: f64,
    /// Fraction of episodes whose executed sequence contains Push.
    pub push_freq: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

fn aggregate(sigma: f64, results: &[EpisodeResult]) -> SweepRow {
    let n = results.len();
    let successes = results.iter().filter(|r| r.success).count();
    let mean = |f: &dyn Fn(&EpisodeResult) -> f64| {
        results.iter().map(|r| f(r)).sum::<f64>() / n as f64
    };
    SweepRow {
        sigma,
        episodes: n,
        successes,
        sr: successes as f64 / n as f64,
        mean_steps: mean(&|r| r.steps_executed as f64),
        mean_replans: mean(&|r| r.replans as f64),
        push_freq: results
            .iter()
            .filter(|r| r.actions.iter().any(|a| a == "Push"))
            .count() as f64
            / n as f64,
    }
}

/// Runs the full sweep. Episodes run in parallel; results are collected
/// by index before aggregation, so the output is independent of thread
/// count.
pub fn run_sweep(cfg: &ExperimentConfig) -> SweepResult {
    if cfg.method == Method::Neurosymbolic {
        let domain = bolt_domain();
        check_neural_predicates(&domain).expect("embedded domain declares the neural predicates");
    }
    let rows = cfg
        .sigma_list
        .iter()
        .enumerate()
        .map(|(sigma_idx, &sigma)| {
            let results: Vec<EpisodeResult> = (0..cfg.episodes_per_sigma)
                .into_par_iter()
                .map(|ep_idx| run_indexed_episode(cfg, sigma_idx, ep_idx))
                .collect();
            aggregate(sigma, &results)
        })
        .collect();
    SweepResult { rows }
}

/// Formats with 6 significant digits, plain decimal notation.
pub fn sig6(x: f64) -> String {
    if x == 0.0 {
        return "0.00000".to_string();
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (5 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}

pub fn csv_string(result: &SweepResult) -> String {
    let mut out = String::from("sigma,episodes,successes,sr,mean_steps,mean_replans,push_freq\n");
    for r in &result.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            sig6(r.sigma),
            r.episodes,
            r.successes,
            sig6(r.sr),
            sig6(r.mean_steps),
            sig6(r.mean_replans),
            sig6(r.push_freq),
        ));
    }
    out
}

pub fn emit_csv(result: &SweepResult, path: &Path) -> std::io::Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(csv_string(result).as_bytes())
}

/// Kind of plot to emit for a neurosymbolic/baseline result pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    SuccessRate,
    MeanSteps,
}

/// Renders an SVG line chart of the pair: success rate versus sigma
/// (y axis fixed to [0, 1]) or mean steps versus sigma (y axis sized to
/// the data). The x axis spans [0, max sigma].
pub fn plot_string(neuro: &SweepResult, baseline: &SweepResult, kind: PlotKind) -> String {
    assert_eq!(
        neuro.rows.iter().map(|r| r.sigma.to_bits()).collect::<Vec<_>>(),
        baseline.rows.iter().map(|r| r.sigma.to_bits()).collect::<Vec<_>>(),
        "both sweeps must share the sigma list"
    );
    let (title, y_label, value): (_, _, fn(&SweepRow) -> f64) = match kind {
        PlotKind::SuccessRate => ("Success rate vs sigma", "SR", |r| r.sr),
        PlotKind::MeanSteps => ("Mean steps vs sigma", "steps", |r| r.mean_steps),
    };
    let x_max = neuro
        .rows
        .iter()
        .map(|r| r.sigma)
        .fold(1e-9, f64::max);
    let y_max = match kind {
        PlotKind::SuccessRate => 1.0,
        PlotKind::MeanSteps => neuro
            .rows
            .iter()
            .chain(&baseline.rows)
            .map(value)
            .fold(1.0, f64::max)
            .ceil(),
    };

    const W: f64 = 480.0;
    const H: f64 = 320.0;
    const ML: f64 = 52.0; // left margin
    const MR: f64 = 16.0;
    const MT: f64 = 32.0;
    const MB: f64 = 40.0;
    let px = |x: f64| ML + x / x_max * (W - ML - MR);
    let py = |y: f64| H - MB - y / y_max * (H - MT - MB);

    let mut s = String::new();
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" \
         viewBox=\"0 0 {W} {H}\" font-family=\"monospace\" font-size=\"11\">\n"
    ));
    s.push_str(&format!(
        "  <text x=\"{:.1}\" y=\"18\" text-anchor=\"middle\">{title}</text>\n",
        (ML + W - MR) / 2.0
    ));
    // axes
    s.push_str(&format!(
        "  <line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"black\"/>\n",
        px(0.0),
        py(0.0),
        px(x_max),
        py(0.0)
    ));
    s.push_str(&format!(
        "  <line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"black\"/>\n",
        px(0.0),
        py(0.0),
        px(0.0),
        py(y_max)
    ));
    // ticks: 5 intervals on each axis
    for i in 0..=5 {
        let x = x_max * i as f64 / 5.0;
        s.push_str(&format!(
            "  <line x1=\"{0:.1}\" y1=\"{1:.1}\" x2=\"{0:.1}\" y2=\"{2:.1}\" stroke=\"black\"/>\n",
            px(x),
            py(0.0),
            py(0.0) + 4.0
        ));
        s.push_str(&format!(
            "  <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{:.1}</text>\n",
            px(x),
            py(0.0) + 16.0,
            x
        ));
        let y = y_max * i as f64 / 5.0;
        s.push_str(&format!(
            "  <line x1=\"{0:.1}\" y1=\"{2:.1}\" x2=\"{1:.1}\" y2=\"{2:.1}\" stroke=\"black\"/>\n",
            px(0.0) - 4.0,
            px(0.0),
            py(y)
        ));
        s.push_str(&format!(
            "  <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{:.2}</text>\n",
            px(0.0) - 7.0,
            py(y) + 4.0,
            y
        ));
    }
    // axis labels
    s.push_str(&format!(
        "  <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">sigma (mm)</text>\n",
        (ML + W - MR) / 2.0,
        H - 6.0
    ));
    s.push_str(&format!(
        "  <text x=\"14\" y=\"{:.1}\" text-anchor=\"middle\" transform=\"rotate(-90 14 {0:.1})\">{y_label}</text>\n",
        (MT + H - MB) / 2.0
    ));
    // series
    for (result, color, label, dy) in [
        (neuro, "#1f77b4", "neurosymbolic", 0.0),
        (baseline, "#d62728", "baseline", 16.0),
    ] {
        let points: Vec<String> = result
            .rows
            .iter()
            .map(|r| format!("{:.1},{:.1}", px(r.sigma), py(value(r))))
            .collect();
        if !points.is_empty() {
            s.push_str(&format!(
                "  <polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{}\"/>\n",
                points.join(" ")
            ));
        }
        // legend entry
        let ly = MT + 10.0 + dy;
        s.push_str(&format!(
            "  <line x1=\"{:.1}\" y1=\"{ly:.1}\" x2=\"{:.1}\" y2=\"{ly:.1}\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
            W - MR - 130.0,
            W - MR - 104.0
        ));
        s.push_str(&format!(
            "  <text x=\"{:.1}\" y=\"{:.1}\">{label}</text>\n",
            W - MR - 98.0,
            ly + 4.0
        ));
    }
    s.push_str("</svg>\n");
    s
}

pub fn emit_plot(
    neuro: &SweepResult,
    baseline: &SweepResult,
    kind: PlotKind,
    path: &Path,
) -> std::io::Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(plot_string(neuro, baseline, kind).as_bytes())
}

/// Empirical argmax accuracy of both grounders over labeled scenes.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationReport {
    pub samples: usize,
    pub aim_accuracy: f64,
    pub clear_accuracy: f64,
}

impl std::fmt::Display for CalibrationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "samples={} target_aim_accuracy={} target_clear_accuracy={}",
            self.samples,
            sig6(self.aim_accuracy),
            sig6(self.clear_accuracy)
        )
    }
}

/// Measures grounder accuracy against geometric truth on the experiment
/// scene distribution (sigma cycled over the default list, one obstacle
/// per scene so clearance is always finite, nutrunner moved above the
/// believed pose as after Approach). Observations are taken noise-free:
/// the reported number is the grounders' own error channel, not the
/// sensor's.
pub fn calibrate(
    samples: usize,
    seed: u64,
    world_cfg: &WorldConfig,
    grounder_cfg: &GrounderConfig,
) -> CalibrationReport {
    let mut noise_free = world_cfg.clone();
    noise_free.sigma_obs_mm = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut aim_ok = 0usize;
    let mut clear_ok = 0usize;
    for i in 0..samples {
        let sigma = DEFAULT_SIGMA_LIST[i % DEFAULT_SIGMA_LIST.len()];
        let world = generate_scene(sigma, Mode::WithObstacles, &noise_free, &mut rng);
        let world = ctl_approach(&world, world.believed_bolt_pos, &noise_free).world;
        let obs = observe(&world, &noise_free, &mut rng);
        let aim_truth = world.alignment_error() <= grounder_cfg.aim_threshold_e0_mm;
        let clear_truth = world.clearance() >= grounder_cfg.clear_threshold_d0_mm;
        let aim = ground_target_aim(obs.e_mm, grounder_cfg, &mut rng);
        let clear = ground_target_clear(obs.d_mm, grounder_cfg, &mut rng);
        if aim.argmax_true() == aim_truth {
            aim_ok += 1;
        }
        if clear.argmax_true() == clear_truth {
            clear_ok += 1;
        }
    }
    CalibrationReport {
        samples,
        aim_accuracy: aim_ok as f64 / samples as f64,
        clear_accuracy: clear_ok as f64 / samples as f64,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg(method: Method, mode: Mode) -> ExperimentConfig {
        ExperimentConfig {
            sigma_list: vec![0.5, 5.0],
            episodes_per_sigma: 20,
            mode,
            method,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn scene_moments_match_sigma() {
        let cfg = WorldConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let sigma = 3.0;
        let n = 10_000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let w = generate_scene(sigma, Mode::NoObstacles, &cfg, &mut rng);
            let dx = w.believed_bolt_pos[0] - w.bolt_pos[0];
            sum += dx;
            sum_sq += dx * dx;
        }
        let mean = sum / n as f64;
        let std = (sum_sq / n as f64 - mean * mean).sqrt();
        assert!(mean.abs() < 0.1, "mean {mean}");
        assert!((std - sigma).abs() < 0.1, "std {std}");
    }

    #[test]
    fn no_obstacle_scene_has_infinite_clearance() {
        let cfg = WorldConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let w = generate_scene(1.0, Mode::NoObstacles, &cfg, &mut rng);
        assert!(w.clearance().is_infinite());
    }

    #[test]
    fn tiny_sigma_obstacle_blocks_the_bolt() {
        let cfg = WorldConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let w = generate_scene(0.01, Mode::WithObstacles, &cfg, &mut rng);
            assert_eq!(w.obstacles.len(), 1);
            assert!(w.clearance() < cfg.d_required_mm);
        }
    }

    #[test]
    fn episode_seeds_differ_across_indices_and_conditions() {
        let mut seen = std::collections::HashSet::new();
        for method in [Method::Neurosymbolic, Method::Baseline] {
            for mode in [Mode::NoObstacles, Mode::WithObstacles] {
                for si in 0..3 {
                    for ei in 0..50 {
                        assert!(seen.insert(episode_seed(9, method, mode, si, ei)));
                    }
                }
            }
        }
    }

    #[test]
    fn indexed_episode_is_independent_of_order() {
        let cfg = small_cfg(Method::Neurosymbolic, Mode::NoObstacles);
        let late = run_indexed_episode(&cfg, 1, 7);
        let again = run_indexed_episode(&cfg, 1, 7);
        assert_eq!(late.actions, again.actions);
        assert_eq!(late.success, again.success);
        assert_eq!(late.replans, again.replans);
    }

    #[test]
    fn sweep_is_deterministic() {
        let cfg = small_cfg(Method::Baseline, Mode::NoObstacles);
        assert_eq!(run_sweep(&cfg), run_sweep(&cfg));
    }

    #[test]
    fn sweep_rows_are_consistent() {
        let cfg = small_cfg(Method::Neurosymbolic, Mode::WithObstacles);
        let result = run_sweep(&cfg);
        assert_eq!(result.rows.len(), 2);
        for row in &result.rows {
            assert_eq!(row.episodes, 20);
            assert!((row.sr - row.successes as f64 / row.episodes as f64).abs() < 1e-12);
            assert!((0.0..=1.0).contains(&row.sr));
            assert!((0.0..=1.0).contains(&row.push_freq));
            assert!(row.mean_steps >= 0.0);
        }
    }

    #[test]
    fn sig6_gives_six_significant_digits() {
        assert_eq!(sig6(0.5), "0.500000");
        assert_eq!(sig6(5.0), "5.00000");
        assert_eq!(sig6(0.0), "0.00000");
        assert_eq!(sig6(0.274), "0.274000");
        assert_eq!(sig6(123.456), "123.456");
        assert_eq!(sig6(3.145), "3.14500");
    }

    #[test]
    fn empty_sweep_gives_header_only_csv() {
        let csv = csv_string(&SweepResult::default());
        assert_eq!(csv, "sigma,episodes,successes,sr,mean_steps,mean_replans,push_freq\n");
    }

    #[test]
    fn csv_has_one_row_per_sigma_and_is_stable() {
        let cfg = small_cfg(Method::Baseline, Mode::WithObstacles);
        let a = csv_string(&run_sweep(&cfg));
        let b = csv_string(&run_sweep(&cfg));
        assert_eq!(a, b);
        assert_eq!(a.lines().count(), 3);
        assert!(a.starts_with("sigma,episodes,successes,"));
    }

    #[test]
    fn plot_is_wellformed_svg_with_two_polylines() {
        let cfg = small_cfg(Method::Baseline, Mode::NoObstacles);
        let result = run_sweep(&cfg);
        for kind in [PlotKind::SuccessRate, PlotKind::MeanSteps] {
            let svg = plot_string(&result, &result, kind);
            assert!(svg.starts_with("<svg "));
            assert!(svg.trim_end().ends_with("</svg>"));
            assert_eq!(svg.matches("<polyline ").count(), 2);
            assert!(svg.contains("legend") || svg.contains("neurosymbolic"));
            // every opened tag is closed or self-closing
            assert_eq!(svg.matches("<text").count(), svg.matches("</text>").count());
        }
    }

    #[test]
    #[should_panic(expected = "sigma list")]
    fn plot_rejects_mismatched_sigma_lists() {
        let a = run_sweep(&small_cfg(Method::Baseline, Mode::NoObstacles));
        let mut b = a.clone();
        b.rows[0].sigma = 9.0;
        plot_string(&a, &b, PlotKind::SuccessRate);
    }

    #[test]
    fn calibration_lands_on_the_error_channels() {
        let report = calibrate(
            10_000,
            7,
            &WorldConfig::default(),
            &GrounderConfig::default(),
        );
        assert!(
            (0.96..=1.0).contains(&report.aim_accuracy),
            "aim {}",
            report.aim_accuracy
        );
        assert!(
            (0.94..=0.98).contains(&report.clear_accuracy),
            "clear {}",
            report.clear_accuracy
        );
    }

    #[test]
    fn embedded_domain_and_problem_load() {
        let domain = bolt_domain();
        assert_eq!(domain.actions.len(), 5);
        check_neural_predicates(&domain).unwrap();
        let problem = bolt_problem(&domain);
        assert_eq!(problem.goal.len(), 1);
    }
}
