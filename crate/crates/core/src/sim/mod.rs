//! Scenario sampling and the Monte Carlo comparison of the four strategies.
//!
//! Each trial pairs one user from a regular grid with one target from a
//! random set, designs beams with every strategy, and scores them on the
//! true channels. Trial `k` draws from its own ChaCha stream keyed by
//! `(master_seed, k)`, so results do not depend on how trials are spread
//! over threads.

mod output;
pub mod stats;

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::beamforming::{
    design_beams, dominant_partial_direction, fixed_reflector_direction, los_direction,
    BeamformingError, DesignInputs, DesignParams, Strategy,
};
use crate::channel::{
    comm_channel, evaluate_link, sensing_channel, ArrayGeometry, ChannelError, ChannelSet,
};
use crate::format::db;
use crate::geometry::Vec3;
use crate::numerics::{norm_sqr, CMatrix, CVector};
use crate::raytracer::{PartialPath, RayTracer, TraceError};
use crate::scene::{load_scene_file, Scene, SceneError};
use crate::sdp::{SdpOptions, SdpStatus};

pub use output::{
    read_trials_csv, write_cdf_csv, write_outputs, write_summary_json, write_trials_csv, CdfTable,
    TrialsTable,
};

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "ISAC_TWIN_THREADS";

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Beamforming(#[from] BeamformingError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed trials file: {0}")]
    Trials(String),
}

pub type Result<T, E = SimError> = std::result::Result<T, E>;

/// Monte Carlo settings, stored as JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Free-form note, e.g. how the noise powers were chosen.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comment: Option<String>,
    /// Scene file; relative paths resolve against the config file's folder.
    pub scene: PathBuf,
    pub n_trials: usize,
    #[serde(default = "default_gamma_db")]
    pub gamma_u_db: f64,
    pub sigma_u2: f64,
    pub sigma_t2: f64,
    #[serde(default = "default_power")]
    pub power_budget: f64,
    pub rcs_m2: f64,
    pub max_reflections: usize,
    pub master_seed: u64,
    pub user_grid_spacing_m: f64,
    pub n_target_positions: usize,
}

fn default_gamma_db() -> f64 {
    10.0
}

fn default_power() -> f64 {
    1.0
}

/// UE noise power. On the canonical desk grid the weakest user needs about
/// 82% of the budget under maximum-ratio transmission to reach 10 dB, so all
/// users stay feasible while the SINR constraint binds behind the wall.
pub const DEFAULT_SIGMA_U2: f64 = 3e-10;
/// Sensing noise power, chosen so the full-channel median sensing SNR in
/// the reflection-dominated area of the canonical scene is about 15 dB.
pub const DEFAULT_SIGMA_T2: f64 = 2.2e-12;

impl ExperimentConfig {
    /// Desk-scale defaults: 2,000 trials, 200 targets, about 500 users.
    pub fn desk(scene: impl Into<PathBuf>) -> Self {
        Self {
            comment: None,
            scene: scene.into(),
            n_trials: 2000,
            gamma_u_db: 10.0,
            sigma_u2: DEFAULT_SIGMA_U2,
            sigma_t2: DEFAULT_SIGMA_T2,
            power_budget: 1.0,
            rcs_m2: 0.785,
            max_reflections: 2,
            master_seed: 2024,
            user_grid_spacing_m: 1.55,
            n_target_positions: 200,
        }
    }

    /// Full-scale preset: 10,000 trials, 1,000 targets, about 3,300 users.
    pub fn full(scene: impl Into<PathBuf>) -> Self {
        Self {
            n_trials: 10_000,
            user_grid_spacing_m: 0.61,
            n_target_positions: 1000,
            ..Self::desk(scene)
        }
    }

    /// Reads a config and makes its scene path absolute.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| SimError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut cfg: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| SimError::Config(format!("{}: {e}", path.display())))?;
        if cfg.scene.is_relative() {
            if let Some(dir) = path.parent() {
                cfg.scene = dir.join(&cfg.scene);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(SimError::Config(m));
        if self.n_trials == 0 {
            return bad("n_trials must be positive".into());
        }
        if self.n_target_positions == 0 {
            return bad("n_target_positions must be positive".into());
        }
        for (name, v) in [
            ("sigma_u2", self.sigma_u2),
            ("sigma_t2", self.sigma_t2),
            ("power_budget", self.power_budget),
            ("rcs_m2", self.rcs_m2),
            ("user_grid_spacing_m", self.user_grid_spacing_m),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !self.gamma_u_db.is_finite() {
            return bad("gamma_u_db must be finite".into());
        }
        if self.max_reflections > crate::raytracer::MAX_REFLECTIONS {
            return bad(format!(
                "max_reflections must be at most {}",
                crate::raytracer::MAX_REFLECTIONS
            ));
        }
        Ok(())
    }

    pub fn gamma_linear(&self) -> f64 {
        10f64.powf(self.gamma_u_db / 10.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AreaLabel {
    LosDominant,
    NlosDominant,
}

impl AreaLabel {
    pub const ALL: [AreaLabel; 2] = [AreaLabel::LosDominant, AreaLabel::NlosDominant];

    pub fn as_str(self) -> &'static str {
        match self {
            AreaLabel::LosDominant => "los_dominant",
            AreaLabel::NlosDominant => "nlos_dominant",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        AreaLabel::ALL.into_iter().find(|a| a.as_str() == s)
    }

    /// Reflection-dominated iff the strongest partial path bounces.
    pub fn classify(partial: &[PartialPath]) -> Self {
        let strongest = partial.iter().max_by(|a, b| {
            a.beta1
                .norm()
                .total_cmp(&b.beta1.norm())
                .then(b.delay_s.total_cmp(&a.delay_s))
        });
        match strongest {
            Some(p) if p.is_reflection() => AreaLabel::NlosDominant,
            _ => AreaLabel::LosDominant,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserSample {
    pub position: Vec3,
    pub h_u: CVector,
}

impl UserSample {
    /// Traces the downlink to one user position.
    pub fn trace(
        tracer: &RayTracer<'_>,
        tx: &ArrayGeometry,
        position: Vec3,
        max_reflections: usize,
    ) -> Result<Self> {
        let s = tracer.scene();
        let paths = tracer.trace_point_to_point(s.bs.position, position, max_reflections)?;
        Ok(Self {
            position,
            h_u: comm_channel(&paths, tx),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetSample {
    pub position: Vec3,
    pub h_t: CMatrix,
    pub partial_paths: Vec<PartialPath>,
    pub los: (f64, f64),
    pub fixed_reflector: Option<(f64, f64)>,
    /// `(az, el, β)` of the strongest partial path.
    pub dominant: Option<(f64, f64, Complex64)>,
    pub area: AreaLabel,
}

impl TargetSample {
    /// Traces one target position and derives every strategy input.
    pub fn trace(
        tracer: &RayTracer<'_>,
        tx: &ArrayGeometry,
        rx: &ArrayGeometry,
        position: Vec3,
        rcs_m2: f64,
        max_reflections: usize,
    ) -> Result<Self> {
        let s = tracer.scene();
        let partial = tracer.partial_trace(position, max_reflections)?;
        let sensing = tracer.compose_from_partial(&partial, position, rcs_m2)?;
        let fixed_reflector = match s.fixed_reflector {
            Some(_) => Some(fixed_reflector_direction(s, position)?),
            None => None,
        };
        Ok(Self {
            position,
            h_t: sensing_channel(&sensing, tx, rx),
            los: los_direction(s.bs.position, position)?,
            fixed_reflector,
            dominant: dominant_partial_direction(&partial).ok(),
            area: AreaLabel::classify(&partial),
            partial_paths: partial,
        })
    }
}

fn pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    let n = threads
        .or_else(|| {
            std::env::var(THREADS_ENV)
                .ok()
                .and_then(|v| v.trim().parse().ok())
        })
        .unwrap_or(0);
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map_err(|e| SimError::Config(format!("thread pool: {e}")))
}

/// Grid points `min + k·spacing` per axis, boundary inclusive:
/// `(⌊W/s⌋ + 1) · (⌊H/s⌋ + 1)` users, row by row along x.
pub fn user_grid(s: &Scene, spacing_m: f64) -> Result<Vec<Vec3>> {
    if !(spacing_m > 0.0) {
        return Err(SimError::Config(format!(
            "grid spacing must be positive, got {spacing_m}"
        )));
    }
    let r = &s.ue_region;
    let (w, h) = (r.max[0] - r.min[0], r.max[1] - r.min[1]);
    if !(w >= 0.0 && h >= 0.0) {
        return Err(SimError::Config("user region is empty".into()));
    }
    let nx = (w / spacing_m + 1e-9).floor() as usize + 1;
    let ny = (h / spacing_m + 1e-9).floor() as usize + 1;
    let mut out = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            out.push(Vec3::new(
                r.min[0] + i as f64 * spacing_m,
                r.min[1] + j as f64 * spacing_m,
                r.height,
            ));
        }
    }
    Ok(out)
}

/// Users on the grid with their traced downlink channels.
pub fn generate_user_set(
    s: &Scene,
    spacing_m: f64,
    max_reflections: usize,
) -> Result<Vec<UserSample>> {
    generate_user_set_in(s, spacing_m, max_reflections, None)
}

fn generate_user_set_in(
    s: &Scene,
    spacing_m: f64,
    max_reflections: usize,
    threads: Option<usize>,
) -> Result<Vec<UserSample>> {
    let positions = user_grid(s, spacing_m)?;
    let tracer = RayTracer::new(s);
    let tx = s.bs.tx_array.geometry();
    pool(threads)?.install(|| {
        positions
            .par_iter()
            .map(|&p| UserSample::trace(&tracer, &tx, p, max_reflections))
            .collect()
    })
}

/// `n` uniformly placed targets with true sensing channels and every
/// direction the strategies need.
pub fn generate_target_set(
    s: &Scene,
    n: usize,
    seed: u64,
    rcs_m2: f64,
    max_reflections: usize,
) -> Result<Vec<TargetSample>> {
    generate_target_set_in(s, n, seed, rcs_m2, max_reflections, None)
}

/// Stream reserved for target placement; trial `k` uses stream `k + 1`.
const TARGET_STREAM: u64 = 0;

fn target_positions(s: &Scene, n: usize, seed: u64) -> Vec<Vec3> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(TARGET_STREAM);
    let r = &s.target_region;
    (0..n)
        .map(|_| {
            let x = r.min[0] + (r.max[0] - r.min[0]) * rng.random::<f64>();
            let y = r.min[1] + (r.max[1] - r.min[1]) * rng.random::<f64>();
            Vec3::new(x, y, r.height)
        })
        .collect()
}

fn generate_target_set_in(
    s: &Scene,
    n: usize,
    seed: u64,
    rcs_m2: f64,
    max_reflections: usize,
    threads: Option<usize>,
) -> Result<Vec<TargetSample>> {
    if n == 0 {
        return Err(SimError::Config("need at least one target".into()));
    }
    let positions = target_positions(s, n, seed);
    let tracer = RayTracer::new(s);
    let tx = s.bs.tx_array.geometry();
    let rx = s.bs.rx_array.geometry();
    pool(threads)?.install(|| {
        positions
            .par_iter()
            .map(|&p| TargetSample::trace(&tracer, &tx, &rx, p, rcs_m2, max_reflections))
            .collect()
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeStatus {
    Optimal,
    MaxIter,
    Infeasible,
}

impl OutcomeStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            OutcomeStatus::Optimal => "optimal",
            OutcomeStatus::MaxIter => "max_iter",
            OutcomeStatus::Infeasible => "infeasible",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            OutcomeStatus::Optimal,
            OutcomeStatus::MaxIter,
            OutcomeStatus::Infeasible,
        ]
        .into_iter()
        .find(|x| x.as_str() == s)
    }

    pub fn is_feasible(self) -> bool {
        self != OutcomeStatus::Infeasible
    }
}

/// Result of one strategy on one trial, scored on the true channels.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyOutcome {
    pub strategy: Strategy,
    pub status: OutcomeStatus,
    pub sinr: f64,
    pub snr: f64,
    pub power: f64,
    pub rank1_u: f64,
    pub rank1_t: f64,
    pub repaired: bool,
}

impl StrategyOutcome {
    pub fn sinr_db(&self) -> f64 {
        db(self.sinr)
    }

    pub fn snr_db(&self) -> f64 {
        db(self.snr)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial_id: usize,
    pub ue_position: Vec3,
    pub target_position: Vec3,
    pub area: AreaLabel,
    /// `‖H_t‖_F²` of the sampled target.
    pub channel_power: f64,
    /// One entry per strategy, in [`Strategy::ALL`] order.
    pub outcomes: Vec<StrategyOutcome>,
}

impl TrialRecord {
    pub fn outcome(&self, k: Strategy) -> &StrategyOutcome {
        self.outcomes
            .iter()
            .find(|o| o.strategy == k)
            .expect("every strategy recorded")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaSummary {
    pub area: AreaLabel,
    pub n_feasible: usize,
    pub median_snr_db: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategySummary {
    pub strategy: Strategy,
    pub n_repaired: usize,
    pub n_max_iter: usize,
    pub areas: Vec<AreaSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n_trials: usize,
    pub n_infeasible: usize,
    pub n_los_dominant: usize,
    pub n_nlos_dominant: usize,
    /// Mean `‖H_t‖_F²` over trials in each area.
    pub mean_channel_power_los_dominant: Option<f64>,
    pub mean_channel_power_nlos_dominant: Option<f64>,
    pub strategies: Vec<StrategySummary>,
}

impl Summary {
    pub fn median(&self, k: Strategy, area: AreaLabel) -> Option<f64> {
        self.strategies
            .iter()
            .find(|s| s.strategy == k)?
            .areas
            .iter()
            .find(|a| a.area == area)?
            .median_snr_db
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloOutput {
    pub trials: Vec<TrialRecord>,
    pub summary: Summary,
}

impl MonteCarloOutput {
    /// Feasible sensing SNRs in dB of one strategy within one area.
    pub fn snr_db(&self, k: Strategy, area: AreaLabel) -> Vec<f64> {
        snr_values(&self.trials, k, area)
    }
}

fn snr_values(trials: &[TrialRecord], k: Strategy, area: AreaLabel) -> Vec<f64> {
    trials
        .iter()
        .filter(|t| t.area == area)
        .map(|t| t.outcome(k))
        .filter(|o| o.status.is_feasible())
        .map(|o| o.snr_db())
        .collect()
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| sum / n as f64)
}

pub fn summarize(trials: &[TrialRecord]) -> Summary {
    let count = |a| trials.iter().filter(|t| t.area == a).count();
    let power = |a| {
        mean(
            trials
                .iter()
                .filter(|t| t.area == a)
                .map(|t| t.channel_power),
        )
    };
    Summary {
        n_trials: trials.len(),
        n_infeasible: trials
            .iter()
            .filter(|t| t.outcomes.iter().any(|o| !o.status.is_feasible()))
            .count(),
        n_los_dominant: count(AreaLabel::LosDominant),
        n_nlos_dominant: count(AreaLabel::NlosDominant),
        mean_channel_power_los_dominant: power(AreaLabel::LosDominant),
        mean_channel_power_nlos_dominant: power(AreaLabel::NlosDominant),
        strategies: Strategy::ALL
            .iter()
            .map(|&k| StrategySummary {
                strategy: k,
                n_repaired: trials.iter().filter(|t| t.outcome(k).repaired).count(),
                n_max_iter: trials
                    .iter()
                    .filter(|t| t.outcome(k).status == OutcomeStatus::MaxIter)
                    .count(),
                areas: AreaLabel::ALL
                    .iter()
                    .map(|&a| {
                        let v = snr_values(trials, k, a);
                        AreaSummary {
                            area: a,
                            n_feasible: v.len(),
                            median_snr_db: stats::median(&v),
                        }
                    })
                    .collect(),
            })
            .collect(),
    }
}

/// Designs and scores every strategy for one user/target pair.
pub fn run_trial(
    trial_id: usize,
    tx: &ArrayGeometry,
    user: &UserSample,
    target: &TargetSample,
    cfg: &ExperimentConfig,
) -> Result<TrialRecord> {
    let params = DesignParams {
        gamma_u: cfg.gamma_linear(),
        sigma_u2: cfg.sigma_u2,
        power_budget: cfg.power_budget,
        sdp: SdpOptions::default(),
    };
    let inputs = DesignInputs {
        tx,
        h_u: &user.h_u,
        h_t: Some(&target.h_t),
        los: Some(target.los),
        fixed_reflector: target.fixed_reflector,
        partial_paths: Some(&target.partial_paths),
    };
    let cs = ChannelSet {
        h_u: user.h_u.clone(),
        h_t: target.h_t.clone(),
    };
    let mut outcomes = Vec::with_capacity(Strategy::ALL.len());
    for k in Strategy::ALL {
        let outcome = match design_beams(k, &inputs, &params) {
            Ok(sol) => {
                let m = evaluate_link(
                    &sol.f_u,
                    &sol.f_t,
                    &cs,
                    cfg.sigma_u2,
                    cfg.sigma_t2,
                    cfg.power_budget,
                )?;
                StrategyOutcome {
                    strategy: k,
                    status: match sol.status {
                        SdpStatus::Optimal => OutcomeStatus::Optimal,
                        _ => OutcomeStatus::MaxIter,
                    },
                    sinr: m.sinr_u,
                    snr: m.snr_t,
                    power: norm_sqr(&sol.f_u) + norm_sqr(&sol.f_t),
                    rank1_u: sol.rank1_ratio_u,
                    rank1_t: sol.rank1_ratio_t,
                    repaired: sol.repaired,
                }
            }
            Err(BeamformingError::Infeasible { .. }) => StrategyOutcome {
                strategy: k,
                status: OutcomeStatus::Infeasible,
                sinr: 0.0,
                snr: 0.0,
                power: 0.0,
                rank1_u: 0.0,
                rank1_t: 0.0,
                repaired: false,
            },
            Err(e) => return Err(e.into()),
        };
        outcomes.push(outcome);
    }
    Ok(TrialRecord {
        trial_id,
        ue_position: user.position,
        target_position: target.position,
        area: target.area,
        channel_power: target.h_t.frobenius_norm().powi(2),
        outcomes,
    })
}

/// Runs the experiment on an already loaded scene. `threads = None` reads
/// [`THREADS_ENV`] and otherwise uses every core.
pub fn run_montecarlo_with_scene(
    cfg: &ExperimentConfig,
    scene: &Scene,
    threads: Option<usize>,
) -> Result<MonteCarloOutput> {
    cfg.validate()?;
    let users = generate_user_set_in(scene, cfg.user_grid_spacing_m, cfg.max_reflections, threads)?;
    if users.is_empty() {
        return Err(SimError::Config("user grid is empty".into()));
    }
    let targets = generate_target_set_in(
        scene,
        cfg.n_target_positions,
        cfg.master_seed,
        cfg.rcs_m2,
        cfg.max_reflections,
        threads,
    )?;
    let tx = scene.bs.tx_array.geometry();
    let trials: Vec<TrialRecord> = pool(threads)?.install(|| {
        (0..cfg.n_trials)
            .into_par_iter()
            .map(|k| {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.master_seed);
                rng.set_stream(k as u64 + 1);
                let u = rng.random_range(0..users.len());
                let t = rng.random_range(0..targets.len());
                run_trial(k, &tx, &users[u], &targets[t], cfg)
            })
            .collect::<Result<_>>()
    })?;
    let summary = summarize(&trials);
    Ok(MonteCarloOutput { trials, summary })
}

/// Loads the configured scene and runs the experiment.
pub fn run_montecarlo(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<MonteCarloOutput> {
    cfg.validate()?;
    let scene = load_scene_file(&cfg.scene)?;
    run_montecarlo_with_scene(cfg, &scene, threads)
}
