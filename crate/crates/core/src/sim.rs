//! Closed-loop simulation harness.
//!
//! A [`Scenario`] pairs a target motion profile with a quad initial condition
//! and timing grid. [`run_closed_loop`] samples the tracking state once per
//! control period, times the controller call, holds the returned input, and
//! integrates the plant with fixed 1 ms RK4 substeps. The resulting
//! [`SimTrace`] feeds [`compute_metrics`] (regulation quality) and
//! [`benchmark_controllers`] (compute-latency comparison).
//!
//! One run is strictly single threaded so per-step timing stays meaningful;
//! [`run_batch`] fans independent runs out across threads when the `parallel`
//! feature is enabled.

use std::io;
use std::time::Instant;

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::bvp::BvpController;
use crate::dynamics::{
    integrate_step, targeting_errors_from_state, Attitude, ControlInput, InertialState,
    PlantParams, SaturationLimits, TargetMotion, TargetingErrors,
};
use crate::eer::EerController;
use crate::gpm::{GpmController, StepFlags};

/// Simulation harness failure. Crashes are not errors: a run that hits the
/// ground returns a truncated, crash-flagged trace.
#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    BadScenario(String),
    #[error("trace contains no records")]
    EmptyTrace,
    #[error(
        "metrics window is empty: standoff error never stayed within \
         [{lo:.3}, {hi:.3}] m for {dwell_s:.3} s"
    )]
    EmptyWindow { lo: f64, hi: f64, dwell_s: f64 },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Zero-mean Gaussian noise added to the measured relative position before it
/// reaches the controller. The plant always integrates the true state, so
/// this models sensor error only. Seeded, hence reproducible.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseConfig {
    pub sigma_m: f64,
    pub seed: u64,
}

/// One closed-loop experiment: target motion, quad initial condition, timing
/// grid, plant parameters, and optional measurement noise.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    /// Quad start position in the inertial frame, m.
    pub quad_start_pos_m: Vector3<f64>,
    /// Quad start velocity in the inertial frame, m/s.
    pub quad_start_vel_mps: Vector3<f64>,
    pub motion: TargetMotion,
    pub duration_s: f64,
    /// Controller sampling period; must be an integer multiple of
    /// `inner_step_s`.
    pub control_period_s: f64,
    /// Plant integration substep under the held input.
    pub inner_step_s: f64,
    pub params: PlantParams,
    pub noise: Option<NoiseConfig>,
}

impl Scenario {
    /// Scenario with the default 20 ms control period and 1 ms plant substep.
    pub fn new(
        name: impl Into<String>,
        quad_start_pos_m: Vector3<f64>,
        quad_start_vel_mps: Vector3<f64>,
        motion: TargetMotion,
        duration_s: f64,
        params: PlantParams,
    ) -> Self {
        Scenario {
            name: name.into(),
            quad_start_pos_m,
            quad_start_vel_mps,
            motion,
            duration_s,
            control_period_s: 0.02,
            inner_step_s: 0.001,
            params,
            noise: None,
        }
    }

    pub fn with_noise(mut self, noise: NoiseConfig) -> Self {
        self.noise = Some(noise);
        self
    }

    /// Number of whole plant substeps per control period.
    fn inner_per_period(&self) -> usize {
        (self.control_period_s / self.inner_step_s).round() as usize
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::BadScenario(msg));
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return bad(format!("duration_s = {} must be positive", self.duration_s));
        }
        if !(self.control_period_s.is_finite() && self.control_period_s > 0.0) {
            return bad(format!(
                "control_period_s = {} must be positive",
                self.control_period_s
            ));
        }
        if !(self.inner_step_s.is_finite() && self.inner_step_s > 0.0) {
            return bad(format!("inner_step_s = {} must be positive", self.inner_step_s));
        }
        let ratio = self.control_period_s / self.inner_step_s;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) || ratio.round() < 1.0 {
            return bad(format!(
                "control_period_s = {} is not an integer multiple of inner_step_s = {}",
                self.control_period_s, self.inner_step_s
            ));
        }
        if self.duration_s < self.control_period_s {
            return bad(format!(
                "duration_s = {} is shorter than one control period {}",
                self.duration_s, self.control_period_s
            ));
        }
        if let Some(n) = self.noise {
            if !(n.sigma_m.is_finite() && n.sigma_m >= 0.0) {
                return bad(format!("noise sigma_m = {} must be nonnegative", n.sigma_m));
            }
        }
        Ok(())
    }
}

/// Anything that can close the loop: maps a measured tracking state to one
/// plant input. Implementations are stateful (warm starts, attitude memory),
/// so `reset` must restore the freshly constructed behavior.
pub trait Controller: Send {
    fn name(&self) -> &str;
    fn control(&mut self, x: &InertialState) -> (ControlInput, StepFlags);
    fn reset(&mut self);
}

impl Controller for EerController {
    fn name(&self) -> &str {
        "eer"
    }

    fn control(&mut self, x: &InertialState) -> (ControlInput, StepFlags) {
        let (u, saturated) = self.step(x);
        (u, StepFlags { saturated, nonconverged: false })
    }

    fn reset(&mut self) {
        EerController::reset(self);
    }
}

impl Controller for GpmController {
    fn name(&self) -> &str {
        "gpm"
    }

    fn control(&mut self, x: &InertialState) -> (ControlInput, StepFlags) {
        self.step(x)
    }

    fn reset(&mut self) {
        GpmController::reset(self);
    }
}

impl Controller for BvpController {
    fn name(&self) -> &str {
        "bvp"
    }

    fn control(&mut self, x: &InertialState) -> (ControlInput, StepFlags) {
        self.step(x)
    }

    fn reset(&mut self) {
        BvpController::reset(self);
    }
}

/// Plain PD baseline: position/velocity feedback toward a fixed standoff
/// point behind the target, decomposed into thrust and attitude. No drag
/// compensation; gravity feedforward is optional so the degenerate
/// zero-gain, no-feedforward configuration free-falls.
#[derive(Debug, Clone)]
pub struct PdConfig {
    pub kp: f64,
    pub kd: f64,
    pub standoff_m: f64,
    pub gravity_feedforward: bool,
    pub params: PlantParams,
    pub limits: Option<SaturationLimits>,
}

impl PdConfig {
    pub fn standard(params: PlantParams) -> Self {
        PdConfig {
            kp: 2.0,
            kd: 3.0,
            standoff_m: 3.0,
            gravity_feedforward: true,
            params,
            limits: Some(SaturationLimits::for_gravity(params.gravity)),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PdController {
    cfg: PdConfig,
}

impl PdController {
    pub fn new(cfg: PdConfig) -> Self {
        PdController { cfg }
    }
}

impl Controller for PdController {
    fn name(&self) -> &str {
        "pd-only"
    }

    fn control(&mut self, x: &InertialState) -> (ControlInput, StepFlags) {
        let cfg = &self.cfg;
        let aim = Vector3::new(-cfg.standoff_m, 0.0, 0.0);
        let accel = -(x.rel_pos - aim) * cfg.kp - x.rel_vel * cfg.kd;
        let mut f = accel;
        if cfg.gravity_feedforward {
            f.z += cfg.params.gravity;
        }
        let thrust = f.norm();
        let (pitch, roll) = if thrust > 1e-12 {
            (f.x.atan2(f.z), (-f.y / thrust).clamp(-1.0, 1.0).asin())
        } else {
            (0.0, 0.0)
        };
        let u = ControlInput::new(thrust, pitch, roll);
        match &cfg.limits {
            Some(l) => {
                let (u, saturated) = l.saturate(&u);
                (u, StepFlags { saturated, nonconverged: false })
            }
            None => (u, StepFlags::default()),
        }
    }

    fn reset(&mut self) {}
}

/// Emits a fixed, precomputed input with no computation at all. Exists to
/// isolate the harness's own timing overhead and to drive open-loop tests.
#[derive(Debug, Clone)]
pub struct NoopController {
    input: ControlInput,
}

impl NoopController {
    /// Holds exact gravity-cancelling thrust at level attitude.
    pub fn hover(params: &PlantParams) -> Self {
        NoopController { input: ControlInput::hover(params.gravity) }
    }

    pub fn with_input(input: ControlInput) -> Self {
        NoopController { input }
    }
}

impl Controller for NoopController {
    fn name(&self) -> &str {
        "noop"
    }

    fn control(&mut self, _x: &InertialState) -> (ControlInput, StepFlags) {
        (self.input, StepFlags::default())
    }

    fn reset(&mut self) {}
}

/// One control-period sample of a closed-loop run. The state and targeting
/// errors are the true plant values at the sample instant; `compute_s` is the
/// wall time of the controller call that produced `input`.
#[derive(Debug, Clone, Copy)]
pub struct StepRecord {
    pub t_s: f64,
    pub state: InertialState,
    pub attitude: Attitude,
    pub input: ControlInput,
    pub errors: TargetingErrors,
    /// Quad altitude in the inertial frame, m.
    pub z_q_m: f64,
    pub compute_s: f64,
    pub flags: StepFlags,
}

/// Full record of one closed-loop run.
#[derive(Debug, Clone)]
pub struct SimTrace {
    pub scenario: String,
    pub controller: String,
    /// Target altitude at t = 0; the hover reference for overshoot metrics.
    pub target_height_m: f64,
    pub records: Vec<StepRecord>,
    pub crashed: bool,
    /// Time at which the crash was detected, within one plant substep of the
    /// actual ground contact or divergence.
    pub crash_time_s: Option<f64>,
}

/// Runs one scenario under one controller. The controller is reset first, so
/// warm state never leaks between runs. Ground contact (`z_q < 0`) or
/// non-finite plant state truncates the trace and sets the crash flag within
/// one plant substep.
pub fn run_closed_loop(
    scenario: &Scenario,
    controller: &mut dyn Controller,
) -> Result<SimTrace, SimError> {
    scenario.validate()?;
    controller.reset();

    let target0 = scenario.motion.state_at(0.0);
    let mut x = InertialState::from_quad_target(
        scenario.quad_start_pos_m,
        scenario.quad_start_vel_mps,
        &target0,
    );

    let mut rng_noise = scenario.noise.and_then(|n| {
        if n.sigma_m > 0.0 {
            let normal = Normal::new(0.0, n.sigma_m).expect("validated sigma");
            Some((ChaCha8Rng::seed_from_u64(n.seed), normal))
        } else {
            None
        }
    });

    let n_steps = (scenario.duration_s / scenario.control_period_s).round() as usize;
    let inner_n = scenario.inner_per_period();
    let mut records = Vec::with_capacity(n_steps);
    let mut crashed = false;
    let mut crash_time_s = None;

    'outer: for k in 0..n_steps {
        let t_k = k as f64 * scenario.control_period_s;

        let mut measured = x;
        if let Some((rng, normal)) = rng_noise.as_mut() {
            for i in 0..3 {
                measured.rel_pos[i] += normal.sample(rng);
            }
        }

        let started = Instant::now();
        let (u, flags) = controller.control(&measured);
        let compute_s = started.elapsed().as_secs_f64();

        let errors = targeting_errors_from_state(&x, u.pitch);
        let z_q_m = x.rel_pos.z + scenario.motion.state_at(t_k).position.z;
        records.push(StepRecord {
            t_s: t_k,
            state: x,
            attitude: u.attitude(),
            input: u,
            errors,
            z_q_m,
            compute_s,
            flags,
        });

        for j in 0..inner_n {
            let t = t_k + j as f64 * scenario.inner_step_s;
            match integrate_step(&x, &u, &scenario.motion, t, scenario.inner_step_s, &scenario.params)
            {
                Ok(next) => {
                    x = next;
                    let t_next = t + scenario.inner_step_s;
                    let z_q = x.rel_pos.z + scenario.motion.state_at(t_next).position.z;
                    if z_q < 0.0 || !z_q.is_finite() {
                        crashed = true;
                        crash_time_s = Some(t_next);
                        break 'outer;
                    }
                }
                Err(_) => {
                    crashed = true;
                    crash_time_s = Some(t + scenario.inner_step_s);
                    break 'outer;
                }
            }
        }
    }

    Ok(SimTrace {
        scenario: scenario.name.clone(),
        controller: controller.name().to_string(),
        target_height_m: target0.position.z,
        records,
        crashed,
        crash_time_s,
    })
}

/// How [`compute_metrics`] finds the post-transient window and which records
/// count toward the error averages.
#[derive(Debug, Clone, Copy)]
pub struct MetricsConfig {
    /// Commanded standoff distance; `mae_dx_m` averages `|d_x - standoff|`.
    pub standoff_m: f64,
    /// Convergence band on `d_x`, m.
    pub band_m: (f64, f64),
    /// How long `d_x` must stay inside the band before the run counts as
    /// converged. The measurement window starts after the dwell completes.
    pub dwell_s: f64,
    /// When false, records flagged non-converged are excluded from the error
    /// averages (they still count toward timing).
    pub include_flagged: bool,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            standoff_m: 3.0,
            band_m: (2.8, 3.2),
            dwell_s: 1.0,
            include_flagged: false,
        }
    }
}

/// Regulation-quality and compute-latency summary of one trace. Error
/// averages cover the post-convergence window; timing covers every record.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Metrics {
    pub scenario: String,
    pub controller: String,
    pub n_records: usize,
    /// Start of the in-band dwell that qualified the run as converged.
    pub converged_at_s: f64,
    pub mae_dx_m: f64,
    pub mae_dy_m: f64,
    pub mae_dz_m: f64,
    pub max_abs_dz_m: f64,
    /// Peak altitude above the settled altitude (the run's final record)
    /// within the post-convergence window, >= 0. Captures whether the height
    /// approaches its steady value cleanly or swings past it.
    pub z_overshoot_m: f64,
    pub mean_compute_s: f64,
    pub median_compute_s: f64,
    pub p99_compute_s: f64,
    pub crashed: bool,
}

fn percentile_nearest_rank(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let rank = (p / 100.0 * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

fn timing_stats(records: &[StepRecord]) -> (f64, f64, f64) {
    let mut times: Vec<f64> = records.iter().map(|r| r.compute_s).collect();
    times.sort_by(|a, b| a.total_cmp(b));
    let mean = times.iter().sum::<f64>() / times.len() as f64;
    let median = percentile_nearest_rank(&times, 50.0);
    let p99 = percentile_nearest_rank(&times, 99.0);
    (mean, median, p99)
}

/// Finds the first instant where `d_x` enters the band and stays for the full
/// dwell. Returns the dwell start time and the index of the first record at
/// or after dwell completion.
fn find_window(trace: &SimTrace, cfg: &MetricsConfig) -> Option<(f64, usize)> {
    let records = &trace.records;
    let (lo, hi) = cfg.band_m;
    let mut run_start: Option<usize> = None;
    for (i, r) in records.iter().enumerate() {
        let in_band = r.errors.d_x >= lo && r.errors.d_x <= hi;
        if !in_band {
            run_start = None;
            continue;
        }
        let s = *run_start.get_or_insert(i);
        if records[i].t_s - records[s].t_s >= cfg.dwell_s {
            let t_c = records[s].t_s;
            let cutoff = t_c + cfg.dwell_s;
            let first = records.iter().position(|r| r.t_s >= cutoff)?;
            return Some((t_c, first));
        }
    }
    None
}

/// Summarizes a trace. Fails with [`SimError::EmptyWindow`] when the run
/// never converges (no in-band dwell), so callers cannot silently average
/// over a transient.
pub fn compute_metrics(trace: &SimTrace, cfg: &MetricsConfig) -> Result<Metrics, SimError> {
    if trace.records.is_empty() {
        return Err(SimError::EmptyTrace);
    }
    let (mean, median, p99) = timing_stats(&trace.records);

    let (t_c, first) = find_window(trace, cfg).ok_or(SimError::EmptyWindow {
        lo: cfg.band_m.0,
        hi: cfg.band_m.1,
        dwell_s: cfg.dwell_s,
    })?;
    let window = &trace.records[first..];
    let used: Vec<&StepRecord> = window
        .iter()
        .filter(|r| cfg.include_flagged || !r.flags.nonconverged)
        .collect();
    if used.is_empty() {
        return Err(SimError::EmptyWindow {
            lo: cfg.band_m.0,
            hi: cfg.band_m.1,
            dwell_s: cfg.dwell_s,
        });
    }

    let n = used.len() as f64;
    let mae_dx = used.iter().map(|r| (r.errors.d_x - cfg.standoff_m).abs()).sum::<f64>() / n;
    let mae_dy = used.iter().map(|r| r.errors.d_y.abs()).sum::<f64>() / n;
    let mae_dz = used.iter().map(|r| r.errors.d_z.abs()).sum::<f64>() / n;
    let max_abs_dz = used.iter().map(|r| r.errors.d_z.abs()).fold(0.0, f64::max);
    let z_steady = trace.records.last().expect("non-empty").z_q_m;
    let overshoot = window.iter().map(|r| r.z_q_m - z_steady).fold(0.0, f64::max);

    Ok(Metrics {
        scenario: trace.scenario.clone(),
        controller: trace.controller.clone(),
        n_records: trace.records.len(),
        converged_at_s: t_c,
        mae_dx_m: mae_dx,
        mae_dy_m: mae_dy,
        mae_dz_m: mae_dz,
        max_abs_dz_m: max_abs_dz,
        z_overshoot_m: overshoot,
        mean_compute_s: mean,
        median_compute_s: median,
        p99_compute_s: p99,
        crashed: trace.crashed,
    })
}

/// Timing-only fallback for traces that never converge (or crash): error
/// fields are NaN, timing fields are still exact.
pub fn timing_only_metrics(trace: &SimTrace) -> Result<Metrics, SimError> {
    if trace.records.is_empty() {
        return Err(SimError::EmptyTrace);
    }
    let (mean, median, p99) = timing_stats(&trace.records);
    Ok(Metrics {
        scenario: trace.scenario.clone(),
        controller: trace.controller.clone(),
        n_records: trace.records.len(),
        converged_at_s: f64::NAN,
        mae_dx_m: f64::NAN,
        mae_dy_m: f64::NAN,
        mae_dz_m: f64::NAN,
        max_abs_dz_m: f64::NAN,
        z_overshoot_m: f64::NAN,
        mean_compute_s: mean,
        median_compute_s: median,
        p99_compute_s: p99,
        crashed: trace.crashed,
    })
}

/// One benchmark run: a repetition of one controller on the shared scenario.
#[derive(Debug, Clone)]
pub struct BenchRow {
    pub rep: usize,
    pub metrics: Metrics,
}

/// Per-controller aggregate over all repetitions. Timing percentiles pool
/// every record of every repetition.
#[derive(Debug, Clone)]
pub struct BenchSummary {
    pub controller: String,
    pub reps: usize,
    pub mean_compute_s: f64,
    pub median_compute_s: f64,
    pub p99_compute_s: f64,
    /// 1 = fastest by median compute time.
    pub rank: usize,
    /// Mean compute time divided by the fastest controller's mean.
    pub ratio_vs_fastest: f64,
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub scenario: String,
    pub rows: Vec<BenchRow>,
    pub summaries: Vec<BenchSummary>,
}

impl BenchReport {
    /// Mean compute-time ratio between two controllers, `a / b`.
    pub fn mean_ratio(&self, a: &str, b: &str) -> Option<f64> {
        let find = |name: &str| {
            self.summaries
                .iter()
                .find(|s| s.controller == name)
                .map(|s| s.mean_compute_s)
        };
        Some(find(a)? / find(b)?)
    }
}

/// Runs every controller `reps` times on identical copies of the scenario
/// and aggregates timing. Error metrics fall back to the timing-only form
/// when a run never converges, so a slow-but-failing controller still shows
/// up in the latency table instead of aborting the comparison.
pub fn benchmark_controllers(
    scenario: &Scenario,
    controllers: &mut [Box<dyn Controller>],
    reps: usize,
    metrics_cfg: &MetricsConfig,
) -> Result<BenchReport, SimError> {
    if reps == 0 {
        return Err(SimError::BadScenario("reps must be at least 1".into()));
    }
    let mut rows = Vec::with_capacity(controllers.len() * reps);
    let mut summaries = Vec::with_capacity(controllers.len());

    for controller in controllers.iter_mut() {
        let mut all_times: Vec<f64> = Vec::new();
        for rep in 0..reps {
            let trace = run_closed_loop(scenario, controller.as_mut())?;
            all_times.extend(trace.records.iter().map(|r| r.compute_s));
            let metrics = match compute_metrics(&trace, metrics_cfg) {
                Ok(m) => m,
                Err(SimError::EmptyWindow { .. }) => timing_only_metrics(&trace)?,
                Err(e) => return Err(e),
            };
            rows.push(BenchRow { rep, metrics });
        }
        all_times.sort_by(|a, b| a.total_cmp(b));
        let mean = all_times.iter().sum::<f64>() / all_times.len() as f64;
        summaries.push(BenchSummary {
            controller: controller.name().to_string(),
            reps,
            mean_compute_s: mean,
            median_compute_s: percentile_nearest_rank(&all_times, 50.0),
            p99_compute_s: percentile_nearest_rank(&all_times, 99.0),
            rank: 0,
            ratio_vs_fastest: f64::NAN,
        });
    }

    let mut order: Vec<usize> = (0..summaries.len()).collect();
    order.sort_by(|&a, &b| summaries[a].median_compute_s.total_cmp(&summaries[b].median_compute_s));
    for (rank0, &idx) in order.iter().enumerate() {
        summaries[idx].rank = rank0 + 1;
    }
    if let Some(&fastest) = order.first() {
        let base = summaries[fastest].mean_compute_s;
        for s in &mut summaries {
            s.ratio_vs_fastest = s.mean_compute_s / base;
        }
    }

    Ok(BenchReport { scenario: scenario.name.clone(), rows, summaries })
}

fn run_one<F>(scenario: &Scenario, factory: &F) -> Result<SimTrace, SimError>
where
    F: Fn(&Scenario) -> Box<dyn Controller> + Sync,
{
    let mut controller = factory(scenario);
    run_closed_loop(scenario, controller.as_mut())
}

/// Runs many independent scenarios, each with a freshly built controller.
/// Data-parallel over scenarios when the `parallel` feature is on; the
/// per-run semantics are identical either way.
pub fn run_batch<F>(scenarios: &[Scenario], factory: F) -> Vec<Result<SimTrace, SimError>>
where
    F: Fn(&Scenario) -> Box<dyn Controller> + Sync,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        scenarios.par_iter().map(|s| run_one(s, &factory)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        scenarios.iter().map(|s| run_one(s, &factory)).collect()
    }
}

fn csv_cell(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        "nan".to_string()
    }
}

fn flags_token(f: &StepFlags) -> &'static str {
    match (f.saturated, f.nonconverged) {
        (false, false) => "ok",
        (true, false) => "sat",
        (false, true) => "nonconv",
        (true, true) => "sat+nonconv",
    }
}

/// Header of the per-step trace CSV.
pub const TRACE_CSV_HEADER: &str =
    "t,x1,x2,x3,x4,x5,x6,x7,x8,x9,u1,u2,u3,d_x,d_y,d_z,z_q,compute_ms,flags";

/// Writes one row per control step. All state columns are deterministic for
/// a fixed scenario and controller; only `compute_ms` varies across runs.
pub fn write_trace_csv<W: io::Write>(trace: &SimTrace, w: &mut W) -> io::Result<()> {
    writeln!(w, "{TRACE_CSV_HEADER}")?;
    for r in &trace.records {
        let x = r.state.as_vector9();
        let mut row = Vec::with_capacity(19);
        row.push(csv_cell(r.t_s));
        for i in 0..9 {
            row.push(csv_cell(x[i]));
        }
        for v in r.input.as_array() {
            row.push(csv_cell(v));
        }
        row.push(csv_cell(r.errors.d_x));
        row.push(csv_cell(r.errors.d_y));
        row.push(csv_cell(r.errors.d_z));
        row.push(csv_cell(r.z_q_m));
        row.push(csv_cell(r.compute_s * 1e3));
        writeln!(w, "{},{}", row.join(","), flags_token(&r.flags))?;
    }
    Ok(())
}

/// Header of the benchmark comparison CSV.
pub const BENCH_CSV_HEADER: &str =
    "controller,rank,reps,median_ms,mean_ms,p99_ms,ratio_vs_fastest";

/// Writes the per-controller comparison table, fastest first.
pub fn write_bench_csv<W: io::Write>(report: &BenchReport, w: &mut W) -> io::Result<()> {
    writeln!(w, "{BENCH_CSV_HEADER}")?;
    let mut by_rank: Vec<&BenchSummary> = report.summaries.iter().collect();
    by_rank.sort_by_key(|s| s.rank);
    for s in by_rank {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            s.controller,
            s.rank,
            s.reps,
            csv_cell(s.median_compute_s * 1e3),
            csv_cell(s.mean_compute_s * 1e3),
            csv_cell(s.p99_compute_s * 1e3),
            csv_cell(s.ratio_vs_fastest),
        )?;
    }
    Ok(())
}
