//! Exponential learning: users accumulate marginal utilities into scores and
//! map scores to powers through the exponential (Gibbs) map with a slack
//! unit, which keeps every iterate strictly inside the feasible set.

use std::collections::VecDeque;

use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::channel::FadingProcess;
use crate::game::{interference_from_sinr, measured_rate_marginal, Game, PowerProfile};
use crate::pricing::{flat_ramp, user_ramp};
use crate::{oracle, Error, Result};

/// Step-size sequence `γ_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepSchedule {
    Constant {
        gamma: f64,
    },
    /// `γ_n = γ0 · n^(−β)`.
    PowerLaw {
        gamma0: f64,
        beta: f64,
    },
    /// Search-then-converge: constant `gamma_explore` until the potential
    /// starts oscillating, then `γ_switch · (n − n_switch + 1)^(−beta_converge)`.
    Stc {
        gamma_explore: f64,
        beta_converge: f64,
        window: usize,
        alternations: usize,
    },
}

impl StepSchedule {
    pub fn stc(gamma_explore: f64) -> Self {
        StepSchedule::Stc {
            gamma_explore,
            beta_converge: 0.6,
            window: 6,
            alternations: 3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |x: f64, field: &str| {
            if x.is_finite() && x > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(field, "step size must be positive"))
            }
        };
        match *self {
            StepSchedule::Constant { gamma } => positive(gamma, "run.gamma"),
            StepSchedule::PowerLaw { gamma0, beta } => {
                positive(gamma0, "run.gamma")?;
                if !(beta > 0.5 && beta <= 1.0) {
                    return Err(Error::invalid("run.beta", "power-law exponent must lie in (1/2, 1]"));
                }
                Ok(())
            }
            StepSchedule::Stc {
                gamma_explore,
                beta_converge,
                window,
                alternations,
            } => {
                positive(gamma_explore, "run.gamma")?;
                if !(beta_converge > 0.5 && beta_converge <= 1.0) {
                    return Err(Error::invalid("run.beta", "decay exponent must lie in (1/2, 1]"));
                }
                if window < 4 {
                    return Err(Error::invalid("run.window", "oscillation window must be at least 4"));
                }
                if alternations == 0 || alternations > window - 2 {
                    return Err(Error::invalid("run.alternations", "must be in 1..=window-2"));
                }
                Ok(())
            }
        }
    }

    pub fn label(&self) -> String {
        match *self {
            StepSchedule::Constant { gamma } => format!("constant({gamma})"),
            StepSchedule::PowerLaw { gamma0, beta } => format!("power_law({gamma0},{beta})"),
            StepSchedule::Stc { gamma_explore, .. } => format!("stc({gamma_explore})"),
        }
    }
}

/// Runtime state of a schedule (the STC switch point and its history window).
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleState {
    schedule: StepSchedule,
    switched: Option<(usize, f64)>,
    history: VecDeque<f64>,
}

impl ScheduleState {
    pub fn new(schedule: StepSchedule) -> Self {
        ScheduleState {
            schedule,
            switched: None,
            history: VecDeque::new(),
        }
    }

    /// Step size for iteration `n ≥ 1`.
    pub fn gamma(&self, n: usize) -> f64 {
        let n = n.max(1) as f64;
        match self.schedule {
            StepSchedule::Constant { gamma } => gamma,
            StepSchedule::PowerLaw { gamma0, beta } => gamma0 * n.powf(-beta),
            StepSchedule::Stc {
                gamma_explore,
                beta_converge,
                ..
            } => match self.switched {
                None => gamma_explore,
                Some((n_switch, gamma_switch)) => {
                    gamma_switch * (n - n_switch as f64 + 1.0).max(1.0).powf(-beta_converge)
                }
            },
        }
    }

    /// Feeds the potential reached after iteration `n`.
    pub fn observe(&mut self, n: usize, potential: f64) {
        if let StepSchedule::Stc {
            gamma_explore,
            window,
            alternations,
            ..
        } = self.schedule
        {
            if self.switched.is_some() {
                return;
            }
            self.history.push_back(potential);
            while self.history.len() > window {
                self.history.pop_front();
            }
            if self.history.len() == window {
                let w: Vec<f64> = self.history.iter().copied().collect();
                if detect_oscillation(&w, alternations).unwrap_or(false) {
                    self.switched = Some((n + 1, gamma_explore));
                }
            }
        }
    }

    /// Iteration at which the decaying phase starts, if it has.
    pub fn switch_iteration(&self) -> Option<usize> {
        self.switched.map(|(n, _)| n)
    }
}

/// Differences below this magnitude count as flat.
pub const FLAT_DIFFERENCE: f64 = 1e-12;

/// True when successive differences of `window` change sign at least
/// `alternations` times.
pub fn detect_oscillation(window: &[f64], alternations: usize) -> Result<bool> {
    if window.len() < 4 {
        return Err(Error::WindowTooShort {
            len: window.len(),
            min: 4,
        });
    }
    let signs: Vec<i8> = window
        .windows(2)
        .map(|w| {
            let d = w[1] - w[0];
            if d.abs() < FLAT_DIFFERENCE {
                0
            } else if d > 0.0 {
                1
            } else {
                -1
            }
        })
        .collect();
    let flips = signs
        .windows(2)
        .filter(|pair| pair[0] != 0 && pair[1] != 0 && pair[0] != pair[1])
        .count();
    Ok(flips >= alternations)
}

/// `p_s = P · e^{y_s} / (1 + Σ_r e^{y_r})`, evaluated with a max shift.
pub fn gibbs_map(scores: ArrayView1<f64>, max_power: f64) -> Array1<f64> {
    let m = scores.iter().cloned().fold(0.0f64, f64::max);
    let exps = scores.mapv(|y| (y - m).exp());
    let denom = (-m).exp() + exps.sum();
    exps.mapv(|e| max_power * e / denom)
}

/// How users evaluate their marginal utilities inside a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarginalForm {
    /// `g / (σ² + w)` from the full snapshot.
    #[default]
    FullInformation,
    /// `(1/p) · sinr / (1 + sinr)` from each user's own measurements.
    Measured,
}

/// What user `k` can observe about subcarrier activity: its own gains,
/// powers and SINRs.
#[derive(Debug, Clone, Copy)]
pub struct LocalMeasurements<'a> {
    pub gains: ArrayView1<'a, f64>,
    pub powers: ArrayView1<'a, f64>,
    pub sinr: ArrayView1<'a, f64>,
}

/// Marginal utilities of user `k` computed from local measurements and the
/// publicly known noise levels, tolerances and price functions.
pub fn local_marginals(game: &Game, k: usize, meas: LocalMeasurements<'_>) -> Array1<f64> {
    let pricing = game.pricing();
    Array1::from_shape_fn(meas.gains.len(), |s| {
        let g = meas.gains[s];
        let p = meas.powers[s];
        let sinr = meas.sinr[s];
        let user = user_ramp(pricing, k, g, game.i_max()[s], game.max_power()[k]).slope_at(p);
        match interference_from_sinr(g, p, sinr, game.noise()[s]) {
            Ok(w) => {
                let flat = flat_ramp(pricing, game.i_max()[s]).slope_at(w.max(0.0));
                measured_rate_marginal(p, sinr) - g * flat - user
            }
            // Silent or unseen subcarrier: the gain is zero or the power is,
            // and the rate term vanishes with it.
            Err(_) => -user,
        }
    })
}

/// Scores, iteration counter and schedule state.
#[derive(Debug, Clone)]
pub struct LearningState {
    scores: Array2<f64>,
    powers: PowerProfile,
    iteration: usize,
    schedule: ScheduleState,
}

impl LearningState {
    /// Zero scores: every user starts at `P_k / (S + 1)` per subcarrier.
    pub fn new(max_power: &[f64], num_subcarriers: usize, schedule: StepSchedule) -> Self {
        Self::from_scores(Array2::zeros((max_power.len(), num_subcarriers)), max_power, schedule)
    }

    pub fn from_scores(scores: Array2<f64>, max_power: &[f64], schedule: StepSchedule) -> Self {
        let powers = powers_from_scores(&scores, max_power);
        LearningState {
            scores,
            powers,
            iteration: 0,
            schedule: ScheduleState::new(schedule),
        }
    }

    pub fn scores(&self) -> &Array2<f64> {
        &self.scores
    }

    pub fn powers(&self) -> &PowerProfile {
        &self.powers
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn schedule(&self) -> &ScheduleState {
        &self.schedule
    }

    pub fn schedule_mut(&mut self) -> &mut ScheduleState {
        &mut self.schedule
    }
}

fn powers_from_scores(scores: &Array2<f64>, max_power: &[f64]) -> PowerProfile {
    let mut p = Array2::zeros(scores.dim());
    for (k, row) in scores.rows().into_iter().enumerate() {
        p.row_mut(k).assign(&gibbs_map(row, max_power[k]));
    }
    PowerProfile::from_array(p)
}

/// What one update did.
#[derive(Debug, Clone, PartialEq)]
pub struct StepInfo {
    pub iteration: usize,
    pub gamma: f64,
    /// `max |Δy_ks|`.
    pub max_score_increment: f64,
    /// Largest of `|Δp_ks| / P_k` over all carriers and `Δp_ks / p_ks` over
    /// carriers whose power grew, so a carrier still gaining power from a
    /// tiny level counts as moving.
    pub power_change: f64,
}

/// How the marginal utilities are scaled before they enter the scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepScaling {
    /// `y_ks += γ_n v_ks`.
    Raw,
    /// `y_ks += clamp(γ_n v_ks / m_k, -γ_n, γ_n)` with
    /// `m_k = max(max_s v_ks, max_s r_ks / 10)`, where `r_ks` is the rate
    /// marginal `g_ks / (σ²_s + w_s)`.
    #[default]
    PeakRateMarginal,
}

fn peak_marginal(v: ArrayView1<f64>, r: ArrayView1<f64>) -> f64 {
    let v_max = v.iter().copied().fold(0.0f64, f64::max);
    let r_max = r.iter().copied().fold(0.0f64, f64::max);
    v_max.max(0.1 * r_max)
}

/// One round of exponential learning on `game`: every user measures at its
/// current powers, adds the scaled marginals to its scores and re-maps to
/// powers.
///
/// Under [`StepScaling::PeakRateMarginal`] the step is dimensionless, so one
/// schedule works across channel gains spanning several orders of magnitude.
/// The best carrier of a user moves by exactly `γ_n` while it still gains from
/// more power; no score moves by more than `γ_n`.
pub fn xl_step(state: &mut LearningState, game: &Game, form: MarginalForm, scaling: StepScaling) -> StepInfo {
    let n = state.iteration + 1;
    let gamma = state.schedule.gamma(n);
    let current = &state.powers;
    let (v, rate_marginals) = match form {
        MarginalForm::FullInformation => {
            let w = game.interference(current);
            let r = Array2::from_shape_fn(game.gains().dim(), |(k, s)| game.gains()[[k, s]] / (game.noise()[s] + w[s]));
            (game.marginals(current), r)
        }
        MarginalForm::Measured => {
            let sinr = game.sinr(current);
            let mut v = Array2::zeros(current.as_array().dim());
            for k in 0..game.num_users() {
                let meas = LocalMeasurements {
                    gains: game.gains().row(k),
                    powers: current.user(k),
                    sinr: sinr.row(k),
                };
                v.row_mut(k).assign(&local_marginals(game, k, meas));
            }
            let r = Array2::from_shape_fn(sinr.dim(), |(k, s)| {
                let p = current.get(k, s);
                if p > 0.0 {
                    measured_rate_marginal(p, sinr[[k, s]])
                } else {
                    0.0
                }
            });
            (v, r)
        }
    };
    let mut max_inc = 0.0f64;
    for k in 0..game.num_users() {
        let scale = match scaling {
            StepScaling::Raw => gamma,
            StepScaling::PeakRateMarginal => {
                let m = peak_marginal(v.row(k), rate_marginals.row(k));
                if m > 0.0 {
                    gamma / m
                } else {
                    gamma * game.max_power()[k]
                }
            }
        };
        for s in 0..game.num_subcarriers() {
            let mut inc = scale * v[[k, s]];
            if scaling == StepScaling::PeakRateMarginal {
                inc = inc.clamp(-gamma, gamma);
            }
            state.scores[[k, s]] += inc;
            max_inc = max_inc.max(inc.abs());
        }
    }
    let next = powers_from_scores(&state.scores, game.max_power());
    let mut power_change = 0.0f64;
    for k in 0..game.num_users() {
        let cap = game.max_power()[k];
        for s in 0..game.num_subcarriers() {
            let (new, old) = (next.get(k, s), state.powers.get(k, s));
            power_change = power_change.max((new - old).abs() / cap);
            if new > old {
                power_change = power_change.max((new - old) / old);
            }
        }
    }
    state.powers = next;
    state.iteration = n;
    StepInfo {
        iteration: n,
        gamma,
        max_score_increment: max_inc,
        power_change,
    }
}

/// When a run stops.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Termination {
    pub max_iters: usize,
    /// Settled when [`StepInfo::power_change`] stays below this for `patience` iterations.
    pub power_change_tol: f64,
    pub patience: usize,
    /// If set, convergence additionally requires every best-response gap below it.
    pub br_gap_tol: Option<f64>,
    /// Keep iterating up to `max_iters` after convergence is first detected.
    pub run_to_max: bool,
}

impl Default for Termination {
    fn default() -> Self {
        Termination {
            max_iters: 2000,
            power_change_tol: 1e-6,
            patience: 10,
            br_gap_tol: None,
            run_to_max: false,
        }
    }
}

impl Termination {
    pub fn iterations(max_iters: usize) -> Self {
        Termination {
            max_iters,
            ..Default::default()
        }
    }

    /// Runs exactly `max_iters` iterations.
    pub fn fixed(max_iters: usize) -> Self {
        Termination {
            max_iters,
            power_change_tol: 0.0,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    Converged,
    MaxIters,
}

/// Static channels, or one fresh fading block per iteration.
#[derive(Debug, Clone)]
pub enum Mode {
    Static,
    Ergodic(FadingProcess),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub log_stride: usize,
    pub form: MarginalForm,
    pub scaling: StepScaling,
    /// Starting scores; zero (the uniform interior point) when `None`.
    pub initial_scores: Option<Array2<f64>>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            log_stride: 1,
            form: MarginalForm::FullInformation,
            scaling: StepScaling::PeakRateMarginal,
            initial_scores: None,
        }
    }
}

/// A logged iterate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryPoint {
    pub iteration: usize,
    pub powers: PowerProfile,
    /// Potential of the logged powers (at the mean gains in ergodic mode).
    pub potential: f64,
    pub w: Vec<f64>,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub trajectory: Vec<TrajectoryPoint>,
    pub reason: TerminationReason,
    /// Iteration at which the convergence criterion fired.
    pub converged_at: Option<usize>,
    pub iterations: usize,
    /// Potential after every iteration, starting with the initial point.
    pub potentials: Vec<f64>,
    /// Largest violation index after every iteration, starting with the initial point.
    pub max_violation: Vec<f64>,
    /// Number of subcarriers with `Ψ_s > 1` after every iteration.
    pub violations: Vec<usize>,
    pub stc_switch: Option<usize>,
    pub final_best_response_gap: Option<Vec<f64>>,
    final_powers: PowerProfile,
}

impl RunRecord {
    pub fn final_powers(&self) -> &PowerProfile {
        &self.final_powers
    }

    /// Iterations (after the initial point) where some `Ψ_s > 1`.
    pub fn violating_iterations(&self) -> Vec<usize> {
        self.violations
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(n, _)| n)
            .collect()
    }

    /// Writes the logged trajectory as CSV: iteration, gamma, potential,
    /// then `w_s` and `psi_s` per subcarrier, then `p_k_s` per user and subcarrier.
    pub fn write_csv<W: std::io::Write>(&self, i_max: &[f64], out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let Some(first) = self.trajectory.first() else {
            return Ok(());
        };
        let (k_users, s_carriers) = first.powers.as_array().dim();
        let mut header = vec!["iteration".to_string(), "gamma".into(), "potential".into()];
        for s in 0..s_carriers {
            header.push(format!("w_{s}"));
            header.push(format!("psi_{s}"));
        }
        for k in 0..k_users {
            for s in 0..s_carriers {
                header.push(format!("p_{k}_{s}"));
            }
        }
        w.write_record(&header)?;
        for pt in &self.trajectory {
            let mut row = vec![pt.iteration.to_string(), format!("{:e}", pt.gamma), format!("{:e}", pt.potential)];
            for (s, ws) in pt.w.iter().enumerate() {
                row.push(format!("{ws:e}"));
                row.push(format!("{:e}", ws / i_max[s]));
            }
            row.extend(pt.powers.as_array().iter().map(|p| format!("{p:e}")));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs exponential learning from zero scores.
pub fn run(game: &Game, schedule: &StepSchedule, termination: &Termination, mode: Mode) -> Result<RunRecord> {
    run_with(game, schedule, termination, mode, RunOptions::default())
}

pub fn run_with(
    game: &Game,
    schedule: &StepSchedule,
    termination: &Termination,
    mode: Mode,
    options: RunOptions,
) -> Result<RunRecord> {
    schedule.validate()?;
    let stride = options.log_stride.max(1);
    let mut state = match &options.initial_scores {
        None => LearningState::new(game.max_power(), game.num_subcarriers(), schedule.clone()),
        Some(y) => {
            if y.dim() != game.gains().dim() {
                return Err(Error::invalid("initial_scores", "shape must be K×S"));
            }
            LearningState::from_scores(y.clone(), game.max_power(), schedule.clone())
        }
    };
    let mut fading = match mode {
        Mode::Static => None,
        Mode::Ergodic(f) => Some(f),
    };

    let mut trajectory = Vec::new();
    let mut potentials = Vec::with_capacity(termination.max_iters + 1);
    let mut max_violation = Vec::with_capacity(termination.max_iters + 1);
    let mut violations = Vec::with_capacity(termination.max_iters + 1);

    let mut log = |n: usize, p: &PowerProfile, gamma: f64, force: bool, trajectory: &mut Vec<TrajectoryPoint>| {
        let w = game.interference(p);
        let v = game.potential(p);
        let psi: Vec<f64> = w.iter().zip(game.i_max()).map(|(a, b)| a / b).collect();
        potentials.push(v);
        max_violation.push(psi.iter().cloned().fold(0.0, f64::max));
        violations.push(psi.iter().filter(|&&x| x > 1.0).count());
        if force || n % stride == 0 {
            trajectory.push(TrajectoryPoint {
                iteration: n,
                powers: p.clone(),
                potential: v,
                w,
                gamma,
            });
        }
        v
    };

    log(0, state.powers(), 0.0, true, &mut trajectory);
    let mut settled = 0usize;
    let mut converged_at = None;
    let mut final_gap = None;
    let mut last_gamma = 0.0;
    let mut last_logged = 0;

    for _ in 0..termination.max_iters {
        let info = match fading.as_mut() {
            None => xl_step(&mut state, game, options.form, options.scaling),
            Some(f) => {
                let draw = game.with_gains(f.sample_gains());
                xl_step(&mut state, &draw, options.form, options.scaling)
            }
        };
        let n = info.iteration;
        last_gamma = info.gamma;
        let v = log(n, state.powers(), info.gamma, false, &mut trajectory);
        if n % stride == 0 {
            last_logged = n;
        }
        state.schedule_mut().observe(n, v);

        if info.power_change < termination.power_change_tol {
            settled += 1;
        } else {
            settled = 0;
        }
        if settled >= termination.patience.max(1) {
            let accept = match (termination.br_gap_tol, fading.is_none()) {
                (Some(tol), true) => {
                    if settled % termination.patience.max(1) == 0 {
                        let gaps = oracle::best_response_gap(game, state.powers())?;
                        let ok = gaps.iter().all(|&g| g <= tol);
                        if ok && converged_at.is_none() {
                            final_gap = Some(gaps);
                        }
                        ok
                    } else {
                        false
                    }
                }
                _ => true,
            };
            if accept {
                converged_at.get_or_insert(n);
                if !termination.run_to_max {
                    break;
                }
            }
        }
    }

    let iterations = state.iteration();
    if last_logged != iterations {
        let p = state.powers().clone();
        trajectory.push(TrajectoryPoint {
            iteration: iterations,
            potential: game.potential(&p),
            w: game.interference(&p),
            powers: p,
            gamma: last_gamma,
        });
    }

    Ok(RunRecord {
        trajectory,
        reason: if converged_at.is_some() {
            TerminationReason::Converged
        } else {
            TerminationReason::MaxIters
        },
        converged_at,
        iterations,
        potentials,
        max_violation,
        violations,
        stc_switch: state.schedule().switch_iteration(),
        final_best_response_gap: final_gap,
        final_powers: state.powers().clone(),
    })
}

/// Bregman divergence of the entropy-like regulariser behind the Gibbs map,
/// summed over users on powers normalised by `P_k`.
pub fn bregman_divergence(reference: &PowerProfile, p: &PowerProfile, max_power: &[f64]) -> Result<f64> {
    let mut total = 0.0;
    for k in 0..max_power.len() {
        let cap = max_power[k];
        let x: Vec<f64> = p.user(k).iter().map(|v| v / cap).collect();
        let slack = 1.0 - x.iter().sum::<f64>();
        if x.iter().any(|&v| v <= 0.0) || slack <= 0.0 {
            return Err(Error::BoundaryProfile { user: k });
        }
        let xr: Vec<f64> = reference.user(k).iter().map(|v| v / cap).collect();
        let slack_r = (1.0 - xr.iter().sum::<f64>()).max(0.0);
        let term = |a: f64, b: f64| if a > 0.0 { a * (a / b).ln() } else { 0.0 };
        total += xr.iter().zip(&x).map(|(&a, &b)| term(a, b)).sum::<f64>() + term(slack_r, slack);
    }
    Ok(total)
}
