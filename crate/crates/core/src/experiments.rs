//! Parameter sweeps and the desk-scale figure presets.
//!
//! A sweep evaluates every grid value × replication pair independently and in
//! parallel. Replication `r` uses scenario seed `seed + r` at every grid
//! value, so all grid points of one replication share the same channel.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::FadingProcess;
use crate::config::{load_scenario, FlatPricing, NetworkConfig, PricingSpec, UserPriceBasis, UserPricing};
use crate::game::{Game, PowerProfile, SampledGame};
use crate::learning::{run_with, Mode, RunOptions, StepSchedule, Termination};
use crate::metrics::{self, iterations_to_target};
use crate::oracle;
use crate::{Error, Result};

/// Quantity varied by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Lambda0,
    /// Uniform interference tolerance in dBm.
    IMaxDbm,
    Users,
    /// Constant step size.
    Gamma,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::Lambda0 => "lambda0",
            SweepParameter::IMaxDbm => "i_max_dbm",
            SweepParameter::Users => "users",
            SweepParameter::Gamma => "gamma",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelMode {
    #[default]
    Static,
    Ergodic,
}

impl FromStr for ChannelMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "static" => Ok(ChannelMode::Static),
            "ergodic" => Ok(ChannelMode::Ergodic),
            other => Err(Error::invalid("mode", format!("expected static or ergodic, got `{other}`"))),
        }
    }
}

/// Monte-Carlo samples behind ergodic potential estimates.
pub const ERGODIC_SAMPLES: usize = 10_000;
/// Duality-gap tolerance of the sampled ergodic maximiser, relative to the
/// EQL range; see [`ergodic_tolerance`].
pub const ERGODIC_TOL: f64 = 1e-6;
/// EQL level counted by `iterations_to_eql`.
pub const EQL_TARGET: f64 = 0.95;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    #[serde(default = "one")]
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub mode: ChannelMode,
    /// Also compute the equilibration level, which needs `V_min` and `V_max`.
    #[serde(default)]
    pub certify_eql: bool,
    /// Keep iterating after convergence until the iteration budget is spent.
    #[serde(default)]
    pub run_to_max: bool,
    #[serde(default = "ergodic_samples")]
    pub mc_samples: usize,
    #[serde(skip, default = "NetworkConfig::default_scenario")]
    pub base: NetworkConfig,
}

fn one() -> usize {
    1
}

fn ergodic_samples() -> usize {
    ERGODIC_SAMPLES
}

impl SweepSpec {
    pub fn new(parameter: SweepParameter, values: Vec<f64>, replications: usize, base: NetworkConfig) -> Self {
        SweepSpec {
            parameter,
            values,
            replications,
            seed: base.seed,
            mode: ChannelMode::Static,
            certify_eql: false,
            run_to_max: false,
            mc_samples: ERGODIC_SAMPLES,
            base,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::EmptyGrid);
        }
        if self.replications == 0 {
            return Err(Error::invalid("sweep.replications", "must be at least 1"));
        }
        if self.mc_samples == 0 {
            return Err(Error::invalid("sweep.mc_samples", "must be at least 1"));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("sweep.values", "must be finite"));
        }
        self.base.validate()
    }

    /// Scenario for grid value `value` and replication `rep`.
    pub fn scenario(&self, value: f64, rep: usize) -> Result<NetworkConfig> {
        let cfg = apply_parameter(&self.base, self.parameter, value)?;
        Ok(cfg.with_seed(self.seed.wrapping_add(rep as u64)))
    }
}

/// Parses a sweep document: a `[sweep]` table next to an optional scenario.
///
/// ```toml
/// [sweep]
/// parameter = "lambda0"
/// values = [0.0, 1.0, 10.0]
/// replications = 3
/// ```
pub fn load_sweep(source: &str) -> Result<SweepSpec> {
    let mut doc: toml::Table = toml::from_str(source).map_err(|e| Error::Parse(e.to_string()))?;
    let sweep = doc.remove("sweep").ok_or_else(|| Error::MissingField("sweep".into()))?;
    let mut spec: SweepSpec = sweep.try_into().map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
    if !doc.is_empty() {
        let rest = toml::to_string(&doc).map_err(|e| Error::Parse(e.to_string()))?;
        spec.base = load_scenario(&rest)?;
        if !source_sets_seed(&doc) {
            spec.base.seed = spec.seed;
        }
    }
    spec.validate()?;
    Ok(spec)
}

fn source_sets_seed(doc: &toml::Table) -> bool {
    doc.get("run").and_then(|r| r.get("seed")).is_some()
}

/// `base` with one parameter replaced.
pub fn apply_parameter(base: &NetworkConfig, parameter: SweepParameter, value: f64) -> Result<NetworkConfig> {
    let mut cfg = base.clone();
    match parameter {
        SweepParameter::Lambda0 => {
            if value < 0.0 {
                return Err(Error::invalid("lambda0", "must be nonnegative"));
            }
            cfg.pricing.lambda0 = value;
        }
        SweepParameter::IMaxDbm => cfg = cfg.with_i_max_dbm(value)?,
        SweepParameter::Users => {
            if value < 1.0 || value.fract() != 0.0 {
                return Err(Error::invalid("users", "must be a positive integer"));
            }
            cfg = with_users(&cfg, value as usize);
        }
        SweepParameter::Gamma => {
            if !(value > 0.0) {
                return Err(Error::invalid("gamma", "must be positive"));
            }
            cfg.run.schedule = StepSchedule::Constant { gamma: value };
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// `base` resized to `k` users; new users copy the first user's budget and price.
pub fn with_users(base: &NetworkConfig, k: usize) -> NetworkConfig {
    let mut cfg = base.clone();
    let p = base.max_power[0];
    let lam = base.pricing.lambda_user.first().copied().unwrap_or(0.0);
    cfg.num_users = k;
    cfg.max_power.resize(k, p);
    cfg.pricing.lambda_user.resize(k, lam);
    cfg
}

/// Everything recorded about one learning run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub iterations: usize,
    pub converged_at: Option<usize>,
    pub mean_psi: f64,
    pub max_psi: f64,
    /// Last iteration with some `Ψ_s > 1`.
    pub last_violation: Option<usize>,
    pub sum_rate_bits: f64,
    pub pu_rate: f64,
    pub revenue: f64,
    pub total_power: f64,
    pub potential: f64,
    /// Largest best-response gap at the final iterate (static mode).
    pub best_response_gap: Option<f64>,
    pub eql: Option<f64>,
    pub iterations_to_eql: Option<usize>,
    pub eql_exact: Option<bool>,
    pub baseline_sum_rate_bits: f64,
    pub baseline_pu_rate: f64,
    pub baseline_revenue: f64,
}

/// What a single evaluation should compute besides the run itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalOptions {
    pub mode: ChannelMode,
    pub certify_eql: bool,
    pub run_to_max: bool,
    pub mc_samples: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            mode: ChannelMode::Static,
            certify_eql: false,
            run_to_max: false,
            mc_samples: ERGODIC_SAMPLES,
        }
    }
}

/// Builds the game of `cfg`. In ergodic mode its gains are the fading means,
/// i.e. path loss without a static fading draw.
pub fn build_game(cfg: &NetworkConfig, mode: ChannelMode) -> Result<Game> {
    match mode {
        ChannelMode::Static => Game::from_config(cfg),
        ChannelMode::Ergodic => {
            let mut mean = cfg.clone();
            mean.path_loss.fading = false;
            Game::from_config(&mean)
        }
    }
}

/// Absolute gap tolerance for [`oracle::maximize_ergodic_potential`]:
/// [`ERGODIC_TOL`] times a lower bound on `V̄_max − V̄_min`, so the EQL it
/// feeds is accurate to about `ERGODIC_TOL`. `v_low` is the sampled
/// potential of any profile; the closer to the minimum, the looser the bound.
pub fn ergodic_tolerance(sampled: &SampledGame, v_low: f64) -> f64 {
    let game = sampled.game();
    let start = PowerProfile::interior_uniform(game.max_power(), game.num_subcarriers());
    ERGODIC_TOL * (sampled.potential(&start) - v_low).max(1.0)
}

/// Seed of the fast-fading stream of a scenario.
pub fn fading_seed(cfg: &NetworkConfig) -> u64 {
    cfg.seed ^ 0x0fad_e5ee_d000_0001
}

pub fn termination_for(cfg: &NetworkConfig, run_to_max: bool) -> Termination {
    Termination {
        max_iters: cfg.run.iterations,
        power_change_tol: cfg.run.power_change_tol,
        patience: cfg.run.patience,
        br_gap_tol: None,
        run_to_max,
    }
}

/// Runs learning on `cfg` and summarises the outcome.
pub fn evaluate(cfg: &NetworkConfig, opts: EvalOptions) -> Result<RunSummary> {
    let game = build_game(cfg, opts.mode)?;
    let termination = termination_for(cfg, opts.run_to_max);
    let run_options = RunOptions {
        log_stride: cfg.run.log_stride,
        ..Default::default()
    };
    let mut fading = FadingProcess::new(game.gains().clone(), game.pu_gain(), fading_seed(cfg))?;
    let mode = match opts.mode {
        ChannelMode::Static => Mode::Static,
        ChannelMode::Ergodic => Mode::Ergodic(fading.clone()),
    };
    let record = run_with(&game, &cfg.run.schedule, &termination, mode, run_options)?;
    let p = record.final_powers();
    let snap = metrics::report(&game, p);
    let (_, base) = metrics::uniform_baseline(&game);

    let mut summary = RunSummary {
        iterations: record.iterations,
        converged_at: record.converged_at,
        mean_psi: snap.mean_psi,
        max_psi: snap.psi.iter().copied().fold(0.0, f64::max),
        last_violation: record.violating_iterations().last().copied(),
        sum_rate_bits: snap.sum_rate_bits,
        pu_rate: snap.pu_rate,
        revenue: snap.revenue,
        total_power: snap.total_power,
        potential: snap.potential,
        best_response_gap: None,
        eql: None,
        iterations_to_eql: None,
        eql_exact: None,
        baseline_sum_rate_bits: base.sum_rate_bits,
        baseline_pu_rate: base.pu_rate,
        baseline_revenue: base.revenue,
    };

    match opts.mode {
        ChannelMode::Static => {
            let gaps = oracle::best_response_gap(&game, p)?;
            summary.best_response_gap = Some(gaps.iter().copied().fold(0.0, f64::max));
            if opts.certify_eql {
                let ext = oracle::potential_extrema_for_eql(&game)?;
                let series = eql_series(&record.potentials, ext.v_min, ext.v_max)?;
                summary.eql = series.last().copied();
                summary.iterations_to_eql = iterations_to_target(&series, EQL_TARGET);
                summary.eql_exact = Some(ext.exact_min);
            }
        }
        ChannelMode::Ergodic => {
            if opts.certify_eql {
                let sampled = SampledGame::draw(game.clone(), &mut fading, opts.mc_samples)?;
                let (v_min, exact) = oracle::ergodic_vertex_minimum(&sampled);
                let v_max = oracle::maximize_ergodic_potential(&sampled, ergodic_tolerance(&sampled, v_min))?.v_star.mean;
                let series: Vec<f64> = record
                    .trajectory
                    .iter()
                    .map(|pt| metrics::eql(sampled.potential(&pt.powers), v_min, v_max))
                    .collect::<Result<_>>()?;
                summary.eql = series.last().copied();
                summary.iterations_to_eql = iterations_to_target(&series, EQL_TARGET)
                    .map(|i| record.trajectory[i].iteration);
                summary.eql_exact = Some(exact);
            }
        }
    }
    Ok(summary)
}

fn eql_series(potentials: &[f64], v_min: f64, v_max: f64) -> Result<Vec<f64>> {
    potentials.iter().map(|&v| metrics::eql(v, v_min, v_max)).collect()
}

/// One row of a sweep table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub replication: usize,
    pub seed: u64,
    pub outcome: std::result::Result<RunSummary, String>,
}

/// Evaluates every grid value × replication. Failed runs keep their row with
/// the error message; the sweep itself fails only on an invalid spec.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let opts = EvalOptions {
        mode: spec.mode,
        certify_eql: spec.certify_eql,
        run_to_max: spec.run_to_max,
        mc_samples: spec.mc_samples,
    };
    let jobs: Vec<(f64, usize)> = spec
        .values
        .iter()
        .flat_map(|&v| (0..spec.replications).map(move |r| (v, r)))
        .collect();
    let rows = jobs
        .par_iter()
        .map(|&(value, rep)| {
            let seed = spec.seed.wrapping_add(rep as u64);
            let outcome = spec
                .scenario(value, rep)
                .and_then(|cfg| evaluate(&cfg, opts))
                .map_err(|e| e.to_string());
            SweepRow {
                value,
                replication: rep,
                seed,
                outcome,
            }
        })
        .collect();
    Ok(rows)
}

pub const SWEEP_COLUMNS: [&str; 22] = [
    "parameter",
    "value",
    "replication",
    "seed",
    "status",
    "error",
    "iterations",
    "converged_at",
    "mean_psi",
    "max_psi",
    "last_violation",
    "sum_rate_bits",
    "pu_rate",
    "revenue",
    "total_power",
    "potential",
    "best_response_gap",
    "eql",
    "iterations_to_eql",
    "eql_exact",
    "baseline_sum_rate_bits",
    "baseline_pu_rate",
];

/// Writes sweep rows as CSV with the columns of [`SWEEP_COLUMNS`].
pub fn write_sweep_csv<W: std::io::Write>(parameter: SweepParameter, rows: &[SweepRow], out: W) -> Result<()> {
    fn opt<T: ToString>(x: Option<T>) -> String {
        x.map(|v| v.to_string()).unwrap_or_default()
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_COLUMNS)?;
    for row in rows {
        let mut rec = vec![
            parameter.name().to_string(),
            row.value.to_string(),
            row.replication.to_string(),
            row.seed.to_string(),
        ];
        match &row.outcome {
            Ok(s) => {
                rec.extend([
                    "ok".to_string(),
                    String::new(),
                    s.iterations.to_string(),
                    opt(s.converged_at),
                    s.mean_psi.to_string(),
                    s.max_psi.to_string(),
                    opt(s.last_violation),
                    s.sum_rate_bits.to_string(),
                    s.pu_rate.to_string(),
                    s.revenue.to_string(),
                    s.total_power.to_string(),
                    s.potential.to_string(),
                    opt(s.best_response_gap),
                    opt(s.eql),
                    opt(s.iterations_to_eql),
                    opt(s.eql_exact),
                    s.baseline_sum_rate_bits.to_string(),
                    s.baseline_pu_rate.to_string(),
                ]);
            }
            Err(e) => {
                rec.push("error".into());
                rec.push(e.clone());
                rec.extend(std::iter::repeat_n(String::new(), SWEEP_COLUMNS.len() - 6));
            }
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Figure presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Figure {
    Fig1,
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    Fig6,
    Fig7,
    Fig8,
    Fig9,
}

impl Figure {
    pub const ALL: [Figure; 9] = [
        Figure::Fig1,
        Figure::Fig2,
        Figure::Fig3,
        Figure::Fig4,
        Figure::Fig5,
        Figure::Fig6,
        Figure::Fig7,
        Figure::Fig8,
        Figure::Fig9,
    ];

    pub fn title(self) -> &'static str {
        match self {
            Figure::Fig1 => "Fig. 1: mean violation index vs lambda0 (LP and VP flat pricing, three I_max levels)",
            Figure::Fig2 => "Fig. 2: interference on one subcarrier along the learning run (I_max = -70 dBm)",
            Figure::Fig3 => "Fig. 3: SU sum-rate vs lambda0 for LP and VP at congestion K/S in {0.5, 1, 1.5}",
            Figure::Fig4 => "Fig. 4: SU sum-rate vs I_max for flat and per-user pricing",
            Figure::Fig5 => "Fig. 5: PU rate, operator revenue and SU total power vs lambda0",
            Figure::Fig6 => "Fig. 6: proposed allocation vs uniform power allocation",
            Figure::Fig7 => "Fig. 7: EQL(n) for PowerLaw, Constant and STC step sizes",
            Figure::Fig8 => "Fig. 8: iterations to EQL 0.95 vs constant step size",
            Figure::Fig9 => "Fig. 9: ergodic EQL(n) under fast fading, K = 3, S = 3",
        }
    }
}

impl fmt::Display for Figure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = Figure::ALL.iter().position(|x| x == self).unwrap_or(0) + 1;
        write!(f, "fig{n}")
    }
}

impl FromStr for Figure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Figure::ALL
            .iter()
            .copied()
            .find(|f| f.to_string() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::invalid("figure", format!("expected fig1..fig9, got `{s}`")))
    }
}

/// Size knobs derived from `--scale f`: `K = S = max(2, round(10 f))` and
/// `max(1, round(30 f²))` replications.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Scale {
    pub factor: f64,
    pub users: usize,
    pub subcarriers: usize,
    pub replications: usize,
}

impl Scale {
    pub fn new(factor: f64) -> Result<Self> {
        if !(factor.is_finite() && factor > 0.0) {
            return Err(Error::invalid("scale", "must be positive"));
        }
        let n = ((10.0 * factor).round() as usize).max(2);
        Ok(Scale {
            factor,
            users: n,
            subcarriers: n,
            replications: ((30.0 * factor * factor).round() as usize).max(1),
        })
    }
}

/// Plot-ready table: one x column and one column per curve.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub title: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    /// CSV with a leading `# title` comment line.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# {}", self.title)?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|x| x.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub figure: String,
    pub title: String,
    pub version: String,
    pub seed: u64,
    pub scale: Scale,
    pub scenario_sha256: String,
    pub runs: usize,
    pub failed_runs: usize,
    pub files: Vec<String>,
}

pub fn version_string() -> String {
    format!("cogpower-{}", env!("CARGO_PKG_VERSION"))
}

/// SHA-256 of the scenario's canonical JSON form.
pub fn scenario_hash(cfg: &NetworkConfig) -> Result<String> {
    let bytes = serde_json::to_vec(cfg)?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

/// Result of a figure preset.
#[derive(Debug, Clone, PartialEq)]
pub struct FigureOutput {
    pub table: Table,
    pub manifest: Manifest,
}

/// Runs a preset and writes `<out>/<fig>.csv` and `<out>/<fig>_manifest.json`.
pub fn reproduce_figure(figure: Figure, seed: u64, scale: f64, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let output = figure_table(figure, seed, scale)?;
    fs::create_dir_all(out_dir)?;
    let csv_path = out_dir.join(format!("{figure}.csv"));
    output.table.write_csv(fs::File::create(&csv_path)?)?;
    let manifest_path = out_dir.join(format!("{figure}_manifest.json"));
    fs::write(&manifest_path, serde_json::to_string_pretty(&output.manifest)? + "\n")?;
    Ok(vec![csv_path, manifest_path])
}

/// λ0 grid shared by the pricing presets; it reaches past `I^max/σ²`, where
/// linear pricing shuts every user down.
pub const LAMBDA_GRID: [f64; 14] = [0.0, 0.01, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 1e2, 1e3, 1e4, 1e5, 1e6, 1e7];
/// Tolerance levels of the primary user, dBm.
pub const I_MAX_GRID_DBM: [f64; 11] = [-90.0, -85.0, -80.0, -75.0, -70.0, -65.0, -60.0, -55.0, -50.0, -45.0, -40.0];
pub const GAMMA_GRID: [f64; 6] = [0.05, 0.1, 0.2, 0.5, 1.0, 2.0];

/// One curve: a scenario for each x value and seed.
struct Curve {
    name: String,
    build: Box<dyn Fn(f64, u64) -> Result<NetworkConfig> + Sync>,
    opts: EvalOptions,
}

struct Metric {
    suffix: &'static str,
    get: fn(&RunSummary) -> Option<f64>,
}

fn metric(suffix: &'static str, get: fn(&RunSummary) -> Option<f64>) -> Metric {
    Metric { suffix, get }
}

/// Grid of curves × x × replications, averaged over replications.
/// Returns the table plus (runs, failures).
fn grid_table(
    title: &str,
    x_name: &str,
    xs: &[f64],
    curves: &[Curve],
    metrics: &[Metric],
    reps: usize,
    seed: u64,
) -> (Table, usize, usize) {
    let jobs: Vec<(usize, usize, usize)> = (0..curves.len())
        .flat_map(|c| (0..xs.len()).flat_map(move |i| (0..reps).map(move |r| (c, i, r))))
        .collect();
    let results: Vec<Option<RunSummary>> = jobs
        .par_iter()
        .map(|&(c, i, r)| {
            let curve = &curves[c];
            (curve.build)(xs[i], seed.wrapping_add(r as u64))
                .and_then(|cfg| evaluate(&cfg, curve.opts))
                .ok()
        })
        .collect();
    let failures = results.iter().filter(|r| r.is_none()).count();

    let mut header = vec![x_name.to_string()];
    for curve in curves {
        for m in metrics {
            header.push(if m.suffix.is_empty() {
                curve.name.clone()
            } else {
                format!("{}_{}", m.suffix, curve.name)
            });
        }
    }
    let mut rows = Vec::with_capacity(xs.len());
    for (i, &x) in xs.iter().enumerate() {
        let mut row = vec![x];
        for c in 0..curves.len() {
            let slice: Vec<&RunSummary> = (0..reps)
                .filter_map(|r| results[(c * xs.len() + i) * reps + r].as_ref())
                .collect();
            for m in metrics {
                row.push(mean(slice.iter().filter_map(|s| (m.get)(s))));
            }
        }
        rows.push(row);
    }
    (
        Table {
            title: title.to_string(),
            header,
            rows,
        },
        jobs.len(),
        failures,
    )
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

fn scaled_base(scale: &Scale) -> NetworkConfig {
    NetworkConfig::reference(scale.users, scale.subcarriers)
}

fn tag(dbm: f64) -> String {
    format!("{dbm}dbm")
}

fn flat_curve(name: String, base: NetworkConfig, model: FlatPricing, i_max_dbm: f64, opts: EvalOptions) -> Curve {
    Curve {
        name,
        build: Box::new(move |lambda0, seed| {
            let k = base.num_users;
            base.clone()
                .with_pricing(PricingSpec::flat(model, lambda0, k))
                .with_i_max_dbm(i_max_dbm)
                .map(|c| c.with_seed(seed))
        }),
        opts,
    }
}

fn model_name(model: FlatPricing) -> &'static str {
    match model {
        FlatPricing::Linear => "lp",
        FlatPricing::Violation => "vp",
        FlatPricing::None => "none",
    }
}

/// Computes a preset's table and manifest without touching the filesystem.
pub fn figure_table(figure: Figure, seed: u64, scale_factor: f64) -> Result<FigureOutput> {
    let scale = Scale::new(scale_factor)?;
    let base = scaled_base(&scale).with_seed(seed);
    let reps = scale.replications;
    let stat = EvalOptions::default();
    let levels = crate::config::I_MAX_LEVELS_DBM;
    let models = [FlatPricing::Linear, FlatPricing::Violation];

    let (table, runs, failed) = match figure {
        Figure::Fig1 => {
            let curves: Vec<Curve> = models
                .iter()
                .flat_map(|&m| {
                    let base = base.clone();
                    levels.iter().map(move |&l| flat_curve(format!("psi_{}_{}", model_name(m), tag(l)), base.clone(), m, l, stat))
                })
                .collect();
            grid_table(figure.title(), "lambda0", &LAMBDA_GRID, &curves, &[metric("", |s| Some(s.mean_psi))], reps, seed)
        }
        Figure::Fig2 => fig2(&base, figure.title())?,
        Figure::Fig3 => {
            let mut curves = Vec::new();
            for &m in &models {
                for ratio in [0.5, 1.0, 1.5] {
                    let k = ((ratio * scale.subcarriers as f64).round() as usize).max(1);
                    let b = with_users(&base, k);
                    curves.push(flat_curve(format!("rate_{}_ks{ratio}", model_name(m)), b, m, -70.0, stat));
                }
            }
            grid_table(figure.title(), "lambda0", &LAMBDA_GRID, &curves, &[metric("", |s| Some(s.sum_rate_bits))], reps, seed)
        }
        Figure::Fig4 => {
            let k = base.num_users;
            let specs: Vec<(String, PricingSpec)> = vec![
                ("rate_none".into(), PricingSpec::none(k)),
                ("rate_lp_flat_l0.5".into(), PricingSpec::flat(FlatPricing::Linear, 0.5, k)),
                ("rate_lp_flat_l5".into(), PricingSpec::flat(FlatPricing::Linear, 5.0, k)),
                ("rate_vp_flat_l0.5".into(), PricingSpec::flat(FlatPricing::Violation, 0.5, k)),
                ("rate_vp_flat_l5".into(), PricingSpec::flat(FlatPricing::Violation, 5.0, k)),
                (
                    "rate_lp_user_l0.5".into(),
                    PricingSpec::per_user(UserPricing::Linear, vec![0.5; k]).with_basis(UserPriceBasis::Interference),
                ),
            ];
            let curves: Vec<Curve> = specs
                .into_iter()
                .map(|(name, pricing)| {
                    let base = base.clone();
                    Curve {
                        name,
                        build: Box::new(move |dbm, seed| {
                            base.clone().with_pricing(pricing.clone()).with_i_max_dbm(dbm).map(|c| c.with_seed(seed))
                        }),
                        opts: stat,
                    }
                })
                .collect();
            grid_table(figure.title(), "i_max_dbm", &I_MAX_GRID_DBM, &curves, &[metric("", |s| Some(s.sum_rate_bits))], reps, seed)
        }
        Figure::Fig5 => {
            let curves: Vec<Curve> = models
                .iter()
                .flat_map(|&m| {
                    let base = base.clone();
                    levels.iter().map(move |&l| flat_curve(format!("{}_{}", model_name(m), tag(l)), base.clone(), m, l, stat))
                })
                .collect();
            let metrics = [
                metric("pu_rate", |s| Some(s.pu_rate)),
                metric("revenue", |s| Some(s.revenue)),
                metric("total_power", |s| Some(s.total_power)),
            ];
            grid_table(figure.title(), "lambda0", &LAMBDA_GRID, &curves, &metrics, reps, seed)
        }
        Figure::Fig6 => fig6(&base, figure.title(), reps, seed),
        Figure::Fig7 => fig7(&base, figure.title(), reps, seed)?,
        Figure::Fig8 => {
            let mut curves = Vec::new();
            for ratio in [0.5, 1.0, 1.5] {
                for lambda0 in [0.1, 0.5] {
                    let k = ((ratio * scale.users as f64).round() as usize).max(1);
                    let b = with_users(&base, k).with_pricing(PricingSpec::flat(FlatPricing::Linear, lambda0, k));
                    curves.push(Curve {
                        name: format!("iters_k{k}_l{lambda0}"),
                        build: Box::new(move |gamma, seed| {
                            apply_parameter(&b, SweepParameter::Gamma, gamma).map(|c| c.with_seed(seed))
                        }),
                        opts: EvalOptions {
                            certify_eql: true,
                            ..stat
                        },
                    });
                }
            }
            // Runs that never reach the target count with their full length.
            let metrics = [metric("", |s| Some(s.iterations_to_eql.unwrap_or(s.iterations) as f64))];
            grid_table(figure.title(), "gamma", &GAMMA_GRID, &curves, &metrics, reps, seed)
        }
        Figure::Fig9 => fig9(figure.title(), &scale, seed)?,
    };

    let manifest = Manifest {
        figure: figure.to_string(),
        title: figure.title().to_string(),
        version: version_string(),
        seed,
        scale,
        scenario_sha256: scenario_hash(&base)?,
        runs,
        failed_runs: failed,
        files: vec![format!("{figure}.csv")],
    };
    Ok(FigureOutput { table, manifest })
}

/// Interference trace on the subcarrier that is violated longest, under VP
/// and LP at a price where the tolerance binds.
fn fig2(base: &NetworkConfig, title: &str) -> Result<(Table, usize, usize)> {
    let k = base.num_users;
    let mut traces = Vec::new();
    for model in [FlatPricing::Violation, FlatPricing::Linear] {
        let cfg = base.clone().with_pricing(PricingSpec::flat(model, 10.0, k)).with_i_max_dbm(-70.0)?;
        let game = Game::from_config(&cfg)?;
        let rec = run_with(
            &game,
            &cfg.run.schedule,
            &Termination::fixed(cfg.run.iterations.min(500)),
            Mode::Static,
            RunOptions::default(),
        )?;
        traces.push((game, rec));
    }
    let (game, vp) = &traces[0];
    let s_star = (0..game.num_subcarriers())
        .max_by_key(|&s| vp.trajectory.iter().filter(|pt| pt.w[s] > game.i_max()[s]).count())
        .unwrap_or(0);
    let i_max = game.i_max()[s_star];
    let header = vec![
        "iteration".to_string(),
        format!("w_vp_s{s_star}"),
        format!("w_lp_s{s_star}"),
        "i_max".to_string(),
        "psi_vp".to_string(),
        "psi_lp".to_string(),
    ];
    let lp = &traces[1].1;
    let rows = vp
        .trajectory
        .iter()
        .zip(&lp.trajectory)
        .map(|(a, b)| vec![a.iteration as f64, a.w[s_star], b.w[s_star], i_max, a.w[s_star] / i_max, b.w[s_star] / i_max])
        .collect();
    Ok((
        Table {
            title: title.to_string(),
            header,
            rows,
        },
        2,
        0,
    ))
}

fn fig6(base: &NetworkConfig, title: &str, reps: usize, seed: u64) -> (Table, usize, usize) {
    let stat = EvalOptions::default();
    let curves: Vec<Curve> = [FlatPricing::Linear, FlatPricing::Violation]
        .iter()
        .map(|&m| flat_curve(model_name(m).to_string(), base.clone(), m, -70.0, stat))
        .collect();
    let metrics = [
        metric("su_rate_proposed", |s| Some(s.sum_rate_bits)),
        metric("su_rate_uniform", |s| Some(s.baseline_sum_rate_bits)),
        metric("pu_rate_proposed", |s| Some(s.pu_rate)),
        metric("pu_rate_uniform", |s| Some(s.baseline_pu_rate)),
        metric("revenue_proposed", |s| Some(s.revenue)),
        metric("revenue_uniform", |s| Some(s.baseline_revenue)),
    ];
    let (mut table, runs, failed) = grid_table(title, "lambda0", &LAMBDA_GRID, &curves, &metrics, reps, seed);
    // Ratio of replication means; NaN where the uniform policy earns nothing.
    for name in ["lp", "vp"] {
        let prop = table.header.iter().position(|h| *h == format!("revenue_proposed_{name}")).expect("column");
        let unif = table.header.iter().position(|h| *h == format!("revenue_uniform_{name}")).expect("column");
        table.header.push(format!("revenue_ratio_{name}"));
        for row in &mut table.rows {
            let r = if row[unif] > 0.0 { row[prop] / row[unif] } else { f64::NAN };
            row.push(r);
        }
    }
    (table, runs, failed)
}

/// Mean EQL(n) over replications for three schedules under LP and VP.
fn fig7(base: &NetworkConfig, title: &str, reps: usize, seed: u64) -> Result<(Table, usize, usize)> {
    const ITERS: usize = 500;
    let k = base.num_users;
    let schedules = [
        ("powerlaw", StepSchedule::PowerLaw { gamma0: 1.0, beta: 0.6 }),
        ("constant", StepSchedule::Constant { gamma: 0.5 }),
        ("stc", StepSchedule::stc(1.0)),
    ];
    let mut header = vec!["iteration".to_string()];
    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut failed = 0;
    let mut runs = 0;
    for model in [FlatPricing::Linear, FlatPricing::Violation] {
        for (name, schedule) in &schedules {
            header.push(format!("eql_{name}_{}", model_name(model)));
            let per_rep: Vec<Option<Vec<f64>>> = (0..reps)
                .into_par_iter()
                .map(|r| {
                    let cfg = base.clone().with_pricing(PricingSpec::flat(model, 0.5, k)).with_seed(seed.wrapping_add(r as u64));
                    let game = Game::from_config(&cfg).ok()?;
                    let ext = oracle::potential_extrema_for_eql(&game).ok()?;
                    let rec = run_with(&game, schedule, &Termination::fixed(ITERS), Mode::Static, RunOptions::default()).ok()?;
                    eql_series(&rec.potentials, ext.v_min, ext.v_max).ok()
                })
                .collect();
            runs += reps;
            failed += per_rep.iter().filter(|x| x.is_none()).count();
            let ok: Vec<&Vec<f64>> = per_rep.iter().flatten().collect();
            columns.push((0..=ITERS).map(|n| mean(ok.iter().map(|s| s[n]))).collect());
        }
    }
    let rows = (0..=ITERS)
        .map(|n| std::iter::once(n as f64).chain(columns.iter().map(|c| c[n])).collect())
        .collect();
    Ok((
        Table {
            title: title.to_string(),
            header,
            rows,
        },
        runs,
        failed,
    ))
}

/// Ergodic EQL(n) for K = S = 3 under LP, two prices and two schedules.
/// The iteration budget and Monte-Carlo sample count shrink with `scale`.
fn fig9(title: &str, scale: &Scale, seed: u64) -> Result<(Table, usize, usize)> {
    let iters = ((10_000.0 * scale.factor.min(1.0)).round() as usize).max(1000);
    let samples = ((ERGODIC_SAMPLES as f64 * scale.factor.min(1.0)).round() as usize).max(1000);
    let stride = iters / 200;
    let reps = scale.replications.min(5);
    let schedules = [
        ("powerlaw", StepSchedule::PowerLaw { gamma0: 1.0, beta: 0.6 }),
        ("stc", StepSchedule::stc(1.0)),
    ];
    let mut header = vec!["iteration".to_string()];
    let mut columns = Vec::new();
    let mut failed = 0;
    let mut runs = 0;
    let mut logged: Vec<usize> = Vec::new();
    for lambda0 in [0.1, 0.5] {
        for (name, schedule) in &schedules {
            header.push(format!("eql_{name}_l{lambda0}"));
            let per_rep: Vec<Option<(Vec<usize>, Vec<f64>)>> = (0..reps)
                .into_par_iter()
                .map(|r| {
                    let cfg = NetworkConfig::reference(3, 3)
                        .with_pricing(PricingSpec::flat(FlatPricing::Linear, lambda0, 3))
                        .with_seed(seed.wrapping_add(r as u64));
                    ergodic_eql_trace(&cfg, schedule, iters, stride, samples).ok()
                })
                .collect();
            runs += reps;
            failed += per_rep.iter().filter(|x| x.is_none()).count();
            let ok: Vec<(Vec<usize>, Vec<f64>)> = per_rep.into_iter().flatten().collect();
            if let Some(first) = ok.first() {
                logged = first.0.clone();
            }
            columns.push(ok);
        }
    }
    let rows = logged
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            std::iter::once(n as f64)
                .chain(columns.iter().map(|c| mean(c.iter().map(|(_, e)| e[i]))))
                .collect()
        })
        .collect();
    Ok((
        Table {
            title: title.to_string(),
            header,
            rows,
        },
        runs,
        failed,
    ))
}

/// Ergodic EQL at every `stride`-th iterate of one run, against the sampled
/// potential with exact vertex minimum.
pub fn ergodic_eql_trace(
    cfg: &NetworkConfig,
    schedule: &StepSchedule,
    iters: usize,
    stride: usize,
    samples: usize,
) -> Result<(Vec<usize>, Vec<f64>)> {
    let game = build_game(cfg, ChannelMode::Ergodic)?;
    let mut fading = FadingProcess::new(game.gains().clone(), game.pu_gain(), fading_seed(cfg))?;
    let options = RunOptions {
        log_stride: stride.max(1),
        ..Default::default()
    };
    let rec = run_with(&game, schedule, &Termination::fixed(iters), Mode::Ergodic(fading.clone()), options)?;
    let sampled = SampledGame::draw(game, &mut fading, samples)?;
    let (v_min, _) = oracle::ergodic_vertex_minimum(&sampled);
    let v_max = oracle::maximize_ergodic_potential(&sampled, ergodic_tolerance(&sampled, v_min))?.v_star.mean;
    let its = rec.trajectory.iter().map(|pt| pt.iteration).collect();
    let eqls = rec
        .trajectory
        .iter()
        .map(|pt| metrics::eql(sampled.potential(&pt.powers), v_min, v_max))
        .collect::<Result<_>>()?;
    Ok((its, eqls))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> NetworkConfig {
        let mut cfg = NetworkConfig::reference(2, 2);
        cfg.run.iterations = 200;
        cfg
    }

    #[test]
    fn empty_grid_is_rejected() {
        let spec = SweepSpec::new(SweepParameter::Lambda0, vec![], 1, small());
        assert!(matches!(run_sweep(&spec), Err(Error::EmptyGrid)));
    }

    #[test]
    fn zero_replications_rejected() {
        let spec = SweepSpec::new(SweepParameter::Lambda0, vec![1.0], 0, small());
        assert!(run_sweep(&spec).is_err());
    }

    #[test]
    fn failed_rows_do_not_stop_the_sweep() {
        let spec = SweepSpec::new(SweepParameter::Lambda0, vec![-1.0, 1.0], 2, small());
        let rows = run_sweep(&spec).unwrap();
        assert_eq!(rows.len(), 4);
        assert!(rows[0].outcome.is_err() && rows[1].outcome.is_err());
        assert!(rows[2].outcome.is_ok() && rows[3].outcome.is_ok());
    }

    #[test]
    fn rows_are_in_grid_order() {
        let spec = SweepSpec::new(SweepParameter::Lambda0, vec![0.0, 2.0, 5.0], 2, small());
        let rows = run_sweep(&spec).unwrap();
        let keys: Vec<(f64, usize)> = rows.iter().map(|r| (r.value, r.replication)).collect();
        assert_eq!(keys, vec![(0.0, 0), (0.0, 1), (2.0, 0), (2.0, 1), (5.0, 0), (5.0, 1)]);
    }

    #[test]
    fn sweep_document_round_trip() {
        let doc = "[sweep]\nparameter = \"i_max_dbm\"\nvalues = [-80.0, -70.0]\nreplications = 2\nseed = 7\n";
        let spec = load_sweep(doc).unwrap();
        assert_eq!(spec.parameter, SweepParameter::IMaxDbm);
        assert_eq!(spec.replications, 2);
        assert_eq!(spec.base, NetworkConfig::default_scenario());
        let cfg = spec.scenario(-80.0, 1).unwrap();
        assert_eq!(cfg.seed, 8);
        assert!((cfg.i_max[0] - 1e-11).abs() < 1e-23);
    }

    #[test]
    fn sweep_document_with_scenario() {
        let doc = format!(
            "[sweep]\nparameter = \"users\"\nvalues = [2.0, 3.0]\n\n{}",
            crate::config::DEFAULT_SCENARIO_TOML
        );
        let spec = load_sweep(&doc).unwrap();
        assert_eq!(spec.base.num_users, 10);
        assert_eq!(spec.scenario(3.0, 0).unwrap().num_users, 3);
        assert!(spec.scenario(2.5, 0).is_err());
    }

    #[test]
    fn missing_sweep_table() {
        assert!(matches!(load_sweep("[network]\nusers = 2\n"), Err(Error::MissingField(_))));
    }

    #[test]
    fn scale_rule() {
        let s = Scale::new(1.0).unwrap();
        assert_eq!((s.users, s.subcarriers, s.replications), (10, 10, 30));
        let s = Scale::new(0.4).unwrap();
        assert_eq!((s.users, s.replications), (4, 5));
        let s = Scale::new(0.01).unwrap();
        assert_eq!((s.users, s.replications), (2, 1));
        assert!(Scale::new(0.0).is_err());
    }

    #[test]
    fn figure_names() {
        for f in Figure::ALL {
            assert_eq!(f.to_string().parse::<Figure>().unwrap(), f);
        }
        assert!("fig10".parse::<Figure>().is_err());
    }

    #[test]
    fn summary_rate_matches_recomputation() {
        let cfg = small();
        let s = evaluate(&cfg, EvalOptions::default()).unwrap();
        let game = Game::from_config(&cfg).unwrap();
        let rec = crate::learning::run(&game, &cfg.run.schedule, &termination_for(&cfg, false), Mode::Static).unwrap();
        let direct: f64 = game.rates(rec.final_powers()).iter().sum();
        assert!((s.sum_rate_bits - crate::units::nats_to_bits(direct)).abs() <= 1e-12 * direct.abs().max(1.0));
    }

    #[test]
    fn baseline_columns_match_uniform_policy() {
        let cfg = small();
        let s = evaluate(&cfg, EvalOptions::default()).unwrap();
        let game = Game::from_config(&cfg).unwrap();
        let (_, base) = metrics::uniform_baseline(&game);
        assert_eq!(s.baseline_pu_rate, base.pu_rate);
        assert_eq!(s.baseline_sum_rate_bits, base.sum_rate_bits);
    }

    #[test]
    fn table_csv_has_title_line() {
        let t = Table {
            title: "Fig. 0: test".into(),
            header: vec!["x".into(), "y".into()],
            rows: vec![vec![1.0, 0.5]],
        };
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "# Fig. 0: test\nx,y\n1,0.5\n");
    }

    #[test]
    fn scenario_hash_is_stable() {
        let a = scenario_hash(&NetworkConfig::default_scenario()).unwrap();
        let b = scenario_hash(&NetworkConfig::default_scenario()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 64);
        assert_ne!(a, scenario_hash(&NetworkConfig::default_scenario().with_seed(1)).unwrap());
    }
}
