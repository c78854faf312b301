//! Scenario description and loading.
//!
//! Scenarios are TOML documents with the sections `network`, `radio`, `pu`,
//! `channel`, `pricing` and `run`. Power-like quantities are given in dBm in
//! the document and converted to Watt here; nothing downstream sees dBm.

use serde::{Deserialize, Serialize};

use crate::channel::PathLossParams;
use crate::learning::StepSchedule;
use crate::units::{dbm_to_watt, noise_power};
use crate::{Error, Result};

/// Flat spectrum-access price charged on the aggregate interference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum FlatPricing {
    #[default]
    #[serde(rename = "none")]
    None,
    /// `λ0 Σ_s w_s / I_s`
    #[serde(rename = "lp")]
    Linear,
    /// `λ0 Σ_s [w_s / I_s − 1]_+`
    #[serde(rename = "vp")]
    Violation,
}

/// Per-user price charged on the user's own emissions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum UserPricing {
    #[default]
    #[serde(rename = "none")]
    None,
    #[serde(rename = "lp")]
    Linear,
    #[serde(rename = "vp")]
    Violation,
}

/// What a per-user price is computed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UserPriceBasis {
    /// The user's own received interference relative to the tolerance, `g_ks p_ks / I_s`.
    #[default]
    Interference,
    /// Radiated power relative to the power cap, `p_ks / P_k`.
    Power,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricingSpec {
    pub flat: FlatPricing,
    pub user: UserPricing,
    pub lambda0: f64,
    /// One entry per user.
    pub lambda_user: Vec<f64>,
    pub basis: UserPriceBasis,
}

impl PricingSpec {
    /// Free access for `num_users` users.
    pub fn none(num_users: usize) -> Self {
        PricingSpec {
            flat: FlatPricing::None,
            user: UserPricing::None,
            lambda0: 0.0,
            lambda_user: vec![0.0; num_users],
            basis: UserPriceBasis::Interference,
        }
    }

    pub fn flat(model: FlatPricing, lambda0: f64, num_users: usize) -> Self {
        PricingSpec {
            flat: model,
            lambda0,
            ..Self::none(num_users)
        }
    }

    pub fn per_user(model: UserPricing, lambda_user: Vec<f64>) -> Self {
        PricingSpec {
            user: model,
            ..Self::none(lambda_user.len())
        }
        .with_user_prices(lambda_user)
    }

    pub fn with_user_prices(mut self, lambda_user: Vec<f64>) -> Self {
        self.lambda_user = lambda_user;
        self
    }

    pub fn with_basis(mut self, basis: UserPriceBasis) -> Self {
        self.basis = basis;
        self
    }

    pub fn validate(&self, num_users: usize) -> Result<()> {
        if !self.lambda0.is_finite() || self.lambda0 < 0.0 {
            return Err(Error::invalid("pricing.lambda0", "must be finite and nonnegative"));
        }
        if self.lambda_user.len() != num_users {
            return Err(Error::invalid(
                "pricing.lambda_k",
                format!("expected {num_users} entries, got {}", self.lambda_user.len()),
            ));
        }
        if self.lambda_user.iter().any(|l| !l.is_finite() || *l < 0.0) {
            return Err(Error::invalid("pricing.lambda_k", "must be finite and nonnegative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelModel {
    #[default]
    #[serde(alias = "static")]
    StaticPathLoss,
    FastFading,
}

/// Learning-run parameters carried by a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSettings {
    pub iterations: usize,
    pub schedule: StepSchedule,
    /// Largest per-iteration power change, relative to `P_k`, that counts as settled.
    pub power_change_tol: f64,
    /// Consecutive settled iterations required to declare convergence.
    pub patience: usize,
    pub log_stride: usize,
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings {
            iterations: 2000,
            schedule: StepSchedule::PowerLaw {
                gamma0: 1.0,
                beta: 0.6,
            },
            power_change_tol: 1e-6,
            patience: 10,
            log_stride: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub num_users: usize,
    pub num_subcarriers: usize,
    /// `P_k` in Watt, one per user.
    pub max_power: Vec<f64>,
    /// `σ²_s` in Watt, one per subcarrier.
    pub noise: Vec<f64>,
    /// `I^max_s` in Watt, one per subcarrier.
    pub i_max: Vec<f64>,
    pub pricing: PricingSpec,
    /// Primary transmit power in Watt.
    pub pu_power: f64,
    /// Primary transmitter distance from the receiver in metres.
    pub pu_distance: f64,
    /// Edge of the square deployment area in metres.
    pub area_edge: f64,
    pub path_loss: PathLossParams,
    pub channel_model: ChannelModel,
    pub seed: u64,
    pub run: RunSettings,
}

pub const DEFAULT_CARRIER_HZ: f64 = 2.4e9;
pub const DEFAULT_BANDWIDTH_HZ: f64 = 10_930.0;
pub const DEFAULT_NOISE_PSD_DBM_HZ: f64 = -173.0;
pub const DEFAULT_MAX_POWER_DBM: f64 = 21.03;
pub const DEFAULT_PU_POWER_DBM: f64 = 30.0;
pub const DEFAULT_PU_DISTANCE_M: f64 = 50.0;
pub const DEFAULT_AREA_M: f64 = 200.0;
pub const DEFAULT_I_MAX_DBM: f64 = -70.0;
/// Tolerance levels matched to primary-user rate requirements.
pub const I_MAX_LEVELS_DBM: [f64; 3] = [-68.3, -70.0, -75.6];

impl NetworkConfig {
    /// Ten users on ten subcarriers with the reference radio parameters,
    /// frequency-selective static gains and violation pricing at `λ0 = 0.5`.
    pub fn default_scenario() -> Self {
        Self::reference(10, 10)
    }

    /// Reference radio parameters for `num_users × num_subcarriers`,
    /// frequency-selective static gains, violation pricing at `λ0 = 0.5`.
    pub fn reference(num_users: usize, num_subcarriers: usize) -> Self {
        let p = dbm_to_watt(DEFAULT_MAX_POWER_DBM).expect("finite");
        let sigma2 = noise_power(DEFAULT_NOISE_PSD_DBM_HZ, DEFAULT_BANDWIDTH_HZ).expect("positive");
        let i_max = dbm_to_watt(DEFAULT_I_MAX_DBM).expect("finite");
        NetworkConfig {
            num_users,
            num_subcarriers,
            max_power: vec![p; num_users],
            noise: vec![sigma2; num_subcarriers],
            i_max: vec![i_max; num_subcarriers],
            pricing: PricingSpec::flat(FlatPricing::Violation, 0.5, num_users),
            pu_power: dbm_to_watt(DEFAULT_PU_POWER_DBM).expect("finite"),
            pu_distance: DEFAULT_PU_DISTANCE_M,
            area_edge: DEFAULT_AREA_M,
            path_loss: PathLossParams {
                fading: true,
                ..PathLossParams::free_space(DEFAULT_CARRIER_HZ, 3.0)
            },
            channel_model: ChannelModel::StaticPathLoss,
            seed: 42,
            run: RunSettings::default(),
        }
    }

    pub fn with_pricing(mut self, pricing: PricingSpec) -> Self {
        self.pricing = pricing;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Sets a uniform tolerance `I^max` given in dBm.
    pub fn with_i_max_dbm(mut self, dbm: f64) -> Result<Self> {
        let w = dbm_to_watt(dbm)?;
        self.i_max = vec![w; self.num_subcarriers];
        Ok(self)
    }

    /// Checks every invariant of the configuration.
    pub fn validate(&self) -> Result<()> {
        if self.num_users == 0 {
            return Err(Error::invalid("network.users", "must be at least 1"));
        }
        if self.num_subcarriers == 0 {
            return Err(Error::invalid("network.subcarriers", "must be at least 1"));
        }
        check_positive_vec("radio.max_power", &self.max_power, self.num_users)?;
        check_positive_vec("radio.noise", &self.noise, self.num_subcarriers)?;
        check_positive_vec("pu.i_max", &self.i_max, self.num_subcarriers)?;
        check_positive("pu.power", self.pu_power)?;
        check_positive("pu.distance", self.pu_distance)?;
        check_positive("network.area_m", self.area_edge)?;
        self.path_loss.validate()?;
        self.pricing.validate(self.num_users)?;
        self.run.schedule.validate()?;
        if !(self.run.power_change_tol > 0.0) {
            return Err(Error::invalid("run.power_change_tol", "must be positive"));
        }
        if self.run.log_stride == 0 {
            return Err(Error::invalid("run.log_stride", "must be at least 1"));
        }
        Ok(())
    }

    /// Users per subcarrier.
    pub fn congestion_index(&self) -> f64 {
        self.num_users as f64 / self.num_subcarriers as f64
    }
}

fn check_positive(field: &str, x: f64) -> Result<()> {
    if !x.is_finite() || x <= 0.0 {
        return Err(Error::invalid(field, format!("must be finite and strictly positive, got {x}")));
    }
    Ok(())
}

fn check_positive_vec(field: &str, xs: &[f64], len: usize) -> Result<()> {
    if xs.len() != len {
        return Err(Error::invalid(field, format!("expected {len} entries, got {}", xs.len())));
    }
    for (i, &x) in xs.iter().enumerate() {
        check_positive(&format!("{field}[{i}]"), x)?;
    }
    Ok(())
}

// Raw document layout. Everything optional so missing fields can be
// reported by name rather than by serde's positional messages.

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioDoc {
    network: Option<NetworkSection>,
    radio: Option<RadioSection>,
    pu: Option<PuSection>,
    channel: Option<ChannelSection>,
    pricing: Option<PricingSection>,
    run: Option<RunSection>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkSection {
    users: Option<i64>,
    subcarriers: Option<i64>,
    area_m: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RadioSection {
    max_power_dbm: Option<f64>,
    max_power_dbm_per_user: Option<Vec<f64>>,
    noise_psd_dbm_hz: Option<f64>,
    noise_dbm_per_subcarrier: Option<Vec<f64>>,
    bandwidth_hz: Option<f64>,
    carrier_hz: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PuSection {
    power_dbm: Option<f64>,
    distance_m: Option<f64>,
    i_max_dbm: Option<f64>,
    i_max_dbm_per_subcarrier: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChannelSection {
    model: Option<ChannelModel>,
    path_loss_exponent: Option<f64>,
    reference_gain_db: Option<f64>,
    fading: Option<bool>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum ScalarOrList {
    Scalar(f64),
    List(Vec<f64>),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PricingSection {
    flat: Option<FlatPricing>,
    user: Option<UserPricing>,
    lambda0: Option<f64>,
    lambda_k: Option<ScalarOrList>,
    user_basis: Option<UserPriceBasis>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunSection {
    seed: Option<u64>,
    iterations: Option<usize>,
    step_schedule: Option<String>,
    gamma: Option<f64>,
    beta: Option<f64>,
    window: Option<usize>,
    alternations: Option<usize>,
    power_change_tol: Option<f64>,
    patience: Option<usize>,
    log_stride: Option<usize>,
}

fn required<T>(value: Option<T>, field: &str) -> Result<T> {
    value.ok_or_else(|| Error::MissingField(field.to_string()))
}

fn count(value: Option<i64>, field: &str) -> Result<usize> {
    let v = required(value, field)?;
    if v < 1 {
        return Err(Error::invalid(field, format!("must be at least 1, got {v}")));
    }
    Ok(v as usize)
}

fn dbm_vec(values: &[f64], len: usize, field: &str) -> Result<Vec<f64>> {
    if values.len() != len {
        return Err(Error::invalid(field, format!("expected {len} entries, got {}", values.len())));
    }
    values
        .iter()
        .map(|&v| dbm_to_watt(v).map_err(|_| Error::invalid(field, "non-finite entry")))
        .collect()
}

/// Parses and validates a scenario document.
pub fn load_scenario(source: &str) -> Result<NetworkConfig> {
    let doc: ScenarioDoc = toml::from_str(source).map_err(|e| Error::Parse(e.to_string()))?;

    let network = required(doc.network, "network")?;
    let num_users = count(network.users, "network.users")?;
    let num_subcarriers = count(network.subcarriers, "network.subcarriers")?;
    let area_edge = network.area_m.unwrap_or(DEFAULT_AREA_M);

    let radio = required(doc.radio, "radio")?;
    let max_power = match radio.max_power_dbm_per_user {
        Some(v) => dbm_vec(&v, num_users, "radio.max_power_dbm_per_user")?,
        None => {
            let dbm = required(radio.max_power_dbm, "radio.max_power_dbm")?;
            vec![dbm_to_watt(dbm)?; num_users]
        }
    };
    let noise = match radio.noise_dbm_per_subcarrier {
        Some(v) => dbm_vec(&v, num_subcarriers, "radio.noise_dbm_per_subcarrier")?,
        None => {
            let psd = required(radio.noise_psd_dbm_hz, "radio.noise_psd_dbm_hz")?;
            let bw = required(radio.bandwidth_hz, "radio.bandwidth_hz")?;
            vec![noise_power(psd, bw)?; num_subcarriers]
        }
    };
    let carrier_hz = radio.carrier_hz.unwrap_or(DEFAULT_CARRIER_HZ);
    check_positive("radio.carrier_hz", carrier_hz)?;

    let pu = required(doc.pu, "pu")?;
    let pu_power = dbm_to_watt(pu.power_dbm.unwrap_or(DEFAULT_PU_POWER_DBM))?;
    let pu_distance = pu.distance_m.unwrap_or(DEFAULT_PU_DISTANCE_M);
    let i_max = match pu.i_max_dbm_per_subcarrier {
        Some(v) => dbm_vec(&v, num_subcarriers, "pu.i_max_dbm_per_subcarrier")?,
        None => vec![dbm_to_watt(required(pu.i_max_dbm, "pu.i_max_dbm")?)?; num_subcarriers],
    };

    let channel = doc.channel.unwrap_or_default();
    let exponent = channel.path_loss_exponent.unwrap_or(3.0);
    let mut path_loss = PathLossParams::free_space(carrier_hz, exponent);
    if let Some(db) = channel.reference_gain_db {
        path_loss.reference_gain = crate::units::db_to_linear(db);
    }
    path_loss.fading = channel.fading.unwrap_or(false);

    let pricing = doc.pricing.unwrap_or_default();
    let lambda_user = match pricing.lambda_k {
        None => vec![0.0; num_users],
        Some(ScalarOrList::Scalar(x)) => vec![x; num_users],
        Some(ScalarOrList::List(v)) => v,
    };
    let pricing = PricingSpec {
        flat: pricing.flat.unwrap_or_default(),
        user: pricing.user.unwrap_or_default(),
        lambda0: pricing.lambda0.unwrap_or(0.0),
        lambda_user,
        basis: pricing.user_basis.unwrap_or_default(),
    };

    let run_doc = doc.run.unwrap_or_default();
    let defaults = RunSettings::default();
    let gamma = run_doc.gamma;
    let beta = run_doc.beta;
    let schedule = match run_doc.step_schedule.as_deref() {
        None => match (gamma, beta) {
            (None, None) => defaults.schedule.clone(),
            _ => StepSchedule::PowerLaw {
                gamma0: gamma.unwrap_or(1.0),
                beta: beta.unwrap_or(0.6),
            },
        },
        Some("constant") => StepSchedule::Constant {
            gamma: required(gamma, "run.gamma")?,
        },
        Some("power_law") => StepSchedule::PowerLaw {
            gamma0: gamma.unwrap_or(1.0),
            beta: beta.unwrap_or(0.6),
        },
        Some("stc") => StepSchedule::Stc {
            gamma_explore: gamma.unwrap_or(1.0),
            beta_converge: beta.unwrap_or(0.6),
            window: run_doc.window.unwrap_or(6),
            alternations: run_doc.alternations.unwrap_or(3),
        },
        Some(other) => {
            return Err(Error::invalid(
                "run.step_schedule",
                format!("unknown schedule `{other}` (expected constant, power_law or stc)"),
            ))
        }
    };
    let run = RunSettings {
        iterations: run_doc.iterations.unwrap_or(defaults.iterations),
        schedule,
        power_change_tol: run_doc.power_change_tol.unwrap_or(defaults.power_change_tol),
        patience: run_doc.patience.unwrap_or(defaults.patience),
        log_stride: run_doc.log_stride.unwrap_or(defaults.log_stride),
    };

    let config = NetworkConfig {
        num_users,
        num_subcarriers,
        max_power,
        noise,
        i_max,
        pricing,
        pu_power,
        pu_distance,
        area_edge,
        path_loss,
        channel_model: channel.model.unwrap_or_default(),
        seed: run_doc.seed.unwrap_or(42),
        run,
    };
    config.validate()?;
    Ok(config)
}

/// The reference scenario as a document, handy as a template.
pub const DEFAULT_SCENARIO_TOML: &str = r#"[network]
users = 10
subcarriers = 10
area_m = 200.0

[radio]
max_power_dbm = 21.03
noise_psd_dbm_hz = -173.0
bandwidth_hz = 10930.0
carrier_hz = 2.4e9

[pu]
power_dbm = 30.0
distance_m = 50.0
i_max_dbm = -70.0

[channel]
model = "static"
path_loss_exponent = 3.0
fading = true

[pricing]
flat = "vp"
user = "none"
lambda0 = 0.5

[run]
seed = 42
iterations = 2000
step_schedule = "power_law"
gamma = 1.0
beta = 0.6
power_change_tol = 1e-6
"#;
