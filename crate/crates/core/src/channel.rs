//! Channel gains: user placement, log-distance path loss and Rayleigh fading.

use std::io::{Read, Write};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::config::NetworkConfig;
use crate::{Error, Result};

const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn distance(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Log-distance path loss `c0 · d^(−α)`, optionally times a unit-mean
/// exponential (Rayleigh power) draw per user and subcarrier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLossParams {
    pub exponent: f64,
    pub reference_gain: f64,
    pub fading: bool,
}

impl PathLossParams {
    /// Reference gain from free-space loss at 1 m for the given carrier.
    pub fn free_space(carrier_hz: f64, exponent: f64) -> Self {
        let wavelength = SPEED_OF_LIGHT / carrier_hz;
        let c0 = (wavelength / (4.0 * std::f64::consts::PI)).powi(2);
        PathLossParams {
            exponent,
            reference_gain: c0,
            fading: false,
        }
    }

    pub fn unit(exponent: f64) -> Self {
        PathLossParams {
            exponent,
            reference_gain: 1.0,
            fading: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.exponent.is_finite() || self.exponent <= 0.0 {
            return Err(Error::invalid("channel.path_loss_exponent", "must be positive"));
        }
        if !self.reference_gain.is_finite() || self.reference_gain <= 0.0 {
            return Err(Error::invalid("channel.reference_gain", "must be positive"));
        }
        Ok(())
    }

    /// Large-scale gain at distance `d`.
    pub fn gain_at(&self, d: f64) -> Result<f64> {
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::invalid("distance", format!("must be positive, got {d}")));
        }
        Ok(self.reference_gain * d.powf(-self.exponent))
    }
}

/// One draw of every gain in the system.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// `g_ks`, users by subcarriers.
    pub gains: Array2<f64>,
    pub pu_gain: f64,
}

/// Drops `k` users uniformly on `[0, edge]²`.
pub fn place_users<R: Rng + ?Sized>(rng: &mut R, k: usize, edge: f64) -> Result<Vec<Position>> {
    if !(edge > 0.0) || !edge.is_finite() {
        return Err(Error::invalid("network.area_m", "area edge must be positive"));
    }
    Ok((0..k)
        .map(|_| Position {
            x: rng.random::<f64>() * edge,
            y: rng.random::<f64>() * edge,
        })
        .collect())
}

/// Gains for users at `positions` towards a receiver at `receiver`.
pub fn static_gains<R: Rng + ?Sized>(
    positions: &[Position],
    receiver: Position,
    num_subcarriers: usize,
    params: &PathLossParams,
    rng: &mut R,
) -> Result<Array2<f64>> {
    let mut g = Array2::zeros((positions.len(), num_subcarriers));
    for (k, pos) in positions.iter().enumerate() {
        let d = pos.distance(&receiver);
        if d <= 0.0 {
            return Err(Error::ZeroDistance { user: k });
        }
        let mean = params.gain_at(d)?;
        for s in 0..num_subcarriers {
            let f: f64 = if params.fading { rng.sample(Exp1) } else { 1.0 };
            g[[k, s]] = mean * f;
        }
    }
    Ok(g)
}

/// Gain of the primary link at distance `d`.
pub fn pu_link_gain(d: f64, params: &PathLossParams) -> Result<f64> {
    params.gain_at(d)
}

/// Static realization for a scenario: users placed from `config.seed`,
/// receiver at the centre of the area.
pub fn realize(config: &NetworkConfig) -> Result<ChannelRealization> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let positions = place_users(&mut rng, config.num_users, config.area_edge)?;
    let centre = Position {
        x: config.area_edge / 2.0,
        y: config.area_edge / 2.0,
    };
    let gains = static_gains(&positions, centre, config.num_subcarriers, &config.path_loss, &mut rng)?;
    Ok(ChannelRealization {
        gains,
        pu_gain: pu_link_gain(config.pu_distance, &config.path_loss)?,
    })
}

/// Small-scale fading law applied on top of the mean gains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FadingDistribution {
    /// `|h|²` of a circular complex Gaussian: exponential with unit mean.
    #[default]
    RayleighIid,
    /// No fading; every draw returns the mean gains.
    PointMass,
}

/// Block fading around fixed mean gains: every call to
/// [`FadingProcess::sample`] is a fresh, independent block.
#[derive(Debug, Clone)]
pub struct FadingProcess {
    mean_gains: Array2<f64>,
    pu_gain: f64,
    distribution: FadingDistribution,
    rng: ChaCha8Rng,
}

impl FadingProcess {
    pub fn new(mean_gains: Array2<f64>, pu_gain: f64, seed: u64) -> Result<Self> {
        if mean_gains.iter().any(|g| !g.is_finite() || *g < 0.0) {
            return Err(Error::invalid("mean_gains", "must be finite and nonnegative"));
        }
        Ok(FadingProcess {
            mean_gains,
            pu_gain,
            distribution: FadingDistribution::RayleighIid,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn with_distribution(mut self, distribution: FadingDistribution) -> Self {
        self.distribution = distribution;
        self
    }

    pub fn distribution(&self) -> FadingDistribution {
        self.distribution
    }

    pub fn mean_gains(&self) -> &Array2<f64> {
        &self.mean_gains
    }

    /// `g_ks = ḡ_ks · e_ks`, `e_ks ~ Exp(1)` i.i.d. under Rayleigh fading.
    pub fn sample(&mut self) -> ChannelRealization {
        let gains = match self.distribution {
            FadingDistribution::PointMass => self.mean_gains.clone(),
            FadingDistribution::RayleighIid => {
                let rng = &mut self.rng;
                self.mean_gains.mapv(|m| {
                    let e: f64 = rng.sample(Exp1);
                    m * e
                })
            }
        };
        ChannelRealization {
            gains,
            pu_gain: self.pu_gain,
        }
    }

    pub fn sample_gains(&mut self) -> Array2<f64> {
        self.sample().gains
    }
}

/// Free function form of [`FadingProcess::sample`].
pub fn sample_fading(process: &mut FadingProcess) -> ChannelRealization {
    process.sample()
}

/// Writes gains as CSV: one row per user, one column per subcarrier.
pub fn write_gains_csv<W: Write>(gains: &Array2<f64>, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    for row in gains.rows() {
        w.write_record(row.iter().map(|g| format!("{g:e}")))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_gains_csv<R: Read>(input: R) -> Result<Array2<f64>> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_reader(input);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("gain `{f}`: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    let k = rows.len();
    let s = rows.first().map_or(0, Vec::len);
    if k == 0 || s == 0 || rows.iter().any(|r| r.len() != s) {
        return Err(Error::Parse("gain matrix must be non-empty and rectangular".into()));
    }
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    if flat.iter().any(|g| !g.is_finite() || *g < 0.0) {
        return Err(Error::Parse("gains must be finite and nonnegative".into()));
    }
    Ok(Array2::from_shape_vec((k, s), flat).expect("shape checked"))
}
