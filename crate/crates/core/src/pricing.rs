//! Price functions and their derivatives.
//!
//! Every supported price is separable: the flat price is a sum over
//! subcarriers of a convex ramp in `w_s`, and a per-user price is a sum of
//! convex ramps in `p_ks`. [`Ramp`] is that one-dimensional building block;
//! the oracle relies on the separability to solve best responses exactly.

use ndarray::{Array2, ArrayView1};

use crate::config::{FlatPricing, PricingSpec, UserPriceBasis, UserPricing};
use crate::{Error, Result};

/// Nondecreasing convex piecewise-linear cost in one variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ramp {
    Zero,
    /// `slope · x`
    Linear { slope: f64 },
    /// `slope · [x − knee]_+`
    Hinge { slope: f64, knee: f64 },
}

impl Ramp {
    pub fn value(&self, x: f64) -> f64 {
        match *self {
            Ramp::Zero => 0.0,
            Ramp::Linear { slope } => slope * x,
            Ramp::Hinge { slope, knee } => slope * (x - knee).max(0.0),
        }
    }

    /// Derivative, taking the slope from below at the knee.
    pub fn slope_at(&self, x: f64) -> f64 {
        match *self {
            Ramp::Zero => 0.0,
            Ramp::Linear { slope } => slope,
            Ramp::Hinge { slope, knee } => {
                if x > knee {
                    slope
                } else {
                    0.0
                }
            }
        }
    }

    /// Largest slope the ramp ever takes.
    pub fn max_slope(&self) -> f64 {
        match *self {
            Ramp::Zero => 0.0,
            Ramp::Linear { slope } | Ramp::Hinge { slope, .. } => slope,
        }
    }

    /// Set of slope values over `x ≥ 0`.
    pub fn slopes(&self) -> Vec<f64> {
        match *self {
            Ramp::Zero => vec![0.0],
            Ramp::Linear { slope } => vec![slope],
            Ramp::Hinge { slope, knee } if knee > 0.0 => vec![0.0, slope],
            Ramp::Hinge { slope, .. } => vec![slope],
        }
    }

    /// Softplus-smoothed value with relative width `mu` around the knee.
    /// Overestimates the exact value by at most `slope · knee · mu · ln 2`.
    pub fn smoothed_value(&self, x: f64, mu: f64) -> f64 {
        match *self {
            Ramp::Hinge { slope, knee } if mu > 0.0 && knee > 0.0 => {
                let z = (x / knee - 1.0) / mu;
                slope * knee * mu * softplus(z)
            }
            _ => self.value(x),
        }
    }

    pub fn smoothed_slope(&self, x: f64, mu: f64) -> f64 {
        match *self {
            Ramp::Hinge { slope, knee } if mu > 0.0 && knee > 0.0 => {
                let z = (x / knee - 1.0) / mu;
                slope * logistic(z)
            }
            _ => self.slope_at(x),
        }
    }

    pub fn has_kink(&self) -> bool {
        matches!(self, Ramp::Hinge { slope, .. } if *slope > 0.0)
    }
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Flat-price ramp on subcarrier `s`, in the variable `w_s`.
pub fn flat_ramp(spec: &PricingSpec, i_max_s: f64) -> Ramp {
    if spec.lambda0 == 0.0 {
        return Ramp::Zero;
    }
    match spec.flat {
        FlatPricing::None => Ramp::Zero,
        FlatPricing::Linear => Ramp::Linear {
            slope: spec.lambda0 / i_max_s,
        },
        FlatPricing::Violation => Ramp::Hinge {
            slope: spec.lambda0 / i_max_s,
            knee: i_max_s,
        },
    }
}

/// Per-user price ramp of user `k` on subcarrier `s`, in the variable `p_ks`.
pub fn user_ramp(spec: &PricingSpec, k: usize, g_ks: f64, i_max_s: f64, max_power_k: f64) -> Ramp {
    let lambda = spec.lambda_user[k];
    if lambda == 0.0 {
        return Ramp::Zero;
    }
    let scale = match spec.basis {
        UserPriceBasis::Interference => g_ks / i_max_s,
        UserPriceBasis::Power => 1.0 / max_power_k,
    };
    if scale <= 0.0 {
        return Ramp::Zero;
    }
    match spec.user {
        UserPricing::None => Ramp::Zero,
        UserPricing::Linear => Ramp::Linear {
            slope: lambda * scale,
        },
        UserPricing::Violation => Ramp::Hinge {
            slope: lambda * scale,
            knee: 1.0 / scale,
        },
    }
}

/// A price value with its (sub)gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceEvaluation {
    pub value: f64,
    pub grad: Vec<f64>,
}

/// `π0(w)` and `∂π0/∂w_s`.
pub fn flat_price(spec: &PricingSpec, i_max: &[f64], w: &[f64]) -> Result<PriceEvaluation> {
    if w.iter().any(|x| !(*x >= 0.0)) {
        return Err(Error::invalid("w", "aggregate interference must be nonnegative"));
    }
    let mut value = 0.0;
    let grad = w
        .iter()
        .zip(i_max)
        .map(|(&ws, &is)| {
            let r = flat_ramp(spec, is);
            value += r.value(ws);
            r.slope_at(ws)
        })
        .collect();
    Ok(PriceEvaluation { value, grad })
}

/// `π_k(p_k)` and `∂π_k/∂p_ks`.
pub fn user_price(
    spec: &PricingSpec,
    k: usize,
    p_k: ArrayView1<f64>,
    g_k: ArrayView1<f64>,
    i_max: &[f64],
    max_power_k: f64,
) -> PriceEvaluation {
    let mut value = 0.0;
    let grad = (0..p_k.len())
        .map(|s| {
            let r = user_ramp(spec, k, g_k[s], i_max[s], max_power_k);
            value += r.value(p_k[s]);
            r.slope_at(p_k[s])
        })
        .collect();
    PriceEvaluation { value, grad }
}

/// `C_k(p) = π0(w(p)) + π_k(p_k)`.
pub fn total_cost(
    spec: &PricingSpec,
    k: usize,
    powers: &Array2<f64>,
    gains: &Array2<f64>,
    i_max: &[f64],
    max_power: &[f64],
) -> Result<f64> {
    let w: Vec<f64> = (0..powers.ncols())
        .map(|s| powers.column(s).dot(&gains.column(s)))
        .collect();
    let flat = flat_price(spec, i_max, &w)?;
    let user = user_price(spec, k, powers.row(k), gains.row(k), i_max, max_power[k]);
    Ok(flat.value + user.value)
}

/// Which of the two sufficient conditions for a unique equilibrium hold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UniquenessConditions {
    /// Every per-user price is strictly increasing in each of its arguments.
    pub strictly_increasing_user_prices: bool,
    /// The flat price is uniformly gentle or uniformly steep on every subcarrier.
    pub gentle_or_steep_flat_price: bool,
}

impl UniquenessConditions {
    pub fn any(&self) -> bool {
        self.strictly_increasing_user_prices || self.gentle_or_steep_flat_price
    }
}

pub fn uniqueness_conditions(
    spec: &PricingSpec,
    gains: &Array2<f64>,
    noise: &[f64],
    i_max: &[f64],
    max_power: &[f64],
) -> UniquenessConditions {
    let (k_users, s_carriers) = gains.dim();
    let strictly = spec.user == UserPricing::Linear
        && (0..k_users).all(|k| {
            (0..s_carriers).all(|s| {
                matches!(user_ramp(spec, k, gains[[k, s]], i_max[s], max_power[k]),
                         Ramp::Linear { slope } if slope > 0.0)
            })
        });
    let gentle_or_steep = (0..s_carriers).all(|s| {
        let full: f64 = (0..k_users).map(|k| gains[[k, s]] * max_power[k]).sum();
        let gentle_bound = 1.0 / (noise[s] + full);
        let steep_bound = 1.0 / noise[s];
        let slopes = flat_ramp(spec, i_max[s]).slopes();
        slopes.iter().all(|&d| d < gentle_bound) || slopes.iter().all(|&d| d > steep_bound)
    });
    UniquenessConditions {
        strictly_increasing_user_prices: strictly,
        gentle_or_steep_flat_price: gentle_or_steep,
    }
}
