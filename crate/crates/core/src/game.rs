//! The priced rate-maximisation game: SINR, rates, utilities, the exact
//! potential and the users' marginal utilities.

use ndarray::{Array2, ArrayView1, Axis};
use serde::Serialize;

use crate::channel::{self, ChannelRealization, FadingProcess};
use crate::config::{NetworkConfig, PricingSpec};
use crate::pricing::{flat_ramp, user_ramp, Ramp};
use crate::{Error, Result};

/// Joint power allocation, users by subcarriers, in Watt.
///
/// A profile is feasible when `p_ks ≥ 0` and `Σ_s p_ks ≤ P_k` for every user.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerProfile(Array2<f64>);

/// Relative slack allowed on the power budget when checking feasibility.
pub const FEASIBILITY_TOL: f64 = 1e-12;

impl PowerProfile {
    /// Wraps `powers` after checking feasibility against `max_power`.
    pub fn new(powers: Array2<f64>, max_power: &[f64]) -> Result<Self> {
        if powers.nrows() != max_power.len() {
            return Err(Error::invalid(
                "powers",
                format!("{} rows for {} users", powers.nrows(), max_power.len()),
            ));
        }
        let p = PowerProfile(powers);
        if !p.is_feasible(max_power, FEASIBILITY_TOL) {
            return Err(Error::invalid("powers", "profile is not feasible"));
        }
        Ok(p)
    }

    /// Wraps `powers` without the feasibility check, e.g. for evaluating
    /// perturbed points.
    pub fn from_array(powers: Array2<f64>) -> Self {
        PowerProfile(powers)
    }

    pub fn zeros(num_users: usize, num_subcarriers: usize) -> Self {
        PowerProfile(Array2::zeros((num_users, num_subcarriers)))
    }

    /// Full power split evenly, `p_ks = P_k / S`.
    pub fn uniform(max_power: &[f64], num_subcarriers: usize) -> Self {
        let s = num_subcarriers as f64;
        PowerProfile(Array2::from_shape_fn((max_power.len(), num_subcarriers), |(k, _)| {
            max_power[k] / s
        }))
    }

    /// The point reached from zero scores, `p_ks = P_k / (S + 1)`.
    pub fn interior_uniform(max_power: &[f64], num_subcarriers: usize) -> Self {
        let s = num_subcarriers as f64 + 1.0;
        PowerProfile(Array2::from_shape_fn((max_power.len(), num_subcarriers), |(k, _)| {
            max_power[k] / s
        }))
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }

    pub fn num_users(&self) -> usize {
        self.0.nrows()
    }

    pub fn num_subcarriers(&self) -> usize {
        self.0.ncols()
    }

    pub fn user(&self, k: usize) -> ArrayView1<'_, f64> {
        self.0.row(k)
    }

    pub fn get(&self, k: usize, s: usize) -> f64 {
        self.0[[k, s]]
    }

    /// Replaces user `k`'s allocation.
    pub fn with_user(&self, k: usize, p_k: ArrayView1<f64>) -> Self {
        let mut next = self.0.clone();
        next.row_mut(k).assign(&p_k);
        PowerProfile(next)
    }

    pub fn is_feasible(&self, max_power: &[f64], rel_tol: f64) -> bool {
        self.0.iter().all(|p| p.is_finite() && *p >= 0.0)
            && self
                .0
                .rows()
                .into_iter()
                .zip(max_power)
                .all(|(row, &cap)| row.sum() <= cap * (1.0 + rel_tol))
    }

    /// Total radiated power of all users.
    pub fn total_power(&self) -> f64 {
        self.0.sum()
    }

    /// Largest `|p_ks − q_ks|`.
    pub fn max_abs_diff(&self, other: &PowerProfile) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// `w_s = Σ_k g_ks p_ks`.
pub fn aggregate_interference(gains: &Array2<f64>, powers: &Array2<f64>) -> Vec<f64> {
    (gains * powers).sum_axis(Axis(0)).to_vec()
}

/// `sinr_ks = g_ks p_ks / (σ²_s + Σ_{ℓ≠k} g_ℓs p_ℓs)`.
pub fn compute_sinr(gains: &Array2<f64>, powers: &Array2<f64>, noise: &[f64]) -> Array2<f64> {
    let k_users = gains.nrows();
    Array2::from_shape_fn(gains.dim(), |(k, s)| {
        let others: f64 = (0..k_users)
            .filter(|&l| l != k)
            .map(|l| gains[[l, s]] * powers[[l, s]])
            .sum();
        gains[[k, s]] * powers[[k, s]] / (noise[s] + others)
    })
}

/// `R_k = Σ_s log(1 + sinr_ks)` in nats.
pub fn rate(k: usize, sinr: &Array2<f64>) -> f64 {
    sinr.row(k).iter().map(|x| x.ln_1p()).sum()
}

/// Recovers `w_s` from user `k`'s own measurements on subcarrier `s`:
/// `g p (1 + sinr) / sinr` is the received total `σ² + w`, so `σ²` is removed.
pub fn interference_from_sinr(g_ks: f64, p_ks: f64, sinr_ks: f64, noise_s: f64) -> Result<f64> {
    if !(sinr_ks > 0.0) {
        return Err(Error::ZeroSinr);
    }
    Ok(g_ks * p_ks * (1.0 + sinr_ks) / sinr_ks - noise_s)
}

/// Marginal rate gain from local measurements, `(1/p) · sinr / (1 + sinr)`.
pub fn measured_rate_marginal(p_ks: f64, sinr_ks: f64) -> f64 {
    sinr_ks / (1.0 + sinr_ks) / p_ks
}

/// Primary-user rate `Σ_s log(1 + g P / (w_s + floor))`.
pub fn pu_rate(w: &[f64], pu_gain: f64, pu_power: f64, floor: f64) -> f64 {
    w.iter()
        .map(|&ws| (pu_gain * pu_power / (ws + floor)).ln_1p())
        .sum()
}

/// Everything derived from one power profile.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GameSnapshot {
    pub sinr: Array2<f64>,
    pub w: Vec<f64>,
    pub rates: Vec<f64>,
    pub costs: Vec<f64>,
    pub utilities: Vec<f64>,
    pub potential: f64,
}

impl GameSnapshot {
    /// CSV header for [`GameSnapshot::csv_record`].
    pub fn csv_header(num_users: usize, num_subcarriers: usize) -> Vec<String> {
        let mut h = vec!["iteration".to_string()];
        for k in 0..num_users {
            h.push(format!("rate_{k}"));
            h.push(format!("cost_{k}"));
            h.push(format!("utility_{k}"));
        }
        for s in 0..num_subcarriers {
            h.push(format!("w_{s}"));
            h.push(format!("psi_{s}"));
        }
        h.push("potential".to_string());
        h
    }

    pub fn csv_record(&self, iteration: usize, i_max: &[f64]) -> Vec<String> {
        let mut r = vec![iteration.to_string()];
        for k in 0..self.rates.len() {
            r.push(format!("{:e}", self.rates[k]));
            r.push(format!("{:e}", self.costs[k]));
            r.push(format!("{:e}", self.utilities[k]));
        }
        for (s, ws) in self.w.iter().enumerate() {
            r.push(format!("{ws:e}"));
            r.push(format!("{:e}", ws / i_max[s]));
        }
        r.push(format!("{:e}", self.potential));
        r
    }
}

/// A fully specified game instance: one gain realization plus the radio
/// parameters and prices.
#[derive(Debug, Clone, PartialEq)]
pub struct Game {
    gains: Array2<f64>,
    noise: Vec<f64>,
    i_max: Vec<f64>,
    max_power: Vec<f64>,
    pricing: PricingSpec,
    pu_gain: f64,
    pu_power: f64,
}

impl Game {
    pub fn new(
        gains: Array2<f64>,
        noise: Vec<f64>,
        i_max: Vec<f64>,
        max_power: Vec<f64>,
        pricing: PricingSpec,
    ) -> Result<Self> {
        let (k, s) = gains.dim();
        if k == 0 || s == 0 {
            return Err(Error::invalid("gains", "need at least one user and one subcarrier"));
        }
        if noise.len() != s || i_max.len() != s || max_power.len() != k {
            return Err(Error::invalid("game", "dimension mismatch"));
        }
        if gains.iter().any(|g| !g.is_finite() || *g < 0.0) {
            return Err(Error::invalid("gains", "must be finite and nonnegative"));
        }
        if noise.iter().chain(&i_max).chain(&max_power).any(|x| !x.is_finite() || *x <= 0.0) {
            return Err(Error::invalid("game", "noise, tolerances and power caps must be positive"));
        }
        pricing.validate(k)?;
        Ok(Game {
            gains,
            noise,
            i_max,
            max_power,
            pricing,
            pu_gain: 0.0,
            pu_power: 0.0,
        })
    }

    /// Attaches the primary link used by [`Game::pu_rate`].
    pub fn with_primary(mut self, pu_gain: f64, pu_power: f64) -> Self {
        self.pu_gain = pu_gain;
        self.pu_power = pu_power;
        self
    }

    /// Builds the game for `config`'s static realization.
    pub fn from_config(config: &NetworkConfig) -> Result<Self> {
        config.validate()?;
        let ChannelRealization { gains, pu_gain } = channel::realize(config)?;
        Self::from_config_with_gains(config, gains, pu_gain)
    }

    pub fn from_config_with_gains(config: &NetworkConfig, gains: Array2<f64>, pu_gain: f64) -> Result<Self> {
        Ok(Game::new(
            gains,
            config.noise.clone(),
            config.i_max.clone(),
            config.max_power.clone(),
            config.pricing.clone(),
        )?
        .with_primary(pu_gain, config.pu_power))
    }

    /// Same game on a different gain realization.
    pub fn with_gains(&self, gains: Array2<f64>) -> Self {
        assert_eq!(gains.dim(), self.gains.dim(), "gain matrix shape");
        Game {
            gains,
            ..self.clone()
        }
    }

    pub fn with_pricing(&self, pricing: PricingSpec) -> Result<Self> {
        pricing.validate(self.num_users())?;
        Ok(Game {
            pricing,
            ..self.clone()
        })
    }

    pub fn num_users(&self) -> usize {
        self.gains.nrows()
    }

    pub fn num_subcarriers(&self) -> usize {
        self.gains.ncols()
    }

    pub fn gains(&self) -> &Array2<f64> {
        &self.gains
    }

    pub fn noise(&self) -> &[f64] {
        &self.noise
    }

    pub fn i_max(&self) -> &[f64] {
        &self.i_max
    }

    pub fn max_power(&self) -> &[f64] {
        &self.max_power
    }

    pub fn pricing(&self) -> &PricingSpec {
        &self.pricing
    }

    pub fn pu_gain(&self) -> f64 {
        self.pu_gain
    }

    pub fn pu_power(&self) -> f64 {
        self.pu_power
    }

    pub fn flat_ramp(&self, s: usize) -> Ramp {
        flat_ramp(&self.pricing, self.i_max[s])
    }

    pub fn user_ramp(&self, k: usize, s: usize) -> Ramp {
        self.user_ramp_for(&self.gains, k, s)
    }

    fn user_ramp_for(&self, gains: &Array2<f64>, k: usize, s: usize) -> Ramp {
        user_ramp(&self.pricing, k, gains[[k, s]], self.i_max[s], self.max_power[k])
    }

    /// True when some price has a kink (violation pricing).
    pub fn has_kinks(&self) -> bool {
        (0..self.num_subcarriers()).any(|s| {
            self.flat_ramp(s).has_kink() || (0..self.num_users()).any(|k| self.user_ramp(k, s).has_kink())
        })
    }

    pub fn interference(&self, p: &PowerProfile) -> Vec<f64> {
        aggregate_interference(&self.gains, p.as_array())
    }

    pub fn sinr(&self, p: &PowerProfile) -> Array2<f64> {
        compute_sinr(&self.gains, p.as_array(), &self.noise)
    }

    pub fn rates(&self, p: &PowerProfile) -> Vec<f64> {
        let sinr = self.sinr(p);
        (0..self.num_users()).map(|k| rate(k, &sinr)).collect()
    }

    pub fn flat_price(&self, w: &[f64]) -> f64 {
        w.iter().enumerate().map(|(s, &ws)| self.flat_ramp(s).value(ws)).sum()
    }

    pub fn user_price(&self, k: usize, p: &PowerProfile) -> f64 {
        (0..self.num_subcarriers())
            .map(|s| self.user_ramp(k, s).value(p.get(k, s)))
            .sum()
    }

    /// `C_k(p)`.
    pub fn cost(&self, k: usize, p: &PowerProfile) -> f64 {
        self.flat_price(&self.interference(p)) + self.user_price(k, p)
    }

    /// `u_k(p) = R_k(p) − C_k(p)`.
    pub fn utility(&self, k: usize, p: &PowerProfile) -> f64 {
        let sinr = self.sinr(p);
        rate(k, &sinr) - self.cost(k, p)
    }

    /// `V(p) = Σ_s log(σ²_s + w_s) − π0(w) − Σ_k π_k(p_k)`.
    pub fn potential(&self, p: &PowerProfile) -> f64 {
        self.potential_with(&self.gains, p.as_array(), 0.0)
    }

    /// Potential with violation kinks replaced by softplus of relative width `mu`.
    pub fn potential_smoothed(&self, p: &PowerProfile, mu: f64) -> f64 {
        self.potential_with(&self.gains, p.as_array(), mu)
    }

    pub(crate) fn potential_with(&self, gains: &Array2<f64>, p: &Array2<f64>, mu: f64) -> f64 {
        let (k_users, s_carriers) = gains.dim();
        let mut v = 0.0;
        for s in 0..s_carriers {
            let mut ws = 0.0;
            for k in 0..k_users {
                let pks = p[[k, s]];
                ws += gains[[k, s]] * pks;
                v -= self.user_ramp_for(gains, k, s).smoothed_value(pks, mu);
            }
            v += (self.noise[s] + ws).ln() - self.flat_ramp(s).smoothed_value(ws, mu);
        }
        v
    }

    /// `v_ks = g_ks (1/(σ²_s + w_s) − ∂π0/∂w_s) − ∂π_k/∂p_ks`, which is also `∂V/∂p_ks`.
    pub fn marginals(&self, p: &PowerProfile) -> Array2<f64> {
        self.marginals_with(&self.gains, p.as_array(), 0.0)
    }

    pub fn marginals_smoothed(&self, p: &PowerProfile, mu: f64) -> Array2<f64> {
        self.marginals_with(&self.gains, p.as_array(), mu)
    }

    pub(crate) fn marginals_with(&self, gains: &Array2<f64>, p: &Array2<f64>, mu: f64) -> Array2<f64> {
        let w = aggregate_interference(gains, p);
        let common: Vec<f64> = (0..w.len())
            .map(|s| 1.0 / (self.noise[s] + w[s]) - self.flat_ramp(s).smoothed_slope(w[s], mu))
            .collect();
        Array2::from_shape_fn(gains.dim(), |(k, s)| {
            gains[[k, s]] * common[s] - self.user_ramp_for(gains, k, s).smoothed_slope(p[[k, s]], mu)
        })
    }

    pub fn snapshot(&self, p: &PowerProfile) -> GameSnapshot {
        let w = self.interference(p);
        let sinr = self.sinr(p);
        let flat = self.flat_price(&w);
        let rates: Vec<f64> = (0..self.num_users()).map(|k| rate(k, &sinr)).collect();
        let costs: Vec<f64> = (0..self.num_users()).map(|k| flat + self.user_price(k, p)).collect();
        let utilities = rates.iter().zip(&costs).map(|(r, c)| r - c).collect();
        GameSnapshot {
            sinr,
            w,
            rates,
            costs,
            utilities,
            potential: self.potential(p),
        }
    }

    /// Primary rate, with the receiver noise as floor so a silent secondary
    /// network does not divide by zero.
    pub fn pu_rate(&self, p: &PowerProfile) -> f64 {
        let floor = self.noise.iter().cloned().fold(f64::INFINITY, f64::min);
        pu_rate(&self.interference(p), self.pu_gain, self.pu_power, floor)
    }

    /// Charges collected from all users, `K π0 + Σ_k π_k`.
    pub fn operator_revenue(&self, p: &PowerProfile) -> f64 {
        let flat = self.flat_price(&self.interference(p));
        let users: f64 = (0..self.num_users()).map(|k| self.user_price(k, p)).sum();
        self.num_users() as f64 * flat + users
    }

    /// Monte-Carlo estimate of the ergodic potential, treating this game's
    /// gains as the fading means of `fading`.
    pub fn ergodic_potential_estimate(
        &self,
        p: &PowerProfile,
        fading: &mut FadingProcess,
        n_samples: usize,
    ) -> Result<Estimate> {
        if n_samples == 0 {
            return Err(Error::invalid("n_samples", "need at least one sample"));
        }
        let values: Vec<f64> = (0..n_samples)
            .map(|_| {
                let g = fading.sample_gains();
                self.potential_with(&g, p.as_array(), 0.0)
            })
            .collect();
        Ok(Estimate::from_samples(&values))
    }
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn from_samples(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let stderr = if values.len() > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        } else {
            0.0
        };
        Estimate { mean, stderr }
    }
}

/// Sample-average version of the ergodic game: the potential and its gradient
/// averaged over a fixed set of gain draws.
#[derive(Debug, Clone)]
pub struct SampledGame {
    game: Game,
    samples: Vec<Array2<f64>>,
}

impl SampledGame {
    pub fn new(game: Game, samples: Vec<Array2<f64>>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("samples", "need at least one gain sample"));
        }
        if samples.iter().any(|g| g.dim() != game.gains().dim()) {
            return Err(Error::invalid("samples", "gain sample shape mismatch"));
        }
        Ok(SampledGame { game, samples })
    }

    /// Draws `n` samples from `fading`.
    pub fn draw(game: Game, fading: &mut FadingProcess, n: usize) -> Result<Self> {
        let samples = (0..n).map(|_| fading.sample_gains()).collect();
        Self::new(game, samples)
    }

    pub fn game(&self) -> &Game {
        &self.game
    }

    pub fn samples(&self) -> &[Array2<f64>] {
        &self.samples
    }

    pub fn potential(&self, p: &PowerProfile) -> f64 {
        self.potential_smoothed(p, 0.0)
    }

    pub fn potential_smoothed(&self, p: &PowerProfile, mu: f64) -> f64 {
        let sum: f64 = self
            .samples
            .iter()
            .map(|g| self.game.potential_with(g, p.as_array(), mu))
            .sum();
        sum / self.samples.len() as f64
    }

    pub fn potential_estimate(&self, p: &PowerProfile) -> Estimate {
        let values: Vec<f64> = self
            .samples
            .iter()
            .map(|g| self.game.potential_with(g, p.as_array(), 0.0))
            .collect();
        Estimate::from_samples(&values)
    }

    pub fn marginals_smoothed(&self, p: &PowerProfile, mu: f64) -> Array2<f64> {
        let mut acc = Array2::zeros(self.game.gains().dim());
        for g in &self.samples {
            acc += &self.game.marginals_with(g, p.as_array(), mu);
        }
        acc / self.samples.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{FlatPricing, UserPricing};
    use ndarray::array;

    fn single(g: f64, sigma2: f64, pricing: PricingSpec) -> Game {
        Game::new(array![[g]], vec![sigma2], vec![1.0], vec![1.0], pricing).unwrap()
    }

    #[test]
    fn sinr_examples() {
        let s = compute_sinr(&array![[2.0]], &array![[0.5]], &[1.0]);
        assert_eq!(s[[0, 0]], 1.0);
        let s = compute_sinr(&array![[1.0, 3.0], [2.0, 1.0]], &Array2::zeros((2, 2)), &[1.0, 1.0]);
        assert!(s.iter().all(|&x| x == 0.0));
        let s = compute_sinr(&array![[1.0], [1.0]], &array![[1.0], [1.0]], &[1.0]);
        assert_eq!((s[[0, 0]], s[[1, 0]]), (0.5, 0.5));
    }

    #[test]
    fn rate_examples() {
        let sinr = array![[1.0]];
        assert!((rate(0, &sinr) - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(rate(0, &Array2::zeros((1, 3))), 0.0);
    }

    #[test]
    fn potential_trivial_cases() {
        let g = Game::new(
            array![[1.0, 2.0]],
            vec![0.5, 2.0],
            vec![1.0, 1.0],
            vec![1.0],
            PricingSpec::none(1),
        )
        .unwrap();
        let zero = PowerProfile::zeros(1, 2);
        assert!((g.potential(&zero) - (0.5f64.ln() + 2.0f64.ln())).abs() < 1e-15);
        let p = PowerProfile::new(array![[0.3, 0.6]], &[1.0]).unwrap();
        let r = g.rates(&p)[0];
        assert!((g.potential(&p) - g.potential(&zero) - r).abs() < 1e-14);
    }

    #[test]
    fn marginal_examples() {
        let g = single(1.0, 1.0, PricingSpec::none(1));
        let p = PowerProfile::new(array![[1.0]], &[1.0]).unwrap();
        assert!((g.marginals(&p)[[0, 0]] - 0.5).abs() < 1e-15);
        let g = single(1.0, 1.0, PricingSpec::flat(FlatPricing::Linear, 1.0, 1));
        assert!((g.marginals(&p)[[0, 0]] + 0.5).abs() < 1e-15);
    }

    #[test]
    fn interference_recovery_examples() {
        // two users, user 0 sees sinr 0.5: 1·1·(1.5/0.5) − 1 = 2
        assert!((interference_from_sinr(1.0, 1.0, 0.5, 1.0).unwrap() - 2.0).abs() < 1e-15);
        // single user sees sinr 1: 1·(2/1) − 1 = 1
        assert!((interference_from_sinr(1.0, 1.0, 1.0, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(interference_from_sinr(1.0, 0.0, 0.0, 1.0), Err(Error::ZeroSinr)));
    }

    #[test]
    fn pu_rate_examples() {
        assert!((pu_rate(&[2.0], 1.0, 2.0, 0.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(pu_rate(&[1e300], 1.0, 1.0, 0.0) < 1e-299);
        assert!(pu_rate(&[0.0], 1.0, 1.0, 1e-3).is_finite());
    }

    #[test]
    fn revenue_cases() {
        let gains = array![[1.0, 0.5], [0.3, 2.0]];
        let p = PowerProfile::new(array![[0.2, 0.3], [0.1, 0.4]], &[1.0, 1.0]).unwrap();
        let game = Game::new(gains.clone(), vec![1.0, 1.0], vec![1.0, 1.0], vec![1.0, 1.0], PricingSpec::none(2)).unwrap();
        assert_eq!(game.operator_revenue(&p), 0.0);
        // w = (0.23, 0.95) < I_max: no violation charge
        let vp = game.with_pricing(PricingSpec::flat(FlatPricing::Violation, 5.0, 2)).unwrap();
        assert_eq!(vp.operator_revenue(&p), 0.0);
        let lp = PricingSpec {
            user: UserPricing::Linear,
            lambda_user: vec![0.5, 2.0],
            ..PricingSpec::flat(FlatPricing::Linear, 3.0, 2)
        };
        let lp = game.with_pricing(lp).unwrap();
        let flat = 3.0 * (0.2 + 0.03 + 0.15 + 0.8);
        let users = 0.5 * (0.2 + 0.15) + 2.0 * (0.03 + 0.8);
        assert!((lp.operator_revenue(&p) - (2.0 * flat + users)).abs() < 1e-12);
    }

    #[test]
    fn snapshot_consistency() {
        let cfg = NetworkConfig::reference(3, 4);
        let game = Game::from_config(&cfg).unwrap();
        let p = PowerProfile::uniform(game.max_power(), 4);
        let snap = game.snapshot(&p);
        for s in 0..4 {
            let direct: f64 = (0..3).map(|k| game.gains()[[k, s]] * p.get(k, s)).sum();
            assert_eq!(snap.w[s], direct);
        }
        for k in 0..3 {
            assert_eq!(snap.utilities[k], snap.rates[k] - snap.costs[k]);
            assert!((snap.utilities[k] - game.utility(k, &p)).abs() < 1e-12);
        }
        let header = GameSnapshot::csv_header(3, 4);
        assert_eq!(header.len(), snap.csv_record(0, game.i_max()).len());
    }

    #[test]
    fn feasibility_checks() {
        assert!(PowerProfile::new(array![[0.5, 0.6]], &[1.0]).is_err());
        assert!(PowerProfile::new(array![[-0.1, 0.6]], &[1.0]).is_err());
        assert!(PowerProfile::new(array![[0.4, 0.6]], &[1.0]).is_ok());
        let p = PowerProfile::interior_uniform(&[3.0, 1.0], 2);
        assert_eq!(p.get(0, 1), 1.0);
    }

    #[test]
    fn ergodic_estimates() {
        let game = Game::new(
            array![[1.0, 0.5], [0.2, 1.0]],
            vec![1.0, 1.0],
            vec![1.0, 1.0],
            vec![1.0, 1.0],
            PricingSpec::none(2),
        )
        .unwrap();
        let zero = PowerProfile::zeros(2, 2);
        let mut f = FadingProcess::new(game.gains().clone(), 0.0, 1).unwrap();
        let e = game.ergodic_potential_estimate(&zero, &mut f, 100).unwrap();
        assert_eq!(e.mean, 0.0);
        assert_eq!(e.stderr, 0.0);
        assert!(game.ergodic_potential_estimate(&zero, &mut f, 0).is_err());
    }
}
