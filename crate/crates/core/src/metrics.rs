//! Reported quantities: violation index, equilibration level, sum-rates,
//! primary rate, revenue and the uniform-power baseline.

use serde::Serialize;

use crate::game::{Game, PowerProfile};
use crate::units::nats_to_bits;
use crate::{Error, Result};

/// `Ψ_s = w_s / I_s` and their mean.
pub fn violation_index(w: &[f64], i_max: &[f64]) -> (Vec<f64>, f64) {
    let psi: Vec<f64> = w.iter().zip(i_max).map(|(a, b)| a / b).collect();
    let mean = if psi.is_empty() {
        0.0
    } else {
        psi.iter().sum::<f64>() / psi.len() as f64
    };
    (psi, mean)
}

/// `(V_n − V_min) / (V_max − V_min)`.
pub fn eql(v_n: f64, v_min: f64, v_max: f64) -> Result<f64> {
    let range = v_max - v_min;
    if !(range > 0.0) || !range.is_finite() {
        return Err(Error::DegenerateRange(range));
    }
    Ok((v_n - v_min) / range)
}

/// First index at which `series` reaches `target`.
pub fn iterations_to_target(series: &[f64], target: f64) -> Option<usize> {
    series.iter().position(|&e| e >= target)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub psi: Vec<f64>,
    pub mean_psi: f64,
    pub sum_rate_nats: f64,
    pub sum_rate_bits: f64,
    pub pu_rate: f64,
    pub revenue: f64,
    pub total_power: f64,
    pub potential: f64,
    pub congestion_index: f64,
    /// Equilibration level along a trajectory, when the extrema are known.
    pub eql_series: Vec<f64>,
    pub iterations_to_target: Option<usize>,
}

impl MetricReport {
    pub fn with_eql(mut self, series: Vec<f64>, target: f64) -> Self {
        self.iterations_to_target = iterations_to_target(&series, target);
        self.eql_series = series;
        self
    }
}

/// Snapshot metrics of `p`.
pub fn report(game: &Game, p: &PowerProfile) -> MetricReport {
    let w = game.interference(p);
    let (psi, mean_psi) = violation_index(&w, game.i_max());
    let sum_rate_nats: f64 = game.rates(p).iter().sum();
    MetricReport {
        psi,
        mean_psi,
        sum_rate_nats,
        sum_rate_bits: nats_to_bits(sum_rate_nats),
        pu_rate: game.pu_rate(p),
        revenue: game.operator_revenue(p),
        total_power: p.total_power(),
        potential: game.potential(p),
        congestion_index: game.num_users() as f64 / game.num_subcarriers() as f64,
        eql_series: Vec::new(),
        iterations_to_target: None,
    }
}

/// Every user at full power split evenly across subcarriers.
pub fn uniform_baseline(game: &Game) -> (PowerProfile, MetricReport) {
    let p = PowerProfile::uniform(game.max_power(), game.num_subcarriers());
    let r = report(game, &p);
    (p, r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::PricingSpec;
    use ndarray::array;

    #[test]
    fn violation_examples() {
        let i = [2.0, 2.0];
        assert_eq!(violation_index(&[2.0, 2.0], &i).0, vec![1.0, 1.0]);
        assert_eq!(violation_index(&[0.0, 0.0], &i).1, 0.0);
        assert_eq!(violation_index(&[1.0, 3.0], &i).1, 1.0);
    }

    #[test]
    fn eql_examples() {
        assert_eq!(eql(3.0, 1.0, 3.0).unwrap(), 1.0);
        assert_eq!(eql(1.0, 1.0, 3.0).unwrap(), 0.0);
        assert_eq!(eql(2.0, 1.0, 3.0).unwrap(), 0.5);
        assert!(matches!(eql(1.0, 2.0, 2.0), Err(Error::DegenerateRange(_))));
        assert_eq!(iterations_to_target(&[0.1, 0.5, 0.96, 0.9], 0.95), Some(2));
    }

    #[test]
    fn baseline_examples() {
        let game = Game::new(array![[1.0, 2.0], [0.5, 0.25]], vec![1.0, 1.0], vec![1.0, 1.0], vec![1.0, 2.0], PricingSpec::none(2))
            .unwrap();
        let (p, r) = uniform_baseline(&game);
        assert_eq!(p.user(0).to_vec(), vec![0.5, 0.5]);
        assert_eq!(game.interference(&p), vec![1.0 * 0.5 + 0.5 * 1.0, 2.0 * 0.5 + 0.25 * 1.0]);
        assert_eq!(r.revenue, 0.0);
        assert_eq!(r.congestion_index, 1.0);
        let rates: f64 = game.rates(&p).iter().sum();
        assert!((r.sum_rate_nats - rates).abs() < 1e-12);
    }
}
