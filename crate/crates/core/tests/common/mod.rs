//! Random instances shared by the integration tests.
#![allow(dead_code)]

use cogpower::prelude::*;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const P_MAX: f64 = 0.1268;
pub const SIGMA2: f64 = 5.48e-17;
pub const I_MAX: f64 = 1e-10;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Gains log-uniform over 1e-11 .. 1e-7, the range of the reference geometry.
pub fn random_gains<R: Rng>(rng: &mut R, k: usize, s: usize) -> Array2<f64> {
    Array2::from_shape_fn((k, s), |_| 10f64.powf(rng.random_range(-11.0..-7.0)))
}

pub fn random_pricing<R: Rng>(rng: &mut R, k: usize) -> PricingSpec {
    let flat = [FlatPricing::None, FlatPricing::Linear, FlatPricing::Violation][rng.random_range(0..3)];
    let user = [UserPricing::None, UserPricing::Linear, UserPricing::Violation][rng.random_range(0..3)];
    let basis = if rng.random_bool(0.5) {
        UserPriceBasis::Interference
    } else {
        UserPriceBasis::Power
    };
    let lambda0 = 10f64.powf(rng.random_range(-2.0..2.0));
    let lambda_user = (0..k).map(|_| 10f64.powf(rng.random_range(-2.0..2.0))).collect();
    PricingSpec {
        flat,
        user,
        lambda0,
        lambda_user,
        basis,
    }
}

pub fn game_with(gains: Array2<f64>, pricing: PricingSpec) -> Game {
    let (k, s) = gains.dim();
    Game::new(gains, vec![SIGMA2; s], vec![I_MAX; s], vec![P_MAX; k], pricing).expect("valid instance")
}

/// K, S in 1..=5 with random gains and a random pricing spec.
pub fn random_game(seed: u64) -> Game {
    let mut r = rng(seed);
    let k = r.random_range(1..=5);
    let s = r.random_range(1..=5);
    let gains = random_gains(&mut r, k, s);
    let pricing = random_pricing(&mut r, k);
    game_with(gains, pricing)
}

/// Feasible row: uniform weights on the S+1 simplex, the last entry unused budget.
pub fn random_row<R: Rng>(rng: &mut R, s: usize, cap: f64) -> Vec<f64> {
    let e: Vec<f64> = (0..=s).map(|_| -rng.random_range(f64::MIN_POSITIVE..1.0f64).ln()).collect();
    let total: f64 = e.iter().sum();
    e[..s].iter().map(|x| cap * x / total).collect()
}

pub fn random_profile<R: Rng>(rng: &mut R, game: &Game) -> PowerProfile {
    let (k, s) = game.gains().dim();
    let mut p = Array2::zeros((k, s));
    for u in 0..k {
        let row = random_row(rng, s, game.max_power()[u]);
        for c in 0..s {
            p[[u, c]] = row[c];
        }
    }
    PowerProfile::from_array(p)
}

/// Potential straight from its definition, without the crate's evaluation.
pub fn potential_by_definition(game: &Game, p: &PowerProfile) -> f64 {
    let (k, s) = game.gains().dim();
    let spec = game.pricing();
    let mut v = 0.0;
    for c in 0..s {
        let w: f64 = (0..k).map(|u| game.gains()[[u, c]] * p.get(u, c)).sum();
        let i = game.i_max()[c];
        v += (game.noise()[c] + w).ln();
        v -= match spec.flat {
            FlatPricing::None => 0.0,
            FlatPricing::Linear => spec.lambda0 * w / i,
            FlatPricing::Violation => spec.lambda0 * (w / i - 1.0).max(0.0),
        };
        for u in 0..k {
            let x = match spec.basis {
                UserPriceBasis::Interference => game.gains()[[u, c]] * p.get(u, c) / i,
                UserPriceBasis::Power => p.get(u, c) / game.max_power()[u],
            };
            v -= spec.lambda_user[u]
                * match spec.user {
                    UserPricing::None => 0.0,
                    UserPricing::Linear => x,
                    UserPricing::Violation => (x - 1.0).max(0.0),
                };
        }
    }
    v
}

/// Distance of every price argument from its kink; infinite when there is none.
pub fn kink_distance(game: &Game, p: &PowerProfile) -> f64 {
    let (k, s) = game.gains().dim();
    let spec = game.pricing();
    let w = game.interference(p);
    let mut d = f64::INFINITY;
    for c in 0..s {
        if spec.flat == FlatPricing::Violation {
            d = d.min((w[c] / game.i_max()[c] - 1.0).abs());
        }
        if spec.user == UserPricing::Violation {
            for u in 0..k {
                let x = match spec.basis {
                    UserPriceBasis::Interference => game.gains()[[u, c]] * p.get(u, c) / game.i_max()[c],
                    UserPriceBasis::Power => p.get(u, c) / game.max_power()[u],
                };
                d = d.min((x - 1.0).abs());
            }
        }
    }
    d
}
