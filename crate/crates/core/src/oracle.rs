//! Equilibrium certification independent of the learning dynamics.
//!
//! Equilibria of the game are the maximisers of the concave potential over
//! the product of the users' power polytopes. The oracle finds them by block
//! ascent with exact best responses (each user's problem is separable across
//! subcarriers once the multiplier of the power budget is fixed), refines
//! kinked instances with smoothed projected ascent, and offers a brute-force
//! grid search and vertex enumeration for tiny games.

use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::Serialize;

use crate::game::{Estimate, Game, PowerProfile, SampledGame};
use crate::pricing::Ramp;
use crate::{Error, Result};

/// How a certificate's profile was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateMethod {
    BlockAscent,
    SmoothedAscent,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumCertificate {
    pub p_star: PowerProfile,
    pub v_star: f64,
    /// Best-response gap of every user at `p_star`, in nats.
    pub br_gap: Vec<f64>,
    pub kkt_residual: f64,
    pub method: CertificateMethod,
    pub sweeps: usize,
}

impl EquilibriumCertificate {
    pub fn max_gap(&self) -> f64 {
        self.br_gap.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `key = value` lines.
    pub fn to_record(&self) -> String {
        let gaps: Vec<String> = self.br_gap.iter().map(|g| format!("{g:e}")).collect();
        let p: Vec<String> = self.p_star.as_array().iter().map(|x| format!("{x:e}")).collect();
        format!(
            "method = {:?}\nv_star = {:e}\nkkt_residual = {:e}\nbr_gap = [{}]\nsweeps = {}\np_star = [{}]\n",
            self.method,
            self.v_star,
            self.kkt_residual,
            gaps.join(", "),
            self.sweeps,
            p.join(", ")
        )
    }
}

/// Default best-response-gap tolerance of [`maximize_potential`], in nats.
pub const DEFAULT_TOL: f64 = 1e-10;

const MAX_SWEEPS: usize = 50_000;
const SMOOTHING_WIDTHS: [f64; 7] = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8];

/// Maximises the potential from the uniform interior point.
pub fn maximize_potential(game: &Game, tol: f64) -> Result<EquilibriumCertificate> {
    let start = PowerProfile::interior_uniform(game.max_power(), game.num_subcarriers());
    maximize_potential_from(game, &start, tol)
}

/// Maximises the potential from `start`; fails unless every best-response gap
/// ends up at most `tol`.
pub fn maximize_potential_from(game: &Game, start: &PowerProfile, tol: f64) -> Result<EquilibriumCertificate> {
    let cert = solve(game, start, tol)?;
    let worst = cert.max_gap();
    if worst > tol {
        return Err(Error::NonConvergence {
            solver: "maximize_potential",
            iterations: cert.sweeps,
            residual: worst,
        });
    }
    Ok(cert)
}

fn solve(game: &Game, start: &PowerProfile, tol: f64) -> Result<EquilibriumCertificate> {
    let (mut p, mut sweeps) = block_ascent(game, start.clone(), tol)?;
    let mut method = CertificateMethod::BlockAscent;
    if game.has_kinks() {
        // Block ascent can stall where the kinked flat price couples users;
        // a joint smoothed ascent followed by polishing escapes such points.
        let mut x = normalize(&p, game.max_power());
        for &mu in &SMOOTHING_WIDTHS {
            x = projected_ascent(&StaticModel { game, mu }, x, 1e-12, 5_000).0;
        }
        let (q, more) = block_ascent(game, denormalize(&x, game.max_power()), tol)?;
        sweeps += more;
        if game.potential(&q) > game.potential(&p) {
            p = q;
            method = CertificateMethod::SmoothedAscent;
        }
    }
    let br_gap = best_response_gap(game, &p)?;
    Ok(EquilibriumCertificate {
        v_star: game.potential(&p),
        kkt_residual: kkt_residual(game, &p),
        p_star: p,
        br_gap,
        method,
        sweeps,
    })
}

/// Gauss-Seidel sweeps of exact best responses until no user can gain more
/// than `tol`.
fn block_ascent(game: &Game, mut p: PowerProfile, tol: f64) -> Result<(PowerProfile, usize)> {
    for sweep in 1..=MAX_SWEEPS {
        let mut worst = 0.0f64;
        let mut moved = 0.0f64;
        for k in 0..game.num_users() {
            let br = best_response(game, &p, k)?;
            let q = p.with_user(k, br.view());
            let gain = game.utility(k, &q) - game.utility(k, &p);
            worst = worst.max(gain);
            let cap = game.max_power()[k];
            moved = moved.max(
                br.iter()
                    .zip(p.user(k))
                    .map(|(a, b)| (a - b).abs() / cap)
                    .fold(0.0, f64::max),
            );
            if gain > 0.0 {
                p = q;
            }
        }
        if worst <= tol * 1e-2 || moved == 0.0 {
            return Ok((p, sweep));
        }
    }
    Ok((p, MAX_SWEEPS))
}

/// User `k`'s utility-maximising powers against the others' powers in `p`.
pub fn best_response(game: &Game, p: &PowerProfile, k: usize) -> Result<Array1<f64>> {
    let s_count = game.num_subcarriers();
    let w = game.interference(p);
    let coords: Vec<Coordinate> = (0..s_count)
        .map(|s| {
            let g = game.gains()[[k, s]];
            let others = (w[s] - g * p.get(k, s)).max(0.0);
            Coordinate::new(g, game.noise()[s] + others, others, game.flat_ramp(s), game.user_ramp(k, s))
        })
        .collect();
    let budget = game.max_power()[k];
    let total = |mu: f64| coords.iter().map(|c| c.argmax(mu)).sum::<f64>();

    let mut out = Array1::zeros(s_count);
    if total(0.0) <= budget {
        for (s, c) in coords.iter().enumerate() {
            out[s] = c.argmax(0.0);
        }
        return Ok(out);
    }
    let mut lo = 0.0;
    let mut hi = coords.iter().map(|c| c.top_marginal()).fold(0.0, f64::max);
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if total(mid) > budget {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= hi * 1e-16 {
            break;
        }
    }
    for (s, c) in coords.iter().enumerate() {
        out[s] = c.argmax(hi).min(budget);
    }
    if !out.iter().all(|x| x.is_finite()) {
        return Err(Error::NonFinite("best response"));
    }
    // the multiplier bracket leaves the budget met up to rounding
    let sum = out.sum();
    if sum > budget {
        out.mapv_inplace(|x| x * budget / sum);
    }
    Ok(out)
}

/// One subcarrier of a user's problem, `log(b + g p) − φ(o + g p) − ψ(p)`.
struct Coordinate {
    g: f64,
    b: f64,
    /// Left ends of the pieces on which the derivative's price part is constant.
    starts: Vec<f64>,
    price_slopes: Vec<f64>,
}

impl Coordinate {
    fn new(g: f64, b: f64, others: f64, flat: Ramp, user: Ramp) -> Self {
        let mut breaks = vec![0.0];
        if g > 0.0 {
            if let Ramp::Hinge { knee, .. } = flat {
                let t = (knee - others) / g;
                if t > 0.0 {
                    breaks.push(t);
                }
            }
        }
        if let Ramp::Hinge { knee, .. } = user {
            if knee > 0.0 {
                breaks.push(knee);
            }
        }
        breaks.sort_by(|a, b| a.total_cmp(b));
        breaks.dedup();
        let price_slopes = (0..breaks.len())
            .map(|i| {
                let x = match breaks.get(i + 1) {
                    Some(r) => 0.5 * (breaks[i] + r),
                    None => 2.0 * breaks[i] + 1.0,
                };
                g * flat.slope_at(others + g * x) + user.slope_at(x)
            })
            .collect();
        Coordinate {
            g,
            b,
            starts: breaks,
            price_slopes,
        }
    }

    fn top_marginal(&self) -> f64 {
        self.g / self.b
    }

    /// Maximiser of the coordinate objective minus `mu · p` over `p ≥ 0`.
    fn argmax(&self, mu: f64) -> f64 {
        if self.g == 0.0 {
            return 0.0;
        }
        for (i, &left) in self.starts.iter().enumerate() {
            let right = self.starts.get(i + 1).copied().unwrap_or(f64::INFINITY);
            let denom = mu + self.price_slopes[i];
            let candidate = if denom > 0.0 {
                1.0 / denom - self.b / self.g
            } else {
                f64::INFINITY
            };
            if candidate <= left {
                return left;
            }
            if candidate < right {
                return candidate;
            }
        }
        f64::INFINITY
    }
}

/// For every user, how much utility a unilateral best response would add.
pub fn best_response_gap(game: &Game, p: &PowerProfile) -> Result<Vec<f64>> {
    (0..game.num_users())
        .map(|k| {
            let br = best_response(game, p, k)?;
            let q = p.with_user(k, br.view());
            Ok(game.utility(k, &q) - game.utility(k, p))
        })
        .collect()
}

/// Violation of the first-order conditions of the potential maximisation at
/// `p`, using the one-sided marginals (below the kink for violation prices).
pub fn kkt_residual(game: &Game, p: &PowerProfile) -> f64 {
    kkt_from_marginals(p, &game.marginals(p), game.max_power())
}

pub(crate) fn kkt_from_marginals(p: &PowerProfile, v: &Array2<f64>, max_power: &[f64]) -> f64 {
    let mut r = 0.0f64;
    for (k, &cap) in max_power.iter().enumerate() {
        let pk = p.user(k);
        let vk = v.row(k);
        let lambda = pk
            .iter()
            .zip(vk)
            .filter(|(&x, _)| x > 0.0)
            .map(|(_, &m)| m)
            .fold(0.0, f64::max);
        for (&x, &m) in pk.iter().zip(vk) {
            r = r.max(m - lambda).max(x / cap * (m - lambda).abs());
        }
        r = r.max(lambda * (1.0 - pk.sum() / cap));
    }
    r
}

/// Smooth concave objective over normalised powers `x_ks = p_ks / P_k`.
trait Objective {
    fn max_power(&self) -> &[f64];
    fn value(&self, p: &Array2<f64>) -> f64;
    fn gradient(&self, p: &Array2<f64>) -> Array2<f64>;
}

struct StaticModel<'a> {
    game: &'a Game,
    mu: f64,
}

impl Objective for StaticModel<'_> {
    fn max_power(&self) -> &[f64] {
        self.game.max_power()
    }
    fn value(&self, p: &Array2<f64>) -> f64 {
        self.game.potential_with(self.game.gains(), p, self.mu)
    }
    fn gradient(&self, p: &Array2<f64>) -> Array2<f64> {
        self.game.marginals_with(self.game.gains(), p, self.mu)
    }
}

struct SampledModel<'a> {
    model: &'a SampledGame,
    mu: f64,
}

impl Objective for SampledModel<'_> {
    fn max_power(&self) -> &[f64] {
        self.model.game().max_power()
    }
    fn value(&self, p: &Array2<f64>) -> f64 {
        self.model.potential_smoothed(&PowerProfile::from_array(p.clone()), self.mu)
    }
    fn gradient(&self, p: &Array2<f64>) -> Array2<f64> {
        self.model.marginals_smoothed(&PowerProfile::from_array(p.clone()), self.mu)
    }
}

/// `Σ slope · knee · ln 2` over every hinge of `game`: smoothing with
/// relative width `mu` lowers the potential by at most `mu` times this.
fn smoothing_bound_per_width(game: &Game) -> f64 {
    let hinge = |r: Ramp| match r {
        Ramp::Hinge { slope, knee } => slope * knee,
        _ => 0.0,
    };
    let mut b = 0.0;
    for s in 0..game.num_subcarriers() {
        b += hinge(game.flat_ramp(s));
        for k in 0..game.num_users() {
            b += hinge(game.user_ramp(k, s));
        }
    }
    b * std::f64::consts::LN_2
}

fn normalize(p: &PowerProfile, max_power: &[f64]) -> Array2<f64> {
    let mut x = p.as_array().clone();
    for (k, mut row) in x.axis_iter_mut(Axis(0)).enumerate() {
        row /= max_power[k];
    }
    x
}

fn denormalize(x: &Array2<f64>, max_power: &[f64]) -> PowerProfile {
    let mut p = x.clone();
    for (k, mut row) in p.axis_iter_mut(Axis(0)).enumerate() {
        row *= max_power[k];
    }
    PowerProfile::from_array(p)
}

/// Euclidean projection of each row onto `{x ≥ 0, Σ x ≤ 1}`.
pub(crate) fn project_rows(z: &mut Array2<f64>) {
    for row in z.axis_iter_mut(Axis(0)) {
        project_row(row);
    }
}

fn project_row(mut row: ndarray::ArrayViewMut1<f64>) {
    let clamped: Vec<f64> = row.iter().map(|v| v.max(0.0)).collect();
    if clamped.iter().sum::<f64>() <= 1.0 {
        row.iter_mut().zip(clamped).for_each(|(x, c)| *x = c);
        return;
    }
    let mut sorted: Vec<f64> = row.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, &u) in sorted.iter().enumerate() {
        cum += u;
        let t = (cum - 1.0) / (i + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    row.mapv_inplace(|v| (v - theta).max(0.0));
}

fn scaled_gradient<O: Objective>(model: &O, x: &Array2<f64>) -> (PowerProfile, Array2<f64>) {
    let caps = model.max_power();
    let p = denormalize(x, caps);
    let mut g = model.gradient(p.as_array());
    for (k, mut row) in g.axis_iter_mut(Axis(0)).enumerate() {
        row *= caps[k];
    }
    (p, g)
}

fn stationarity(x: &Array2<f64>, g: &Array2<f64>) -> f64 {
    let mut y = x + g;
    project_rows(&mut y);
    (&y - x).iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Frank-Wolfe duality gap `max_{z ∈ X} ⟨g, z − x⟩` in normalised
/// coordinates. For a concave objective it bounds `V* − V(x)` from above.
fn frank_wolfe_gap(x: &Array2<f64>, g: &Array2<f64>) -> f64 {
    x.outer_iter()
        .zip(g.outer_iter())
        .map(|(xr, gr)| {
            let best = gr.iter().copied().fold(0.0f64, f64::max);
            best - xr.dot(&gr)
        })
        .sum::<f64>()
        .max(0.0)
}

/// Projected gradient ascent with Barzilai-Borwein trial steps and Armijo
/// backtracking. Returns the final point, its stationarity residual and
/// the number of iterations.
fn projected_ascent<O: Objective>(model: &O, mut x: Array2<f64>, tol: f64, max_iter: usize) -> (Array2<f64>, f64, usize) {
    let (p, mut g) = scaled_gradient(model, &x);
    let mut v = model.value(p.as_array());
    let mut step = 1.0 / g.iter().fold(1e-300f64, |m, a| m.max(a.abs()));
    let mut residual = stationarity(&x, &g);
    for it in 0..max_iter {
        if residual <= tol {
            return (x, residual, it);
        }
        let mut accepted = None;
        for _ in 0..80 {
            let mut trial = &x + &(&g * step);
            project_rows(&mut trial);
            let d = &trial - &x;
            let predicted = (&g * &d).sum();
            let pt = denormalize(&trial, model.max_power());
            let vt = model.value(pt.as_array());
            // Values agree to a few ulps near the optimum; do not let rounding veto a step.
            let noise = 8.0 * f64::EPSILON * v.abs().max(1.0);
            if vt - v >= 1e-4 * predicted - noise && predicted >= 0.0 {
                accepted = Some((trial, vt, d));
                break;
            }
            step *= 0.5;
        }
        let Some((trial, vt, d)) = accepted else {
            return (x, residual, it);
        };
        let (_, gt) = scaled_gradient(model, &trial);
        let y = &gt - &g;
        let sy = -(&d * &y).sum();
        let ss = (&d * &d).sum();
        if ss == 0.0 {
            let r = stationarity(&trial, &gt);
            return (trial, r, it + 1);
        }
        step = if sy > 0.0 { (ss / sy).clamp(1e-30, 1e30) } else { step * 2.0 };
        x = trial;
        g = gt;
        v = vt;
        residual = stationarity(&x, &g);
    }
    (x, residual, max_iter)
}

/// Gauss-Seidel over users, each taking projected gradient steps on its own
/// row with its own Barzilai-Borwein step length. Users whose gradients
/// differ by many orders of magnitude then do not share one step size.
/// Stops when the Frank-Wolfe gap is at most `tol`; returns the point, the
/// gap and the number of sweeps.
fn block_projected_ascent<O: Objective>(model: &O, mut x: Array2<f64>, tol: f64, max_sweeps: usize) -> (Array2<f64>, f64, usize) {
    const INNER: usize = 20;
    let k_users = x.nrows();
    let mut steps = vec![f64::NAN; k_users];
    let (p, mut g) = scaled_gradient(model, &x);
    let mut v = model.value(p.as_array());
    let mut gap = frank_wolfe_gap(&x, &g);
    for sweep in 0..max_sweeps {
        if gap <= tol {
            return (x, gap, sweep);
        }
        let mut moved = false;
        for k in 0..k_users {
            if !steps[k].is_finite() {
                steps[k] = 1.0 / g.row(k).iter().fold(1e-300f64, |m, a| m.max(a.abs()));
            }
            for _ in 0..INNER {
                let gk = g.row(k).to_owned();
                let mut accepted = None;
                for _ in 0..60 {
                    let mut trial = x.clone();
                    let row = &x.row(k) + &(&gk * steps[k]);
                    trial.row_mut(k).assign(&row);
                    project_row(trial.row_mut(k));
                    let d = &trial.row(k) - &x.row(k);
                    let predicted = gk.dot(&d);
                    if !(predicted > 0.0) {
                        break;
                    }
                    let vt = model.value(denormalize(&trial, model.max_power()).as_array());
                    let noise = 8.0 * f64::EPSILON * v.abs().max(1.0);
                    let (_, gt) = scaled_gradient(model, &trial);
                    // Near the optimum the gain is below the rounding of a long
                    // sample average. By concavity a nonnegative slope at the
                    // trial point means no decrease along the segment.
                    if vt - v >= 1e-4 * predicted - noise || gt.row(k).dot(&d) >= 0.0 {
                        accepted = Some((trial, vt, d, gt));
                        break;
                    }
                    steps[k] *= 0.5;
                }
                let Some((trial, vt, d, gt)) = accepted else {
                    break;
                };
                let y = &gt.row(k) - &gk;
                let sy = -d.dot(&y);
                let ss = d.dot(&d);
                steps[k] = if sy > 0.0 { (ss / sy).clamp(1e-30, 1e30) } else { steps[k] * 2.0 };
                x = trial;
                g = gt;
                v = vt;
                moved = true;
                if ss == 0.0 {
                    break;
                }
            }
        }
        gap = frank_wolfe_gap(&x, &g);
        if !moved {
            return (x, gap, sweep + 1);
        }
    }
    (x, gap, max_sweeps)
}

/// Maximiser of a sampled ergodic potential.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErgodicMaximum {
    pub p_star: PowerProfile,
    pub v_star: Estimate,
    /// Frank-Wolfe duality gap at `p_star`, plus the smoothing error when
    /// prices have kinks: an upper bound on how far `v_star` is below the
    /// sampled maximum, in nats.
    pub residual: f64,
    pub iterations: usize,
}

/// Maximises the sample-average potential by projected ascent until the
/// duality gap is at most `tol` nats.
///
/// With violation prices the objective is smoothed first. The final width
/// `mu` is chosen so that the smoothing error is at most `tol / 2`; the
/// reported residual is the smoothed duality gap plus that error, which
/// still bounds how far the exact sampled potential is from its maximum.
pub fn maximize_ergodic_potential(model: &SampledGame, tol: f64) -> Result<ErgodicMaximum> {
    let game = model.game();
    let start = PowerProfile::interior_uniform(game.max_power(), game.num_subcarriers());
    let mut x = normalize(&start, game.max_power());
    let per_width = smoothing_bound_per_width(game);
    let (residual, iterations) = if per_width > 0.0 {
        let mu_final = 0.5 * tol / per_width;
        let mut total = 0;
        let mut mu = 1e-2f64.max(mu_final);
        loop {
            let last = mu <= mu_final;
            let stage_tol = if last { 0.5 * tol } else { (mu * per_width).max(0.5 * tol) };
            // Joint steps move along the kink surface, where users must move together.
            let smoothed = SampledModel { model, mu };
            let (joint, _, its) = projected_ascent(&smoothed, x, 1e-12, 200);
            let (next, gap, sweeps) = block_projected_ascent(&smoothed, joint, stage_tol, 2_000);
            x = next;
            total += its + sweeps;
            if last {
                break (gap + mu * per_width, total);
            }
            mu = (mu * 0.1).max(mu_final);
        }
    } else {
        let (next, gap, sweeps) = block_projected_ascent(&SampledModel { model, mu: 0.0 }, x, tol, 2_000);
        x = next;
        (gap, sweeps)
    };
    if residual > tol {
        return Err(Error::NonConvergence {
            solver: "maximize_ergodic_potential",
            iterations,
            residual,
        });
    }
    let p_star = denormalize(&x, game.max_power());
    Ok(ErgodicMaximum {
        v_star: model.potential_estimate(&p_star),
        p_star,
        residual,
        iterations,
    })
}

/// Default cap on the number of grid profiles examined.
pub const GRID_LIMIT: f64 = 1e8;

/// Exhaustive maximiser of the potential over a grid with spacing
/// `grid_fraction · P_k` per coordinate (each user's cap is always a level).
pub fn brute_force_ne(game: &Game, grid_fraction: f64) -> Result<PowerProfile> {
    brute_force_ne_with_limit(game, grid_fraction, GRID_LIMIT)
}

pub fn brute_force_ne_with_limit(game: &Game, grid_fraction: f64, limit: f64) -> Result<PowerProfile> {
    if !(grid_fraction.is_finite() && grid_fraction > 0.0) {
        return Err(Error::invalid("grid_step", "must be positive"));
    }
    let (k_users, s_count) = game.gains().dim();
    let mut fractions: Vec<f64> = Vec::new();
    let mut i = 0usize;
    while (i as f64) * grid_fraction < 1.0 - 1e-9 {
        fractions.push(i as f64 * grid_fraction);
        i += 1;
    }
    fractions.push(1.0);
    let m = fractions.len();

    // per-user feasible level tuples
    let count = count_tuples(&fractions, s_count);
    let table_size = (m as f64).powi(k_users as i32) * s_count as f64;
    let points = count.powi(k_users as i32);
    if points > limit || table_size > limit {
        return Err(Error::GridTooLarge {
            points: points.max(table_size),
            limit,
        });
    }
    let tuples = feasible_tuples(&fractions, s_count);

    // tables[s][Σ_k i_k m^k] = log(σ² + w) − φ(w) − Σ_k ψ_k
    let stride: Vec<usize> = (0..k_users).map(|k| m.pow(k as u32)).collect();
    let tables: Vec<Vec<f64>> = (0..s_count)
        .map(|s| {
            let mut t = vec![0.0; m.pow(k_users as u32)];
            for (idx, slot) in t.iter_mut().enumerate() {
                let mut w = 0.0;
                let mut user_cost = 0.0;
                for k in 0..k_users {
                    let level = (idx / stride[k]) % m;
                    let pks = fractions[level] * game.max_power()[k];
                    w += game.gains()[[k, s]] * pks;
                    user_cost += game.user_ramp(k, s).value(pks);
                }
                *slot = (game.noise()[s] + w).ln() - game.flat_ramp(s).value(w) - user_cost;
            }
            t
        })
        .collect();

    let n = tuples.len();
    let mut choice = vec![0usize; k_users];
    let mut best = (f64::NEG_INFINITY, choice.clone());
    let mut offsets = vec![0usize; s_count];
    loop {
        offsets.iter_mut().for_each(|o| *o = 0);
        for k in 0..k_users {
            for (s, o) in offsets.iter_mut().enumerate() {
                *o += tuples[choice[k]][s] * stride[k];
            }
        }
        if k_users == 1 {
            let v: f64 = (0..s_count).map(|s| tables[s][offsets[s]]).sum();
            if v > best.0 {
                best = (v, choice.clone());
            }
        } else {
            // innermost user 0 scanned in a tight loop
            for (j, tup) in tuples.iter().enumerate() {
                let v: f64 = (0..s_count).map(|s| tables[s][offsets[s] - tuples[choice[0]][s] + tup[s]]).sum();
                if v > best.0 {
                    let mut c = choice.clone();
                    c[0] = j;
                    best = (v, c);
                }
            }
        }
        // advance users 1.. (or 0 when alone)
        let first = if k_users == 1 { 0 } else { 1 };
        let mut k = first;
        loop {
            if k == k_users {
                let p = Array2::from_shape_fn((k_users, s_count), |(u, s)| {
                    fractions[tuples[best.1[u]][s]] * game.max_power()[u]
                });
                return Ok(PowerProfile::from_array(p));
            }
            choice[k] += 1;
            if choice[k] < n {
                break;
            }
            choice[k] = 0;
            k += 1;
        }
    }
}

fn count_tuples(fractions: &[f64], s_count: usize) -> f64 {
    // number of level tuples with Σ fraction ≤ 1, merging equal partial sums
    let mut sums: Vec<(f64, f64)> = vec![(0.0, 1.0)];
    for _ in 0..s_count {
        let mut next: Vec<(f64, f64)> = Vec::new();
        for &(acc, c) in &sums {
            for &f in fractions {
                let t = acc + f;
                if t <= 1.0 + 1e-9 {
                    next.push((t, c));
                }
            }
        }
        next.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::new();
        for (t, c) in next {
            match merged.last_mut() {
                Some(last) if (last.0 - t).abs() < 1e-9 => last.1 += c,
                _ => merged.push((t, c)),
            }
        }
        sums = merged;
        if sums.len() > 1_000_000 {
            return f64::INFINITY;
        }
    }
    sums.iter().map(|(_, c)| c).sum()
}

fn feasible_tuples(fractions: &[f64], s_count: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(s_count);
    fn rec(fr: &[f64], s_count: usize, acc: f64, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == s_count {
            out.push(cur.clone());
            return;
        }
        for (i, &f) in fr.iter().enumerate() {
            if acc + f > 1.0 + 1e-9 {
                break;
            }
            cur.push(i);
            rec(fr, s_count, acc + f, cur, out);
            cur.pop();
        }
    }
    rec(fractions, s_count, 0.0, &mut cur, &mut out);
    out
}

/// Largest vertex count enumerated exactly.
pub const VERTEX_LIMIT: f64 = 1_048_576.0;
/// Vertices sampled when enumeration is too large.
pub const VERTEX_SAMPLES: usize = 100_000;

/// Normalisation range of the equilibration level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PotentialExtrema {
    pub v_min: f64,
    pub v_max: f64,
    /// False when `v_min` comes from sampled vertices; it is then an upper
    /// bound on the true minimum and the resulting EQL a lower bound.
    pub exact_min: bool,
    pub certificate: EquilibriumCertificate,
}

/// `V_min` over the vertices of the feasible set and `V_max` from
/// [`maximize_potential`].
pub fn potential_extrema_for_eql(game: &Game) -> Result<PotentialExtrema> {
    let certificate = maximize_potential(game, DEFAULT_TOL)?;
    let (v_min, exact_min) = vertex_minimum(game.num_users(), game.num_subcarriers(), |choice| {
        vertex_potential(game, choice)
    });
    Ok(PotentialExtrema {
        v_min,
        v_max: certificate.v_star,
        exact_min,
        certificate,
    })
}

/// Minimum of the sampled ergodic potential over vertices. Exact enumeration
/// when small enough, as in [`potential_extrema_for_eql`].
pub fn ergodic_vertex_minimum(model: &SampledGame) -> (f64, bool) {
    let game = model.game();
    vertex_minimum(game.num_users(), game.num_subcarriers(), |choice| {
        model.potential(&vertex_profile(game, choice))
    })
}

/// Vertex where user `k` puts its whole budget on `choice[k] − 1`, or stays
/// silent when `choice[k] = 0`.
pub fn vertex_profile(game: &Game, choice: &[usize]) -> PowerProfile {
    let mut p = Array2::zeros(game.gains().dim());
    for (k, &c) in choice.iter().enumerate() {
        if c > 0 {
            p[[k, c - 1]] = game.max_power()[k];
        }
    }
    PowerProfile::from_array(p)
}

fn vertex_potential(game: &Game, choice: &[usize]) -> f64 {
    let mut w: Vec<f64> = vec![0.0; game.num_subcarriers()];
    let mut v = 0.0;
    for (k, &c) in choice.iter().enumerate() {
        for s in 0..game.num_subcarriers() {
            let pks = if c == s + 1 { game.max_power()[k] } else { 0.0 };
            w[s] += game.gains()[[k, s]] * pks;
            v -= game.user_ramp(k, s).value(pks);
        }
    }
    for (s, ws) in w.iter().enumerate() {
        v += (game.noise()[s] + ws).ln() - game.flat_ramp(s).value(*ws);
    }
    v
}

fn vertex_minimum<F: Fn(&[usize]) -> f64>(k_users: usize, s_count: usize, f: F) -> (f64, bool) {
    let radix = s_count + 1;
    let count = (radix as f64).powi(k_users as i32);
    let mut choice = vec![0usize; k_users];
    if count <= VERTEX_LIMIT {
        let mut best = f64::INFINITY;
        loop {
            best = best.min(f(&choice));
            let mut k = 0;
            loop {
                if k == k_users {
                    return (best, true);
                }
                choice[k] += 1;
                if choice[k] < radix {
                    break;
                }
                choice[k] = 0;
                k += 1;
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0f_e91);
    let mut best = f(&choice);
    let mut best_choice = choice.clone();
    for _ in 0..VERTEX_SAMPLES {
        for c in choice.iter_mut() {
            *c = rng.random_range(0..radix);
        }
        let v = f(&choice);
        if v < best {
            best = v;
            best_choice.clone_from(&choice);
        }
    }
    // one-user-at-a-time descent from the best sample
    let mut improved = true;
    while improved {
        improved = false;
        for k in 0..k_users {
            for c in 0..radix {
                let keep = best_choice[k];
                best_choice[k] = c;
                let v = f(&best_choice);
                if v < best {
                    best = v;
                    improved = true;
                } else {
                    best_choice[k] = keep;
                }
            }
        }
    }
    (best, false)
}

/// Largest pairwise L∞ distance, in Watt, between potential maximisers
/// reached from `n_starts` random interior points. Starts that fail to
/// certify still contribute their endpoint.
pub fn verify_uniqueness(game: &Game, n_starts: usize, tol: f64, seed: u64) -> Result<f64> {
    if n_starts < 2 {
        return Err(Error::invalid("n_starts", "need at least two starts"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ends = Vec::with_capacity(n_starts);
    for _ in 0..n_starts {
        let start = random_interior(game, &mut rng);
        ends.push(solve(game, &start, tol)?.p_star);
    }
    let mut worst = 0.0f64;
    for i in 0..ends.len() {
        for j in i + 1..ends.len() {
            worst = worst.max(ends[i].max_abs_diff(&ends[j]));
        }
    }
    Ok(worst)
}

/// Uniform draw from the interior of each user's power polytope.
pub fn random_interior<R: Rng + ?Sized>(game: &Game, rng: &mut R) -> PowerProfile {
    let (k_users, s_count) = game.gains().dim();
    let mut p = Array2::zeros((k_users, s_count));
    for k in 0..k_users {
        let e: Vec<f64> = (0..=s_count).map(|_| Exp1.sample(rng)).collect::<Vec<f64>>();
        let total: f64 = e.iter().sum();
        for s in 0..s_count {
            p[[k, s]] = game.max_power()[k] * e[s] / total;
        }
    }
    PowerProfile::from_array(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{FlatPricing, PricingSpec, UserPricing};
    use ndarray::array;

    fn unit_game(gains: Array2<f64>, noise: Vec<f64>, pricing: PricingSpec) -> Game {
        let (k, s) = gains.dim();
        Game::new(gains, noise, vec![1.0; s], vec![1.0; k], pricing).unwrap()
    }

    #[test]
    fn single_user_single_carrier_goes_full_power() {
        let game = unit_game(array![[1.0]], vec![1.0], PricingSpec::none(1));
        let c = maximize_potential(&game, DEFAULT_TOL).unwrap();
        assert!((c.p_star.get(0, 0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn water_filling() {
        // 1/(σ1 + p1) = 1/(σ2 + p2), p1 + p2 = 1 with σ = (0.2, 0.6)
        let game = unit_game(array![[1.0, 1.0]], vec![0.2, 0.6], PricingSpec::none(1));
        let c = maximize_potential(&game, DEFAULT_TOL).unwrap();
        assert!((c.p_star.get(0, 0) - 0.7).abs() < 1e-9);
        assert!((c.p_star.get(0, 1) - 0.3).abs() < 1e-9);
        // equal noise splits evenly
        let game = unit_game(array![[2.0, 2.0]], vec![0.5, 0.5], PricingSpec::none(1));
        let c = maximize_potential(&game, DEFAULT_TOL).unwrap();
        assert!((c.p_star.get(0, 0) - 0.5).abs() < 1e-9);
        // deep noise on one carrier: water level below it
        let game = unit_game(array![[1.0, 1.0]], vec![0.1, 2.0], PricingSpec::none(1));
        let c = maximize_potential(&game, DEFAULT_TOL).unwrap();
        assert!((c.p_star.get(0, 0) - 1.0).abs() < 1e-12 && c.p_star.get(0, 1) == 0.0);
        assert!(c.br_gap[0].abs() < 1e-12);
    }

    #[test]
    fn steep_linear_price_gives_large_gap_at_uniform() {
        let pricing = PricingSpec::flat(FlatPricing::Linear, 10.0, 2);
        let game = unit_game(array![[1.0, 0.5], [0.7, 1.0]], vec![1.0, 1.0], pricing);
        let p = PowerProfile::uniform(game.max_power(), 2);
        let gaps = best_response_gap(&game, &p).unwrap();
        assert!(gaps.iter().all(|&g| g > 1.0), "{gaps:?}");
    }

    #[test]
    fn kkt_examples() {
        let pricing = PricingSpec::per_user(UserPricing::Linear, vec![0.2, 0.3]);
        let game = unit_game(array![[1.0, 0.5], [0.7, 1.0]], vec![0.3, 0.4], pricing);
        let c = maximize_potential(&game, DEFAULT_TOL).unwrap();
        assert!(c.kkt_residual < 1e-6, "{}", c.kkt_residual);
        let zero = PowerProfile::zeros(2, 2);
        let v = game.marginals(&zero);
        let top = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!((kkt_residual(&game, &zero) - top).abs() < 1e-15);
        let p = PowerProfile::new(array![[0.3, 0.2], [0.1, 0.6]], &[1.0, 1.0]).unwrap();
        assert!(kkt_residual(&game, &p) > 0.0);
    }

    #[test]
    fn projection() {
        let mut z = array![[0.5, 0.2], [2.0, 1.0], [-1.0, 0.3], [0.8, 0.8]];
        project_rows(&mut z);
        assert_eq!(z.row(0).to_vec(), vec![0.5, 0.2]);
        assert!((z[[1, 0]] - 1.0).abs() < 1e-15 && z[[1, 1]] == 0.0);
        assert_eq!(z.row(2).to_vec(), vec![0.0, 0.3]);
        assert!((z[[3, 0]] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn brute_force_examples() {
        let game = unit_game(array![[1.0]], vec![1.0], PricingSpec::none(1));
        let p = brute_force_ne(&game, 0.01).unwrap();
        assert!((p.get(0, 0) - 1.0).abs() <= 0.01);
        let p = brute_force_ne(&game, 3.0).unwrap();
        assert_eq!(p.get(0, 0), 1.0);
        let big = unit_game(Array2::ones((3, 3)), vec![1.0; 3], PricingSpec::none(3));
        assert!(matches!(brute_force_ne(&big, 0.01), Err(Error::GridTooLarge { .. })));
    }

    #[test]
    fn extrema_two_vertices() {
        let game = unit_game(array![[3.0]], vec![0.5], PricingSpec::none(1));
        let e = potential_extrema_for_eql(&game).unwrap();
        assert!(e.exact_min);
        assert!((e.v_min - 0.5f64.ln()).abs() < 1e-15);
        assert!((e.v_max - 3.5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn sampled_vertex_minimum_is_flagged() {
        // 11^6 > 2^20 vertices
        let game = unit_game(Array2::from_elem((6, 10), 0.5), vec![1.0; 10], PricingSpec::none(6));
        let (v, exact) = vertex_minimum(6, 10, |c| vertex_potential(&game, c));
        assert!(!exact);
        assert!((v - 10.0 * 1f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn single_user_unique() {
        let pricing = PricingSpec::flat(FlatPricing::Violation, 2.0, 1);
        let game = Game::new(array![[1.0, 0.8, 0.5]], vec![0.1, 0.2, 0.3], vec![0.3; 3], vec![1.0], pricing).unwrap();
        assert!(verify_uniqueness(&game, 5, DEFAULT_TOL, 3).unwrap() < 1e-6);
    }
}
