//! Grid search for the equilibrium of a two-user, two-subcarrier game.

use cogpower::oracle::brute_force_ne;
use cogpower::prelude::*;

fn main() -> Result<()> {
    let config = NetworkConfig::reference(2, 2).with_pricing(
        PricingSpec::per_user(UserPricing::Linear, vec![0.8, 2.5]).with_basis(UserPriceBasis::Power),
    );
    let game = Game::from_config(&config)?;
    let grid = brute_force_ne(&game, 0.01)?;
    let cert = maximize_potential(&game, 1e-10)?;
    println!("grid search:\n{:.4e}", grid.as_array());
    println!("potential ascent:\n{:.4e}", cert.p_star.as_array());
    println!("max |dp| / P = {:.2e}", grid.max_abs_diff(&cert.p_star) / game.max_power()[0]);
    Ok(())
}
