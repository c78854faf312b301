//! Certifies the equilibrium of the default scenario independently of learning.

use cogpower::oracle::verify_uniqueness;
use cogpower::prelude::*;

fn main() -> Result<()> {
    let config = NetworkConfig::reference(4, 4);
    let game = Game::from_config(&config)?;
    let cert = maximize_potential(&game, 1e-10)?;
    print!("{}", cert.to_record());

    let learned = run(&game, &config.run.schedule, &Termination::iterations(5000), Mode::Static)?;
    println!(
        "learned vs certified: max |dp| = {:.2e} W, V* - V = {:.2e}",
        learned.final_powers().max_abs_diff(&cert.p_star),
        cert.v_star - game.potential(learned.final_powers())
    );
    let spread = verify_uniqueness(&game, 5, 1e-10, 1)?;
    println!("spread over 5 random starts: {spread:.2e} W");
    Ok(())
}
