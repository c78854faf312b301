//! Exponential learning on the default scenario, printing the potential as it climbs.

use cogpower::prelude::*;

fn main() -> Result<()> {
    let config = NetworkConfig::default_scenario();
    let game = Game::from_config(&config)?;
    let record = run(&game, &config.run.schedule, &Termination::iterations(2000), Mode::Static)?;
    for n in [0, 1, 5, 10, 50, 100, 500, record.iterations] {
        if let Some(v) = record.potentials.get(n) {
            println!("n = {n:>5}  V = {v:.6}  max Psi = {:.4}", record.max_violation[n]);
        }
    }
    println!("stopped after {} iterations ({:?})", record.iterations, record.reason);
    let gap = best_response_gap(&game, record.final_powers())?;
    println!("largest best-response gap: {:.2e} nats", gap.iter().cloned().fold(0.0, f64::max));
    Ok(())
}
