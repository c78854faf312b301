//! Learned allocation against every user spreading full power uniformly.

use cogpower::prelude::*;

fn main() -> Result<()> {
    let config = NetworkConfig::default_scenario();
    let game = Game::from_config(&config)?;
    let rec = run(&game, &config.run.schedule, &Termination::default(), Mode::Static)?;
    let learned = cogpower::metrics::report(&game, rec.final_powers());
    let (_, uniform) = uniform_baseline(&game);
    println!("{:<10} {:>12} {:>10} {:>10} {:>9}", "policy", "sum rate", "PU rate", "revenue", "mean Psi");
    for (name, r) in [("learned", &learned), ("uniform", &uniform)] {
        println!(
            "{name:<10} {:>12.2} {:>10.3} {:>10.3} {:>9.3}",
            r.sum_rate_bits, r.pu_rate, r.revenue, r.mean_psi
        );
    }
    Ok(())
}
