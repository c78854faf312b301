//! Evaluates rates, interference, the potential and marginal utilities at
//! the uniform full-power profile.

use cogpower::prelude::*;

fn main() -> Result<()> {
    let config = NetworkConfig::reference(3, 4);
    let game = Game::from_config(&config)?;
    let p = PowerProfile::uniform(game.max_power(), game.num_subcarriers());

    let rates = game.rates(&p);
    for (k, r) in rates.iter().enumerate() {
        println!("user {k}: rate {r:.3} nats, utility {:.3}", game.utility(k, &p));
    }
    let w = game.interference(&p);
    let (psi, mean_psi) = violation_index(&w, game.i_max());
    println!("Psi per subcarrier: {psi:.3?} (mean {mean_psi:.3})");
    println!("potential: {:.4}", game.potential(&p));
    println!("marginals:\n{:.3e}", game.marginals(&p));
    Ok(())
}
