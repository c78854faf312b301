//! Learning under fast fading: one fresh channel block per iteration,
//! compared with the maximiser of the sampled ergodic potential.

use cogpower::experiments::{build_game, fading_seed, ChannelMode};
use cogpower::game::SampledGame;
use cogpower::oracle::maximize_ergodic_potential;
use cogpower::prelude::*;

fn main() -> Result<()> {
    let config = NetworkConfig::reference(3, 3).with_pricing(PricingSpec::flat(FlatPricing::Linear, 0.5, 3));
    let game = build_game(&config, ChannelMode::Ergodic)?;
    let mut fading = FadingProcess::new(game.gains().clone(), game.pu_gain(), fading_seed(&config))?;
    let rec = run(&game, &StepSchedule::PowerLaw { gamma0: 1.0, beta: 0.6 }, &Termination::fixed(5000), Mode::Ergodic(fading.clone()))?;

    let sampled = SampledGame::draw(game, &mut fading, 2000)?;
    let best = maximize_ergodic_potential(&sampled, 1e-6)?;
    let v_learned = sampled.potential_estimate(rec.final_powers());
    println!("sampled ergodic potential at the learned powers: {:.5} +/- {:.1e}", v_learned.mean, v_learned.stderr);
    println!("sampled ergodic maximum:                         {:.5} (gap {:.1e})", best.v_star.mean, best.residual);
    Ok(())
}
