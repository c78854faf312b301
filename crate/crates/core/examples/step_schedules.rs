//! Constant, power-law and search-then-converge step sizes on the same game.

use cogpower::prelude::*;

fn main() -> Result<()> {
    let config = NetworkConfig::default_scenario();
    let game = Game::from_config(&config)?;
    let schedules = [
        StepSchedule::Constant { gamma: 0.5 },
        StepSchedule::PowerLaw { gamma0: 1.0, beta: 0.6 },
        StepSchedule::stc(1.0),
    ];
    for schedule in &schedules {
        let rec = run(&game, schedule, &Termination::fixed(500), Mode::Static)?;
        let v = rec.potentials.last().copied().unwrap_or(f64::NAN);
        let switch = rec.stc_switch.map(|n| format!(", switched at {n}")).unwrap_or_default();
        println!("{:<22} V(500) = {v:.6}{switch}", schedule.label());
    }
    Ok(())
}
