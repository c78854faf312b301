//! Draws the static gains of the default scenario and a few fast-fading blocks.

use cogpower::channel::{realize, write_gains_csv};
use cogpower::prelude::*;
use cogpower::units::linear_to_db;

fn main() -> Result<()> {
    let config = NetworkConfig::default_scenario();
    let ch = realize(&config)?;
    let (lo, hi) = ch
        .gains
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &g| (lo.min(g), hi.max(g)));
    println!("{} users x {} subcarriers", config.num_users, config.num_subcarriers);
    println!("gain range: {:.1} dB .. {:.1} dB", linear_to_db(lo), linear_to_db(hi));
    println!("primary-user link gain: {:.1} dB", linear_to_db(ch.pu_gain));

    let mut fading = FadingProcess::new(ch.gains.clone(), ch.pu_gain, 7)?;
    for block in 0..3 {
        let g = fading.sample_gains();
        println!("block {block}: g[0,0] = {:.3e} (mean {:.3e})", g[[0, 0]], ch.gains[[0, 0]]);
    }

    println!("\nfirst user's row as CSV:");
    write_gains_csv(&ch.gains.slice(ndarray::s![0..1, ..]).to_owned(), std::io::stdout())?;
    Ok(())
}
