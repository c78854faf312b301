//! Flat linear and violation prices as the aggregate interference crosses the tolerance.

use cogpower::pricing::flat_price;
use cogpower::prelude::*;

fn main() -> Result<()> {
    let i_max = [1e-10];
    let lp = PricingSpec::flat(FlatPricing::Linear, 1.0, 1);
    let vp = PricingSpec::flat(FlatPricing::Violation, 1.0, 1);
    println!("{:>8} {:>10} {:>10}", "w/I", "LP", "VP");
    for ratio in [0.0, 0.5, 1.0, 1.5, 2.0, 4.0] {
        let w = [ratio * i_max[0]];
        let a = flat_price(&lp, &i_max, &w)?;
        let b = flat_price(&vp, &i_max, &w)?;
        println!("{ratio:>8.2} {:>10.3} {:>10.3}", a.value, b.value);
    }
    Ok(())
}
