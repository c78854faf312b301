//! Sweeps the flat price level and writes the summary table to stdout.

use cogpower::experiments::{run_sweep, write_sweep_csv, SweepParameter, SweepSpec};
use cogpower::prelude::*;

fn main() -> Result<()> {
    let base = NetworkConfig::reference(4, 4);
    let spec = SweepSpec::new(SweepParameter::Lambda0, vec![0.0, 0.5, 2.0, 10.0], 2, base);
    let rows = run_sweep(&spec)?;
    write_sweep_csv(spec.parameter, &rows, std::io::stdout())?;
    Ok(())
}
