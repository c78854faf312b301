//! Regenerates one figure's data at reduced scale and prints the table.

use cogpower::experiments::{figure_table, Figure};
use cogpower::prelude::*;

fn main() -> Result<()> {
    let figure: Figure = std::env::args().nth(1).unwrap_or_else(|| "fig1".into()).parse()?;
    let output = figure_table(figure, 42, 0.3)?;
    println!("{} ({} runs, {} failed)", output.manifest.title, output.manifest.runs, output.manifest.failed_runs);
    output.table.write_csv(std::io::stdout())?;
    Ok(())
}
