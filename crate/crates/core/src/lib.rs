//! Priced power allocation for multi-carrier cognitive-radio uplinks.
//!
//! Secondary users share `S` orthogonal subcarriers towards a common
//! receiver and pay the operator for the interference they cause to the
//! primary user. Each user maximises its rate minus its charges; the
//! resulting game has an exact potential, so its equilibria are the
//! maximisers of a concave function over a product of corner-of-cube
//! polytopes.
//!
//! The crate is organised bottom-up:
//!
//! - [`units`] and [`config`]: dBm/Watt conversions and scenario loading.
//! - [`channel`]: user placement, path loss and Rayleigh fast fading.
//! - [`pricing`]: flat-rate and per-user price functions.
//! - [`game`]: SINR, rates, utilities, the potential and marginal utilities.
//! - [`learning`]: exponential learning with pluggable step schedules.
//! - [`oracle`]: independent equilibrium certification.
//! - [`metrics`] and [`experiments`]: reported quantities, baseline and sweeps.
//!
//! ```
//! use cogpower::prelude::*;
//!
//! let config = NetworkConfig::default_scenario();
//! let game = Game::from_config(&config).unwrap();
//! let record = run(&game, &config.run.schedule, &Termination::default(), Mode::Static).unwrap();
//! assert!(record.final_powers().is_feasible(game.max_power(), 1e-12));
//! ```

pub mod channel;
pub mod config;
pub mod error;
pub mod experiments;
pub mod game;
pub mod learning;
pub mod metrics;
pub mod oracle;
pub mod pricing;
pub mod units;

pub use error::{Error, Result};

/// Common imports for examples and downstream code.
pub mod prelude {
    pub use crate::channel::{ChannelRealization, FadingProcess, PathLossParams};
    pub use crate::config::{
        load_scenario, ChannelModel, FlatPricing, NetworkConfig, PricingSpec, UserPriceBasis,
        UserPricing,
    };
    pub use crate::error::{Error, Result};
    pub use crate::game::{Game, GameSnapshot, PowerProfile};
    pub use crate::learning::{run, Mode, RunRecord, StepSchedule, Termination};
    pub use crate::metrics::{eql, uniform_baseline, violation_index, MetricReport};
    pub use crate::oracle::{best_response_gap, maximize_potential, EquilibriumCertificate};
}
