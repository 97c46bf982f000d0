//! Bayesian power-allocation game on the fading multiple-access wiretap
//! channel with incomplete channel state information.
//!
//! Each of `K` transmitters knows its own discrete channel gains toward the
//! legitimate receiver and the eavesdropper and only the distribution of the
//! others'. It picks a type-contingent power policy under an average power
//! budget to maximize its expected secrecy rate.
//!
//! - [`model`]: instances, policies, configuration files
//! - [`rates`]: rates, expectations, derivatives, concavity certificate
//! - [`best_response`]: water-filling best response from the KKT conditions
//! - [`equilibrium`]: iterative allocation, equilibrium checks, uniqueness probe
//! - [`centralized`]: social-optimum benchmark by successive convex bounds
//! - [`oracle`]: brute-force grid validators
//! - [`experiments`]: social welfare, price of anarchy, sweeps and CSV output

pub mod best_response;
pub mod centralized;
pub mod equilibrium;
pub mod error;
pub mod experiments;
pub mod model;
pub mod oracle;
pub mod rates;

pub use error::{Diagnostic, Error, Result};
pub use model::{
    load_config, parse_config, serialize_config, uniform_policy, validate_config, ChannelLaw,
    GameConfig, PowerPolicy, SolverTolerances, StrategyProfile, UserConfig,
};
