//! Cavity-assisted photon-atom phase-flip gate: cavity parameters, reflection
//! response, design optima, pulse propagation and time-domain simulation.

pub mod design;
pub mod error;
pub mod optimize;
pub mod par;
pub mod params;
pub mod pulse;
pub mod response;
pub mod sweep;
pub mod timedomain;

pub use error::{Error, ErrorKind, Result};
pub use par::Execution;
pub use params::{geometry_from_rates, rates_from_geometry, CavityGeometry, RateParams};
pub use response::{eval_response, eval_response_geometric, ResponseSample};
