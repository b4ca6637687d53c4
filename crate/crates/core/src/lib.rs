//! Robust secure beamforming for an IRS-assisted two-user NOMA downlink with a
//! multi-antenna eavesdropper whose channel is known only up to a Frobenius
//! ball.
//!
//! The base station minimizes transmit power by alternating between an
//! active-beamforming program over `W1`, `W2`, `W_AN` ([`active`]) and a lifted
//! passive program over the reflection vector ([`passive`]), driven by
//! [`ao`]. Secrecy is certified with an S-procedure LMI ([`robustify`]) and
//! spot-checked by a sampling oracle ([`rates`]).

pub mod active;
pub mod batch;
pub mod ao;
pub mod channel;
pub mod conic;
pub mod error;
pub mod linalg;
pub mod passive;
pub mod rates;
pub mod robustify;
pub mod trace;

pub use error::{Error, Result};
