//! Electron-to-nucleus polarization transfer under pulsed dynamical
//! decoupling.
//!
//! An optically initialized electron spin drives a nearby nuclear spin
//! through repeated blocks of pi pulses. Each readout cycle acts on the
//! nucleus as a two-operator quantum channel. The crate computes that
//! channel exactly ([`exact`]) and in closed form to first order in the
//! coupling ([`analytic`]), generates the timings that make the transfer
//! perfect ([`catalog`]) and runs parameter sweeps over both ([`sweep`]).
//!
//! ```
//! use hyperpol::catalog::{magic_params, Method, Sign};
//! use hyperpol::exact::{evaluate, ExactOptions};
//! use hyperpol::sequence::{PulseModel, SystemParams};
//!
//! let sys = SystemParams::new(1.0, 0.05, 0.0);
//! let row = magic_params(Method::I, Sign::Plus, 1).unwrap();
//! let seq = row.sequence(sys.omega, 1, PulseModel::Ideal);
//! let summary = evaluate(&sys, &seq, &ExactOptions::default()).unwrap();
//! assert!(summary.p_s > 0.98);
//! ```

pub mod analytic;
pub mod catalog;
pub mod exact;
pub mod linalg;
pub mod sequence;
pub mod sweep;
pub mod timeexpr;

pub use linalg::{CMatrix, C64};
pub use sequence::{PulseModel, SequenceParams, SystemParams};

// Book chapters, run as doctests since mdbook cannot link against this crate.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/overview.md")]
    mod overview {}
    #[doc = include_str!("../../../book/src/protocol.md")]
    mod protocol {}
    #[doc = include_str!("../../../book/src/channel.md")]
    mod channel {}
    #[doc = include_str!("../../../book/src/analytic.md")]
    mod analytic {}
    #[doc = include_str!("../../../book/src/magic.md")]
    mod magic {}
    #[doc = include_str!("../../../book/src/finite_pulses.md")]
    mod finite_pulses {}
    #[doc = include_str!("../../../book/src/window.md")]
    mod window {}
    #[doc = include_str!("../../../book/src/sweeps.md")]
    mod sweeps {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
