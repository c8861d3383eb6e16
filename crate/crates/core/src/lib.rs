//! Isothermal ideal mixtures with Maxwell-Stefan diffusion.
//!
//! The layers build on each other: [`numerics`] supplies small dense linear
//! algebra and root finding, [`thermo`] the equilibrium thermodynamics,
//! [`chart`] pressure-based coordinates on state space, [`transport`] the
//! friction laws and diffusion fluxes, [`sim1d`] a finite-volume solver and
//! [`verify`] randomized checks of all of the above.

pub mod error;
pub mod numerics;
pub mod thermo;

pub use error::{Error, Result};
pub mod chart;
pub mod sim1d;
pub mod transport;
pub mod verify;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/thermodynamics.md")]
    mod thermodynamics {}
    #[doc = include_str!("../../../book/src/chart.md")]
    mod chart {}
    #[doc = include_str!("../../../book/src/transport.md")]
    mod transport {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/verification.md")]
    mod verification {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
