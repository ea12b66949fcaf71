//! Simulator and verification lab for the multi-dimensional Carleman kinetic
//! system and its diffusive limit toward fast-diffusion and porous-medium
//! equations.

pub mod barriers;
pub mod diagnostics;
pub mod error;
pub mod initial_data;
pub mod interaction;
pub mod kinetic;
pub mod limit;
pub mod model;

pub use error::{Error, Result};

// The book's code blocks run as doctests: each chapter becomes the doc comment
// of an empty module.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/model.md")]
    pub mod model {}
    #[doc = include_str!("../../../book/src/rates.md")]
    pub mod rates {}
    #[doc = include_str!("../../../book/src/kinetic.md")]
    pub mod kinetic {}
    #[doc = include_str!("../../../book/src/limit.md")]
    pub mod limit {}
    #[doc = include_str!("../../../book/src/barriers.md")]
    pub mod barriers {}
    #[doc = include_str!("../../../book/src/initial_data.md")]
    pub mod initial_data {}
    #[doc = include_str!("../../../book/src/diagnostics.md")]
    pub mod diagnostics {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
}
