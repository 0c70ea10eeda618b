pub mod cfl;
pub mod controller;
pub mod dgsem;
pub mod exner;
pub mod integrator;
pub mod spectra;
pub mod tableaux;

/// Crate version, recorded in experiment manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/tableaux.md")]
    mod tableaux {}
    #[doc = include_str!("../../../book/src/controller.md")]
    mod controller {}
    #[doc = include_str!("../../../book/src/integrator.md")]
    mod integrator {}
    #[doc = include_str!("../../../book/src/cfl.md")]
    mod cfl {}
    #[doc = include_str!("../../../book/src/dgsem.md")]
    mod dgsem {}
    #[doc = include_str!("../../../book/src/spectra.md")]
    mod spectra {}
    #[doc = include_str!("../../../book/src/exner.md")]
    mod exner {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
