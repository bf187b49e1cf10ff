pub mod error;
pub mod moments;
pub mod multiboson;
pub mod pearson;
pub mod qcalc;
pub mod qhahn;
pub mod spectral;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/qcalc.md")]
    pub mod qcalc {}
    #[doc = include_str!("../../../book/src/pearson.md")]
    pub mod pearson {}
    #[doc = include_str!("../../../book/src/polynomials.md")]
    pub mod polynomials {}
    #[doc = include_str!("../../../book/src/moments.md")]
    pub mod moments {}
    #[doc = include_str!("../../../book/src/spectral.md")]
    pub mod spectral {}
    #[doc = include_str!("../../../book/src/multiboson.md")]
    pub mod multiboson {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
}
