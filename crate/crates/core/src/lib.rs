//! Dirichlet priors for utterances with ambiguous multi-annotator labels.
//!
//! The pipeline runs from raw annotations ([`annotations`]) through
//! Dirichlet densities ([`dirichlet`], [`specfun`]) and training losses
//! ([`losses`]) to a small MLP ([`model`]), then on to evaluation and
//! uncertainty detection ([`metrics`]). [`synth`] generates seeded corpora
//! with known ambiguity, and [`cli`] wraps all of it in the `dirprior`
//! binary.
//!
//! ```
//! use dirprior::annotations::{AnnotationSet, ClassSpace, Evaluation};
//! use dirprior::losses::{LossConfig, LossKind};
//!
//! let space = ClassSpace::with_letters(3).unwrap();
//! let set = AnnotationSet::new(
//!     vec![Evaluation::single(0), Evaluation::new([0, 1]).unwrap(), Evaluation::single(2)],
//!     &space,
//! )
//! .unwrap();
//! let loss = LossConfig::new(LossKind::DpnKl).evaluate(&set, &[0.4, 0.1, -0.2]).unwrap();
//! assert!(loss.value.is_finite());
//! ```

pub mod annotations;
pub mod cli;
pub mod dirichlet;
pub mod error;
pub mod io;
pub mod losses;
pub mod metrics;
pub mod model;
pub mod specfun;
pub mod synth;

pub use error::{Error, Result};

// The book's snippets run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    mod intro {}
    #[doc = include_str!("../../../book/src/annotations.md")]
    mod annotations {}
    #[doc = include_str!("../../../book/src/dirichlet.md")]
    mod dirichlet {}
    #[doc = include_str!("../../../book/src/losses.md")]
    mod losses {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/synthetic.md")]
    mod synthetic {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
