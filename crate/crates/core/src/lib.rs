//! Online semi-supervised learning over feature-evolvable data streams.
//!
//! The crate follows one feature-evolution cycle: a learner trains in an old
//! feature space, both spaces are observed for a short overlap, then only the
//! new space remains. Two kernel predictors (one on data mapped back into the
//! old space, one trained from scratch on the new space) are combined by
//! exponential weights. Both are trained with manifold regularization so that
//! unlabeled rounds still carry signal, and both keep a fixed-size reservoir
//! of representers.
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`kernelspace`] | Gaussian kernel, Gram matrices, bandwidth heuristic |
//! | [`predictor`] | kernel expansion, regularized risk, gradient steps, projection |
//! | [`buffer`] | reservoir of representers |
//! | [`mapping`] | least-squares map from the new space to the old one |
//! | [`ensemble`] | exponential-weights combination |
//! | [`stream`] | stream simulator, two-spiral data, CSV ingestion |
//! | [`learner`] | single-space learner used by every method |
//! | [`baselines`] | comparison learners |
//! | [`harness`] | end-to-end runs, metrics, result files |
//!
//! ```
//! use sf2el::kernelspace::{kernel_eval, KernelConfig};
//!
//! let k = KernelConfig::new(1.0).unwrap();
//! let w = kernel_eval(&k, &[0.0, 0.0], &[2.0, 0.0]).unwrap();
//! assert!((w - (-2.0f64).exp()).abs() < 1e-15);
//! ```

// `!(x >= 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod buffer;
pub mod ensemble;
pub mod error;
pub mod harness;
pub mod kernelspace;
pub mod learner;
pub mod mapping;
pub mod predictor;
pub mod stream;

pub use error::{Error, Result};

// The guide's code blocks run as doctests.
#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/streams.md")]
    mod streams {}
    #[doc = include_str!("../../../book/src/kernels.md")]
    mod kernels {}
    #[doc = include_str!("../../../book/src/manifold.md")]
    mod manifold {}
    #[doc = include_str!("../../../book/src/reservoir.md")]
    mod reservoir {}
    #[doc = include_str!("../../../book/src/mapping.md")]
    mod mapping {}
    #[doc = include_str!("../../../book/src/ensemble.md")]
    mod ensemble {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
