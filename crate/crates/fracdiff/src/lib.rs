//! # fracdiff
//!
//! Fast numerical evaluation of Riemann-Liouville fractional integrals
//!
//! ```text
//! I^alpha_a f(t) = 1/Gamma(alpha) * int_a^t (t - tau)^{alpha-1} f(tau) dtau,
//! alpha in (0, 1),
//! ```
//!
//! via diffusive representations: the memory integral is traded for a family
//! of memoryless scalar ODE states, so a whole trace over P grid points costs
//! O(Lambda * P) operations and O(Lambda) storage instead of the O(P^2) / O(P)
//! of direct quadrature.
//!
//! Three evaluation routes are provided:
//!
//! * [`laguerre::run_gl`] - Gauss-Laguerre quadrature over the diffusive
//!   variable, with backward Euler or trapezoidal stepping of the node states;
//! * [`fast::evaluate_fast`] - an exponential-sum compression of the
//!   convolution kernel with a one-term-per-rate recursion;
//! * [`split::split_evaluate`] - local/history splitting: the recent window is
//!   integrated exactly, the older history diffusively with a
//!   double-exponentially damped forcing.
//!
//! A brute-force product-integration evaluator ([`oracle::direct_integral`])
//! and analytic monomial solutions ([`oracle::analytic_monomial`]) serve as
//! ground truth.
//!
//! ```
//! use fracdiff::problem::{FractionalOrder, FractionalProblem, SourceFunction, TimeGrid};
//! use fracdiff::laguerre::{run_gl, SteppingMethod};
//!
//! let order = FractionalOrder::new(0.5).unwrap();
//! let problem =
//!     FractionalProblem::new(order, 0.0, 1.0, SourceFunction::Constant(1.0)).unwrap();
//! let grid = TimeGrid::uniform(0.0, 1.0, 256).unwrap();
//! let trace = run_gl(&problem, &grid, 40, SteppingMethod::Trapezoidal).unwrap();
//! // I^{1/2} 1 (1) = 2/sqrt(pi)
//! assert!((trace.final_value() - 1.1283791670955126).abs() < 2e-3);
//! ```
//!
//! With the default `parallel` feature the per-node updates and the oracle's
//! outer loop use rayon when the workload is large enough; outputs are bitwise
//! identical for any thread count because reductions stay ordered.

// frozen reference values are written with 17 significant digits throughout
#![allow(clippy::excessive_precision)]
// guards of the form !(x > 0.0) deliberately reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diffusive;
pub mod error;
pub mod expsum;
pub mod fast;
pub mod laguerre;
pub mod oracle;
pub mod problem;
pub mod special;
pub mod split;
pub mod trace;

mod quadrature;

pub use error::{Error, Result};

/// Run `f` on a dedicated thread pool of `threads` workers.
///
/// Without the `parallel` feature this just calls `f`.
#[cfg(feature = "parallel")]
pub fn with_threads<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> R {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .expect("thread pool construction cannot fail for a positive worker count")
        .install(f)
}

#[cfg(not(feature = "parallel"))]
pub fn with_threads<R>(_threads: usize, f: impl FnOnce() -> R) -> R {
    f()
}
