//! Fixtures shared by the solver benchmarks.

use destripe_core::{make_case, sim, Case, NoiseSpec, ProblemSpec, Regularizer, RegularizerKind, StripeModel};

/// Case (i) problem on a piecewise-constant cube, FC stripe model.
pub fn case_i_problem(dims: [usize; 3], kind: RegularizerKind, lambda: f64) -> ProblemSpec {
    let truth = sim::piecewise_constant(dims, 7);
    let deg = make_case(&truth, Case::I, &NoiseSpec::new(0.3, 11)).expect("valid noise spec");
    let eps = deg.oracle_eps();
    let reg = Regularizer::new(kind, dims, 1.0).expect("valid regularizer");
    let stripe = StripeModel::fc(lambda, false).expect("valid stripe model");
    ProblemSpec::new(deg.v, reg, stripe, eps)
}

/// The same problem limited to a fixed number of iterations, so timings
/// measure per-iteration cost rather than convergence speed.
pub fn fixed_iterations(dims: [usize; 3], kind: RegularizerKind, iters: usize) -> ProblemSpec {
    let mut p = case_i_problem(dims, kind, 0.01).with_max_iters(iters).with_tol(1e-300);
    p.trace_every = iters;
    p
}
