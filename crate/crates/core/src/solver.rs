//! Diagonally preconditioned primal-dual splitting for
//!
//! ```text
//! min_{U,S}  Σ_k R_k(L_k U) + J(S)   s.t.  ‖V - (U + S)‖_F ≤ ε
//! ```
//!
//! The problem is split into primal variables `(U, S)` and one dual variable
//! per operator block: regularizer blocks on `U`, stripe-model blocks on `S`,
//! and the data-fidelity row `U + S`. Stepsizes are per-entry reciprocals of
//! absolute operator row/column sums, so no stepsize needs tuning.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cube::{Cube, CubeTuple};
use crate::error::{Error, Result};
use crate::linop::{LinOp, OperatorMatrix};
use crate::prox::{Precond, PrecondShape, ProxTerm};
use crate::regularizers::Regularizer;
use crate::stripe::{flatness_residual, StripeModel};

pub const U_INDEX: usize = 0;
pub const S_INDEX: usize = 1;

/// Full problem description.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub v: Cube,
    pub reg: Regularizer,
    pub stripe: StripeModel,
    /// Radius of the data-fidelity ball.
    pub eps: f64,
    pub max_iters: usize,
    /// Stop once `‖U⁺ - U‖_F / ‖U‖_F < tol`.
    pub tol: f64,
    /// Record a trace entry every `trace_every` iterations (and always the
    /// last one).
    pub trace_every: usize,
    /// Primal stepsizes are multiplied and dual stepsizes divided by this
    /// factor; the stepsize condition is unaffected.
    pub balance: f64,
    /// Move the returned `U` onto the fidelity ball when the last iterate is
    /// outside it.
    pub restore_feasibility: bool,
}

pub const DEFAULT_BALANCE: f64 = 0.05;

impl ProblemSpec {
    pub fn new(v: Cube, reg: Regularizer, stripe: StripeModel, eps: f64) -> Self {
        ProblemSpec {
            v,
            reg,
            stripe,
            eps,
            max_iters: 50_000,
            tol: 1e-4,
            trace_every: 1,
            balance: DEFAULT_BALANCE,
            restore_feasibility: true,
        }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_balance(mut self, balance: f64) -> Self {
        self.balance = balance;
        self
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.reg.dims() != self.v.dims() {
            return Err(Error::config(format!(
                "regularizer dims {:?} do not match observation {:?}",
                self.reg.dims(),
                self.v.dims()
            )));
        }
        if !(self.eps.is_finite() && self.eps >= 0.0) {
            return Err(Error::config(format!("epsilon {} must be finite and >= 0", self.eps)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::config("tol must be > 0"));
        }
        if !(self.balance.is_finite() && self.balance > 0.0) {
            return Err(Error::config(format!("balance {} must be finite and > 0", self.balance)));
        }
        if self.max_iters == 0 || self.trace_every == 0 {
            return Err(Error::config("max_iters and trace cadence must be positive"));
        }
        if !self.v.all_finite() {
            return Err(Error::config("observation has non-finite entries"));
        }
        Ok(())
    }
}

/// Role of each dual row, used for reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowRole {
    Regularizer(usize),
    Stripe(usize),
    Fidelity,
}

/// The assembled splitting problem.
#[derive(Debug, Clone)]
pub struct Assembly {
    pub matrix: OperatorMatrix,
    pub dual_terms: Vec<ProxTerm>,
    pub roles: Vec<RowRole>,
    /// Prox term applied to `S` in the primal step.
    pub stripe_primal: ProxTerm,
}

impl Assembly {
    pub fn build(spec: &ProblemSpec) -> Result<Self> {
        spec.validate()?;
        let dims = spec.v.dims();
        let mut matrix = OperatorMatrix::new(vec![dims, dims]);
        let mut dual_terms = Vec::new();
        let mut roles = Vec::new();
        for (n, (op, term)) in spec.reg.blocks().iter().enumerate() {
            matrix.push_row(vec![(U_INDEX, op.clone())])?;
            dual_terms.push(term.clone());
            roles.push(RowRole::Regularizer(n));
        }
        let contrib = spec.stripe.contribute(dims)?;
        for (n, (op, term)) in contrib.blocks.into_iter().enumerate() {
            matrix.push_row(vec![(S_INDEX, op)])?;
            dual_terms.push(term);
            roles.push(RowRole::Stripe(n));
        }
        matrix.push_row(vec![(U_INDEX, LinOp::identity(dims)), (S_INDEX, LinOp::identity(dims))])?;
        dual_terms.push(ProxTerm::indicator_ball(spec.v.clone(), spec.eps)?);
        roles.push(RowRole::Fidelity);
        Ok(Assembly {
            matrix,
            dual_terms,
            roles,
            stripe_primal: contrib.primal,
        })
    }

    /// Preconditioners from absolute row/column sums, adapted to what each
    /// dual term's closed-form prox needs.
    pub fn preconditioners(&self) -> Result<Preconditioners> {
        synthesize_preconditioners(&self.matrix)?.adapted_to(&self.dual_terms)
    }
}

/// Per-primal and per-dual-row diagonal stepsizes.
#[derive(Debug, Clone, PartialEq)]
pub struct Preconditioners {
    pub primal: Vec<Precond>,
    pub dual: Vec<Precond>,
}

fn reciprocal_or_one(sums: CubeTuple) -> Result<Precond> {
    Precond::new(sums.map(|s| if s > 0.0 { 1.0 / s } else { 1.0 }))
}

/// Entries of an all-zero operator row never influence the iteration; they
/// take the smallest active entry of their row block (1 if none is active).
fn dual_reciprocal(sums: CubeTuple) -> Result<Precond> {
    let max_sum = sums
        .parts()
        .iter()
        .flat_map(|c| c.as_slice().iter().copied())
        .fold(0.0, f64::max);
    let fill = if max_sum > 0.0 { 1.0 / max_sum } else { 1.0 };
    Precond::new(sums.map(|s| if s > 0.0 { 1.0 / s } else { fill }))
}

/// Primal entries are `1 / Σ|column coefficients|` of the block operator and
/// dual entries `1 / Σ|row coefficients|`. Primal entries untouched by any
/// operator get 1.
pub fn synthesize_preconditioners(m: &OperatorMatrix) -> Result<Preconditioners> {
    let ones_dual: Vec<CubeTuple> = (0..m.dual_count())
        .map(|r| CubeTuple::filled(&m.row_dims(r), 1.0))
        .collect();
    let col_sums = m.abs_adjoint_apply(&ones_dual)?;
    let primal = col_sums
        .into_parts()
        .into_iter()
        .map(|c| reciprocal_or_one(CubeTuple::single(c)))
        .collect::<Result<_>>()?;
    let ones_primal = CubeTuple::filled(m.primal_dims(), 1.0);
    let dual = m
        .abs_apply(&ones_primal)?
        .into_iter()
        .map(dual_reciprocal)
        .collect::<Result<_>>()?;
    Ok(Preconditioners { primal, dual })
}

impl Preconditioners {
    /// Shrinks dual entries where a term's closed form needs equal entries:
    /// to the per-position minimum across grouped components, or to the
    /// global minimum for uniform terms.
    pub fn adapted_to(mut self, terms: &[ProxTerm]) -> Result<Self> {
        if terms.len() != self.dual.len() {
            return Err(Error::shape("one dual term per preconditioner row expected"));
        }
        for (g, term) in self.dual.iter_mut().zip(terms) {
            *g = match term.precond_shape() {
                PrecondShape::Entrywise => continue,
                PrecondShape::Grouped => g.collapse_across_components()?,
                PrecondShape::Uniform => g.collapse_to_min(),
            };
        }
        Ok(self)
    }

    pub fn scaled(&self, primal: f64, dual: f64) -> Result<Self> {
        Ok(Preconditioners {
            primal: self.primal.iter().map(|g| g.scale(primal)).collect::<Result<_>>()?,
            dual: self.dual.iter().map(|g| g.scale(dual)).collect::<Result<_>>()?,
        })
    }

    fn primal_tuple(&self) -> CubeTuple {
        CubeTuple::new(self.primal.iter().map(|g| g.parts()[0].clone()).collect())
    }
}

/// `‖G₂ ⊙ K(G₁ ⊙ x)‖_F / ‖x‖_F` for one nonzero `x`.
pub fn stepsize_ratio(m: &OperatorMatrix, p: &Preconditioners, x: &CubeTuple) -> Result<f64> {
    let norm = x.fro_norm();
    if norm == 0.0 {
        return Err(Error::param("stepsize condition is quantified over nonzero inputs"));
    }
    let scaled = x.hadamard(&p.primal_tuple())?;
    let kx = m.apply(&scaled)?;
    let mut sq = 0.0;
    for (row, g) in kx.iter().zip(&p.dual) {
        sq += row.hadamard(g.as_tuple())?.sum_sq();
    }
    Ok(sq.sqrt() / norm)
}

/// Checks `‖G₂ ⊙ K(G₁ ⊙ x)‖_F < ‖x‖_F` on `trials` random inputs drawn
/// from a seeded generator.
pub fn check_stepsize_condition(
    m: &OperatorMatrix,
    p: &Preconditioners,
    trials: usize,
    seed: u64,
) -> Result<bool> {
    if trials == 0 {
        return Err(Error::param("need at least one trial"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..trials {
        let x = CubeTuple::new(
            m.primal_dims()
                .iter()
                .map(|&d| Cube::from_fn(d, |_, _, _| rng.random_range(-1.0..1.0)))
                .collect(),
        );
        if x.fro_norm() == 0.0 {
            continue;
        }
        if stepsize_ratio(m, p, &x)? >= 1.0 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// One trace row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub iteration: usize,
    pub objective: f64,
    pub rel_change: f64,
    pub flat_res_v: f64,
    pub flat_res_t: f64,
    /// `‖V - (U + S)‖_F`.
    pub ball_res: f64,
}

pub const TRACE_CSV_HEADER: &str = "iteration,objective,rel_change,flat_res_v,flat_res_t,ball_res";

impl TraceRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.iteration, self.objective, self.rel_change, self.flat_res_v, self.flat_res_t, self.ball_res
        )
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub u: Cube,
    pub s: Cube,
    pub trace: Vec<TraceRecord>,
    pub iterations: usize,
    pub converged: bool,
    /// Objective at the starting point `(V, O)`.
    pub initial_objective: f64,
    pub runtime_s: f64,
    /// `max(0, ‖V - (U + S)‖_F - ε)` of the last iterate, before any
    /// restoration. The trace always holds the raw iterates.
    pub ball_slack: f64,
}

impl SolveResult {
    pub fn final_record(&self) -> Option<&TraceRecord> {
        self.trace.last()
    }
}

/// `Σ_k R_k(L_k U) + J(S)`.
pub fn objective(spec: &ProblemSpec, u: &Cube, s: &Cube) -> Result<f64> {
    Ok(spec.reg.evaluate(u)? + spec.stripe.objective(s)?.value)
}

fn record(spec: &ProblemSpec, iteration: usize, rel_change: f64, u: &Cube, s: &Cube) -> Result<TraceRecord> {
    let (flat_res_v, flat_res_t) = flatness_residual(s, spec.stripe.temporal);
    let ball_res = spec.v.sub(&u.add(s)?)?.fro_norm();
    Ok(TraceRecord {
        iteration,
        objective: objective(spec, u, s)?,
        rel_change,
        flat_res_v,
        flat_res_t,
        ball_res,
    })
}

/// Runs the preconditioned primal-dual iteration from `U = V`, `S = O`,
/// zero duals until the relative change of `U` drops below `tol` or
/// `max_iters` is reached.
pub fn solve(spec: &ProblemSpec) -> Result<SolveResult> {
    let start = Instant::now();
    let asm = Assembly::build(spec)?;
    let pre = asm.preconditioners()?.scaled(spec.balance, 1.0 / spec.balance)?;
    let m = &asm.matrix;
    let g_u = &pre.primal[U_INDEX].parts()[0];
    let g_s = pre.primal[S_INDEX].clone();

    let dims = spec.v.dims();
    let mut u = spec.v.clone();
    let mut s = Cube::zeros(dims);
    let mut y = m.zero_dual();
    let limit = 1e12 * (1.0 + spec.v.fro_norm());
    let initial_objective = objective(spec, &u, &s)?;

    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    for n in 1..=spec.max_iters {
        let kty = m.adjoint_apply(&y)?;
        let kty = kty.parts();

        let mut u_next = u.clone();
        for ((o, g), d) in u_next.as_mut_slice().iter_mut().zip(g_u.as_slice()).zip(kty[U_INDEX].as_slice()) {
            *o -= g * d;
        }
        let mut s_arg = s.clone();
        for ((o, g), d) in s_arg
            .as_mut_slice()
            .iter_mut()
            .zip(g_s.parts()[0].as_slice())
            .zip(kty[S_INDEX].as_slice())
        {
            *o -= g * d;
        }
        let s_next = asm
            .stripe_primal
            .prox(&CubeTuple::single(s_arg), &g_s)?
            .into_parts()
            .pop()
            .expect("single cube");

        let u_bar = u_next.zip_map(&u, |a, b| 2.0 * a - b)?;
        let s_bar = s_next.zip_map(&s, |a, b| 2.0 * a - b)?;
        let k_bar = m.apply(&CubeTuple::new(vec![u_bar, s_bar]))?;
        for (((yr, kr), g), term) in y.iter_mut().zip(k_bar).zip(&pre.dual).zip(&asm.dual_terms) {
            let arg = yr.zip_map(&kr.hadamard(g.as_tuple())?, |a, b| a + b)?;
            *yr = term.prox_conjugate(&arg, g)?;
        }

        let du = u_next.sub(&u)?.fro_norm();
        let u_norm = u.fro_norm();
        let rel_change = if u_norm > 0.0 { du / u_norm } else { du };
        u = u_next;
        s = s_next;
        iterations = n;

        if !(u.all_finite() && s.all_finite()) || u.fro_norm() > limit || s.fro_norm() > limit {
            return Err(Error::Divergence {
                iteration: n,
                reason: "iterate norm exceeded the divergence guard".into(),
            });
        }

        // U only moves once the duals are nonzero, so the first step never
        // counts towards the stopping rule.
        let done = n > 1 && rel_change < spec.tol;
        if n % spec.trace_every == 0 || done || n == spec.max_iters {
            trace.push(record(spec, n, rel_change, &u, &s)?);
        }
        if done {
            converged = true;
            break;
        }
    }

    let r = spec.v.sub(&u.add(&s)?)?;
    let r_norm = r.fro_norm();
    let ball_slack = (r_norm - spec.eps).max(0.0);
    if spec.restore_feasibility && r_norm > spec.eps {
        // U = V - S - ε r/‖r‖ puts U + S on the sphere of radius ε.
        let t = spec.eps / r_norm;
        u = spec.v.sub(&s)?.zip_map(&r, |a, b| a - t * b)?;
    }

    Ok(SolveResult {
        u,
        s,
        trace,
        iterations,
        converged,
        initial_objective,
        runtime_s: start.elapsed().as_secs_f64(),
        ball_slack,
    })
}
