//! Linear operators between cube tuples.
//!
//! Every operator supports four evaluations: `apply`, `adjoint_apply`, and
//! their absolute-coefficient counterparts. The absolute versions evaluate the
//! same stencil with every coefficient replaced by its magnitude; on an
//! all-ones input they give the per-entry absolute row sums (forward) and
//! column sums (adjoint) from which the solver builds its diagonal
//! preconditioners.

use crate::cube::{Axis, Cube, CubeTuple, Dims};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum LinOp {
    /// Forward difference `x(p) - x(p + e_axis)` on a single cube; output
    /// extent along `axis` shrinks by one.
    Diff { axis: Axis, dims: Dims },
    /// Forward difference zero-padded back to the input dims. The last layer
    /// along `axis` is identically zero.
    PaddedDiff { axis: Axis, dims: Dims },
    Identity { dims: Dims },
    /// `(x_1, ..., x_n) -> x_1 + ... + x_n`.
    SumOfInputs { dims: Dims, count: usize },
    /// `outer ∘ inner`.
    Compose { outer: Box<LinOp>, inner: Box<LinOp> },
    /// Same input fed to every member; outputs concatenated.
    Stack(Vec<LinOp>),
}

/// Which of the four evaluations to run.
#[derive(Clone, Copy)]
enum Mode {
    Forward,
    Adjoint,
    AbsForward,
    AbsAdjoint,
}

impl Mode {
    fn is_adjoint(self) -> bool {
        matches!(self, Mode::Adjoint | Mode::AbsAdjoint)
    }

    fn is_abs(self) -> bool {
        matches!(self, Mode::AbsForward | Mode::AbsAdjoint)
    }
}

fn shrink(dims: Dims, axis: Axis) -> Dims {
    let mut d = dims;
    d[axis.index()] -= 1;
    d
}

/// Forward difference with signed (`sign = -1`) or absolute (`sign = +1`)
/// coefficients.
fn diff_stencil(x: &Cube, axis: Axis, sign: f64) -> Cube {
    let a = axis.index();
    let out_dims = shrink(x.dims(), axis);
    Cube::from_fn(out_dims, |i, j, k| {
        let mut q = [i, j, k];
        let here = x.get(i, j, k);
        q[a] += 1;
        here + sign * x.get(q[0], q[1], q[2])
    })
}

/// Adjoint difference stencil: `y(p) + sign * y(p - e_axis)` with missing
/// terms dropped at the edges.
fn diff_adj_stencil(y: &Cube, axis: Axis, sign: f64) -> Cube {
    if sign < 0.0 {
        return y.diff_adj(axis);
    }
    let a = axis.index();
    let m = y.dims()[a];
    let mut out_dims = y.dims();
    out_dims[a] += 1;
    Cube::from_fn(out_dims, |i, j, k| {
        let p = [i, j, k];
        let mut v = 0.0;
        if p[a] < m {
            v += y.get(i, j, k);
        }
        if p[a] > 0 {
            let mut q = p;
            q[a] -= 1;
            v += y.get(q[0], q[1], q[2]);
        }
        v
    })
}

fn pad_last(x: &Cube, axis: Axis) -> Cube {
    let a = axis.index();
    let m = x.dims()[a];
    let mut dims = x.dims();
    dims[a] += 1;
    Cube::from_fn(dims, |i, j, k| {
        let p = [i, j, k];
        if p[a] < m {
            x.get(i, j, k)
        } else {
            0.0
        }
    })
}

fn crop_last(x: &Cube, axis: Axis) -> Cube {
    let dims = shrink(x.dims(), axis);
    Cube::from_fn(dims, |i, j, k| x.get(i, j, k))
}

impl LinOp {
    pub fn diff(axis: Axis, dims: Dims) -> Self {
        LinOp::Diff { axis, dims }
    }

    pub fn padded_diff(axis: Axis, dims: Dims) -> Self {
        LinOp::PaddedDiff { axis, dims }
    }

    pub fn identity(dims: Dims) -> Self {
        LinOp::Identity { dims }
    }

    pub fn sum_of_inputs(dims: Dims, count: usize) -> Self {
        LinOp::SumOfInputs { dims, count }
    }

    pub fn compose(outer: LinOp, inner: LinOp) -> Result<Self> {
        if outer.in_dims() != inner.out_dims() {
            return Err(Error::shape(format!(
                "cannot compose: inner produces {:?}, outer expects {:?}",
                inner.out_dims(),
                outer.in_dims()
            )));
        }
        Ok(LinOp::Compose {
            outer: Box::new(outer),
            inner: Box::new(inner),
        })
    }

    pub fn stack(members: Vec<LinOp>) -> Result<Self> {
        let first = members
            .first()
            .ok_or_else(|| Error::shape("empty operator stack"))?
            .in_dims();
        if members.iter().any(|m| m.in_dims() != first) {
            return Err(Error::shape("stack members disagree on input dims"));
        }
        Ok(LinOp::Stack(members))
    }

    /// Checks that every difference has room to act.
    pub fn validate(&self) -> Result<()> {
        match self {
            LinOp::Diff { axis, dims } | LinOp::PaddedDiff { axis, dims } => {
                if dims[axis.index()] < 2 {
                    return Err(Error::shape(format!(
                        "difference along {axis} needs extent >= 2, got {dims:?}"
                    )));
                }
                Ok(())
            }
            LinOp::Identity { .. } => Ok(()),
            LinOp::SumOfInputs { count, .. } => {
                if *count == 0 {
                    return Err(Error::shape("sum of zero inputs"));
                }
                Ok(())
            }
            LinOp::Compose { outer, inner } => {
                inner.validate()?;
                outer.validate()
            }
            LinOp::Stack(members) => members.iter().try_for_each(LinOp::validate),
        }
    }

    pub fn in_dims(&self) -> Vec<Dims> {
        match self {
            LinOp::Diff { dims, .. } | LinOp::PaddedDiff { dims, .. } | LinOp::Identity { dims } => {
                vec![*dims]
            }
            LinOp::SumOfInputs { dims, count } => vec![*dims; *count],
            LinOp::Compose { inner, .. } => inner.in_dims(),
            LinOp::Stack(members) => members.first().map(LinOp::in_dims).unwrap_or_default(),
        }
    }

    pub fn out_dims(&self) -> Vec<Dims> {
        match self {
            LinOp::Diff { axis, dims } => vec![shrink(*dims, *axis)],
            LinOp::PaddedDiff { dims, .. } | LinOp::Identity { dims } | LinOp::SumOfInputs { dims, .. } => {
                vec![*dims]
            }
            LinOp::Compose { outer, .. } => outer.out_dims(),
            LinOp::Stack(members) => members.iter().flat_map(LinOp::out_dims).collect(),
        }
    }

    pub fn apply(&self, x: &CubeTuple) -> Result<CubeTuple> {
        self.eval(x, Mode::Forward)
    }

    pub fn adjoint_apply(&self, y: &CubeTuple) -> Result<CubeTuple> {
        self.eval(y, Mode::Adjoint)
    }

    /// The operator with every coefficient replaced by its absolute value.
    pub fn abs_apply(&self, x: &CubeTuple) -> Result<CubeTuple> {
        self.eval(x, Mode::AbsForward)
    }

    /// Adjoint of [`LinOp::abs_apply`].
    pub fn abs_adjoint_apply(&self, y: &CubeTuple) -> Result<CubeTuple> {
        self.eval(y, Mode::AbsAdjoint)
    }

    fn eval(&self, x: &CubeTuple, mode: Mode) -> Result<CubeTuple> {
        let expected = if mode.is_adjoint() { self.out_dims() } else { self.in_dims() };
        x.check_dims(&expected, "operator argument")?;
        self.eval_unchecked(x, mode)
    }

    fn eval_unchecked(&self, x: &CubeTuple, mode: Mode) -> Result<CubeTuple> {
        let sign = if mode.is_abs() { 1.0 } else { -1.0 };
        let parts = x.parts();
        Ok(match self {
            LinOp::Diff { axis, .. } => {
                let out = if mode.is_adjoint() {
                    diff_adj_stencil(&parts[0], *axis, sign)
                } else {
                    diff_stencil(&parts[0], *axis, sign)
                };
                CubeTuple::single(out)
            }
            LinOp::PaddedDiff { axis, .. } => {
                let out = if mode.is_adjoint() {
                    diff_adj_stencil(&crop_last(&parts[0], *axis), *axis, sign)
                } else {
                    pad_last(&diff_stencil(&parts[0], *axis, sign), *axis)
                };
                CubeTuple::single(out)
            }
            LinOp::Identity { .. } => x.clone(),
            LinOp::SumOfInputs { count, .. } => {
                if mode.is_adjoint() {
                    CubeTuple::new(vec![parts[0].clone(); *count])
                } else {
                    let mut acc = parts[0].clone();
                    for p in &parts[1..] {
                        acc.axpy(1.0, p)?;
                    }
                    CubeTuple::single(acc)
                }
            }
            LinOp::Compose { outer, inner } => {
                if mode.is_adjoint() {
                    let mid = outer.eval_unchecked(x, mode)?;
                    inner.eval_unchecked(&mid, mode)?
                } else {
                    let mid = inner.eval_unchecked(x, mode)?;
                    outer.eval_unchecked(&mid, mode)?
                }
            }
            LinOp::Stack(members) => {
                if mode.is_adjoint() {
                    let mut offset = 0;
                    let mut acc: Option<CubeTuple> = None;
                    for m in members {
                        let n = m.out_dims().len();
                        let slice = CubeTuple::new(parts[offset..offset + n].to_vec());
                        offset += n;
                        let contrib = m.eval_unchecked(&slice, mode)?;
                        acc = Some(match acc {
                            None => contrib,
                            Some(a) => a.zip_map(&contrib, |p, q| p + q)?,
                        });
                    }
                    acc.ok_or_else(|| Error::shape("empty operator stack"))?
                } else {
                    let mut out = Vec::new();
                    for m in members {
                        out.extend(m.eval_unchecked(x, mode)?.into_parts());
                    }
                    CubeTuple::new(out)
                }
            }
        })
    }
}

/// Block operator from primal variables to dual rows. Each row is a sum of
/// `(primal index, operator)` terms, every term producing the row's dims.
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    primal_dims: Vec<Dims>,
    rows: Vec<Vec<(usize, LinOp)>>,
}

impl OperatorMatrix {
    pub fn new(primal_dims: Vec<Dims>) -> Self {
        OperatorMatrix {
            primal_dims,
            rows: Vec::new(),
        }
    }

    /// Appends a dual row and returns its index.
    pub fn push_row(&mut self, entries: Vec<(usize, LinOp)>) -> Result<usize> {
        let first = entries
            .first()
            .ok_or_else(|| Error::shape("operator row has no entries"))?
            .1
            .out_dims();
        for (idx, op) in &entries {
            let dims = self
                .primal_dims
                .get(*idx)
                .ok_or_else(|| Error::shape(format!("primal index {idx} out of range")))?;
            if op.in_dims() != vec![*dims] {
                return Err(Error::shape(format!(
                    "row entry for primal {idx} expects {:?}, primal is {dims:?}",
                    op.in_dims()
                )));
            }
            if op.out_dims() != first {
                return Err(Error::shape("row entries disagree on output dims"));
            }
            op.validate()?;
        }
        self.rows.push(entries);
        Ok(self.rows.len() - 1)
    }

    pub fn primal_count(&self) -> usize {
        self.primal_dims.len()
    }

    pub fn dual_count(&self) -> usize {
        self.rows.len()
    }

    pub fn primal_dims(&self) -> &[Dims] {
        &self.primal_dims
    }

    pub fn row_dims(&self, r: usize) -> Vec<Dims> {
        self.rows[r][0].1.out_dims()
    }

    pub fn rows(&self) -> &[Vec<(usize, LinOp)>] {
        &self.rows
    }

    pub fn zero_primal(&self) -> CubeTuple {
        CubeTuple::zeros(&self.primal_dims)
    }

    pub fn zero_dual(&self) -> Vec<CubeTuple> {
        (0..self.rows.len())
            .map(|r| CubeTuple::zeros(&self.row_dims(r)))
            .collect()
    }

    fn forward(&self, z: &CubeTuple, abs: bool) -> Result<Vec<CubeTuple>> {
        z.check_dims(&self.primal_dims, "matrix primal argument")?;
        self.rows
            .iter()
            .map(|row| {
                let mut acc: Option<CubeTuple> = None;
                for (idx, op) in row {
                    let arg = CubeTuple::single(z.parts()[*idx].clone());
                    let out = if abs { op.abs_apply(&arg)? } else { op.apply(&arg)? };
                    acc = Some(match acc {
                        None => out,
                        Some(a) => a.zip_map(&out, |p, q| p + q)?,
                    });
                }
                Ok(acc.expect("rows are never empty"))
            })
            .collect()
    }

    fn backward(&self, y: &[CubeTuple], abs: bool) -> Result<CubeTuple> {
        if y.len() != self.rows.len() {
            return Err(Error::shape(format!(
                "expected {} dual rows, got {}",
                self.rows.len(),
                y.len()
            )));
        }
        let mut out: Vec<Cube> = self.primal_dims.iter().map(|&d| Cube::zeros(d)).collect();
        for (row, yr) in self.rows.iter().zip(y) {
            for (idx, op) in row {
                let contrib = if abs {
                    op.abs_adjoint_apply(yr)?
                } else {
                    op.adjoint_apply(yr)?
                };
                out[*idx].axpy(1.0, &contrib.parts()[0])?;
            }
        }
        Ok(CubeTuple::new(out))
    }

    /// Block matrix-vector product, one output tuple per row.
    pub fn apply(&self, z: &CubeTuple) -> Result<Vec<CubeTuple>> {
        self.forward(z, false)
    }

    pub fn adjoint_apply(&self, y: &[CubeTuple]) -> Result<CubeTuple> {
        self.backward(y, false)
    }

    pub fn abs_apply(&self, z: &CubeTuple) -> Result<Vec<CubeTuple>> {
        self.forward(z, true)
    }

    pub fn abs_adjoint_apply(&self, y: &[CubeTuple]) -> Result<CubeTuple> {
        self.backward(y, true)
    }
}

/// Inner product over row-structured dual variables.
pub fn dual_dot(a: &[CubeTuple], b: &[CubeTuple]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::shape("dual row count mismatch"));
    }
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x.dot(y)?;
    }
    Ok(acc)
}

pub fn dual_sum_sq(a: &[CubeTuple]) -> f64 {
    a.iter().map(CubeTuple::sum_sq).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_tuple(rng: &mut ChaCha8Rng, dims: &[Dims]) -> CubeTuple {
        CubeTuple::new(
            dims.iter()
                .map(|&d| Cube::from_fn(d, |_, _, _| rng.random_range(-1.0..1.0)))
                .collect(),
        )
    }

    fn check_adjoint(op: &LinOp, rng: &mut ChaCha8Rng) {
        let x = rand_tuple(rng, &op.in_dims());
        let y = rand_tuple(rng, &op.out_dims());
        let lhs = op.apply(&x).unwrap().dot(&y).unwrap();
        let rhs = x.dot(&op.adjoint_apply(&y).unwrap()).unwrap();
        let scale = x.fro_norm() * y.fro_norm() + 1.0;
        assert!((lhs - rhs).abs() <= 1e-10 * scale, "{op:?}: {lhs} vs {rhs}");
    }

    #[test]
    fn identity_and_sum() {
        let d = [3, 2, 2];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = rand_tuple(&mut rng, &[d]);
        let id = LinOp::identity(d);
        assert_eq!(id.apply(&x).unwrap(), x);
        assert_eq!(id.adjoint_apply(&x).unwrap(), x);
        assert_eq!(id.abs_apply(&CubeTuple::filled(&[d], 1.0)).unwrap(), CubeTuple::filled(&[d], 1.0));

        let sum = LinOp::sum_of_inputs(d, 2);
        let us = rand_tuple(&mut rng, &[d, d]);
        let expect = us.parts()[0].add(&us.parts()[1]).unwrap();
        assert_eq!(sum.apply(&us).unwrap().parts()[0], expect);
        let y = rand_tuple(&mut rng, &[d]);
        let adj = sum.adjoint_apply(&y).unwrap();
        assert_eq!(adj.parts(), &[y.parts()[0].clone(), y.parts()[0].clone()]);
    }

    #[test]
    fn abs_sums_of_vertical_difference() {
        let d = [5, 3, 2];
        let op = LinOp::diff(Axis::Vertical, d);
        let rows = op.abs_apply(&CubeTuple::filled(&[d], 1.0)).unwrap();
        assert_eq!(rows.parts()[0], Cube::filled([4, 3, 2], 2.0));
        let cols = op.abs_adjoint_apply(&CubeTuple::filled(&[[4, 3, 2]], 1.0)).unwrap();
        let expect = Cube::from_fn(d, |i, _, _| if i == 0 || i == 4 { 1.0 } else { 2.0 });
        assert_eq!(cols.parts()[0], expect);
    }

    #[test]
    fn padded_difference_has_zero_last_layer() {
        let d = [4, 3, 2];
        let op = LinOp::padded_diff(Axis::Horizontal, d);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = rand_tuple(&mut rng, &[d]);
        let y = op.apply(&x).unwrap();
        assert_eq!(y.dims(), vec![d]);
        for k in 0..2 {
            for i in 0..4 {
                assert_eq!(y.parts()[0].get(i, 2, k), 0.0);
            }
        }
        let rows = op.abs_apply(&CubeTuple::filled(&[d], 1.0)).unwrap();
        assert_eq!(rows.parts()[0].get(1, 2, 1), 0.0);
        assert_eq!(rows.parts()[0].get(1, 1, 1), 2.0);
        check_adjoint(&op, &mut rng);
    }

    #[test]
    fn adjoint_identity_for_every_kind() {
        let d = [4, 5, 3];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ops = vec![
            LinOp::diff(Axis::Vertical, d),
            LinOp::diff(Axis::Horizontal, d),
            LinOp::diff(Axis::Temporal, d),
            LinOp::padded_diff(Axis::Vertical, d),
            LinOp::identity(d),
            LinOp::sum_of_inputs(d, 3),
            LinOp::compose(LinOp::diff(Axis::Temporal, [3, 5, 3]), LinOp::diff(Axis::Vertical, d)).unwrap(),
            LinOp::stack(vec![
                LinOp::padded_diff(Axis::Vertical, d),
                LinOp::padded_diff(Axis::Horizontal, d),
            ])
            .unwrap(),
        ];
        for op in &ops {
            for _ in 0..100 {
                check_adjoint(op, &mut rng);
            }
        }
    }

    #[test]
    fn linearity() {
        let d = [4, 4, 2];
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let op = LinOp::stack(vec![LinOp::diff(Axis::Vertical, d), LinOp::diff(Axis::Temporal, d)]).unwrap();
        let x = rand_tuple(&mut rng, &[d]);
        let y = rand_tuple(&mut rng, &[d]);
        let (a, b) = (0.7, -1.3);
        let comb = x.zip_map(&y, |p, q| a * p + b * q).unwrap();
        let lhs = op.apply(&comb).unwrap();
        let rhs = op
            .apply(&x)
            .unwrap()
            .zip_map(&op.apply(&y).unwrap(), |p, q| a * p + b * q)
            .unwrap();
        for (l, r) in lhs.parts().iter().zip(rhs.parts()) {
            assert!(l.sub(r).unwrap().max_abs() <= 1e-12);
        }
    }

    #[test]
    fn composed_abs_bounds_coefficients() {
        let d = [4, 3, 3];
        let op = LinOp::compose(LinOp::diff(Axis::Temporal, [3, 3, 3]), LinOp::diff(Axis::Vertical, d)).unwrap();
        let rows = op.abs_apply(&CubeTuple::filled(&[d], 1.0)).unwrap();
        // four ±1 coefficients per output entry
        assert_eq!(rows.parts()[0], Cube::filled([3, 3, 2], 4.0));
    }

    #[test]
    fn shape_errors() {
        let op = LinOp::diff(Axis::Vertical, [3, 3, 1]);
        assert!(op.apply(&CubeTuple::single(Cube::zeros([2, 3, 1]))).is_err());
        assert!(op.adjoint_apply(&CubeTuple::single(Cube::zeros([3, 3, 1]))).is_err());
        assert!(LinOp::compose(LinOp::identity([3, 3, 1]), op.clone()).is_err());
        assert!(LinOp::diff(Axis::Temporal, [3, 3, 1]).validate().is_err());
        let mut m = OperatorMatrix::new(vec![[3, 3, 1]]);
        assert!(m.push_row(vec![(1, LinOp::identity([3, 3, 1]))]).is_err());
        assert!(m.push_row(vec![]).is_err());
    }

    #[test]
    fn matrix_with_empty_rows_and_zero_input() {
        let d = [3, 3, 2];
        let m = OperatorMatrix::new(vec![d, d]);
        assert!(m.apply(&m.zero_primal()).unwrap().is_empty());
        assert_eq!(m.adjoint_apply(&[]).unwrap(), m.zero_primal());

        let mut m = OperatorMatrix::new(vec![d, d]);
        m.push_row(vec![(0, LinOp::diff(Axis::Horizontal, d))]).unwrap();
        m.push_row(vec![(1, LinOp::diff(Axis::Vertical, d))]).unwrap();
        m.push_row(vec![(0, LinOp::identity(d)), (1, LinOp::identity(d))]).unwrap();
        let y = m.apply(&m.zero_primal()).unwrap();
        assert_eq!(y, m.zero_dual());

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let z = rand_tuple(&mut rng, &[d, d]);
            let y = m
                .zero_dual()
                .iter()
                .map(|t| rand_tuple(&mut rng, &t.dims()))
                .collect::<Vec<_>>();
            let lhs = dual_dot(&m.apply(&z).unwrap(), &y).unwrap();
            let rhs = z.dot(&m.adjoint_apply(&y).unwrap()).unwrap();
            assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + z.fro_norm() * dual_sum_sq(&y).sqrt()));
            // K*K is positive semidefinite
            let kz = m.apply(&z).unwrap();
            assert!(m.adjoint_apply(&kz).unwrap().dot(&z).unwrap() >= 0.0);
        }
    }
}
