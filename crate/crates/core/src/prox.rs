//! Skewed proximity operators.
//!
//! Throughout this module a preconditioner `g` acts as a per-entry stepsize:
//! the skewed prox of `f` at `x` is
//!
//! ```text
//! argmin_y  f(y) + ½ Σ (y - x)² / g
//! ```
//!
//! so that, for example, soft thresholding uses the threshold `λ·g`. The
//! prox of the convex conjugate follows from the Moreau-type identity
//! `prox*(x) = x - g ⊙ prox_{1/g}(x / g)`.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::cube::{Cube, CubeTuple, Dims};
use crate::error::{Error, Result};

/// Positive diagonal preconditioner shaped like the variable it scales.
#[derive(Debug, Clone, PartialEq)]
pub struct Precond(CubeTuple);

impl Precond {
    pub fn new(parts: CubeTuple) -> Result<Self> {
        for (n, c) in parts.parts().iter().enumerate() {
            if let Some(v) = c.as_slice().iter().find(|v| !(v.is_finite() && **v > 0.0)) {
                return Err(Error::param(format!(
                    "preconditioner component {n} has non-positive entry {v}"
                )));
            }
        }
        Ok(Precond(parts))
    }

    pub fn from_cube(c: Cube) -> Result<Self> {
        Self::new(CubeTuple::single(c))
    }

    pub fn uniform(dims: &[Dims], value: f64) -> Result<Self> {
        Self::new(CubeTuple::filled(dims, value))
    }

    pub fn parts(&self) -> &[Cube] {
        self.0.parts()
    }

    pub fn as_tuple(&self) -> &CubeTuple {
        &self.0
    }

    pub fn dims(&self) -> Vec<Dims> {
        self.0.dims()
    }

    /// Elementwise reciprocal.
    pub fn inverse(&self) -> Precond {
        Precond(self.0.map(|v| 1.0 / v))
    }

    pub fn scale(&self, factor: f64) -> Result<Precond> {
        Precond::new(self.0.map(|v| v * factor))
    }

    pub fn min_entry(&self) -> f64 {
        self.0
            .parts()
            .iter()
            .flat_map(|c| c.as_slice().iter().copied())
            .fold(f64::INFINITY, f64::min)
    }

    /// The single value of a uniform preconditioner, or `None`.
    pub fn uniform_value(&self) -> Option<f64> {
        let first = *self.0.parts().first()?.as_slice().first()?;
        self.0
            .parts()
            .iter()
            .all(|c| c.as_slice().iter().all(|&v| v == first))
            .then_some(first)
    }

    /// Replaces every entry by the global minimum.
    pub fn collapse_to_min(&self) -> Precond {
        let m = self.min_entry();
        Precond(self.0.map(|_| m))
    }

    /// Replaces entry `p` of every component by the minimum over components
    /// at `p`. Components must share dims.
    pub fn collapse_across_components(&self) -> Result<Precond> {
        let parts = self.0.parts();
        let dims = parts[0].dims();
        if parts.iter().any(|c| c.dims() != dims) {
            return Err(Error::shape("component-wise collapse needs equal dims"));
        }
        let mut m = parts[0].clone();
        for c in &parts[1..] {
            m = m.zip_map(c, f64::min)?;
        }
        Ok(Precond(CubeTuple::new(vec![m; parts.len()])))
    }
}

/// Which closed forms a term needs from its preconditioner.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrecondShape {
    /// Any positive entries.
    Entrywise,
    /// Entries must agree across the grouped components at each position.
    Grouped,
    /// A single scalar for the whole variable.
    Uniform,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProxKind {
    /// `‖x‖₁` summed over every component.
    L1,
    /// `Σ_p sqrt(Σ_c x_c(p)²)`: isotropic grouping of equally-shaped
    /// components at each position.
    GroupL12,
    /// `Σ_{j,k} ‖x(:, j, k)‖₂`.
    L21Columns,
    /// `Σ_k ‖x(:, :, k)‖_*`.
    NuclearPerSlice,
    /// Indicator of the zero tensor.
    IndicatorZero,
    /// Indicator of `{x : ‖x - center‖_F ≤ radius}`.
    IndicatorBall { center: Cube, radius: f64 },
    Zero,
}

/// Weighted convex function with a closed-form skewed prox.
#[derive(Debug, Clone, PartialEq)]
pub struct ProxTerm {
    pub kind: ProxKind,
    pub weight: f64,
}

/// `sgn` with `sgn(0) = +1`.
#[inline]
fn sgn(v: f64) -> f64 {
    if v >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Soft thresholding `sgn(x)·max(|x| - λg, 0)`.
pub fn prox_l1(x: &Cube, g: &Cube, lambda: f64) -> Result<Cube> {
    if g.as_slice().iter().any(|&v| !(v > 0.0)) {
        return Err(Error::param("l1 prox needs a positive preconditioner"));
    }
    if lambda < 0.0 {
        return Err(Error::param("l1 weight must be non-negative"));
    }
    x.zip_map(g, |v, s| sgn(v) * (v.abs() - lambda * s).max(0.0))
}

/// Group shrinkage over equally-shaped components: each position's vector
/// `(x_1(p), …, x_m(p))` is scaled by `max(1 - weight·g_c(p) / ‖·‖, 0)`.
pub fn prox_group_l12(xs: &[Cube], gs: &[Cube], weight: f64) -> Result<Vec<Cube>> {
    if xs.is_empty() || xs.len() != gs.len() {
        return Err(Error::shape("group prox needs one preconditioner per component"));
    }
    let dims = xs[0].dims();
    for c in xs.iter().chain(gs) {
        if c.dims() != dims {
            return Err(Error::shape(format!("group components must share dims {dims:?}")));
        }
    }
    let n = xs[0].len();
    let mut out: Vec<Cube> = xs.to_vec();
    for p in 0..n {
        let norm = xs.iter().map(|c| c.as_slice()[p].powi(2)).sum::<f64>().sqrt();
        for (o, g) in out.iter_mut().zip(gs) {
            let factor = if norm > 0.0 {
                (1.0 - weight * g.as_slice()[p] / norm).max(0.0)
            } else {
                0.0
            };
            o.as_mut_slice()[p] *= factor;
        }
    }
    Ok(out)
}

/// Two-component group shrinkage.
pub fn prox_l12_pair(x1: &Cube, x2: &Cube, g1: &Cube, g2: &Cube) -> Result<(Cube, Cube)> {
    let mut out = prox_group_l12(&[x1.clone(), x2.clone()], &[g1.clone(), g2.clone()], 1.0)?;
    let b = out.pop().expect("two components");
    let a = out.pop().expect("two components");
    Ok((a, b))
}

/// Column-wise block shrinkage `max(1 - λg/‖s‖, 0)·s` for every vertical
/// column `s = x(:, j, k)`.
pub fn prox_l21_columns(x: &Cube, g: f64, lambda: f64) -> Result<Cube> {
    if !(g > 0.0) || lambda < 0.0 {
        return Err(Error::param("column prox needs g > 0 and lambda >= 0"));
    }
    let n1 = x.dims()[0];
    let mut out = x.clone();
    for col in out.as_mut_slice().chunks_mut(n1.max(1)) {
        let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        let factor = if norm > 0.0 {
            (1.0 - lambda * g / norm).max(0.0)
        } else {
            0.0
        };
        col.iter_mut().for_each(|v| *v *= factor);
    }
    Ok(out)
}

fn band_matrix(x: &Cube, k: usize) -> DMatrix<f64> {
    let [n1, n2, _] = x.dims();
    DMatrix::from_column_slice(n1, n2, x.band(k))
}

fn singular_values(m: DMatrix<f64>, k: usize) -> Result<Vec<f64>> {
    let svd = m.try_svd(false, false, f64::EPSILON, 0).ok_or_else(|| {
        Error::Numeric(format!("SVD did not converge on slice {k}"))
    })?;
    Ok(svd.singular_values.iter().copied().collect())
}

/// Singular value thresholding of every frontal slice at `λg`.
pub fn prox_nuclear_per_slice(x: &Cube, g: f64, lambda: f64) -> Result<Cube> {
    if !(g > 0.0) || lambda < 0.0 {
        return Err(Error::param("nuclear prox needs g > 0 and lambda >= 0"));
    }
    let [n1, n2, n3] = x.dims();
    let tau = lambda * g;
    let bands: Vec<Vec<f64>> = (0..n3)
        .into_par_iter()
        .map(|k| {
            let svd = band_matrix(x, k)
                .try_svd(true, true, f64::EPSILON, 0)
                .ok_or_else(|| Error::Numeric(format!("SVD did not converge on slice {k}")))?;
            let u = svd.u.as_ref().expect("u requested");
            let vt = svd.v_t.as_ref().expect("v_t requested");
            let mut out = DMatrix::<f64>::zeros(n1, n2);
            for (r, &s) in svd.singular_values.iter().enumerate() {
                let shrunk = s - tau;
                if shrunk > 0.0 {
                    out += shrunk * u.column(r) * vt.row(r);
                }
            }
            Ok(out.as_slice().to_vec())
        })
        .collect::<Result<_>>()?;
    Cube::from_vec([n1, n2, n3], bands.concat())
        .map_err(|_| Error::Numeric("SVD produced non-finite values".into()))
}

/// Sum over frontal slices of the nuclear norm.
pub fn nuclear_norm_per_slice(x: &Cube) -> Result<f64> {
    let n3 = x.dims()[2];
    let per: Vec<f64> = (0..n3)
        .into_par_iter()
        .map(|k| singular_values(band_matrix(x, k), k).map(|s| s.iter().sum()))
        .collect::<Result<_>>()?;
    Ok(per.iter().sum())
}

pub fn project_zero(x: &Cube) -> Cube {
    Cube::zeros(x.dims())
}

/// Euclidean projection onto `{y : ‖y - center‖_F ≤ eps}`.
pub fn project_fro_ball(x: &Cube, center: &Cube, eps: f64) -> Result<Cube> {
    if eps < 0.0 {
        return Err(Error::param("ball radius must be non-negative"));
    }
    let diff = x.sub(center)?;
    let dist = diff.fro_norm();
    if dist <= eps {
        return Ok(x.clone());
    }
    let mut out = center.clone();
    out.axpy(eps / dist, &diff)?;
    Ok(out)
}

fn l21_columns_value(x: &Cube) -> f64 {
    let n1 = x.dims()[0].max(1);
    x.as_slice()
        .chunks(n1)
        .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
        .sum()
}

impl ProxTerm {
    pub fn new(kind: ProxKind, weight: f64) -> Result<Self> {
        if !(weight.is_finite() && weight >= 0.0) {
            return Err(Error::param(format!("term weight {weight} must be finite and >= 0")));
        }
        if let ProxKind::IndicatorBall { radius, .. } = &kind {
            if !(radius.is_finite() && *radius >= 0.0) {
                return Err(Error::param(format!("ball radius {radius} must be finite and >= 0")));
            }
        }
        Ok(ProxTerm { kind, weight })
    }

    pub fn l1(weight: f64) -> Result<Self> {
        Self::new(ProxKind::L1, weight)
    }

    pub fn group_l12(weight: f64) -> Result<Self> {
        Self::new(ProxKind::GroupL12, weight)
    }

    pub fn l21_columns(weight: f64) -> Result<Self> {
        Self::new(ProxKind::L21Columns, weight)
    }

    pub fn nuclear(weight: f64) -> Result<Self> {
        Self::new(ProxKind::NuclearPerSlice, weight)
    }

    pub fn indicator_zero() -> Self {
        ProxTerm {
            kind: ProxKind::IndicatorZero,
            weight: 1.0,
        }
    }

    pub fn indicator_ball(center: Cube, radius: f64) -> Result<Self> {
        Self::new(ProxKind::IndicatorBall { center, radius }, 1.0)
    }

    pub fn zero() -> Self {
        ProxTerm {
            kind: ProxKind::Zero,
            weight: 0.0,
        }
    }

    pub fn precond_shape(&self) -> PrecondShape {
        match self.kind {
            ProxKind::L1 | ProxKind::IndicatorZero | ProxKind::Zero => PrecondShape::Entrywise,
            ProxKind::GroupL12 => PrecondShape::Grouped,
            ProxKind::L21Columns | ProxKind::NuclearPerSlice | ProxKind::IndicatorBall { .. } => {
                PrecondShape::Uniform
            }
        }
    }

    pub fn is_indicator(&self) -> bool {
        matches!(self.kind, ProxKind::IndicatorZero | ProxKind::IndicatorBall { .. })
    }

    /// Function value; indicators return `+∞` outside their set (with a
    /// `1e-12` relative slack on the ball radius).
    pub fn evaluate(&self, x: &CubeTuple) -> Result<f64> {
        let parts = x.parts();
        let w = self.weight;
        Ok(match &self.kind {
            ProxKind::L1 => w * parts.iter().map(Cube::l1_norm).sum::<f64>(),
            ProxKind::GroupL12 => {
                let n = parts.first().map_or(0, Cube::len);
                let mut acc = 0.0;
                for p in 0..n {
                    acc += parts.iter().map(|c| c.as_slice()[p].powi(2)).sum::<f64>().sqrt();
                }
                w * acc
            }
            ProxKind::L21Columns => w * parts.iter().map(l21_columns_value).sum::<f64>(),
            ProxKind::NuclearPerSlice => {
                let mut acc = 0.0;
                for c in parts {
                    acc += nuclear_norm_per_slice(c)?;
                }
                w * acc
            }
            ProxKind::IndicatorZero => {
                if parts.iter().all(|c| c.max_abs() == 0.0) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            ProxKind::IndicatorBall { center, radius } => {
                let dist = parts[0].sub(center)?.fro_norm();
                if dist <= radius * (1.0 + 1e-12) + 1e-15 {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            ProxKind::Zero => 0.0,
        })
    }

    fn single<'a>(&self, x: &'a CubeTuple) -> Result<&'a Cube> {
        match x.parts() {
            [c] => Ok(c),
            _ => Err(Error::shape(format!("{:?} acts on a single cube", self.kind))),
        }
    }

    fn uniform_step(&self, step: &Precond) -> Result<f64> {
        step.uniform_value().ok_or_else(|| {
            Error::param(format!("{:?} prox needs a uniform preconditioner", self.kind))
        })
    }

    /// Skewed prox `argmin_y f(y) + ½ Σ (y - x)² / step`.
    pub fn prox(&self, x: &CubeTuple, step: &Precond) -> Result<CubeTuple> {
        x.check_dims(&step.dims(), "prox preconditioner")?;
        let w = self.weight;
        Ok(match &self.kind {
            ProxKind::L1 => CubeTuple::new(
                x.parts()
                    .iter()
                    .zip(step.parts())
                    .map(|(c, g)| prox_l1(c, g, w))
                    .collect::<Result<_>>()?,
            ),
            ProxKind::GroupL12 => CubeTuple::new(prox_group_l12(x.parts(), step.parts(), w)?),
            ProxKind::L21Columns => {
                let g = self.uniform_step(step)?;
                CubeTuple::single(prox_l21_columns(self.single(x)?, g, w)?)
            }
            ProxKind::NuclearPerSlice => {
                let g = self.uniform_step(step)?;
                CubeTuple::single(prox_nuclear_per_slice(self.single(x)?, g, w)?)
            }
            ProxKind::IndicatorZero => x.map(|_| 0.0),
            ProxKind::IndicatorBall { center, radius } => {
                self.uniform_step(step)?;
                CubeTuple::single(project_fro_ball(self.single(x)?, center, *radius)?)
            }
            ProxKind::Zero => x.clone(),
        })
    }

    /// Skewed prox of the convex conjugate in the metric `g⁻¹`:
    /// `x - g ⊙ prox_{f, step = 1/g}(x / g)`.
    pub fn prox_conjugate(&self, x: &CubeTuple, g: &Precond) -> Result<CubeTuple> {
        let g_t = g.as_tuple();
        let scaled = x.zip_map(g_t, |v, s| v / s)?;
        let inner = self.prox(&scaled, &g.inverse())?;
        let weighted = inner.hadamard(g_t)?;
        x.zip_map(&weighted, |a, b| a - b)
    }
}
