//! Dense 3-D cubes and Neumann-boundary difference operators.
//!
//! A [`Cube`] stores `n1 × n2 × n3` doubles with the vertical index `i`
//! fastest, then the horizontal index `j`, then the band/frame index `k`.
//! Forward differences drop the out-of-range difference at the far edge, so
//! the vertical difference of an `n1 × n2 × n3` cube is `(n1-1) × n2 × n3`.

use std::fmt;
use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Cube extents `[n1, n2, n3]` (vertical, horizontal, band).
pub type Dims = [usize; 3];

/// One of the three cube axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    /// Axis 1, index `i`.
    Vertical,
    /// Axis 2, index `j`.
    Horizontal,
    /// Axis 3, index `k` (spectral band or video frame).
    Temporal,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::Vertical, Axis::Horizontal, Axis::Temporal];

    pub fn index(self) -> usize {
        match self {
            Axis::Vertical => 0,
            Axis::Horizontal => 1,
            Axis::Temporal => 2,
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Axis::Vertical => "v",
            Axis::Horizontal => "h",
            Axis::Temporal => "t",
        };
        f.write_str(s)
    }
}

/// Dense real-valued 3-D array.
#[derive(Clone, PartialEq)]
pub struct Cube {
    dims: Dims,
    data: Vec<f64>,
}

impl fmt::Debug for Cube {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Cube")
            .field("dims", &self.dims)
            .field("fro_norm", &self.fro_norm())
            .finish()
    }
}

fn volume(dims: Dims) -> usize {
    dims[0] * dims[1] * dims[2]
}

impl Cube {
    pub fn filled(dims: Dims, value: f64) -> Self {
        Cube {
            dims,
            data: vec![value; volume(dims)],
        }
    }

    pub fn zeros(dims: Dims) -> Self {
        Self::filled(dims, 0.0)
    }

    pub fn ones(dims: Dims) -> Self {
        Self::filled(dims, 1.0)
    }

    /// Builds a cube from data in storage order. Rejects a length mismatch
    /// and any non-finite entry.
    pub fn from_vec(dims: Dims, data: Vec<f64>) -> Result<Self> {
        if data.len() != volume(dims) {
            return Err(Error::shape(format!(
                "cube {:?} needs {} entries, got {}",
                dims,
                volume(dims),
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::param(format!("non-finite entry at flat index {pos}")));
        }
        Ok(Cube { dims, data })
    }

    /// Builds a cube by evaluating `f(i, j, k)` at every (0-based) position.
    pub fn from_fn(dims: Dims, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(volume(dims));
        for k in 0..dims[2] {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    data.push(f(i, j, k));
                }
            }
        }
        Cube { dims, data }
    }

    /// Builds a single-band cube from row-major nested rows: `rows[i][j]`.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let n1 = rows.len();
        let n2 = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != n2) {
            return Err(Error::shape("ragged rows"));
        }
        Ok(Self::from_fn([n1, n2, 1], |i, j, _| rows[i][j]))
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn offset(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.offset(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, value: f64) {
        let o = self.offset(i, j, k);
        self.data[o] = value;
    }

    fn stride(&self, axis: Axis) -> usize {
        match axis {
            Axis::Vertical => 1,
            Axis::Horizontal => self.dims[0],
            Axis::Temporal => self.dims[0] * self.dims[1],
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn check_same_dims(&self, other: &Cube, what: &str) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::shape(format!(
                "{what}: {:?} vs {:?}",
                self.dims, other.dims
            )));
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Cube {
        Cube {
            dims: self.dims,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn map_inplace(&mut self, f: impl Fn(f64) -> f64) {
        self.data.iter_mut().for_each(|v| *v = f(*v));
    }

    /// Elementwise `f(a, b)`; dims must agree.
    pub fn zip_map(&self, other: &Cube, f: impl Fn(f64, f64) -> f64) -> Result<Cube> {
        self.check_same_dims(other, "zip_map")?;
        Ok(Cube {
            dims: self.dims,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    /// Elementwise (Hadamard) product.
    pub fn hadamard(&self, other: &Cube) -> Result<Cube> {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn add(&self, other: &Cube) -> Result<Cube> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Cube) -> Result<Cube> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, alpha: f64) -> Cube {
        self.map(|v| alpha * v)
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &Cube) -> Result<()> {
        self.check_same_dims(other, "axpy")?;
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
        Ok(())
    }

    /// Sum of squares in storage order.
    pub fn sum_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    /// Frobenius norm.
    pub fn fro_norm(&self) -> f64 {
        self.sum_sq().sqrt()
    }

    pub fn l1_norm(&self) -> f64 {
        self.data.iter().map(|v| v.abs()).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Inner product `⟨self, other⟩`, summed in storage order.
    pub fn dot(&self, other: &Cube) -> Result<f64> {
        self.check_same_dims(other, "dot")?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    /// Forward difference along `axis`: `x(p) - x(p + e_axis)`, dropping the
    /// last layer along that axis.
    pub fn diff(&self, axis: Axis) -> Result<Cube> {
        let a = axis.index();
        if self.dims[a] < 2 {
            return Err(Error::shape(format!(
                "difference along axis {axis} needs extent >= 2, cube is {:?}",
                self.dims
            )));
        }
        let mut out_dims = self.dims;
        out_dims[a] -= 1;
        let stride = self.stride(axis);
        Ok(Cube::from_fn(out_dims, |i, j, k| {
            let o = self.offset(i, j, k);
            self.data[o] - self.data[o + stride]
        }))
    }

    /// Adjoint of [`Cube::diff`]: maps an `(n-1)`-extent cube back to `n`.
    pub fn diff_adj(&self, axis: Axis) -> Cube {
        let a = axis.index();
        let m = self.dims[a];
        let mut out_dims = self.dims;
        out_dims[a] += 1;
        let n = out_dims[a];
        Cube::from_fn(out_dims, |i, j, k| {
            let p = [i, j, k];
            let pos = p[a];
            let mut q = p;
            let mut v = 0.0;
            if pos < m {
                v += self.get(q[0], q[1], q[2]);
            }
            if pos > 0 && pos < n {
                q[a] = pos - 1;
                v -= self.get(q[0], q[1], q[2]);
            }
            v
        })
    }

    pub fn diff_v(&self) -> Result<Cube> {
        self.diff(Axis::Vertical)
    }

    pub fn diff_h(&self) -> Result<Cube> {
        self.diff(Axis::Horizontal)
    }

    pub fn diff_t(&self) -> Result<Cube> {
        self.diff(Axis::Temporal)
    }

    pub fn diff_v_adj(&self) -> Cube {
        self.diff_adj(Axis::Vertical)
    }

    pub fn diff_h_adj(&self) -> Cube {
        self.diff_adj(Axis::Horizontal)
    }

    pub fn diff_t_adj(&self) -> Cube {
        self.diff_adj(Axis::Temporal)
    }

    /// Rotates every band 90° counterclockwise, so `n1 × n2 × n3` becomes
    /// `n2 × n1 × n3` and a field constant along `j` becomes constant along
    /// the new vertical axis.
    pub fn rotate90(&self) -> Cube {
        let [_, n2, n3] = self.dims;
        Cube::from_fn([n2, self.dims[0], n3], |i, j, k| self.get(j, n2 - 1 - i, k))
    }

    /// Inverse of [`Cube::rotate90`] (a clockwise quarter turn).
    pub fn rotate90_inv(&self) -> Cube {
        let [n1, n2, n3] = self.dims;
        Cube::from_fn([n2, n1, n3], |i, j, k| self.get(n1 - 1 - j, i, k))
    }

    /// Copy of band `k` as a column-major `n1 × n2` slice.
    pub fn band(&self, k: usize) -> &[f64] {
        let plane = self.dims[0] * self.dims[1];
        &self.data[k * plane..(k + 1) * plane]
    }

    pub fn band_mut(&mut self, k: usize) -> &mut [f64] {
        let plane = self.dims[0] * self.dims[1];
        &mut self.data[k * plane..(k + 1) * plane]
    }
}

impl Index<(usize, usize, usize)> for Cube {
    type Output = f64;

    fn index(&self, (i, j, k): (usize, usize, usize)) -> &f64 {
        &self.data[self.offset(i, j, k)]
    }
}

impl IndexMut<(usize, usize, usize)> for Cube {
    fn index_mut(&mut self, (i, j, k): (usize, usize, usize)) -> &mut f64 {
        let o = self.offset(i, j, k);
        &mut self.data[o]
    }
}

/// Ordered tuple of cubes, possibly with different dims.
#[derive(Clone, Debug, PartialEq)]
pub struct CubeTuple(pub Vec<Cube>);

impl CubeTuple {
    pub fn new(parts: Vec<Cube>) -> Self {
        CubeTuple(parts)
    }

    pub fn single(c: Cube) -> Self {
        CubeTuple(vec![c])
    }

    pub fn zeros(dims: &[Dims]) -> Self {
        CubeTuple(dims.iter().map(|&d| Cube::zeros(d)).collect())
    }

    pub fn filled(dims: &[Dims], value: f64) -> Self {
        CubeTuple(dims.iter().map(|&d| Cube::filled(d, value)).collect())
    }

    pub fn dims(&self) -> Vec<Dims> {
        self.0.iter().map(Cube::dims).collect()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn parts(&self) -> &[Cube] {
        &self.0
    }

    pub fn parts_mut(&mut self) -> &mut [Cube] {
        &mut self.0
    }

    pub fn into_parts(self) -> Vec<Cube> {
        self.0
    }

    pub fn check_dims(&self, dims: &[Dims], what: &str) -> Result<()> {
        let mine = self.dims();
        if mine != dims {
            return Err(Error::shape(format!("{what}: expected {dims:?}, got {mine:?}")));
        }
        Ok(())
    }

    pub fn dot(&self, other: &CubeTuple) -> Result<f64> {
        if self.len() != other.len() {
            return Err(Error::shape("tuple length mismatch in dot"));
        }
        let mut acc = 0.0;
        for (a, b) in self.0.iter().zip(&other.0) {
            acc += a.dot(b)?;
        }
        Ok(acc)
    }

    pub fn sum_sq(&self) -> f64 {
        self.0.iter().map(Cube::sum_sq).sum()
    }

    pub fn fro_norm(&self) -> f64 {
        self.sum_sq().sqrt()
    }

    pub fn zip_map(&self, other: &CubeTuple, f: impl Fn(f64, f64) -> f64 + Copy) -> Result<CubeTuple> {
        if self.len() != other.len() {
            return Err(Error::shape("tuple length mismatch"));
        }
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| a.zip_map(b, f))
            .collect::<Result<Vec<_>>>()
            .map(CubeTuple)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64 + Copy) -> CubeTuple {
        CubeTuple(self.0.iter().map(|c| c.map(f)).collect())
    }

    pub fn hadamard(&self, other: &CubeTuple) -> Result<CubeTuple> {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn all_finite(&self) -> bool {
        self.0.iter().all(Cube::all_finite)
    }
}
