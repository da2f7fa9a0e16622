//! Image regularizers expressed as `(operator on U, prox term)` blocks.
//!
//! | name | blocks |
//! |------|--------|
//! | `htv`  | `(D_v, D_h)` stacked and zero-padded, isotropic ℓ1,2 |
//! | `atv`  | `D_v`, `D_h`, `D_t`, each ℓ1 |
//! | `itv`  | `(D_v, D_h, D_t)` stacked and zero-padded, isotropic ℓ1,2 |
//! | `sstv` | `D_t∘D_v`, `D_t∘D_h`, each ℓ1 |
//! | `tnn`  | identity, band-wise nuclear norm |
//!
//! Padding appends the difference that the Neumann boundary drops, which is
//! always zero, so the isotropic groupings are taken over a common
//! `n1 × n2 × n3` index set. `tnn` is the sum of per-band matrix nuclear
//! norms, not the t-SVD tensor nuclear norm.
//!
//! New regularizers only need to supply more blocks; the solver treats every
//! block the same way.

use std::fmt;
use std::str::FromStr;

use crate::cube::{Axis, Cube, CubeTuple, Dims};
use crate::error::{Error, Result};
use crate::linop::LinOp;
use crate::prox::ProxTerm;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RegularizerKind {
    Htv,
    Sstv,
    Atv,
    Itv,
    Tnn,
}

impl RegularizerKind {
    pub const ALL: [RegularizerKind; 5] = [
        RegularizerKind::Htv,
        RegularizerKind::Sstv,
        RegularizerKind::Atv,
        RegularizerKind::Itv,
        RegularizerKind::Tnn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RegularizerKind::Htv => "htv",
            RegularizerKind::Sstv => "sstv",
            RegularizerKind::Atv => "atv",
            RegularizerKind::Itv => "itv",
            RegularizerKind::Tnn => "tnn",
        }
    }

    /// Hyperspectral regularizers are paired with band-varying stripes, so
    /// the temporal flatness constraint is normally dropped for them.
    pub fn is_spectral(self) -> bool {
        matches!(self, RegularizerKind::Htv | RegularizerKind::Sstv | RegularizerKind::Tnn)
    }
}

impl fmt::Display for RegularizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RegularizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RegularizerKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| {
                Error::config(format!("unknown regularizer '{s}' (expected htv, sstv, atv, itv, tnn)"))
            })
    }
}

/// `Σ_k R_k(L_k(U))` as a list of operator/term blocks.
#[derive(Debug, Clone)]
pub struct Regularizer {
    kind: RegularizerKind,
    dims: Dims,
    weight: f64,
    blocks: Vec<(LinOp, ProxTerm)>,
}

fn require(dims: Dims, axes: &[Axis], name: &str) -> Result<()> {
    for a in axes {
        if dims[a.index()] < 2 {
            return Err(Error::shape(format!(
                "{name} needs extent >= 2 along axis {a}, cube is {dims:?}"
            )));
        }
    }
    Ok(())
}

impl Regularizer {
    pub fn new(kind: RegularizerKind, dims: Dims, weight: f64) -> Result<Self> {
        if !(weight.is_finite() && weight >= 0.0) {
            return Err(Error::param(format!("regularizer weight {weight} must be >= 0")));
        }
        use Axis::*;
        let blocks = match kind {
            RegularizerKind::Htv => {
                require(dims, &[Vertical, Horizontal], "htv")?;
                let op = LinOp::stack(vec![
                    LinOp::padded_diff(Vertical, dims),
                    LinOp::padded_diff(Horizontal, dims),
                ])?;
                vec![(op, ProxTerm::group_l12(weight)?)]
            }
            RegularizerKind::Atv => {
                require(dims, &[Vertical, Horizontal, Temporal], "atv")?;
                Axis::ALL
                    .iter()
                    .map(|&a| Ok((LinOp::diff(a, dims), ProxTerm::l1(weight)?)))
                    .collect::<Result<_>>()?
            }
            RegularizerKind::Itv => {
                require(dims, &[Vertical, Horizontal, Temporal], "itv")?;
                let op = LinOp::stack(Axis::ALL.iter().map(|&a| LinOp::padded_diff(a, dims)).collect())?;
                vec![(op, ProxTerm::group_l12(weight)?)]
            }
            RegularizerKind::Sstv => {
                require(dims, &[Vertical, Horizontal, Temporal], "sstv")?;
                [Vertical, Horizontal]
                    .iter()
                    .map(|&a| {
                        let spatial = LinOp::diff(a, dims);
                        let mid = spatial.out_dims()[0];
                        let op = LinOp::compose(LinOp::diff(Temporal, mid), spatial)?;
                        Ok((op, ProxTerm::l1(weight)?))
                    })
                    .collect::<Result<_>>()?
            }
            RegularizerKind::Tnn => vec![(LinOp::identity(dims), ProxTerm::nuclear(weight)?)],
        };
        Ok(Regularizer {
            kind,
            dims,
            weight,
            blocks,
        })
    }

    pub fn htv(dims: Dims, weight: f64) -> Result<Self> {
        Self::new(RegularizerKind::Htv, dims, weight)
    }

    pub fn atv(dims: Dims, weight: f64) -> Result<Self> {
        Self::new(RegularizerKind::Atv, dims, weight)
    }

    pub fn itv(dims: Dims, weight: f64) -> Result<Self> {
        Self::new(RegularizerKind::Itv, dims, weight)
    }

    pub fn sstv(dims: Dims, weight: f64) -> Result<Self> {
        Self::new(RegularizerKind::Sstv, dims, weight)
    }

    pub fn tnn(dims: Dims, weight: f64) -> Result<Self> {
        Self::new(RegularizerKind::Tnn, dims, weight)
    }

    pub fn kind(&self) -> RegularizerKind {
        self.kind
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn blocks(&self) -> &[(LinOp, ProxTerm)] {
        &self.blocks
    }

    /// `Σ_k R_k(L_k(u))`.
    pub fn evaluate(&self, u: &Cube) -> Result<f64> {
        if u.dims() != self.dims {
            return Err(Error::shape(format!(
                "regularizer built for {:?}, got {:?}",
                self.dims,
                u.dims()
            )));
        }
        let arg = CubeTuple::single(u.clone());
        let mut acc = 0.0;
        for (op, term) in &self.blocks {
            acc += term.evaluate(&op.apply(&arg)?)?;
        }
        Ok(acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for k in RegularizerKind::ALL {
            assert_eq!(k.name().parse::<RegularizerKind>().unwrap(), k);
        }
        assert!("nope".parse::<RegularizerKind>().is_err());
    }

    #[test]
    fn constant_cube_has_zero_value() {
        let c = Cube::filled([4, 5, 3], 0.7);
        for k in RegularizerKind::ALL {
            let r = Regularizer::new(k, c.dims(), 1.0).unwrap();
            let v = r.evaluate(&c).unwrap();
            if k == RegularizerKind::Tnn {
                // a constant band has rank one
                assert!((v - 3.0 * 0.7 * (20f64).sqrt()).abs() < 1e-10);
            } else {
                assert_eq!(v, 0.0, "{k}");
            }
        }
    }

    #[test]
    fn htv_hand_value() {
        let u = Cube::from_rows(&[&[0.0, 1.0], &[0.0, 1.0]]).unwrap();
        let r = Regularizer::htv(u.dims(), 1.0).unwrap();
        assert_eq!(r.evaluate(&u).unwrap(), 2.0);
        assert_eq!(r.blocks().len(), 1);
    }

    #[test]
    fn atv_and_itv_on_temporal_ramp() {
        let u = Cube::from_fn([3, 3, 4], |_, _, k| (k * k) as f64 * 0.5);
        // |diffs| along k: 0.5, 1.5, 2.5 at each of 9 pixels
        let expect = 9.0 * (0.5 + 1.5 + 2.5);
        let atv = Regularizer::atv(u.dims(), 1.0).unwrap();
        let itv = Regularizer::itv(u.dims(), 1.0).unwrap();
        assert!((atv.evaluate(&u).unwrap() - expect).abs() < 1e-12);
        assert!((itv.evaluate(&u).unwrap() - expect).abs() < 1e-12);
        assert_eq!(atv.blocks().len(), 3);
    }

    #[test]
    fn sstv_vanishes_on_band_constant_and_spatially_constant() {
        let spatial_only = Cube::from_fn([4, 4, 3], |i, j, _| (i * 3 + j * j) as f64);
        let spectral_only = Cube::from_fn([4, 4, 3], |_, _, k| k as f64 * 1.7);
        let r = Regularizer::sstv([4, 4, 3], 1.0).unwrap();
        assert_eq!(r.evaluate(&spatial_only).unwrap(), 0.0);
        assert_eq!(r.evaluate(&spectral_only).unwrap(), 0.0);
    }

    #[test]
    fn tnn_rank_one_slice() {
        let u = Cube::from_fn([3, 2, 1], |i, j, _| {
            let a = [1.0, 2.0, 2.0][i];
            let b = [0.6, 0.8][j];
            2.5 * a / 3.0 * b
        });
        let r = Regularizer::tnn(u.dims(), 1.0).unwrap();
        assert!((r.evaluate(&u).unwrap() - 2.5).abs() < 1e-12);
        assert_eq!(r.evaluate(&Cube::zeros([3, 2, 1])).unwrap(), 0.0);
    }

    #[test]
    fn shape_requirements() {
        assert!(Regularizer::atv([4, 4, 1], 1.0).is_err());
        assert!(Regularizer::htv([4, 4, 1], 1.0).is_ok());
        assert!(Regularizer::htv([1, 4, 1], 1.0).is_err());
        assert!(Regularizer::htv([4, 4, 1], -1.0).is_err());
        let r = Regularizer::htv([4, 4, 2], 1.0).unwrap();
        assert!(r.evaluate(&Cube::zeros([4, 4, 1])).is_err());
    }
}
