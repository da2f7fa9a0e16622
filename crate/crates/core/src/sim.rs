//! Synthetic degradations and ground-truth fixtures.
//!
//! Stripes are per-(column, band) offsets drawn uniformly from `[-a, a]` and
//! replicated down each column, so they are exactly flat vertically. For
//! time-invariant stripes one offset per column is replicated across all
//! bands as well.

use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::cube::{Cube, Dims};
use crate::error::{Error, Result};

/// Standard deviation of the Gaussian noise in case (iii).
pub const CASE_III_SIGMA: f64 = 0.05;

/// The stripe intensity ranges of the synthetic protocol.
pub const STRIPE_RANGES: [f64; 5] = [0.2, 0.25, 0.3, 0.35, 0.4];

/// Offsets the Gaussian stream so it never shares a seed with the stripes.
const GAUSSIAN_STREAM: u64 = 0x5EED_6A55_1A4E_0001;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    /// Stripe offsets are uniform in `[-stripe_range, stripe_range]`.
    pub stripe_range: f64,
    /// Fraction of (column, band) pairs that carry a stripe.
    pub stripe_column_fraction: f64,
    pub time_invariant: bool,
    pub gaussian_sigma: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(stripe_range: f64, seed: u64) -> Self {
        NoiseSpec {
            stripe_range,
            stripe_column_fraction: 1.0,
            time_invariant: false,
            gaussian_sigma: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.stripe_range.is_finite() && self.stripe_range > 0.0) {
            return Err(Error::param(format!("stripe range {} must be > 0", self.stripe_range)));
        }
        let f = self.stripe_column_fraction;
        if !(f > 0.0 && f <= 1.0) {
            return Err(Error::param(format!("stripe column fraction {f} must be in (0, 1]")));
        }
        if !(self.gaussian_sigma.is_finite() && self.gaussian_sigma >= 0.0) {
            return Err(Error::param("gaussian sigma must be >= 0"));
        }
        Ok(())
    }
}

/// Degradation scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Case {
    /// Band-varying vertical stripes.
    I,
    /// Time-invariant vertical stripes.
    II,
    /// Band-varying vertical stripes plus white Gaussian noise.
    III,
}

impl Case {
    pub const ALL: [Case; 3] = [Case::I, Case::II, Case::III];

    pub fn name(self) -> &'static str {
        match self {
            Case::I => "i",
            Case::II => "ii",
            Case::III => "iii",
        }
    }
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Case {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "i" | "1" => Ok(Case::I),
            "ii" | "2" => Ok(Case::II),
            "iii" | "3" => Ok(Case::III),
            other => Err(Error::config(format!("unknown case '{other}' (expected i, ii, iii)"))),
        }
    }
}

/// Vertical stripe field. Exactly flat along axis 1, and along axis 3 too
/// when `time_invariant` is set.
pub fn gen_stripes(dims: Dims, spec: &NoiseSpec) -> Result<Cube> {
    spec.validate()?;
    let [_, n2, n3] = dims;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let bands = if spec.time_invariant { 1 } else { n3 };
    let pairs = n2 * bands;
    let count = ((spec.stripe_column_fraction * pairs as f64).round() as usize).clamp(1, pairs.max(1));
    let mut offsets = vec![0.0; pairs];
    let mut chosen: Vec<usize> = sample(&mut rng, pairs, count).into_vec();
    chosen.sort_unstable();
    let a = spec.stripe_range;
    for p in chosen {
        offsets[p] = rng.random_range(-a..=a);
    }
    Ok(Cube::from_fn(dims, |_, j, k| {
        let band = if spec.time_invariant { 0 } else { k };
        offsets[j + n2 * band]
    }))
}

/// I.i.d. `N(0, sigma²)` entries.
pub fn gen_gaussian(dims: Dims, sigma: f64, seed: u64) -> Result<Cube> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::param("gaussian sigma must be >= 0"));
    }
    if sigma == 0.0 {
        return Ok(Cube::zeros(dims));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ GAUSSIAN_STREAM);
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::param(e.to_string()))?;
    Ok(Cube::from_fn(dims, |_, _, _| normal.sample(&mut rng)))
}

/// Degraded observation `V = truth + stripes + noise`.
#[derive(Debug, Clone, PartialEq)]
pub struct Degraded {
    pub v: Cube,
    pub noise: Cube,
    pub stripes: Cube,
}

impl Degraded {
    /// Oracle fidelity radius `‖N‖_F`.
    pub fn oracle_eps(&self) -> f64 {
        self.noise.fro_norm()
    }
}

/// Builds a case instance. The case decides time invariance and the Gaussian
/// level; range, column fraction and seed come from `spec`.
pub fn make_case(truth: &Cube, case: Case, spec: &NoiseSpec) -> Result<Degraded> {
    let mut spec = *spec;
    spec.time_invariant = case == Case::II;
    spec.gaussian_sigma = if case == Case::III { CASE_III_SIGMA } else { 0.0 };
    let dims = truth.dims();
    let stripes = gen_stripes(dims, &spec)?;
    let noise = gen_gaussian(dims, spec.gaussian_sigma, spec.seed)?;
    let v = truth.add(&stripes)?.add(&noise)?;
    Ok(Degraded { v, noise, stripes })
}

/// Piecewise-constant hyperspectral-like cube in `[0, 1]`: a background and
/// a few axis-aligned rectangles, each with its own linear spectral profile.
pub fn piecewise_constant(dims: Dims, seed: u64) -> Cube {
    let [n1, n2, n3] = dims;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let regions = 6;
    let mut rects = Vec::with_capacity(regions + 1);
    // background spans everything
    rects.push((0, n1, 0, n2, rng.random_range(0.2..0.4), rng.random_range(-0.1..0.1)));
    for _ in 0..regions {
        let h = rng.random_range(n1 / 6..=n1 / 2).max(1);
        let w = rng.random_range(n2 / 6..=n2 / 2).max(1);
        let i0 = rng.random_range(0..=n1 - h);
        let j0 = rng.random_range(0..=n2 - w);
        rects.push((i0, i0 + h, j0, j0 + w, rng.random_range(0.3..0.8), rng.random_range(-0.15..0.15)));
    }
    Cube::from_fn(dims, |i, j, k| {
        let t = if n3 > 1 { k as f64 / (n3 - 1) as f64 } else { 0.0 };
        let (_, _, _, _, base, slope) = rects
            .iter()
            .rev()
            .find(|r| i >= r.0 && i < r.1 && j >= r.2 && j < r.3)
            .copied()
            .expect("background covers every pixel");
        (base + slope * t).clamp(0.0, 1.0)
    })
}

/// Video-like cube: a static piecewise-constant scene with a bright square
/// moving two pixels to the right per frame.
pub fn moving_block_video(dims: Dims, seed: u64) -> Cube {
    let [n1, n2, _] = dims;
    let scene = piecewise_constant([n1, n2, 1], seed);
    let side = (n1.min(n2) / 6).max(2);
    let top = n1 / 3;
    Cube::from_fn(dims, |i, j, k| {
        let left = (2 * k + n2 / 8) % n2.saturating_sub(side).max(1);
        if i >= top && i < top + side && j >= left && j < left + side {
            0.95
        } else {
            scene.get(i, j, 0) * 0.8
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stripe::flatness_residual;

    #[test]
    fn stripes_are_flat_and_bounded() {
        let dims = [16, 12, 5];
        for (seed, ti) in [(1, false), (2, true), (3, false)] {
            let spec = NoiseSpec {
                time_invariant: ti,
                ..NoiseSpec::new(0.3, seed)
            };
            let s = gen_stripes(dims, &spec).unwrap();
            assert_eq!(flatness_residual(&s, ti), (0.0, 0.0));
            assert!(s.max_abs() <= 0.3);
            assert!(s.max_abs() > 0.0);
        }
    }

    #[test]
    fn stripe_fraction_controls_coverage() {
        let spec = NoiseSpec {
            stripe_column_fraction: 0.25,
            ..NoiseSpec::new(0.2, 9)
        };
        let s = gen_stripes([4, 20, 2], &spec).unwrap();
        let striped = (0..2)
            .flat_map(|k| (0..20).map(move |j| (j, k)))
            .filter(|&(j, k)| s.get(0, j, k) != 0.0)
            .count();
        assert_eq!(striped, 10);
        assert!(gen_stripes([4, 4, 1], &NoiseSpec { stripe_column_fraction: 0.0, ..spec }).is_err());
        assert!(gen_stripes([4, 4, 1], &NoiseSpec::new(0.0, 1)).is_err());
    }

    #[test]
    fn stripe_offsets_have_zero_mean() {
        let a = 0.4;
        let n = 100_000;
        let s = gen_stripes([1, n, 1], &NoiseSpec::new(a, 77)).unwrap();
        let mean = s.as_slice().iter().sum::<f64>() / n as f64;
        assert!(mean.abs() <= 3.0 * a / (3.0 * n as f64).sqrt(), "mean {mean}");
    }

    #[test]
    fn gaussian_statistics_and_determinism() {
        assert_eq!(gen_gaussian([3, 3, 3], 0.0, 1).unwrap(), Cube::zeros([3, 3, 3]));
        let g = gen_gaussian([1000, 1000, 1], 0.05, 4).unwrap();
        let n = g.len() as f64;
        let mean = g.as_slice().iter().sum::<f64>() / n;
        let var = g.as_slice().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((var.sqrt() - 0.05).abs() <= 0.01 * 0.05);
        assert_eq!(gen_gaussian([4, 4, 2], 0.05, 4).unwrap(), gen_gaussian([4, 4, 2], 0.05, 4).unwrap());
        assert_ne!(gen_gaussian([4, 4, 2], 0.05, 4).unwrap(), gen_gaussian([4, 4, 2], 0.05, 5).unwrap());
    }

    #[test]
    fn cases_compose_the_observation() {
        let truth = piecewise_constant([16, 16, 4], 3);
        let spec = NoiseSpec::new(0.3, 11);

        let i = make_case(&truth, Case::I, &spec).unwrap();
        assert_eq!(i.noise.max_abs(), 0.0);
        assert_eq!(i.v, truth.add(&i.stripes).unwrap().add(&i.noise).unwrap());
        assert_eq!(i.oracle_eps(), 0.0);

        let ii = make_case(&truth, Case::II, &spec).unwrap();
        assert_eq!(flatness_residual(&ii.stripes, true), (0.0, 0.0));

        let iii = make_case(&truth, Case::III, &spec).unwrap();
        assert_eq!(iii.oracle_eps(), iii.noise.fro_norm());
        assert!(iii.oracle_eps() > 0.0);

        assert_eq!(make_case(&truth, Case::III, &spec).unwrap(), iii);
    }

    #[test]
    fn fixtures_are_in_unit_range() {
        let p = piecewise_constant([32, 24, 6], 1);
        assert!(p.as_slice().iter().all(|&v| (0.0..=1.0).contains(&v)));
        let v = moving_block_video([32, 32, 6], 2);
        assert!(v.as_slice().iter().all(|&x| (0.0..=1.0).contains(&x)));
        // the block moves
        assert_ne!(v.band(0), v.band(1));
    }

    #[test]
    fn case_names() {
        for c in Case::ALL {
            assert_eq!(c.name().parse::<Case>().unwrap(), c);
        }
        assert!("iv".parse::<Case>().is_err());
    }
}
