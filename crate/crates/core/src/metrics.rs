//! Band-averaged PSNR and SSIM for cubes normalised to `[0, 1]`.
//!
//! SSIM convention: 8×8 uniform window over the valid region only,
//! `C1 = 0.01²`, `C2 = 0.03²`, dynamic range 1, population (1/N) window
//! statistics, and the SSIM map averaged over all window positions.

use crate::cube::Cube;
use crate::error::{Error, Result};

/// Value reported for a band with zero error.
pub const PSNR_ZERO_ERROR_CAP_DB: f64 = 100.0;

pub const SSIM_WINDOW: usize = 8;
pub const SSIM_C1: f64 = 0.01 * 0.01;
pub const SSIM_C2: f64 = 0.03 * 0.03;

/// PSNR of one band with peak 1: `10 log10(n1 n2 / ‖e‖²)`.
pub fn band_psnr(u: &[f64], u_bar: &[f64]) -> f64 {
    let err: f64 = u.iter().zip(u_bar).map(|(a, b)| (a - b) * (a - b)).sum();
    if err == 0.0 {
        PSNR_ZERO_ERROR_CAP_DB
    } else {
        10.0 * (u.len() as f64 / err).log10()
    }
}

/// Mean over bands of [`band_psnr`].
pub fn mpsnr(u: &Cube, u_bar: &Cube) -> Result<f64> {
    u.check_same_dims(u_bar, "mpsnr")?;
    let n3 = u.dims()[2];
    Ok((0..n3).map(|k| band_psnr(u.band(k), u_bar.band(k))).sum::<f64>() / n3 as f64)
}

/// Window sums of a column-major `n1 × n2` plane over every `w × w` valid
/// window, via a vertical then a horizontal running sum.
fn box_sums(plane: &[f64], n1: usize, n2: usize, w: usize) -> Vec<f64> {
    let m1 = n1 - w + 1;
    let m2 = n2 - w + 1;
    // vertical pass: per column, sums over i..i+w
    let mut vert = vec![0.0; m1 * n2];
    for j in 0..n2 {
        let col = &plane[j * n1..(j + 1) * n1];
        for i in 0..m1 {
            vert[i + m1 * j] = col[i..i + w].iter().sum();
        }
    }
    let mut out = vec![0.0; m1 * m2];
    for j in 0..m2 {
        for i in 0..m1 {
            out[i + m1 * j] = (j..j + w).map(|jj| vert[i + m1 * jj]).sum();
        }
    }
    out
}

/// Mean SSIM of one band.
pub fn band_ssim(x: &[f64], y: &[f64], n1: usize, n2: usize) -> Result<f64> {
    let w = SSIM_WINDOW;
    if n1 < w || n2 < w {
        return Err(Error::param(format!(
            "SSIM needs bands of at least {w}×{w}, got {n1}×{n2}"
        )));
    }
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(y).map(|(a, b)| a * b).collect();
    let sx = box_sums(x, n1, n2, w);
    let sy = box_sums(y, n1, n2, w);
    let sxx = box_sums(&xx, n1, n2, w);
    let syy = box_sums(&yy, n1, n2, w);
    let sxy = box_sums(&xy, n1, n2, w);
    let inv = 1.0 / (w * w) as f64;
    let mut total = 0.0;
    for p in 0..sx.len() {
        let mx = sx[p] * inv;
        let my = sy[p] * inv;
        let vx = sxx[p] * inv - mx * mx;
        let vy = syy[p] * inv - my * my;
        let cxy = sxy[p] * inv - mx * my;
        total += ((2.0 * mx * my + SSIM_C1) * (2.0 * cxy + SSIM_C2))
            / ((mx * mx + my * my + SSIM_C1) * (vx + vy + SSIM_C2));
    }
    Ok(total / sx.len() as f64)
}

/// Mean over bands of [`band_ssim`].
pub fn mssim(u: &Cube, u_bar: &Cube) -> Result<f64> {
    u.check_same_dims(u_bar, "mssim")?;
    let [n1, n2, n3] = u.dims();
    let mut acc = 0.0;
    for k in 0..n3 {
        acc += band_ssim(u.band(k), u_bar.band(k), n1, n2)?;
    }
    Ok(acc / n3 as f64)
}
