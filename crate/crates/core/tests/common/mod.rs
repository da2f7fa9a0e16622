//! Independent reference implementations and fixtures for the integration
//! tests. Nothing here calls the library code it is used to check.

#![allow(dead_code)]

use destripe_core::linop::dual_dot;
use destripe_core::prox::project_fro_ball;
use destripe_core::solver::Assembly;
use destripe_core::{
    Cube, CubeTuple, Dims, LinOp, OperatorMatrix, ProblemSpec, Regularizer, RegularizerKind, StripeModel,
    StripeModelKind,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_cube(rng: &mut ChaCha8Rng, dims: Dims) -> Cube {
    Cube::from_fn(dims, |_, _, _| rng.random_range(-1.0..1.0))
}

pub fn random_tuple(rng: &mut ChaCha8Rng, dims: &[Dims]) -> CubeTuple {
    CubeTuple::new(dims.iter().map(|&d| random_cube(rng, d)).collect())
}

/// Largest `|⟨Ax, y⟩ - ⟨x, A*y⟩| / max(|⟨Ax, y⟩|, |⟨x, A*y⟩|)` over `trials`
/// random pairs.
pub fn linop_adjoint_error(op: &LinOp, trials: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let x = random_tuple(&mut r, &op.in_dims());
        let y = random_tuple(&mut r, &op.out_dims());
        let lhs = op.apply(&x).unwrap().dot(&y).unwrap();
        let rhs = x.dot(&op.adjoint_apply(&y).unwrap()).unwrap();
        worst = worst.max(relative_gap(lhs, rhs));
    }
    worst
}

pub fn matrix_adjoint_error(m: &OperatorMatrix, trials: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let z = random_tuple(&mut r, m.primal_dims());
        let y: Vec<CubeTuple> = (0..m.dual_count())
            .map(|row| random_tuple(&mut r, &m.row_dims(row)))
            .collect();
        let lhs = dual_dot(&m.apply(&z).unwrap(), &y).unwrap();
        let rhs = z.dot(&m.adjoint_apply(&y).unwrap()).unwrap();
        worst = worst.max(relative_gap(lhs, rhs));
    }
    worst
}

pub fn relative_gap(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Every operator block the library ships, on `dims`.
pub fn all_operators(dims: Dims) -> Vec<(String, LinOp)> {
    use destripe_core::Axis;
    let mut ops = Vec::new();
    for axis in Axis::ALL {
        ops.push((format!("diff_{axis}"), LinOp::diff(axis, dims)));
        ops.push((format!("padded_diff_{axis}"), LinOp::padded_diff(axis, dims)));
    }
    ops.push(("identity".into(), LinOp::identity(dims)));
    ops.push(("sum_of_two".into(), LinOp::sum_of_inputs(dims, 2)));
    ops.push(("sum_of_three".into(), LinOp::sum_of_inputs(dims, 3)));
    for kind in RegularizerKind::ALL {
        let reg = Regularizer::new(kind, dims, 1.0).unwrap();
        for (n, (op, _)) in reg.blocks().iter().enumerate() {
            ops.push((format!("{kind}_block{n}"), op.clone()));
        }
    }
    ops
}

/// `(label, spec)` for every regularizer × stripe model, plus the temporal
/// variant of `fc`.
pub fn all_problems(v: &Cube, eps: f64, lambda: f64) -> Vec<(String, ProblemSpec)> {
    let mut out = Vec::new();
    for reg_kind in RegularizerKind::ALL {
        for model in StripeModelKind::ALL {
            for temporal in [false, true] {
                if temporal && model != StripeModelKind::Fc {
                    continue;
                }
                let reg = Regularizer::new(reg_kind, v.dims(), 1.0).unwrap();
                let stripe = StripeModel::new(model, lambda, lambda, temporal).unwrap();
                let label = format!("{model}{}-{reg_kind}", if temporal { "+t" } else { "" });
                out.push((label, ProblemSpec::new(v.clone(), reg, stripe, eps)));
            }
        }
    }
    out
}

pub fn all_assemblies(v: &Cube) -> Vec<(String, Assembly)> {
    all_problems(v, 0.1, 0.1)
        .into_iter()
        .map(|(l, p)| (l, Assembly::build(&p).unwrap()))
        .collect()
}

/// PSNR per band from the definition, averaged.
pub fn naive_mpsnr(u: &Cube, truth: &Cube) -> f64 {
    let [n1, n2, n3] = u.dims();
    let mut acc = 0.0;
    for k in 0..n3 {
        let mut err = 0.0;
        for j in 0..n2 {
            for i in 0..n1 {
                let d = u.get(i, j, k) - truth.get(i, j, k);
                err += d * d;
            }
        }
        acc += if err == 0.0 {
            100.0
        } else {
            10.0 * ((n1 * n2) as f64 / err).log10()
        };
    }
    acc / n3 as f64
}

/// SSIM with an 8×8 uniform window over valid positions, two-pass window
/// statistics, averaged over positions and then bands.
pub fn naive_mssim(x: &Cube, y: &Cube) -> f64 {
    let [n1, n2, n3] = x.dims();
    let w = 8;
    let c1 = 0.01f64.powi(2);
    let c2 = 0.03f64.powi(2);
    let mut total = 0.0;
    for k in 0..n3 {
        let mut band = 0.0;
        let mut count = 0;
        for j0 in 0..=n2 - w {
            for i0 in 0..=n1 - w {
                let cells: Vec<(f64, f64)> = (j0..j0 + w)
                    .flat_map(|j| (i0..i0 + w).map(move |i| (i, j)))
                    .map(|(i, j)| (x.get(i, j, k), y.get(i, j, k)))
                    .collect();
                let n = cells.len() as f64;
                let mx = cells.iter().map(|c| c.0).sum::<f64>() / n;
                let my = cells.iter().map(|c| c.1).sum::<f64>() / n;
                let vx = cells.iter().map(|c| (c.0 - mx).powi(2)).sum::<f64>() / n;
                let vy = cells.iter().map(|c| (c.1 - my).powi(2)).sum::<f64>() / n;
                let cxy = cells.iter().map(|c| (c.0 - mx) * (c.1 - my)).sum::<f64>() / n;
                band += ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
                count += 1;
            }
        }
        total += band / count as f64;
    }
    total / n3 as f64
}

/// Isotropic spatial TV with forward differences and zero differences past
/// the last row and column, by direct loops.
pub fn naive_htv(u: &Cube) -> f64 {
    let [n1, n2, n3] = u.dims();
    let mut acc = 0.0;
    for k in 0..n3 {
        for j in 0..n2 {
            for i in 0..n1 {
                let (dv, dh) = htv_grad_at(u, i, j, k);
                acc += (dv * dv + dh * dh).sqrt();
            }
        }
    }
    acc
}

fn htv_grad_at(u: &Cube, i: usize, j: usize, k: usize) -> (f64, f64) {
    let [n1, n2, _] = u.dims();
    let dv = if i + 1 < n1 { u.get(i + 1, j, k) - u.get(i, j, k) } else { 0.0 };
    let dh = if j + 1 < n2 { u.get(i, j + 1, k) - u.get(i, j, k) } else { 0.0 };
    (dv, dh)
}

/// A subgradient of [`naive_htv`].
pub fn naive_htv_subgradient(u: &Cube) -> Cube {
    let [n1, n2, n3] = u.dims();
    let mut g = Cube::zeros(u.dims());
    for k in 0..n3 {
        for j in 0..n2 {
            for i in 0..n1 {
                let (dv, dh) = htv_grad_at(u, i, j, k);
                let n = (dv * dv + dh * dh).sqrt();
                if n == 0.0 {
                    continue;
                }
                if i + 1 < n1 {
                    g[(i + 1, j, k)] += dv / n;
                    g[(i, j, k)] -= dv / n;
                }
                if j + 1 < n2 {
                    g[(i, j + 1, k)] += dh / n;
                    g[(i, j, k)] -= dh / n;
                }
            }
        }
    }
    g
}

/// Minimum of `HTV(U) + λ‖S‖₁` over vertically flat `S` and
/// `‖V - (U + S)‖_F ≤ ε`, by projected subgradient on `W = U + S` (kept in
/// the ball) and per-column offsets `c` with `S(i, j, k) = c(j, k)`.
/// Diminishing normalised steps, restarted from the best point with a
/// smaller scale each round.
pub fn reduced_space_oracle(v: &Cube, lambda: f64, eps: f64, iters_per_round: usize, rounds: usize) -> f64 {
    let [n1, n2, n3] = v.dims();
    let n1f = n1 as f64;
    let assemble_u = |w: &Cube, c: &[f64]| Cube::from_fn(v.dims(), |i, j, k| w.get(i, j, k) - c[j + n2 * k]);
    let objective = |w: &Cube, c: &[f64]| {
        naive_htv(&assemble_u(w, c)) + lambda * n1f * c.iter().map(|x| x.abs()).sum::<f64>()
    };
    let mut best_w = v.clone();
    let mut best_c = vec![0.0; n2 * n3];
    let mut best = objective(&best_w, &best_c);
    let mut scale = 0.05;
    for _ in 0..rounds {
        let mut w = best_w.clone();
        let mut c = best_c.clone();
        for it in 1..=iters_per_round {
            let g = naive_htv_subgradient(&assemble_u(&w, &c));
            let mut gc = vec![0.0; n2 * n3];
            for k in 0..n3 {
                for j in 0..n2 {
                    let col: f64 = (0..n1).map(|i| g.get(i, j, k)).sum();
                    let cj = c[j + n2 * k];
                    let sign = if cj > 0.0 {
                        1.0
                    } else if cj < 0.0 {
                        -1.0
                    } else {
                        0.0
                    };
                    gc[j + n2 * k] = -col + lambda * n1f * sign;
                }
            }
            let norm = (g.sum_sq() + gc.iter().map(|x| x * x).sum::<f64>()).sqrt();
            if norm == 0.0 {
                break;
            }
            let step = scale / ((it as f64).sqrt() * norm);
            w.axpy(-step, &g).unwrap();
            for (ci, gi) in c.iter_mut().zip(&gc) {
                *ci -= step * gi;
            }
            w = project_fro_ball(&w, v, eps).unwrap();
            let f = objective(&w, &c);
            if f < best {
                best = f;
                best_w = w.clone();
                best_c = c.clone();
            }
        }
        scale *= 0.3;
    }
    best
}

/// `argmin_y λ|y| + (y - x)² / (2g)` over a grid of spacing `h` around `x`.
pub fn grid_l1(x: f64, g: f64, lambda: f64, h: f64) -> f64 {
    let span = lambda * g + 1.0;
    let steps = (2.0 * span / h).ceil() as i64;
    let mut best = (f64::INFINITY, x);
    for s in 0..=steps {
        let y = x - span + s as f64 * h;
        let f = lambda * y.abs() + (y - x).powi(2) / (2.0 * g);
        if f < best.0 {
            best = (f, y);
        }
    }
    best.1
}

/// `argmin_y ‖y‖₂ + Σ (y_c - x_c)² / (2 g_c)` for two components, over a
/// square grid of spacing `h`.
pub fn grid_l12_pair(x: [f64; 2], g: [f64; 2], h: f64) -> [f64; 2] {
    let span = 1.5 * g[0].max(g[1]) + 0.5;
    let steps = (2.0 * span / h).ceil() as i64;
    let mut best = (f64::INFINITY, [0.0; 2]);
    for a in 0..=steps {
        let y0 = x[0] - span + a as f64 * h;
        for b in 0..=steps {
            let y1 = x[1] - span + b as f64 * h;
            let f = (y0 * y0 + y1 * y1).sqrt()
                + (y0 - x[0]).powi(2) / (2.0 * g[0])
                + (y1 - x[1]).powi(2) / (2.0 * g[1]);
            if f < best.0 {
                best = (f, [y0, y1]);
            }
        }
    }
    best.1
}

/// `½ Σ (y - x)² / g` over all components.
pub fn skewed_distance(y: &CubeTuple, x: &CubeTuple, g: &CubeTuple) -> f64 {
    let mut acc = 0.0;
    for ((yc, xc), gc) in y.parts().iter().zip(x.parts()).zip(g.parts()) {
        for ((a, b), s) in yc.as_slice().iter().zip(xc.as_slice()).zip(gc.as_slice()) {
            acc += (a - b).powi(2) / s;
        }
    }
    0.5 * acc
}

/// Counts random `q` near `p` that give a strictly smaller skewed objective
/// than `p` (beyond `slack`). Perturbation scales span six decades.
pub fn perturbation_violations(
    f: impl Fn(&CubeTuple) -> f64,
    p: &CubeTuple,
    x: &CubeTuple,
    g: &CubeTuple,
    trials: usize,
    seed: u64,
    slack: f64,
) -> usize {
    let mut r = rng(seed);
    let base = f(p) + skewed_distance(p, x, g);
    let mut bad = 0;
    for t in 0..trials {
        let scale = 10f64.powi(-((t % 6) as i32));
        let dir = random_tuple(&mut r, &p.dims());
        let q = p.zip_map(&dir, |a, d| a + scale * d).unwrap();
        let val = f(&q) + skewed_distance(&q, x, g);
        if val < base - slack {
            bad += 1;
        }
    }
    bad
}

/// Singular values of one band via the eigenvalues of `AᵀA`, computed with
/// Jacobi rotations; used to check SVD-based code independently.
pub fn jacobi_singular_values(band: &[f64], n1: usize, n2: usize) -> Vec<f64> {
    let mut a = vec![0.0; n2 * n2];
    for p in 0..n2 {
        for q in 0..n2 {
            a[p + n2 * q] = (0..n1).map(|i| band[i + n1 * p] * band[i + n1 * q]).sum();
        }
    }
    for _ in 0..100 {
        let off: f64 = (0..n2)
            .flat_map(|p| (0..n2).filter(move |&q| q != p).map(move |q| (p, q)))
            .map(|(p, q)| a[p + n2 * q].powi(2))
            .sum();
        if off < 1e-26 {
            break;
        }
        for p in 0..n2 {
            for q in p + 1..n2 {
                let apq = a[p + n2 * q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q + n2 * q] - a[p + n2 * p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n2 {
                    let akp = a[k + n2 * p];
                    let akq = a[k + n2 * q];
                    a[k + n2 * p] = c * akp - s * akq;
                    a[k + n2 * q] = s * akp + c * akq;
                }
                for k in 0..n2 {
                    let apk = a[p + n2 * k];
                    let aqk = a[q + n2 * k];
                    a[p + n2 * k] = c * apk - s * aqk;
                    a[q + n2 * k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut sv: Vec<f64> = (0..n2).map(|p| a[p + n2 * p].max(0.0).sqrt()).collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    sv
}
