//! Sample divergences used as matching penalties, with gradients with
//! respect to the atoms of the first (moving) measure.

use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dist, sq_dist};
use crate::measures::DiscreteMeasure;

pub const SLICED_PROJECTIONS: usize = 64;
pub const SINKHORN_DIVERGENCE_EPS: f64 = 0.05;
pub const SINKHORN_DIVERGENCE_ITERS: usize = 400;
/// Central difference step for gradients without a closed form.
pub const FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DivergenceKind {
    /// `2 E|X-Y| - E|X-X'| - E|Y-Y'|`.
    #[default]
    EnergyDistance,
    /// `(mean_θ W2²(θ·X, θ·Y))^{1/2}` over seeded unit directions.
    SlicedWasserstein,
    /// `OT_ε(μ,ν) - (OT_ε(μ,μ) + OT_ε(ν,ν))/2` on squared Euclidean cost.
    SinkhornDivergence,
}

fn check(moving: &DiscreteMeasure, target: &DiscreteMeasure) -> Result<()> {
    if moving.dim() != target.dim() {
        return Err(Error::DimensionMismatch { expected: target.dim(), actual: moving.dim() });
    }
    Ok(())
}

pub fn divergence(kind: DivergenceKind, moving: &DiscreteMeasure, target: &DiscreteMeasure, seed: u64) -> Result<f64> {
    check(moving, target)?;
    Ok(match kind {
        DivergenceKind::EnergyDistance => energy(moving, target, false).0,
        DivergenceKind::SlicedWasserstein => sliced(moving, target, seed, false).0,
        DivergenceKind::SinkhornDivergence => sinkhorn_divergence(moving.points_flat(), moving, target),
    })
}

/// Value and gradient with respect to `moving`'s atoms, row-major.
pub fn divergence_with_grad(
    kind: DivergenceKind,
    moving: &DiscreteMeasure,
    target: &DiscreteMeasure,
    seed: u64,
) -> Result<(f64, Vec<f64>)> {
    check(moving, target)?;
    Ok(match kind {
        DivergenceKind::EnergyDistance => energy(moving, target, true),
        DivergenceKind::SlicedWasserstein => sliced(moving, target, seed, true),
        DivergenceKind::SinkhornDivergence => {
            let mut pts = moving.points_flat().to_vec();
            let value = sinkhorn_divergence(&pts, moving, target);
            let mut grad = vec![0.0; pts.len()];
            for k in 0..pts.len() {
                let x = pts[k];
                pts[k] = x + FD_STEP;
                let up = sinkhorn_divergence(&pts, moving, target);
                pts[k] = x - FD_STEP;
                let down = sinkhorn_divergence(&pts, moving, target);
                pts[k] = x;
                grad[k] = (up - down) / (2.0 * FD_STEP);
            }
            (value, grad)
        }
    })
}

fn unit(a: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    let n = dist(a, b);
    (n > 0.0).then(|| a.iter().zip(b).map(|(x, y)| (x - y) / n).collect())
}

fn energy(x: &DiscreteMeasure, y: &DiscreteMeasure, want_grad: bool) -> (f64, Vec<f64>) {
    let d = x.dim();
    let mut grad = vec![0.0; if want_grad { x.len() * d } else { 0 }];
    let mut cross = 0.0;
    for (i, (xi, ai)) in x.iter().enumerate() {
        for (yj, bj) in y.iter() {
            cross += ai * bj * dist(xi, yj);
            if want_grad {
                if let Some(u) = unit(xi, yj) {
                    for k in 0..d {
                        grad[i * d + k] += 2.0 * ai * bj * u[k];
                    }
                }
            }
        }
    }
    let mut self_x = 0.0;
    for (i, (xi, ai)) in x.iter().enumerate() {
        for (xk, ak) in x.iter() {
            self_x += ai * ak * dist(xi, xk);
            if want_grad {
                if let Some(u) = unit(xi, xk) {
                    for k in 0..d {
                        grad[i * d + k] -= 2.0 * ai * ak * u[k];
                    }
                }
            }
        }
    }
    let mut self_y = 0.0;
    for (yi, bi) in y.iter() {
        for (yk, bk) in y.iter() {
            self_y += bi * bk * dist(yi, yk);
        }
    }
    ((2.0 * cross - self_x - self_y).max(0.0), grad)
}

/// Seeded unit directions; in one dimension every direction is `±1`.
pub fn projection_directions(dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..SLICED_PROJECTIONS)
        .map(|_| loop {
            let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n > 1e-12 {
                break v.iter().map(|x| x / n).collect();
            }
        })
        .collect()
}

/// Optimal 1-D coupling between weighted samples as `(i, j, mass)` cells.
pub fn sorted_coupling(p: &[f64], a: &[f64], q: &[f64], b: &[f64]) -> Vec<(usize, usize, f64)> {
    let order = |v: &[f64]| {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]).then(i.cmp(&j)));
        idx
    };
    let (op, oq) = (order(p), order(q));
    let (mut i, mut j) = (0, 0);
    let (mut ra, mut rb) = (a[op[0]], b[oq[0]]);
    let mut cells = Vec::with_capacity(p.len() + q.len());
    loop {
        let m = ra.min(rb);
        if m > 0.0 {
            cells.push((op[i], oq[j], m));
        }
        ra -= m;
        rb -= m;
        let next_i = ra <= rb;
        if next_i {
            i += 1;
            if i == op.len() {
                break;
            }
            ra = a[op[i]];
        } else {
            j += 1;
            if j == oq.len() {
                break;
            }
            rb = b[oq[j]];
        }
    }
    cells
}

fn sliced(x: &DiscreteMeasure, y: &DiscreteMeasure, seed: u64, want_grad: bool) -> (f64, Vec<f64>) {
    let d = x.dim();
    // On the line every direction gives the same value and gradient.
    let dirs = if d == 1 { vec![vec![1.0]] } else { projection_directions(d, seed) };
    let mut total = 0.0;
    let mut grad = vec![0.0; if want_grad { x.len() * d } else { 0 }];
    for th in &dirs {
        let p: Vec<f64> = x.iter().map(|(v, _)| v.iter().zip(th).map(|(a, b)| a * b).sum()).collect();
        let q: Vec<f64> = y.iter().map(|(v, _)| v.iter().zip(th).map(|(a, b)| a * b).sum()).collect();
        for (i, j, m) in sorted_coupling(&p, x.weights(), &q, y.weights()) {
            let r = p[i] - q[j];
            total += m * r * r;
            if want_grad {
                for k in 0..d {
                    grad[i * d + k] += 2.0 * m * r * th[k];
                }
            }
        }
    }
    let n = dirs.len() as f64;
    let sw = (total / n).max(0.0).sqrt();
    if want_grad {
        let scale = if sw > 0.0 { 1.0 / (2.0 * sw * n) } else { 0.0 };
        grad.iter_mut().for_each(|g| *g *= scale);
    }
    (sw, grad)
}

fn logsumexp(v: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = v.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Dual value of entropic OT after a fixed number of log-domain updates.
fn entropic_value(xp: &[f64], a: &[f64], yp: &[f64], b: &[f64], d: usize) -> f64 {
    let eps = SINKHORN_DIVERGENCE_EPS;
    let (n, m) = (a.len(), b.len());
    let cost: Vec<f64> = (0..n * m).map(|k| sq_dist(&xp[(k / m) * d..(k / m + 1) * d], &yp[(k % m) * d..(k % m + 1) * d])).collect();
    let (la, lb): (Vec<f64>, Vec<f64>) = (a.iter().map(|w| w.ln()).collect(), b.iter().map(|w| w.ln()).collect());
    let mut f = vec![0.0; n];
    let mut g = vec![0.0; m];
    for _ in 0..SINKHORN_DIVERGENCE_ITERS {
        for j in 0..m {
            g[j] = -eps * logsumexp((0..n).map(|i| la[i] + (f[i] - cost[i * m + j]) / eps));
        }
        for i in 0..n {
            f[i] = -eps * logsumexp((0..m).map(|j| lb[j] + (g[j] - cost[i * m + j]) / eps));
        }
    }
    a.iter().zip(&f).map(|(w, v)| w * v).sum::<f64>() + b.iter().zip(&g).map(|(w, v)| w * v).sum::<f64>()
}

fn sinkhorn_divergence(xp: &[f64], x: &DiscreteMeasure, y: &DiscreteMeasure) -> f64 {
    let d = x.dim();
    let (a, b, yp) = (x.weights(), y.weights(), y.points_flat());
    entropic_value(xp, a, yp, b, d) - 0.5 * entropic_value(xp, a, xp, a, d) - 0.5 * entropic_value(yp, b, yp, b, d)
}
