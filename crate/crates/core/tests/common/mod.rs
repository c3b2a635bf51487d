//! Oracles that share no code with the library solvers: permutation
//! enumeration, a dense-tableau simplex with Bland's rule, and quantile
//! formulas for 1-D transport.
#![allow(dead_code)]

use condgeo::measures::{ConditionalFamily, DiscreteMeasure};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn points(rng: &mut ChaCha8Rng, n: usize, d: usize, r: f64) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..d).map(|_| rng.random_range(-r..r)).collect()).collect()
}

pub fn simplex(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
    let s: f64 = w.iter().sum();
    w.iter().map(|v| v / s).collect()
}

pub fn uniform(rng: &mut ChaCha8Rng, n: usize, d: usize) -> DiscreteMeasure {
    DiscreteMeasure::uniform(points(rng, n, d, 1.0)).unwrap()
}

pub fn weighted(rng: &mut ChaCha8Rng, n: usize, d: usize) -> DiscreteMeasure {
    let pts = points(rng, n, d, 1.0);
    let w = simplex(rng, n);
    DiscreteMeasure::new(pts, w).unwrap()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// `min_σ (1/n) Σ ‖x_i − y_σ(i)‖^p` by enumerating every permutation
/// (Heap's algorithm).
pub fn permutation_cost(x: &[Vec<f64>], y: &[Vec<f64>], p: f64) -> f64 {
    let n = x.len();
    let c: Vec<Vec<f64>> = x.iter().map(|a| y.iter().map(|b| dist(a, b).powf(p)).collect()).collect();
    let mut perm: Vec<usize> = (0..n).collect();
    let eval = |perm: &[usize]| perm.iter().enumerate().map(|(i, &j)| c[i][j]).sum::<f64>();
    let mut best = eval(&perm);
    let mut stack = vec![0usize; n];
    let mut i = 1;
    while i < n {
        if stack[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(stack[i], i);
            }
            best = best.min(eval(&perm));
            stack[i] += 1;
            i = 1;
        } else {
            stack[i] = 0;
            i += 1;
        }
    }
    best / n as f64
}

/// `min cᵀx` subject to `A x = b`, `x >= 0` by a two-phase dense tableau
/// simplex with Bland's rule. `b` must be nonnegative.
pub fn dense_lp(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> f64 {
    let (m, n) = (a.len(), c.len());
    let width = n + m + 1;
    let mut t: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            let mut row = a[i].clone();
            row.resize(n, 0.0);
            row.extend((0..m).map(|k| if k == i { 1.0 } else { 0.0 }));
            row.push(b[i]);
            row
        })
        .collect();
    let mut basis: Vec<usize> = (n..n + m).collect();
    let pivot = |t: &mut Vec<Vec<f64>>, r: usize, col: usize| {
        let p = t[r][col];
        t[r].iter_mut().for_each(|v| *v /= p);
        let pr = t[r].clone();
        for (i, row) in t.iter_mut().enumerate() {
            if i != r && row[col] != 0.0 {
                let f = row[col];
                row.iter_mut().zip(&pr).for_each(|(v, q)| *v -= f * q);
            }
        }
    };
    let run = |t: &mut Vec<Vec<f64>>, basis: &mut Vec<usize>, cost: &[f64], allowed: usize| {
        loop {
            // Reduced costs.
            let mut enter = None;
            for j in 0..allowed {
                if basis.contains(&j) {
                    continue;
                }
                let rc = cost[j] - (0..m).map(|i| cost[basis[i]] * t[i][j]).sum::<f64>();
                if rc < -1e-12 {
                    enter = Some(j);
                    break;
                }
            }
            let Some(col) = enter else { return };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..m {
                if t[i][col] > 1e-12 {
                    let ratio = t[i][width - 1] / t[i][col];
                    match leave {
                        Some((r, best)) if ratio > best + 1e-15 || (ratio >= best - 1e-15 && basis[i] > basis[r]) => {}
                        _ => leave = Some((i, ratio)),
                    }
                }
            }
            let (r, _) = leave.expect("bounded LP");
            pivot(t, r, col);
            basis[r] = col;
        }
    };
    let phase1: Vec<f64> = (0..n + m).map(|j| if j >= n { 1.0 } else { 0.0 }).collect();
    run(&mut t, &mut basis, &phase1, n + m);
    // Drive zero-level artificials out where a real column can replace them.
    for r in 0..m {
        if basis[r] >= n {
            if let Some(col) = (0..n).find(|&j| t[r][j].abs() > 1e-9 && !basis.contains(&j)) {
                pivot(&mut t, r, col);
                basis[r] = col;
            }
        }
    }
    let mut phase2 = c.to_vec();
    phase2.resize(n + m, 0.0);
    run(&mut t, &mut basis, &phase2, n);
    (0..m).map(|i| phase2[basis[i]] * t[i][width - 1]).sum()
}

/// Optimal transport cost `Σ π_ij c_ij` through [`dense_lp`].
pub fn lp_transport(a: &[f64], b: &[f64], cost: impl Fn(usize, usize) -> f64) -> f64 {
    let (n, m) = (a.len(), b.len());
    let mut rows = vec![vec![0.0; n * m]; n + m];
    let mut c = vec![0.0; n * m];
    for i in 0..n {
        for j in 0..m {
            rows[i][i * m + j] = 1.0;
            rows[n + j][i * m + j] = 1.0;
            c[i * m + j] = cost(i, j);
        }
    }
    let mut rhs = a.to_vec();
    rhs.extend_from_slice(b);
    dense_lp(&rows, &rhs, &c)
}

/// `W_p` under the Euclidean ground metric through [`dense_lp`].
pub fn lp_wasserstein(mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64) -> f64 {
    lp_transport(mu.weights(), nu.weights(), |i, j| dist(mu.point(i), nu.point(j)).powf(p)).max(0.0).powf(1.0 / p)
}

/// `Σ_c P(c) W_p^p(P_c, Q_c)` label by label through [`dense_lp`].
pub fn lp_conditional(p: &ConditionalFamily, q: &ConditionalFamily, pw: f64) -> f64 {
    (0..p.len()).map(|k| p.label_weights()[k] * lp_wasserstein(p.measure(k), q.measure(k), pw).powf(pw)).sum()
}

/// `inf_π Σ_tuples π · ½ Σ_m Σ_m' α_m α_m' ‖x_m − x_m'‖²` over couplings of
/// all measures, through [`dense_lp`] on the full tuple grid.
pub fn lp_variance(ms: &[DiscreteMeasure], alphas: &[f64]) -> f64 {
    let sizes: Vec<usize> = ms.iter().map(DiscreteMeasure::len).collect();
    let total: usize = sizes.iter().product();
    let offsets: Vec<usize> = sizes.iter().scan(0, |acc, &n| {
        let o = *acc;
        *acc += n;
        Some(o)
    }).collect();
    let rows_n: usize = sizes.iter().sum();
    let mut rows = vec![vec![0.0; total]; rows_n];
    let mut cost = vec![0.0; total];
    for t in 0..total {
        let mut idx = Vec::with_capacity(ms.len());
        let mut r = t;
        for &n in &sizes {
            idx.push(r % n);
            r /= n;
        }
        for (m, &i) in idx.iter().enumerate() {
            rows[offsets[m] + i][t] = 1.0;
        }
        let mut c = 0.0;
        for a in 0..ms.len() {
            for b in 0..ms.len() {
                c += 0.5 * alphas[a] * alphas[b] * dist(ms[a].point(idx[a]), ms[b].point(idx[b])).powi(2);
            }
        }
        cost[t] = c;
    }
    let rhs: Vec<f64> = ms.iter().flat_map(|m| m.weights().to_vec()).collect();
    dense_lp(&rows, &rhs, &cost)
}

/// 1-D `W2` by merging the two quantile functions.
pub fn quantile_w2(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> f64 {
    let sorted = |m: &DiscreteMeasure| {
        let mut v: Vec<(f64, f64)> = m.iter().map(|(x, w)| (x[0], w)).collect();
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        v
    };
    let (a, b) = (sorted(mu), sorted(nu));
    let (mut i, mut j) = (0, 0);
    let (mut ra, mut rb) = (a[0].1, b[0].1);
    let mut total = 0.0;
    loop {
        let m = ra.min(rb);
        total += m * (a[i].0 - b[j].0).powi(2);
        ra -= m;
        rb -= m;
        if ra <= 1e-15 {
            i += 1;
            if i == a.len() {
                break;
            }
            ra += a[i].1;
        }
        if rb <= 1e-15 {
            j += 1;
            if j == b.len() {
                break;
            }
            rb += b[j].1;
        }
    }
    total.sqrt()
}

/// `W2` between two 1-D normals.
pub fn normal_w2(m0: f64, s0: f64, m1: f64, s1: f64) -> f64 {
    ((m0 - m1).powi(2) + (s0 - s1).powi(2)).sqrt()
}

/// Max of `|f(x) − g(x)|` over a grid of `n` points on `[lo, hi]`.
pub fn sup_deviation(lo: f64, hi: f64, n: usize, f: impl Fn(f64) -> f64, g: impl Fn(f64) -> f64) -> f64 {
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).map(|x| (f(x) - g(x)).abs()).fold(0.0, f64::max)
}
