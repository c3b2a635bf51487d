//! The named invariant suite behind `condgeo verify`. Instances are small
//! and seeded; every check names its invariant and pins its tolerance.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::conditional::{
    encoder_lp_cost, example1_threshold, expected_conditional_wasserstein, gaussian_subcoupling_member, subcoupling_cost, GaussianJointSpec,
    GenTable,
};
use crate::error::{Error, Result};
use crate::generator::{
    algorithm1_generate, check_conditions, d_enc, fit_transport_map, gaussian_family, generated_curve, oracle_transport_map,
    oracle_transport_map_gaussian, theorem4_bound, theorem5_check, theorem6_gap, AffineBijectionPair, DivergenceKind, FitConfig,
    GenerationMode, Pipeline, PointMap, SyntheticA5, TransportEntry, TransportMap,
};
use crate::geodesic::{
    barycenter_multimarginal, gaussian_barycenter, lemma2_decomposition, mccann_interpolant, select_label_weights, verify_constant_speed,
    wasserstein_variance, BarycenterWeights, GeodesicCurve, GAUSSIAN_BARYCENTER_MAX_ITER, GAUSSIAN_BARYCENTER_TOL,
};
use crate::linalg::sq_dist;
use crate::measures::{conditional_family_from_labeled, empirical_from_samples, ConditionalFamily, DiscreteMeasure, GaussianMeasure, LabeledDataset};
use crate::ot::lp::Lp;
use crate::ot::{exact_coupling, gaussian_geodesic, gaussian_w2, sinkhorn_coupling, wasserstein_p, MetricSpec, DEFAULT_MAX_TUPLES, MARGINAL_TOL};

use super::config::normal_quantiles;
use super::report::Check;
use super::RunError;

type CheckFn = fn(&mut ChaCha8Rng) -> Result<Check>;

/// `(name, check)` in execution order.
pub const SUITE: &[(&str, CheckFn)] = &[
    ("measures.flatten_roundtrip", flatten_roundtrip),
    ("measures.permutation_equivariance", permutation_equivariance),
    ("ot.exact_vs_permutations", exact_vs_permutations),
    ("ot.marginals", marginals),
    ("ot.optimality_witness", optimality_witness),
    ("ot.metric_symmetry", metric_symmetry),
    ("ot.metric_triangle", metric_triangle),
    ("ot.gaussian_quantile_convergence", gaussian_quantile_convergence),
    ("ot.sinkhorn_monotone", sinkhorn_monotone),
    ("conditional.subcoupling_equality", subcoupling_equality),
    ("conditional.marginal_ordering", marginal_ordering),
    ("conditional.marginal_equality", marginal_equality),
    ("conditional.encoder_lp", encoder_lp),
    ("conditional.gaussian_grid", gaussian_grid),
    ("geodesic.mccann_constant_speed", mccann_constant_speed),
    ("geodesic.mixture_not_geodesic", mixture_not_geodesic),
    ("geodesic.mccann_endpoints", mccann_endpoints),
    ("geodesic.barycenter_attainment", barycenter_attainment),
    ("geodesic.variance_identity", variance_identity),
    ("geodesic.gaussian_barycenter_convergence", gaussian_barycenter_convergence),
    ("geodesic.label_decomposition", label_decomposition),
    ("gaussian.closed_forms_1d", closed_forms_1d),
    ("generator.inverse_structural", inverse_structural),
    ("generator.encoder_isometry", encoder_isometry),
    ("generator.edge_constant_speed", edge_constant_speed),
    ("generator.barycenter_chain", barycenter_chain),
    ("generator.barycenter_chain_gaussian", barycenter_chain_gaussian),
    ("generator.chain_collapse", chain_collapse),
    ("generator.matches_barycenter", matches_barycenter),
    ("generator.vertex_consistency", vertex_consistency),
    ("generator.unobserved_recovery", unobserved_recovery),
    ("generator.unobserved_violation", unobserved_violation),
    ("generator.oracle_self_gap", oracle_self_gap),
    ("generator.perturbed_gap", perturbed_gap),
    ("generator.fitted_gap", fitted_gap),
    ("pipeline.json_roundtrip", json_roundtrip),
    ("runner.determinism", determinism),
];

pub fn check_names() -> Vec<&'static str> {
    SUITE.iter().map(|(n, _)| *n).collect()
}

/// Runs every check whose name contains `filter`. Each check draws from its
/// own stream so filtering does not change results.
pub fn run_suite(filter: Option<&str>, seed: u64) -> std::result::Result<Vec<Check>, RunError> {
    let selected: Vec<_> = SUITE.iter().enumerate().filter(|(_, (n, _))| filter.is_none_or(|f| n.contains(f))).collect();
    if selected.is_empty() {
        return Err(RunError::Config(format!("no check matches filter {:?}", filter.unwrap_or(""))));
    }
    Ok(selected
        .into_iter()
        .map(|(i, (name, f))| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            match f(&mut rng) {
                Ok(mut c) => {
                    c.name = (*name).into();
                    c
                }
                Err(e) => Check::errored(name, "evaluation", e),
            }
        })
        .collect())
}

fn points(rng: &mut ChaCha8Rng, n: usize, d: usize, r: f64) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..d).map(|_| rng.random_range(-r..r)).collect()).collect()
}

fn uniform(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Result<DiscreteMeasure> {
    DiscreteMeasure::uniform(points(rng, n, d, 1.0))
}

fn simplex(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
    let s: f64 = w.iter().sum();
    w.iter().map(|v| v / s).collect()
}

fn weighted(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Result<DiscreteMeasure> {
    let pts = points(rng, n, d, 1.0);
    let w = simplex(rng, n);
    DiscreteMeasure::new(pts, w)
}

fn random_pair(rng: &mut ChaCha8Rng, labels: Vec<Vec<f64>>, d: usize) -> Result<AffineBijectionPair> {
    let k = labels.len();
    let mats = (0..k)
        .map(|_| {
            let mut a = DMatrix::<f64>::identity(d, d);
            a.iter_mut().for_each(|v| *v += rng.random_range(-0.3..0.3));
            a
        })
        .collect();
    let offs = (0..k).map(|_| DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0))).collect();
    AffineBijectionPair::from_parts(labels, mats, offs)
}

fn line_labels(k: usize, spacing: f64) -> Vec<Vec<f64>> {
    (0..k).map(|i| vec![i as f64 * spacing]).collect()
}

fn family(labels: Vec<Vec<f64>>, ms: Vec<DiscreteMeasure>) -> Result<ConditionalFamily> {
    let k = labels.len();
    ConditionalFamily::new(labels, ms, vec![1.0 / k as f64; k])
}

fn e2() -> MetricSpec {
    MetricSpec::euclidean(2.0).expect("p = 2 is valid")
}

/// Minimum of `(1/n) Σ ‖x_i - y_σ(i)‖^p` over all permutations.
fn permutation_cost(mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64) -> f64 {
    fn rec(k: usize, used: &mut [bool], acc: f64, mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64, best: &mut f64) {
        if k == mu.len() {
            *best = best.min(acc);
            return;
        }
        for j in 0..nu.len() {
            if !used[j] {
                used[j] = true;
                let c = sq_dist(mu.point(k), nu.point(j)).sqrt().powf(p);
                rec(k + 1, used, acc + c, mu, nu, p, best);
                used[j] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    rec(0, &mut vec![false; nu.len()], 0.0, mu, nu, p, &mut best);
    best / mu.len() as f64
}

/// Atoms merged by exact position, for comparing measures as measures.
fn merged(m: &DiscreteMeasure) -> BTreeMap<Vec<u64>, f64> {
    let mut out = BTreeMap::new();
    for (x, w) in m.iter() {
        *out.entry(x.iter().map(|v| v.to_bits()).collect()).or_insert(0.0) += w;
    }
    out
}

fn merged_distance(a: &DiscreteMeasure, b: &DiscreteMeasure) -> f64 {
    let (ma, mb) = (merged(a), merged(b));
    if ma.len() != mb.len() || ma.keys().zip(mb.keys()).any(|(x, y)| x != y) {
        return f64::INFINITY;
    }
    ma.values().zip(mb.values()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// `W2` between a 1-D discrete measure and `N(mean, std²)` through the
/// quantile coupling, integrating the Gaussian piecewise against each atom.
pub fn w2_to_normal_1d(m: &DiscreteMeasure, mean: f64, std: f64) -> Result<f64> {
    if m.dim() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, actual: m.dim() });
    }
    let z = Normal::new(0.0, 1.0).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut atoms: Vec<(f64, f64)> = m.iter().map(|(x, w)| (x[0], w)).collect();
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (mut u, mut total) = (0.0, 0.0);
    for (k, (b, w)) in atoms.iter().enumerate() {
        let hi = if k + 1 == atoms.len() { 1.0 } else { (u + w).min(1.0) };
        let (za, zb) = (z.inverse_cdf(u), z.inverse_cdf(hi));
        // Partial moments of the standard normal on [za, zb].
        let m0 = hi - u;
        let m1 = z.pdf(za) - z.pdf(zb);
        let edge = |t: f64| if t.is_finite() { t * z.pdf(t) } else { 0.0 };
        let m2 = m0 + edge(za) - edge(zb);
        // ∫ (b - mean - std z)² over the slice.
        let c = b - mean;
        total += c * c * m0 - 2.0 * c * std * m1 + std * std * m2;
        u = hi;
    }
    Ok(total.max(0.0).sqrt())
}

fn flatten_roundtrip(rng: &mut ChaCha8Rng) -> Result<Check> {
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let n = rng.random_range(2..10);
        let xs = points(rng, n, 2, 1.0);
        let cs: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random_range(0..3) as f64]).collect();
        let data = LabeledDataset::new(xs, cs, Some(simplex(rng, n)))?;
        let fam = conditional_family_from_labeled(&data)?;
        worst = worst.max(merged_distance(&fam.flatten(), &data.joint()));
    }
    Ok(Check::at_most("", "flattening the conditional family reproduces the joint measure", worst, 1e-15))
}

fn permutation_equivariance(rng: &mut ChaCha8Rng) -> Result<Check> {
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let n = rng.random_range(1..9);
        let pts = points(rng, n, 3, 1.0);
        let w = simplex(rng, n);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(rng);
        let a = empirical_from_samples(pts.clone(), Some(w.clone()))?;
        let b = empirical_from_samples(perm.iter().map(|&i| pts[i].clone()).collect(), Some(perm.iter().map(|&i| w[i]).collect()))?;
        for k in 0..n {
            let dw = (b.weight(k) - a.weight(perm[k])).abs();
            worst = worst.max(if b.point(k) == a.point(perm[k]) { dw } else { f64::INFINITY });
        }
    }
    Ok(Check::at_most("", "permuting samples permutes atoms and weights", worst, 1e-15))
}

fn exact_vs_permutations(rng: &mut ChaCha8Rng) -> Result<Check> {
    let mut worst: f64 = 0.0;
    for k in 0..12 {
        let n = 2 + k % 5;
        let d = 1 + k % 2;
        let p = if k % 3 == 0 { 1.0 } else { 2.0 };
        let (mu, nu) = (uniform(rng, n, d)?, uniform(rng, n, d)?);
        let (_, cost) = exact_coupling(&mu, &nu, &MetricSpec::euclidean(p)?)?;
        worst = worst.max((cost - permutation_cost(&mu, &nu, p)).abs());
    }
    Ok(Check::at_most("", "exact OT cost equals the best permutation on uniform instances", worst, 1e-9))
}

fn marginals(rng: &mut ChaCha8Rng) -> Result<Check> {
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let (n, m) = (rng.random_range(1..9), rng.random_range(1..9));
        let (mu, nu) = (weighted(rng, n, 2)?, weighted(rng, m, 2)?);
        worst = worst.max(exact_coupling(&mu, &nu, &e2())?.0.max_marginal_error());
        worst = worst.max(sinkhorn_coupling(&mu, &nu, &e2(), 0.1, 2000, 1e-9)?.coupling.max_marginal_error());
    }
    let ms = [weighted(rng, 3, 2)?, weighted(rng, 4, 2)?, weighted(rng, 3, 2)?];
    let (mc, _) = crate::ot::multimarginal_coupling(&ms, &simplex(rng, 3), DEFAULT_MAX_TUPLES)?;
    worst = worst.max(mc.max_marginal_error());
    Ok(Check::at_most("", "every returned coupling has the prescribed marginals", worst, MARGINAL_TOL))
}

fn optimality_witness(rng: &mut ChaCha8Rng) -> Result<Check> {
    let mut worst = f64::NEG_INFINITY;
    let n = 5;
    for _ in 0..5 {
        let (mu, nu) = (uniform(rng, n, 2)?, uniform(rng, n, 2)?);
        let (_, exact) = exact_coupling(&mu, &nu, &e2())?;
        let cost = e2().cost_matrix(&mu, &nu)?;
        for k in 0..100 {
            let other = if k < 20 {
                sinkhorn_coupling(&mu, &nu, &e2(), rng.random_range(0.05..2.0), 5000, 1e-10)?.cost
            } else {
                // Mixture of three random permutation matrices.
                let lam = simplex(rng, 3);
                let mut plan = vec![0.0; n * n];
                for l in lam {
                    let mut perm: Vec<usize> = (0..n).collect();
                    perm.shuffle(rng);
                    for (i, &j) in perm.iter().enumerate() {
                        plan[i * n + j] += l / n as f64;
                    }
                }
                plan.iter().zip(&cost).map(|(a, b)| a * b).sum()
            };
            worst = worst.max(exact - other);
        }
    }
    Ok(Check::at_most("", "exact cost is at most the cost of 100 feasible couplings", worst, 1e-9))
}

fn metric_triples(rng: &mut ChaCha8Rng) -> Result<Vec<[DiscreteMeasure; 3]>> {
    (0..10)
        .map(|_| {
            let mut g = || {
                let n = rng.random_range(1..6);
                weighted(rng, n, 2)
            };
            Ok([g()?, g()?, g()?])
        })
        .collect()
}

fn metric_symmetry(rng: &mut ChaCha8Rng) -> Result<Check> {
    let mut worst: f64 = 0.0;
    for [a, b, _] in metric_triples(rng)? {
        worst = worst.max((wasserstein_p(&a, &b, &e2())? - wasserstein_p(&b, &a, &e2())?).abs());
    }
    Ok(Check::at_most("", "W_p is symmetric", worst, 1e-9))
}

fn metric_triangle(rng: &mut ChaCha8Rng) -> Result<Check> {
    let mut worst = f64::NEG_INFINITY;
    for [a, b, c] in metric_triples(rng)? {
        let w = |x: &DiscreteMeasure, y: &DiscreteMeasure| wasserstein_p(x, y, &e2());
        worst = worst.max(w(&a, &c)? - w(&a, &b)? - w(&b, &c)?);
    }
    Ok(Check::at_most("", "W_p satisfies the triangle inequality", worst, 1e-8))
}

fn gaussian_quantile_convergence(_: &mut ChaCha8Rng) -> Result<Check> {
    let (g0, g1) = (GaussianMeasure::from_slices(&[0.0], &[1.0])?, GaussianMeasure::from_slices(&[1.0], &[4.0])?);
    let exact = gaussian_w2(&g0, &g1)?;
    let mut errs = Vec::new();
    for n in [16, 64, 256] {
        let w = wasserstein_p(&normal_quantiles(0.0, 1.0, n)?, &normal_quantiles(1.0, 2.0, n)?, &e2())?;
        errs.push((n, (w - exact).abs()));
    }
    let scaled = errs.iter().map(|(n, e)| *n as f64 * e).fold(0.0, f64::max);
    let monotone = errs.windows(2).all(|w| w[1].1 < w[0].1);
    let mut c = Check::at_most("", "quantile discretizations approach the Gaussian W2 with n·error <= 1", scaled, 1.0);
    c.pass &= monotone;
    Ok(c.with_detail(format!("monotone: {monotone}")))
}

fn sinkhorn_monotone(rng: &mut ChaCha8Rng) -> Result<Check> {
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..5 {
        let (mu, nu) = (weighted(rng, 6, 2)?, weighted(rng, 6, 2)?);
        let (_, exact) = exact_coupling(&mu, &nu, &e2())?;
        let errs = [1.0, 0.1, 0.01]
            .iter()
            .map(|&eps| Ok((sinkhorn_coupling(&mu, &nu, &e2(), eps, 20_000, 1e-12)?.cost - exact).abs()))
            .collect::<Result<Vec<_>>>()?;
        for w in errs.windows(2) {
            worst = worst.max(w[1] - w[0]);
        }
    }
    Ok(Check::at_most("", "Sinkhorn error shrinks over epsilon in {1, 0.1, 0.01}", worst, 1e-12))
}

fn conditional_pair(rng: &mut ChaCha8Rng, same: bool) -> Result<(ConditionalFamily, ConditionalFamily)> {
    let k = rng.random_range(1..4);
    let labels = line_labels(k, 1.0);
    let w = simplex(rng, k);
    let nb = rng.random_range(1..7);
    let base = weighted(rng, nb, 2)?;
    let mut ps = Vec::new();
    let mut qs = Vec::new();
    for _ in 0..k {
        let n = rng.random_range(1..7);
        let m = rng.random_range(1..7);
        ps.push(if same { base.clone() } else { weighted(rng, n, 2)? });
        qs.push(weighted(rng, m, 2)?);
    }
    if same {
        let q0 = qs[0].clone();
        qs.iter_mut().for_each(|q| *q = q0.clone());
    }
    Ok((ConditionalFamily::new(labels.clone(), ps, w.clone())?, ConditionalFamily::new(labels, qs, w)?))
}

fn mixed(f: &ConditionalFamily) -> Result<DiscreteMeasure> {
    let parts: Vec<_> = f.measures().iter().zip(f.label_weights()).map(|(m, w)| (m, *w)).collect();
    DiscreteMeasure::mixture(&parts)
}

fn subcoupling_equality(rng: &mut ChaCha8Rng) -> Result<Check> {
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let (p, q) = conditional_pair(rng, false)?;
        let (sc, _) = subcoupling_cost(&p, &q, &e2())?;
        worst = worst.max((sc - expected_conditional_wasserstein(&p, &q, &e2())?).abs());
    }
    Ok(Check::at_most("", "sub-coupling cost equals the expected conditional Wasserstein distance", worst, 1e-9))
}

fn marginal_ordering(rng: &mut ChaCha8Rng) -> Result<Check> {
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..10 {
        let (p, q) = conditional_pair(rng, false)?;
        let (sc, _) = subcoupling_cost(&p, &q, &e2())?;
        worst = worst.max(wasserstein_p(&mixed(&p)?, &mixed(&q)?, &e2())? - sc);
    }
    Ok(Check::at_most("", "W_p of the mixed marginals is at most the sub-coupling cost", worst, 1e-9))
}

fn marginal_equality(rng: &mut ChaCha8Rng) -> Result<Check> {
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let (p, q) = conditional_pair(rng, true)?;
        let (sc, _) = subcoupling_cost(&p, &q, &e2())?;
        worst = worst.max((wasserstein_p(&mixed(&p)?, &mixed(&q)?, &e2())? - sc).abs());
    }
    Ok(Check::at_most("", "label-independent conditionals make both costs equal", worst, 1e-9))
}

fn encoder_lp(rng: &mut ChaCha8Rng) -> Result<Check> {
    let mut worst: f64 = 0.0;
    for _ in 0..6 {
        let k = rng.random_range(1..4);
        let labels = line_labels(k, 1.0);
        let w = simplex(rng, k);
        let mut xs = Vec::new();
        let mut zs = Vec::new();
        for _ in 0..k {
            let (n, m) = (rng.random_range(1..6), rng.random_range(1..5));
            xs.push(weighted(rng, n, 2)?);
            zs.push(weighted(rng, m, 2)?);
        }
        let fx = ConditionalFamily::new(labels.clone(), xs, w.clone())?;
        let fz = ConditionalFamily::new(labels.clone(), zs, w)?;
        let pair = random_pair(rng, labels, 2)?;
        let table = GenTable::from_fn(&fz, |z, c| pair.generate(z, c))?;
        let (lp, _) = encoder_lp_cost(&fx, &fz, &table, &e2())?;
        let (sc, _) = subcoupling_cost(&fx, &table.pushforward(&fz)?, &e2())?;
        worst = worst.max((lp - sc).abs());
    }
    Ok(Check::at_most("", "encoder LP cost equals the sub-coupling cost to the generated family", worst, 1e-7))
}

fn gaussian_grid(_: &mut ChaCha8Rng) -> Result<Check> {
    let grid: Vec<f64> = (0..21).map(|i| -1.0 + 0.1 * i as f64).collect();
    let (mut disagree, mut boundary) = (0.0, 0);
    for &rxy in &grid {
        for &rxc in &grid {
            for &ryc in &grid {
                let member = gaussian_subcoupling_member(&GaussianJointSpec::correlations(rxy, rxc, ryc))?;
                let thr = example1_threshold(rxc, ryc)?;
                let margin = (rxy - rxc * ryc).abs() - thr;
                if margin.abs() <= 1e-9 {
                    boundary += 1;
                } else if member != (margin <= 0.0) {
                    disagree += 1.0;
                }
            }
        }
    }
    Ok(Check::at_most("", "PSD membership agrees with the correlation threshold on the 21^3 grid", disagree, 0.0)
        .with_detail(format!("{boundary} points within 1e-9 of the boundary")))
}

fn mccann_constant_speed(rng: &mut ChaCha8Rng) -> Result<Check> {
    let mut worst: f64 = 0.0;
    for k in 0..6 {
        let (n, d) = ([4, 8][k % 2], 1 + k % 3);
        let curve = GeodesicCurve::mccann(&uniform(rng, n, d)?, &uniform(rng, n, d)?, &e2())?;
        worst = worst.max(verify_constant_speed(&curve, &[0.0, 0.25, 0.5, 0.75, 1.0], 1e-6)?.max_abs_deviation);
    }
    Ok(Check::at_most("", "McCann interpolants have constant speed", worst, 1e-6))
}

fn mixture_not_geodesic(_: &mut ChaCha8Rng) -> Result<Check> {
    let (d0, d1) = (DiscreteMeasure::dirac(vec![0.0])?, DiscreteMeasure::dirac(vec![1.0])?);
    let dev = verify_constant_speed(&GeodesicCurve::mixture(&d0, &d1, &e2()), &[0.0, 0.25, 0.5, 0.75, 1.0], 1e-6)?.max_abs_deviation;
    Ok(Check::at_least("", "the linear mixture between two Diracs is not a geodesic", dev, 0.2))
}

fn mccann_endpoints(rng: &mut ChaCha8Rng) -> Result<Check> {
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let (n, m) = (rng.random_range(1..7), rng.random_range(1..7));
        let (mu, nu) = (weighted(rng, n, 2)?, weighted(rng, m, 2)?);
        worst = worst.max(merged_distance(&mccann_interpolant(&mu, &nu, 0.0, &e2())?, &mu));
        worst = worst.max(merged_distance(&mccann_interpolant(&mu, &nu, 1.0, &e2())?, &nu));
    }
    Ok(Check::at_most("", "McCann interpolant at t = 0 and t = 1 reproduces the endpoints", worst, 1e-12))
}

fn barycenter_attainment(rng: &mut ChaCha8Rng) -> Result<Check> {
    let mut worst: f64 = 0.0;
    for k in 0..5 {
        let m = 2 + k % 2;
        let ms = (0..m).map(|_| {
                let n = rng.random_range(1..5);
                weighted(rng, n, 2)
            }).collect::<Result<Vec<_>>>()?;
        let alphas = simplex(rng, m);
        let bary = barycenter_multimarginal(&ms, &alphas, DEFAULT_MAX_TUPLES)?;
        let var = wasserstein_variance(&ms, &alphas, DEFAULT_MAX_TUPLES)?;
        let mut att = 0.0;
        for (mu, a) in ms.iter().zip(&alphas) {
            att += a * wasserstein_p(&bary, mu, &e2())?.powi(2);
        }
        worst = worst.max((att - var).abs());
    }
    Ok(Check::at_most("", "the multimarginal barycenter attains the Wasserstein variance", worst, 1e-8))
}

fn variance_identity(rng: &mut ChaCha8Rng) -> Result<Check> {
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let (m, d) = (rng.random_range(1..7), rng.random_range(1..4));
        let a = points(rng, m, d, 1.0);
        let al = simplex(rng, m);
        let mean: Vec<f64> = (0..d).map(|j| a.iter().zip(&al).map(|(x, w)| w * x[j]).sum()).collect();
        let mut pairwise = 0.0;
        let mut central = 0.0;
        for i in 0..m {
            central += al[i] * sq_dist(&a[i], &mean);
            for j in 0..m {
                pairwise += 0.5 * al[i] * al[j] * sq_dist(&a[i], &a[j]);
            }
        }
        worst = worst.max((pairwise - central).abs());
    }
    Ok(Check::at_most("", "half the weighted pairwise spread equals the weighted variance", worst, 1e-12))
}

fn gaussian_barycenter_convergence(_: &mut ChaCha8Rng) -> Result<Check> {
    let gs = [GaussianMeasure::from_slices(&[0.0], &[1.0])?, GaussianMeasure::from_slices(&[2.0], &[0.25])?];
    let alphas = [0.3, 0.7];
    let g = gaussian_barycenter(&gs, &alphas, GAUSSIAN_BARYCENTER_TOL, GAUSSIAN_BARYCENTER_MAX_ITER)?;
    let (mean, std) = (g.mean[0], g.cov[(0, 0)].sqrt());
    let mut errs = Vec::new();
    for n in [16, 64, 256] {
        let ms = [normal_quantiles(0.0, 1.0, n)?, normal_quantiles(2.0, 0.5, n)?];
        errs.push(w2_to_normal_1d(&barycenter_multimarginal(&ms, &alphas, DEFAULT_MAX_TUPLES)?, mean, std)?);
    }
    let rises = errs.windows(2).filter(|w| w[1] >= w[0]).count() as f64;
    Ok(Check::at_most("", "discrete barycenters of quantile discretizations approach the Gaussian barycenter", rises, 0.0)
        .with_detail(format!("errors {errs:?}")))
}

fn label_decomposition(rng: &mut ChaCha8Rng) -> Result<Check> {
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let m = rng.random_range(2..4);
        let latents = (0..m).map(|_| {
                let n = rng.random_range(1..4);
                weighted(rng, n, 2)
            }).collect::<Result<Vec<_>>>()?;
        let labels = points(rng, m, 2, 2.0);
        let bw = BarycenterWeights::new(simplex(rng, m), labels)?;
        let t = lemma2_decomposition(&latents, &bw, DEFAULT_MAX_TUPLES)?;
        worst = worst.max((t.total - t.variance_term - t.label_term).abs());
    }
    Ok(Check::at_most("", "joint barycenter cost splits into latent variance plus label spread", worst, 1e-8))
}

fn closed_forms_1d(rng: &mut ChaCha8Rng) -> Result<Check> {
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let mu = rng.random_range(-2.0..2.0);
        let (s0, s1) = (rng.random_range(0.1..3.0), rng.random_range(0.1..3.0));
        let (g0, g1) = (GaussianMeasure::from_slices(&[mu], &[s0 * s0])?, GaussianMeasure::from_slices(&[mu], &[s1 * s1])?);
        worst = worst.max((gaussian_w2(&g0, &g1)? - (s0 - s1).abs()).abs());
        let t = rng.random_range(0.0..1.0);
        let gt = gaussian_geodesic(&g0, &g1, t)?;
        worst = worst.max((gt.cov[(0, 0)].sqrt() - ((1.0 - t) * s0 + t * s1)).abs());
        let m = rng.random_range(2..5);
        let sig: Vec<f64> = (0..m).map(|_| rng.random_range(0.1..3.0)).collect();
        let means: Vec<f64> = (0..m).map(|_| rng.random_range(-2.0..2.0)).collect();
        let al = simplex(rng, m);
        let gs = sig.iter().zip(&means).map(|(s, a)| GaussianMeasure::from_slices(&[*a], &[s * s])).collect::<Result<Vec<_>>>()?;
        let b = gaussian_barycenter(&gs, &al, GAUSSIAN_BARYCENTER_TOL, GAUSSIAN_BARYCENTER_MAX_ITER)?;
        let sbar: f64 = sig.iter().zip(&al).map(|(s, a)| s * a).sum();
        let mbar: f64 = means.iter().zip(&al).map(|(s, a)| s * a).sum();
        worst = worst.max((b.cov[(0, 0)].sqrt() - sbar).abs()).max((b.mean[0] - mbar).abs());
    }
    Ok(Check::at_most("", "1-D Gaussian W2, geodesic and barycenter match their closed forms", worst, 1e-9))
}

fn labeled(rng: &mut ChaCha8Rng, labels: &[Vec<f64>], n: usize, d: usize) -> Result<LabeledDataset> {
    let mut xs = Vec::new();
    let mut cs = Vec::new();
    for c in labels {
        xs.extend(points(rng, n, d, 1.0));
        cs.extend(std::iter::repeat_n(c.clone(), n));
    }
    LabeledDataset::new(xs, cs, None)
}

fn inverse_structural(rng: &mut ChaCha8Rng) -> Result<Check> {
    let mut worst: f64 = 0.0;
    for d in 1..4 {
        let labels = line_labels(3, 1.0);
        let pair = random_pair(rng, labels.clone(), d)?;
        let data = labeled(rng, &labels, 5, d)?;
        worst = worst.max(check_conditions(&pair, &data, 1e-10)?.a1_residual);
    }
    Ok(Check::at_most("", "affine generator inverts the encoder on data and latent probes", worst, 1e-10))
}

fn encoder_isometry(rng: &mut ChaCha8Rng) -> Result<Check> {
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let labels = vec![vec![0.0], vec![1.5]];
        let pair = random_pair(rng, labels.clone(), 2)?;
        let (n, m) = (rng.random_range(1..6), rng.random_range(1..6));
        let (mu, nu) = (weighted(rng, n, 2)?, weighted(rng, m, 2)?);
        // Route 1: LP on the d_Enc cost matrix of the data atoms.
        let mut rhs = mu.weights().to_vec();
        rhs.extend_from_slice(nu.weights());
        let mut lp = Lp::new(rhs);
        for i in 0..n {
            for j in 0..m {
                let c = d_enc(&pair, (mu.point(i), &labels[0]), (nu.point(j), &labels[1]), 1.0)?.powi(2);
                lp.add_column(c, &[(i, 1.0), (n + j, 1.0)]);
            }
        }
        let data_side = lp.solve()?.objective.max(0.0).sqrt();
        // Route 2: transport simplex on the encoded (z, c) atoms.
        let z0 = pair.encode_measure(&mu, &labels[0])?.with_suffix(&labels[0]);
        let z1 = pair.encode_measure(&nu, &labels[1])?.with_suffix(&labels[1]);
        worst = worst.max((data_side - wasserstein_p(&z0, &z1, &e2())?).abs());
    }
    Ok(Check::at_most("", "W_p under d_Enc equals W_p between encoded families", worst, 1e-9))
}

fn edge_constant_speed(rng: &mut ChaCha8Rng) -> Result<Check> {
    let mut worst: f64 = 0.0;
    for k in 0..5 {
        let (n, d) = (4 + k, 1 + k % 2);
        let labels = vec![vec![0.0], vec![1.0]];
        let pair = Arc::new(random_pair(rng, labels.clone(), d)?);
        let fam = family(labels.clone(), vec![uniform(rng, n, d)?, uniform(rng, n, d)?])?;
        let tmap = Arc::new(oracle_transport_map(&pair, &fam, 2.0, 1.0)?);
        let curve = generated_curve(pair, tmap, &labels[0], &labels[1], 2.0, 1.0)?;
        worst = worst.max(verify_constant_speed(&curve, &[0.0, 0.25, 0.5, 0.75, 1.0], 1e-6)?.max_abs_deviation);
    }
    Ok(Check::at_most("", "generated edges are constant-speed geodesics under d_Enc", worst, 1e-6))
}

fn chain_instance(rng: &mut ChaCha8Rng, m: usize, d: usize, n: usize) -> Result<(AffineBijectionPair, TransportMap, BarycenterWeights)> {
    let labels: Vec<Vec<f64>> = (0..m).map(|i| vec![i as f64, (i * i) as f64 * 0.5]).collect();
    let pair = random_pair(rng, labels.clone(), d)?;
    let ms = (0..m).map(|_| uniform(rng, n, d)).collect::<Result<Vec<_>>>()?;
    let tmap = oracle_transport_map(&pair, &family(labels.clone(), ms)?, 2.0, 1.0)?;
    let bw = BarycenterWeights::new(simplex(rng, m), labels)?;
    Ok((pair, tmap, bw))
}

fn chain_violation(gap: f64, ub: f64) -> f64 {
    (-gap).max(gap - ub)
}

fn barycenter_chain(rng: &mut ChaCha8Rng) -> Result<Check> {
    let mut worst = f64::NEG_INFINITY;
    for k in 0..8 {
        let (pair, tmap, bw) = chain_instance(rng, 2 + k % 2, 1 + k % 2, 3 + k % 2)?;
        let r = theorem4_bound(&pair, &tmap, &bw, 1.0, DEFAULT_MAX_TUPLES)?;
        worst = worst.max(chain_violation(r.gap, r.upper_bound));
    }
    Ok(Check::at_most("", "0 <= achieved - infimum <= transport inconsistency bound", worst, 1e-6))
}

fn random_gaussian(rng: &mut ChaCha8Rng, d: usize) -> Result<GaussianMeasure> {
    let a = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    let cov = &a * a.transpose() + DMatrix::identity(d, d) * 0.2;
    GaussianMeasure::new(DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0)), cov)
}

fn barycenter_chain_gaussian(rng: &mut ChaCha8Rng) -> Result<Check> {
    let mut worst = f64::NEG_INFINITY;
    for k in 0..4 {
        let (m, d) = (2 + k % 2, 1 + k / 2);
        let labels = line_labels(m, 1.0);
        let pair = random_pair(rng, labels.clone(), d)?;
        let gs = (0..m).map(|_| random_gaussian(rng, d)).collect::<Result<Vec<_>>>()?;
        let fam = ConditionalFamily::new(labels.clone(), gs, vec![1.0 / m as f64; m])?;
        let tmap = oracle_transport_map_gaussian(&pair, &fam)?;
        let bw = BarycenterWeights::new(simplex(rng, m), labels)?;
        let r = theorem4_bound(&pair, &tmap, &bw, 1.0, DEFAULT_MAX_TUPLES)?;
        worst = worst.max(chain_violation(r.gap, r.upper_bound));
    }
    Ok(Check::at_most("", "Gaussian closed forms satisfy 0 <= gap <= bound", worst, 1e-6))
}

/// A family whose encoded conditionals all equal one latent law.
fn shared_latent(rng: &mut ChaCha8Rng, m: usize, d: usize, n: usize) -> Result<SyntheticA5> {
    let pair = random_pair(rng, line_labels(m, 1.0), d)?;
    Ok(SyntheticA5 { pair, latent: uniform(rng, n, d)?, unobserved_shift: vec![0.0; d] })
}

fn chain_collapse(rng: &mut ChaCha8Rng) -> Result<Check> {
    let mut worst: f64 = 0.0;
    for k in 0..4 {
        let spec = shared_latent(rng, 2 + k % 2, 1 + k % 2, 4)?;
        let fam = spec.family()?;
        let tmap = oracle_transport_map(&spec.pair, &fam, 2.0, 1.0)?;
        let bw = BarycenterWeights::new(simplex(rng, fam.len()), fam.labels().to_vec())?;
        let r = theorem4_bound(&spec.pair, &tmap, &bw, 1.0, DEFAULT_MAX_TUPLES)?;
        worst = worst.max(r.gap.abs()).max(r.upper_bound);
    }
    Ok(Check::at_most("", "with one shared latent law the gap and the bound vanish", worst, 1e-6))
}

fn matches_barycenter(rng: &mut ChaCha8Rng) -> Result<Check> {
    let mut worst: f64 = 0.0;
    // Shared latent law, then 1-D families and two-vertex families in 2-D.
    for k in 0..6 {
        let (pair, fam) = match k {
            0 | 1 => {
                let spec = shared_latent(rng, 3, 2, 4)?;
                let fam = spec.family()?;
                (spec.pair, fam)
            }
            2 | 3 => {
                let labels = line_labels(3, 1.0);
                let fam = family(labels.clone(), (0..3).map(|_| uniform(rng, 4, 1)).collect::<Result<Vec<_>>>()?)?;
                (random_pair(rng, labels, 1)?, fam)
            }
            _ => {
                let labels = line_labels(2, 1.0);
                let fam = family(labels.clone(), (0..2).map(|_| uniform(rng, 5, 2)).collect::<Result<Vec<_>>>()?)?;
                (random_pair(rng, labels, 2)?, fam)
            }
        };
        let tmap = oracle_transport_map(&pair, &fam, 2.0, 1.0)?;
        let bw = BarycenterWeights::new(simplex(rng, fam.len()), fam.labels().to_vec())?;
        let out = algorithm1_generate(&pair, &tmap, &bw, GenerationMode::Exact)?;
        let latents = (0..fam.len()).map(|i| pair.encode_measure(fam.measure(i), fam.label(i))).collect::<Result<Vec<_>>>()?;
        let bary = pair.generate_measure(&barycenter_multimarginal(&latents, bw.alphas(), DEFAULT_MAX_TUPLES)?, bw.cbar())?;
        worst = worst.max(wasserstein_p(out.output.as_discrete()?, &bary, &e2())?);
    }
    let spec = shared_latent(rng, 3, 2, 1)?;
    let g = random_gaussian(rng, 2)?;
    let gfam = spec.pair.labels().iter().map(|c| spec.pair.generate_gaussian(&g, c)).collect::<Result<Vec<_>>>()?;
    let gfam = ConditionalFamily::new(spec.pair.labels().to_vec(), gfam, vec![1.0 / 3.0; 3])?;
    let tmap = oracle_transport_map_gaussian(&spec.pair, &gfam)?;
    let bw = BarycenterWeights::new(simplex(rng, 3), gfam.labels().to_vec())?;
    let out = algorithm1_generate(&spec.pair, &tmap, &bw, GenerationMode::Exact)?;
    let lat = (0..3).map(|i| spec.pair.encode_gaussian(gfam.measure(i), gfam.label(i))).collect::<Result<Vec<_>>>()?;
    let bary = gaussian_barycenter(&lat, bw.alphas(), GAUSSIAN_BARYCENTER_TOL, GAUSSIAN_BARYCENTER_MAX_ITER)?;
    worst = worst.max(gaussian_w2(out.output.as_gaussian()?, &spec.pair.generate_gaussian(&bary, bw.cbar())?)?);
    let _ = gaussian_family;
    Ok(Check::at_most("", "exact-mode generation equals the generated latent barycenter", worst, 1e-6))
}

fn vertex_consistency(rng: &mut ChaCha8Rng) -> Result<Check> {
    let mut worst: f64 = 0.0;
    for _ in 0..4 {
        let labels = line_labels(3, 1.0);
        let pair = random_pair(rng, labels.clone(), 2)?;
        let fam = family(labels.clone(), (0..3).map(|_| uniform(rng, 4, 2)).collect::<Result<Vec<_>>>()?)?;
        let tmap = oracle_transport_map(&pair, &fam, 2.0, 1.0)?;
        for m in 0..3 {
            let mut one_hot = vec![0.0; 3];
            one_hot[m] = 1.0;
            let bw = BarycenterWeights::new(one_hot, labels.clone())?;
            let out = algorithm1_generate(&pair, &tmap, &bw, GenerationMode::Exact)?;
            worst = worst.max(wasserstein_p(out.output.as_discrete()?, fam.measure(m), &e2())?);
        }
    }
    Ok(Check::at_most("", "one-hot weights reproduce the vertex family", worst, 1e-9))
}

fn a5_instance(rng: &mut ChaCha8Rng, shift: f64) -> Result<(SyntheticA5, BarycenterWeights)> {
    let labels = vec![vec![0.0], vec![1.0], vec![3.0]];
    let pair = random_pair(rng, labels.clone(), 1)?;
    let spec = SyntheticA5 { pair, latent: uniform(rng, 5, 1)?, unobserved_shift: vec![shift] };
    let bw = select_label_weights(&labels, &[rng.random_range(0.2..2.8)])?;
    Ok((spec, bw))
}

fn unobserved_recovery(rng: &mut ChaCha8Rng) -> Result<Check> {
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let (spec, bw) = a5_instance(rng, 0.0)?;
        worst = worst.max(theorem5_check(&spec, &bw, GenerationMode::Exact)?);
    }
    Ok(Check::at_most("", "label-independent latents are recovered exactly at unobserved labels", worst, 1e-8))
}

fn unobserved_violation(rng: &mut ChaCha8Rng) -> Result<Check> {
    let (spec, bw) = a5_instance(rng, 1.0)?;
    let d = theorem5_check(&spec, &bw, GenerationMode::Exact)?;
    Ok(Check::at_least("", "a label-dependent latent shift is detected", d, 0.1))
}

/// Separated labels and a large matching weight put the objective in the
/// regime where the exact map is optimal.
fn gap_config() -> FitConfig {
    FitConfig { lambda_match_data: 100.0, ..FitConfig::default() }
}

fn gap_instances(rng: &mut ChaCha8Rng) -> Result<Vec<(AffineBijectionPair, ConditionalFamily)>> {
    let two = line_labels(2, 5.0);
    let fam2 = family(two.clone(), vec![uniform(rng, 4, 1)?, uniform(rng, 4, 1)?])?;
    let three = line_labels(3, 5.0);
    let fam3 = family(three.clone(), (0..3).map(|_| uniform(rng, 3, 2)).collect::<Result<Vec<_>>>()?)?;
    Ok(vec![(AffineBijectionPair::identity(1, two)?, fam2), (random_pair(rng, three, 2)?, fam3)])
}

fn oracle_self_gap(rng: &mut ChaCha8Rng) -> Result<Check> {
    let mut worst: f64 = 0.0;
    for (pair, fam) in gap_instances(rng)? {
        let o = oracle_transport_map(&pair, &fam, 2.0, 1.0)?;
        worst = worst.max(theorem6_gap(&o, &o, &pair, &gap_config())?.abs());
    }
    Ok(Check::at_most("", "the exact map has zero gap to itself", worst, 0.0))
}

fn perturbed_gap(rng: &mut ChaCha8Rng) -> Result<Check> {
    let mut worst = f64::INFINITY;
    for (pair, fam) in gap_instances(rng)? {
        let o = oracle_transport_map(&pair, &fam, 2.0, 1.0)?;
        for _ in 0..50 {
            let r = rng.random_range(1e-4..1e-2);
            let entries = o
                .entries()
                .iter()
                .map(|e| {
                    let map = match &e.map {
                        PointMap::Table { sources, targets } => PointMap::Table {
                            sources: sources.clone(),
                            targets: targets.iter().map(|t| t + rng.random_range(-r..r)).collect(),
                        },
                        other => other.clone(),
                    };
                    TransportEntry { map, ..e.clone() }
                })
                .collect();
            let cand = TransportMap::new(o.family().clone(), entries, o.provenance())?;
            worst = worst.min(theorem6_gap(&cand, &o, &pair, &gap_config())?);
        }
    }
    Ok(Check::at_least("", "random perturbations of the exact map never lower the objective", worst, -1e-6))
}

fn fitted_gap(_: &mut ChaCha8Rng) -> Result<Check> {
    let xs = [0.0, 1.0, 2.0, 10.0, 11.5, 13.0];
    let cs = [0.0, 0.0, 0.0, 10.0, 10.0, 10.0];
    let data = LabeledDataset::new(xs.iter().map(|x| vec![*x]).collect(), cs.iter().map(|c| vec![*c]).collect(), None)?;
    let pair = AffineBijectionPair::identity(1, vec![vec![0.0], vec![10.0]])?;
    let cfg = FitConfig {
        divergence: DivergenceKind::SlicedWasserstein,
        lambda_match_data: 60.0,
        step: 1e-3,
        iterations: 5000,
        checkpoint_every: 250,
        ..FitConfig::default()
    };
    let (fitted, trace) = fit_transport_map(&pair, &data, &cfg)?;
    let oracle = oracle_transport_map(&pair, &conditional_family_from_labeled(&data)?, 2.0, 1.0)?;
    let gap = theorem6_gap(&fitted, &oracle, &pair, &cfg)?;
    let rise = trace.checkpoints.windows(2).map(|w| w[1].1 - w[0].1).fold(0.0, f64::max);
    let mut c = Check::at_least("", "fitted maps never beat the exact map and checkpoints never rise", gap, -1e-6);
    c.pass &= rise <= 1e-9;
    Ok(c.with_detail(format!("largest checkpoint rise {rise:e}")))
}

fn json_roundtrip(rng: &mut ChaCha8Rng) -> Result<Check> {
    let labels = line_labels(3, 1.0);
    let pair = random_pair(rng, labels.clone(), 2)?;
    let fam = family(labels, (0..3).map(|_| weighted(rng, 3, 2)).collect::<Result<Vec<_>>>()?)?;
    let transport = oracle_transport_map(&pair, &fam, 2.0, 1.0)?;
    let p = Pipeline { pair, transport, config: FitConfig::default(), seed: rng.random() };
    let s = p.to_json()?;
    let back = Pipeline::from_json(&s)?;
    let bad = if back == p && back.to_json()? == s { 0.0 } else { 1.0 };
    Ok(Check::at_most("", "saved pipelines reload bit-exactly", bad, 0.0))
}

fn determinism(rng: &mut ChaCha8Rng) -> Result<Check> {
    let seed: u32 = rng.random();
    let docs = [
        format!(
            r#"{{"schema":"condgeo.scenario.v1","seed":{seed},"scenario":{{"kind":"geodesic",
                "source":{{"inline":{{"points":[[0.0,0.0],[1.0,0.5],[0.3,2.0]]}}}},
                "target":{{"normal_quantiles":{{"mean":1.0,"std":0.5,"n":3}}}}}}}}"#
        )
        .replace("[[0.0,0.0],[1.0,0.5],[0.3,2.0]]", "[[0.0],[1.0],[0.3]]"),
        format!(
            r#"{{"schema":"condgeo.scenario.v1","seed":{seed},"scenario":{{"kind":"pipeline","target_label":[0.5],
                "generation":{{"kind":"sampling","n":16}},
                "data":{{"inline":{{"xs":[[0.0],[1.0],[3.0],[4.5]],"cs":[[0.0],[0.0],[1.0],[1.0]]}}}}}}}}"#
        ),
    ];
    let mut bad = 0.0;
    for doc in docs {
        let cfg = super::ScenarioConfig::from_json(&doc).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let run = || super::execute(&cfg, std::path::Path::new(".")).map_err(|e| Error::Solver(e.to_string()));
        let (a, b) = (run()?, run()?);
        if a.report_json != b.report_json || a.files != b.files {
            bad += 1.0;
        }
    }
    Ok(Check::at_most("", "identical configs give byte-identical reports and artifacts", bad, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_w2_matches_closed_form_for_quantiles() {
        // A single atom at the mean: W2² = std².
        let m = DiscreteMeasure::dirac(vec![1.0]).unwrap();
        assert!((w2_to_normal_1d(&m, 1.0, 2.0).unwrap() - 2.0).abs() < 1e-12);
        // Shifted Dirac: W2² = shift² + std².
        assert!((w2_to_normal_1d(&m, 0.0, 1.0).unwrap() - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn names_are_unique() {
        let mut n = check_names();
        n.sort();
        n.dedup();
        assert_eq!(n.len(), SUITE.len());
    }

    #[test]
    fn suite_passes() {
        let checks = run_suite(None, 0).unwrap();
        let failed: Vec<String> = checks.iter().filter(|c| c.failed()).map(Check::line).collect();
        assert!(failed.is_empty(), "{failed:#?}");
    }
}
