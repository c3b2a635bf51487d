//! Desk-scale fitting of the affine encoder/generator pair and of affine
//! transport maps by plain gradient descent.

use nalgebra::{DMatrix, DVector};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dist, sq_dist};
use crate::measures::{conditional_family_from_labeled, DiscreteMeasure, HasDim, LabeledDataset};

use super::divergence::{divergence_with_grad, DivergenceKind};
use super::theorems::objective6;
use super::{
    discrete_family, draw_samples, AffineBijectionPair, AffineMap, PointMap, Provenance, SourceLaw, TransportEntry,
    TransportMap, DET_TOL,
};

/// Seed offset separating mini-batch draws from the other seeded streams.
const BATCH_STREAM: u64 = 0x5eed_ba7c;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub lambda_recon: f64,
    pub lambda_match_latent: f64,
    pub lambda_recon_latent: f64,
    pub lambda_match_data: f64,
    pub lambda_cycle: f64,
    pub lambda_transport_cost: f64,
    /// Weight of `∫ d(x, T(x, c, c))`, used only while fitting.
    pub lambda_identity: f64,
    pub epsilon_label: f64,
    pub p: f64,
    pub step: f64,
    pub iterations: usize,
    pub batch_size: Option<usize>,
    pub seed: u64,
    pub divergence: DivergenceKind,
    pub checkpoint_every: usize,
    /// Draws used when the latent prior is Gaussian.
    pub prior_samples: usize,
    /// Relative change of the tracked objective between the last two
    /// checkpoints below which the fit counts as converged.
    pub tol: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            lambda_recon: 1.0,
            lambda_match_latent: 1.0,
            lambda_recon_latent: 0.1,
            lambda_match_data: 1.0,
            lambda_cycle: 5.0,
            lambda_transport_cost: 1.0,
            lambda_identity: 10.0,
            epsilon_label: 1.0,
            p: 2.0,
            step: 1e-2,
            iterations: 2000,
            batch_size: None,
            seed: 0,
            divergence: DivergenceKind::EnergyDistance,
            checkpoint_every: 100,
            prior_samples: 256,
            tol: 1e-9,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        let lambdas = [
            ("lambda_recon", self.lambda_recon),
            ("lambda_match_latent", self.lambda_match_latent),
            ("lambda_recon_latent", self.lambda_recon_latent),
            ("lambda_match_data", self.lambda_match_data),
            ("lambda_cycle", self.lambda_cycle),
            ("lambda_transport_cost", self.lambda_transport_cost),
            ("lambda_identity", self.lambda_identity),
            ("epsilon_label", self.epsilon_label),
        ];
        for (name, v) in lambdas {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidArgument(format!("{name} = {v} must be a finite value >= 0")));
            }
        }
        if !(1.0..=4.0).contains(&self.p) {
            return Err(Error::InvalidArgument(format!("p = {} must lie in [1, 4]", self.p)));
        }
        if !(self.step > 0.0) || !self.step.is_finite() {
            return Err(Error::InvalidArgument(format!("step = {} must be positive", self.step)));
        }
        if self.iterations == 0 || self.checkpoint_every == 0 || self.prior_samples == 0 || self.batch_size == Some(0) {
            return Err(Error::InvalidArgument("iterations, checkpoint_every, prior_samples and batch_size must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitTrace {
    /// Surrogate loss before each update, plus one after the last.
    pub losses: Vec<f64>,
    /// `(iteration, best tracked objective so far)`; non-increasing.
    pub checkpoints: Vec<(usize, f64)>,
    pub best_iteration: usize,
    pub converged: bool,
}

fn settled(checkpoints: &[(usize, f64)], tol: f64) -> bool {
    match checkpoints {
        [.., (_, a), (_, b)] => (a - b).abs() <= tol * (1.0 + b.abs()),
        [(_, b)] => b.abs() <= tol,
        [] => false,
    }
}

fn batch(m: &DiscreteMeasure, size: Option<usize>, rng: &mut ChaCha8Rng) -> Result<DiscreteMeasure> {
    let Some(n) = size else { return Ok(m.clone()) };
    let idx = WeightedIndex::new(m.weights()).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut pts = Vec::with_capacity(n * m.dim());
    for _ in 0..n {
        pts.extend_from_slice(m.point(idx.sample(rng)));
    }
    DiscreteMeasure::uniform_flat(m.dim(), pts)
}

/// Adds `scale · g xᵀ` and `scale · g` to an affine gradient.
fn accumulate(ga: &mut DMatrix<f64>, gb: &mut DVector<f64>, g: &[f64], x: &[f64], scale: f64) {
    for r in 0..g.len() {
        gb[r] += scale * g[r];
        for s in 0..x.len() {
            ga[(r, s)] += scale * g[r] * x[s];
        }
    }
}

/// Fits per-label affine encoders `Enc(x, c) = A_c x + b_c` to the
/// autoencoder objective with the matching term taken label by label,
/// `Σ_c P(c) Div(Enc(·, c)♯P_{X|c}, P_Z)`. Both reconstruction terms vanish
/// identically for a bijection and contribute no gradient.
pub fn fit_autoencoder(data: &LabeledDataset, latent_prior: &SourceLaw, cfg: &FitConfig) -> Result<(AffineBijectionPair, FitTrace)> {
    cfg.validate()?;
    let fam = conditional_family_from_labeled(data)?;
    let d = fam.data_dim();
    if latent_prior.data_dim() != d {
        return Err(Error::DimensionMismatch { expected: d, actual: latent_prior.data_dim() });
    }
    let prior = match latent_prior {
        SourceLaw::Discrete(m) => m.clone(),
        SourceLaw::Gaussian(_) => draw_samples(latent_prior, cfg.prior_samples, cfg.seed)?,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ BATCH_STREAM);
    let k = fam.len();
    let mut params: Vec<AffineMap> = vec![AffineMap::identity(d); k];
    let mut best = (f64::INFINITY, params.clone(), 0);
    let mut losses = Vec::with_capacity(cfg.iterations + 1);
    let mut checkpoints = Vec::new();
    for it in 0..=cfg.iterations {
        let mut total = 0.0;
        let mut grads = Vec::with_capacity(k);
        for c in 0..k {
            let w = fam.label_weights()[c];
            let map = &params[c];
            let xs = batch(fam.measure(c), cfg.batch_size, &mut rng)?;
            let z = xs.map_points(|x| Ok(map.apply(x)))?;
            let recon: f64 = xs.iter().map(|(x, a)| a * dist(x, &map.apply_inverse(&map.apply(x))).powf(cfg.p)).sum();
            let latent_recon: f64 = prior.iter().map(|(v, a)| a * dist(v, &map.apply(&map.apply_inverse(v)))).sum();
            let mut ga = DMatrix::zeros(d, d);
            let mut gb = DVector::zeros(d);
            let mut div = 0.0;
            if cfg.lambda_match_latent > 0.0 {
                let (v, g) = divergence_with_grad(cfg.divergence, &z, &prior, cfg.seed)?;
                div = v;
                for (i, (x, _)) in xs.iter().enumerate() {
                    accumulate(&mut ga, &mut gb, &g[i * d..(i + 1) * d], x, w * cfg.lambda_match_latent);
                }
            }
            total += w * (cfg.lambda_recon * recon + cfg.lambda_match_latent * div + cfg.lambda_recon_latent * latent_recon);
            grads.push((ga, gb));
        }
        losses.push(total);
        if total < best.0 {
            best = (total, params.clone(), it);
        }
        if it % cfg.checkpoint_every == 0 || it == cfg.iterations {
            checkpoints.push((it, best.0));
        }
        if it == cfg.iterations {
            break;
        }
        for (c, (ga, gb)) in grads.into_iter().enumerate() {
            let mut s = cfg.step;
            // Halve the step until the update stays invertible.
            for _ in 0..60 {
                let a = params[c].matrix() - &ga * s;
                if a.determinant().abs() > DET_TOL {
                    params[c] = AffineMap::new(a, params[c].offset() - &gb * s)?;
                    break;
                }
                s *= 0.5;
            }
        }
    }
    let converged = settled(&checkpoints, cfg.tol);
    let pair = AffineBijectionPair::new(fam.labels().to_vec(), best.1)?;
    Ok((pair, FitTrace { losses, checkpoints, best_iteration: best.2, converged }))
}

type Affine = (DMatrix<f64>, DVector<f64>);

fn apply(p: &Affine, x: &[f64]) -> Vec<f64> {
    (&p.0 * DVector::from_column_slice(x) + &p.1).as_slice().to_vec()
}

fn to_map(fam: &crate::measures::ConditionalFamily, params: &[Affine]) -> Result<TransportMap> {
    let k = fam.len();
    let entries = (0..k * k)
        .map(|n| TransportEntry {
            from: n / k,
            to: n % k,
            map: PointMap::Affine { matrix: params[n].0.clone(), offset: params[n].1.clone() },
            projected: false,
        })
        .collect();
    TransportMap::new(discrete_family(fam), entries, Provenance::Fitted)
}

/// Fits an affine map `T(·, c_i, c_j)` for every ordered pair of labels,
/// diagonal included, to the transport objective with the data-matching term
/// replaced by `Σ P(c_i) P(c_j) Div(T♯P_{X|c_i}, P_{X|c_j})` and the identity
/// term `λ_Id ∫ ‖x - T(x, c, c)‖` added. The returned map is the checkpoint
/// with the smallest exact objective.
pub fn fit_transport_map(pair: &AffineBijectionPair, data: &LabeledDataset, cfg: &FitConfig) -> Result<(TransportMap, FitTrace)> {
    cfg.validate()?;
    let fam = conditional_family_from_labeled(data)?;
    let k = fam.len();
    if k < 2 {
        return Err(Error::InvalidArgument("transport fitting needs at least two labels".into()));
    }
    let d = fam.data_dim();
    let w = fam.label_weights().to_vec();
    let encs = fam.labels().iter().map(|c| pair.at_label(c)).collect::<Result<Vec<_>>>()?;
    // Maps are parametrized around the source mean, `T(x) = G (x - x̄_i) + h`,
    // which keeps slope and offset gradients on one scale.
    let means: Vec<Vec<f64>> = fam.measures().iter().map(DiscreteMeasure::mean).collect();
    let centered = |x: &[f64], i: usize| -> Vec<f64> { x.iter().zip(&means[i]).map(|(a, b)| a - b).collect() };
    let mut params: Vec<Affine> =
        (0..k * k).map(|n| (DMatrix::identity(d, d), DVector::from_column_slice(&means[n / k]))).collect();
    let uncentered = |params: &[Affine]| -> Vec<Affine> {
        params.iter().enumerate().map(|(n, (g, h))| (g.clone(), h - g * DVector::from_column_slice(&means[n / k]))).collect()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ BATCH_STREAM);
    let mut losses = Vec::with_capacity(cfg.iterations + 1);
    let mut checkpoints = Vec::new();
    let mut best: (f64, Vec<Affine>, usize) = (f64::INFINITY, params.clone(), 0);
    let p = cfg.p;
    for it in 0..=cfg.iterations {
        if it % cfg.checkpoint_every == 0 || it == cfg.iterations {
            let obj = objective6(&to_map(&fam, &uncentered(&params))?, pair, cfg)?.total;
            if obj < best.0 {
                best = (obj, params.clone(), it);
            }
            checkpoints.push((it, best.0));
        }
        let mut grads: Vec<Affine> = vec![(DMatrix::zeros(d, d), DVector::zeros(d)); k * k];
        let mut total = 0.0;
        for i in 0..k {
            let xs = batch(fam.measure(i), cfg.batch_size, &mut rng)?;
            for j in 0..k {
                let wij = w[i] * w[j];
                let (ij, ji) = (i * k + j, j * k + i);
                let label_sq = cfg.epsilon_label * sq_dist(fam.label(i), fam.label(j));
                let ys = xs.map_points(|x| Ok(apply(&params[ij], &centered(x, i))))?;
                for ((x, a), (y, _)) in xs.iter().zip(ys.iter()) {
                    let xc = centered(x, i);
                    let r: Vec<f64> = encs[j].apply(y).iter().zip(encs[i].apply(x)).map(|(u, v)| u - v).collect();
                    let s = r.iter().map(|v| v * v).sum::<f64>() + label_sq;
                    total += cfg.lambda_transport_cost * wij * a * s.powf(p / 2.0);
                    if s > 0.0 && cfg.lambda_transport_cost > 0.0 {
                        let coef = p * s.powf(p / 2.0 - 1.0);
                        let g = (encs[j].matrix().transpose() * DVector::from_vec(r)) * coef;
                        let (ga, gb) = &mut grads[ij];
                        accumulate(ga, gb, g.as_slice(), &xc, cfg.lambda_transport_cost * wij * a);
                    }
                    if cfg.lambda_cycle > 0.0 {
                        let yc = centered(y, j);
                        let u = apply(&params[ji], &yc);
                        let nrm = dist(&u, x);
                        total += cfg.lambda_cycle * wij * a * nrm;
                        if nrm > 0.0 {
                            let g: Vec<f64> = u.iter().zip(x).map(|(a, b)| (a - b) / nrm).collect();
                            let scale = cfg.lambda_cycle * wij * a;
                            let back = params[ji].0.transpose() * DVector::from_column_slice(&g);
                            let (ga, gb) = &mut grads[ji];
                            accumulate(ga, gb, &g, &yc, scale);
                            let (ga, gb) = &mut grads[ij];
                            accumulate(ga, gb, back.as_slice(), &xc, scale);
                        }
                    }
                    if i == j && cfg.lambda_identity > 0.0 {
                        let nrm = dist(y, x);
                        total += cfg.lambda_identity * w[i] * a * nrm;
                        if nrm > 0.0 {
                            let g: Vec<f64> = y.iter().zip(x).map(|(a, b)| (a - b) / nrm).collect();
                            let (ga, gb) = &mut grads[ij];
                            accumulate(ga, gb, &g, &xc, cfg.lambda_identity * w[i] * a);
                        }
                    }
                }
                if cfg.lambda_match_data > 0.0 {
                    let (v, g) = divergence_with_grad(cfg.divergence, &ys, fam.measure(j), cfg.seed)?;
                    total += cfg.lambda_match_data * wij * v;
                    let (ga, gb) = &mut grads[ij];
                    for (n, (x, _)) in xs.iter().enumerate() {
                        accumulate(ga, gb, &g[n * d..(n + 1) * d], &centered(x, i), cfg.lambda_match_data * wij);
                    }
                }
            }
        }
        losses.push(total);
        if it == cfg.iterations {
            break;
        }
        for (prm, (ga, gb)) in params.iter_mut().zip(grads) {
            prm.0 -= ga * cfg.step;
            prm.1 -= gb * cfg.step;
        }
    }
    let converged = settled(&checkpoints, cfg.tol);
    Ok((to_map(&fam, &uncentered(&best.1))?, FitTrace { losses, checkpoints, best_iteration: best.2, converged }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::{oracle_transport_map, theorem6_gap};

    fn labeled(groups: &[(&[f64], f64)]) -> LabeledDataset {
        let mut xs = Vec::new();
        let mut cs = Vec::new();
        for (pts, c) in groups {
            for x in pts.iter() {
                xs.push(vec![*x]);
                cs.push(vec![*c]);
            }
        }
        LabeledDataset::new(xs, cs, None).unwrap()
    }

    #[test]
    fn identity_start_is_optimal_when_data_equals_prior() {
        let z = [-1.0, 0.0, 0.5, 2.0];
        let data = labeled(&[(&z, 0.0)]);
        let prior = SourceLaw::Discrete(DiscreteMeasure::uniform(z.iter().map(|v| vec![*v]).collect()).unwrap());
        let cfg = FitConfig { iterations: 5, ..FitConfig::default() };
        let (pair, trace) = fit_autoencoder(&data, &prior, &cfg).unwrap();
        assert!(trace.losses[0].abs() < 1e-15);
        assert_eq!(pair.maps()[0], AffineMap::identity(1));
    }

    #[test]
    fn recovers_a_planted_scale() {
        let z = [-1.5, -0.5, 0.0, 1.0, 2.0];
        let x: Vec<f64> = z.iter().map(|v| (v - 1.0) / 2.0).collect();
        let data = labeled(&[(&x, 0.0)]);
        let prior = SourceLaw::Discrete(DiscreteMeasure::uniform(z.iter().map(|v| vec![*v]).collect()).unwrap());
        let cfg = FitConfig {
            divergence: DivergenceKind::SlicedWasserstein,
            step: 1e-3,
            iterations: 5000,
            ..FitConfig::default()
        };
        let (pair, trace) = fit_autoencoder(&data, &prior, &cfg).unwrap();
        let a = pair.maps()[0].matrix()[(0, 0)];
        let b = pair.maps()[0].offset()[0];
        assert!((a - 2.0).abs() < 1e-2 && (b - 1.0).abs() < 1e-2, "{a} {b} {:?}", trace.checkpoints.last());
    }

    #[test]
    fn fitted_transport_never_beats_the_oracle() {
        let data = labeled(&[(&[0.0, 1.0, 2.0], 0.0), (&[10.0, 11.5, 13.0], 10.0)]);
        let pair = AffineBijectionPair::identity(1, vec![vec![0.0], vec![10.0]]).unwrap();
        let cfg = FitConfig {
            divergence: DivergenceKind::SlicedWasserstein,
            lambda_match_data: 60.0,
            step: 1e-3,
            iterations: 5000,
            checkpoint_every: 250,
            ..FitConfig::default()
        };
        let (fitted, trace) = fit_transport_map(&pair, &data, &cfg).unwrap();
        let fam = conditional_family_from_labeled(&data).unwrap();
        let oracle = oracle_transport_map(&pair, &fam, 2.0, 1.0).unwrap();
        let gap = theorem6_gap(&fitted, &oracle, &pair, &cfg).unwrap();
        assert!(gap >= -1e-6, "{gap}");
        assert!(trace.checkpoints.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-9));
        // The fitted map approaches x -> 10 + 1.5 x.
        let y = fitted.apply(&[1.0], &[0.0], &[10.0]).unwrap()[0];
        assert!((y - 11.5).abs() < 0.1, "{y}");
    }
}
