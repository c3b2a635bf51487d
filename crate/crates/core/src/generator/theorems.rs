//! Quantities the generator's guarantees are stated in: the transport
//! objective, the barycenter error chain, recovery at unobserved labels and
//! the structural-condition diagnostics.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geodesic::{gaussian_barycenter, lemma2_decomposition, BarycenterWeights, GAUSSIAN_BARYCENTER_MAX_ITER, GAUSSIAN_BARYCENTER_TOL};
use crate::linalg::{dist, sq_dist};
use crate::measures::{conditional_family_from_labeled, ConditionalFamily, DiscreteMeasure, LabeledDataset};
use crate::ot::{gaussian_w2_squared, wasserstein_p, LabeledEncoder, MetricSpec};

use super::{algorithm1_generate, d_enc, oracle_transport_map, AffineBijectionPair, FitConfig, GenerationMode, SourceLaw, TransportMap};

/// Terms of the transport objective evaluated on discrete families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Objective6 {
    /// `∫ d_Enc^p((x0,c0), (T(x0,c0,c1),c1)) dP(x0|c0) dP(c0) dP(c1)`.
    pub transport_cost: f64,
    /// `W_p(P_{(X,C)} ⊗ P_C, law of (T(X0,C0,C1), C1, C0); ‖·‖)`.
    pub match_data: f64,
    /// `∫ ‖x0 - T(T(x0,c0,c1),c1,c0)‖`.
    pub cycle: f64,
    /// `λ_TC · transport_cost + λ_MD · match_data + λ_C · cycle`.
    pub total: f64,
}

/// The transport objective with an exact `W_p` data-matching term.
pub fn objective6(tmap: &TransportMap, pair: &AffineBijectionPair, cfg: &FitConfig) -> Result<Objective6> {
    let fam = tmap.family();
    let k = fam.len();
    let w = fam.label_weights();
    let meas = fam.measures().iter().map(|m| m.as_discrete()).collect::<Result<Vec<_>>>()?;
    let (mut tc, mut cyc) = (0.0, 0.0);
    let mut real_pts = Vec::new();
    let mut real_w = Vec::new();
    let mut moved_pts = Vec::new();
    let mut moved_w = Vec::new();
    for i in 0..k {
        let ci = fam.label(i);
        for j in 0..k {
            let cj = fam.label(j);
            let wij = w[i] * w[j];
            for (x, a) in meas[i].iter() {
                let y = tmap.apply_indexed(x, i, j)?;
                tc += wij * a * d_enc(pair, (x, ci), (&y, cj), cfg.epsilon_label)?.powf(cfg.p);
                let back = tmap.apply_indexed(&y, j, i)?;
                cyc += wij * a * dist(x, &back);
                moved_pts.extend(y.iter().chain(cj).chain(ci).cloned());
                moved_w.push(wij * a);
                // Reference atom (x, c_i, c_j) of P_{(X,C)} ⊗ P_C.
                real_pts.extend(x.iter().chain(ci).chain(cj).cloned());
                real_w.push(wij * a);
            }
        }
    }
    let dim = fam.data_dim() + 2 * fam.label_dim();
    let real = DiscreteMeasure::from_flat(dim, real_pts, real_w)?;
    let moved = DiscreteMeasure::from_flat(dim, moved_pts, moved_w)?;
    let md = wasserstein_p(&real, &moved, &MetricSpec::euclidean(cfg.p)?)?;
    let total = cfg.lambda_transport_cost * tc + cfg.lambda_match_data * md + cfg.lambda_cycle * cyc;
    Ok(Objective6 { transport_cost: tc, match_data: md, cycle: cyc, total })
}

/// `objective6(candidate) - objective6(oracle)`.
pub fn theorem6_gap(candidate: &TransportMap, oracle: &TransportMap, pair: &AffineBijectionPair, cfg: &FitConfig) -> Result<f64> {
    oracle.family().check_same_labels(candidate.family())?;
    for a in 0..oracle.family().len() {
        for b in 0..oracle.family().len() {
            if oracle.covers(a, b) != candidate.covers(a, b) {
                return Err(Error::LabelMismatch(format!("maps cover different pairs at ({a}, {b})")));
            }
        }
    }
    Ok(objective6(candidate, pair, cfg)?.total - objective6(oracle, pair, cfg)?.total)
}

/// Both sides of the barycenter error bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Theorem4Report {
    /// `Σ α_m W2²((X̃, c̄), P_{(X,C)|c_m}; d_Enc)`.
    pub achieved: f64,
    /// Latent Wasserstein variance plus `ε Σ α_m ‖c̄ - c_m‖²`.
    pub infimum: f64,
    /// `achieved - infimum`.
    pub gap: f64,
    /// `½ Σ_m Σ_m' α_m α_m' ∫ d_Enc²((T(x,c1,c_m'),c_m'), (T(T(x,c1,c_m),c_m,c_m'),c_m')) dP(x|c1)`.
    pub upper_bound: f64,
}

/// Evaluates the bound for the exact-mode barycentric generator output. Discrete
/// families use exact OT and the multimarginal LP; Gaussian families with
/// affine transport use closed forms.
pub fn theorem4_bound(
    pair: &AffineBijectionPair,
    tmap: &TransportMap,
    bw: &BarycenterWeights,
    eps: f64,
    max_tuples: usize,
) -> Result<Theorem4Report> {
    let labels = bw.labels();
    let idx = labels.iter().map(|c| tmap.label_index(c)).collect::<Result<Vec<_>>>()?;
    let alphas = bw.alphas();
    let label_term = eps * bw.label_term();
    let gen = algorithm1_generate(pair, tmap, bw, GenerationMode::Exact)?;
    let cbar = bw.cbar();
    let enc = |x: &[f64], c: &[f64]| pair.encode(x, c);
    match tmap.family().measure(idx[0]) {
        SourceLaw::Discrete(src) => {
            let out = gen.output.as_discrete()?;
            let latent_out = out.map_points(|x| enc(x, cbar))?;
            let mut latents = Vec::with_capacity(idx.len());
            let mut achieved = 0.0;
            for (m, &i) in idx.iter().enumerate() {
                let zm = pair.encode_measure(tmap.family().measure(i).as_discrete()?, &labels[m])?;
                let metric = MetricSpec::weighted_product(2.0, cbar.len(), eps)?;
                let w = wasserstein_p(&latent_out.with_suffix(cbar), &zm.with_suffix(&labels[m]), &metric)?;
                achieved += alphas[m] * w * w;
                latents.push(zm);
            }
            let variance = lemma2_decomposition(&latents, bw, max_tuples)?.variance_term;
            let infimum = variance + label_term;
            let mut ub = 0.0;
            for (x, a) in src.iter() {
                for (m, &im) in idx.iter().enumerate() {
                    let tm = tmap.apply_indexed(x, idx[0], im)?;
                    for (mp, &imp) in idx.iter().enumerate() {
                        let direct = enc(&tmap.apply_indexed(x, idx[0], imp)?, &labels[mp])?;
                        let chained = enc(&tmap.apply_indexed(&tm, im, imp)?, &labels[mp])?;
                        ub += 0.5 * alphas[m] * alphas[mp] * a * sq_dist(&direct, &chained);
                    }
                }
            }
            Ok(Theorem4Report { achieved, infimum, gap: achieved - infimum, upper_bound: ub })
        }
        SourceLaw::Gaussian(src) => {
            let out = gen.output.as_gaussian()?;
            let latent_out = pair.encode_gaussian(out, cbar)?;
            let mut latents = Vec::with_capacity(idx.len());
            let mut achieved = 0.0;
            for (m, &i) in idx.iter().enumerate() {
                let zm = pair.encode_gaussian(tmap.family().measure(i).as_gaussian()?, &labels[m])?;
                achieved += alphas[m] * (gaussian_w2_squared(&latent_out, &zm)? + eps * sq_dist(cbar, &labels[m]));
                latents.push(zm);
            }
            let bary = gaussian_barycenter(&latents, alphas, GAUSSIAN_BARYCENTER_TOL, GAUSSIAN_BARYCENTER_MAX_ITER)?;
            let mut variance = 0.0;
            for (m, zm) in latents.iter().enumerate() {
                variance += alphas[m] * gaussian_w2_squared(&bary, zm)?;
            }
            let infimum = variance + label_term;
            let mut ub = 0.0;
            for (m, &im) in idx.iter().enumerate() {
                let (gm, hm) = tmap.affine_parts(idx[0], im)?;
                for (mp, &imp) in idx.iter().enumerate() {
                    let (gd, hd) = tmap.affine_parts(idx[0], imp)?;
                    let (gc, hc) = tmap.affine_parts(im, imp)?;
                    let a = pair.at_label(&labels[mp])?;
                    // Enc(direct) - Enc(chained) = A (D x + e).
                    let dmat = a.matrix() * (&gd - &gc * &gm);
                    let dvec = a.matrix() * (&hd - &gc * &hm - &hc);
                    ub += 0.5 * alphas[m] * alphas[mp] * affine_second_moment(&dmat, &dvec, &src.mean, &src.cov);
                }
            }
            Ok(Theorem4Report { achieved, infimum, gap: achieved - infimum, upper_bound: ub })
        }
    }
}

/// `E‖D X + e‖²` for `X ~ N(μ, Σ)`.
fn affine_second_moment(d: &DMatrix<f64>, e: &DVector<f64>, mean: &DVector<f64>, cov: &DMatrix<f64>) -> f64 {
    (d * cov * d.transpose()).trace() + (d * mean + e).norm_squared()
}

/// Synthetic model `X = Gen(Z + s(c), c)` with a fixed latent law. The shift
/// `s(c)` is zero at the pair's labels and `unobserved_shift` elsewhere, so a
/// nonzero shift breaks latent independence of the label exactly at
/// unobserved labels.
#[derive(Debug, Clone)]
pub struct SyntheticA5 {
    pub pair: AffineBijectionPair,
    pub latent: DiscreteMeasure,
    pub unobserved_shift: Vec<f64>,
}

impl SyntheticA5 {
    pub fn ground_truth(&self, c: &[f64]) -> Result<DiscreteMeasure> {
        let observed = self.pair.index_of(c).is_some();
        self.latent.map_points(|z| {
            let z: Vec<f64> = if observed { z.to_vec() } else { z.iter().zip(&self.unobserved_shift).map(|(a, b)| a + b).collect() };
            self.pair.generate(&z, c)
        })
    }

    /// Observed conditionals with uniform label weights.
    pub fn family(&self) -> Result<ConditionalFamily> {
        let labels = self.pair.labels().to_vec();
        let ms = labels.iter().map(|c| self.ground_truth(c)).collect::<Result<Vec<_>>>()?;
        let k = labels.len();
        ConditionalFamily::new(labels, ms, vec![1.0 / k as f64; k])
    }
}

/// `W2` in data space between the generator output at `c̄` and the true
/// conditional there.
pub fn theorem5_check(spec: &SyntheticA5, bw: &BarycenterWeights, mode: GenerationMode) -> Result<f64> {
    if spec.unobserved_shift.len() != spec.pair.dim() {
        return Err(Error::DimensionMismatch { expected: spec.pair.dim(), actual: spec.unobserved_shift.len() });
    }
    let fam = spec.family()?;
    let tmap = oracle_transport_map(&spec.pair, &fam, 2.0, 1.0)?;
    let gen = algorithm1_generate(&spec.pair, &tmap, bw, mode)?;
    let truth = spec.ground_truth(bw.cbar())?;
    wasserstein_p(gen.output.as_discrete()?, &truth, &MetricSpec::euclidean(2.0)?)
}

/// `τ(n) = 5 n^{-1/2} · diameter`.
pub fn sampling_tolerance(n: usize, diameter: f64) -> f64 {
    5.0 * diameter / (n as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionDiagnostics {
    /// Largest round-trip error over data points and their encodings.
    pub a1_residual: f64,
    /// Fraction of atoms per label lying within `tol` of an earlier atom.
    /// Advisory: finitely supported data cannot be absolutely continuous.
    pub a2_duplicate_fraction: Vec<f64>,
    pub a2_flags: Vec<bool>,
    /// `W2` between the encoded conditionals of every pair of labels.
    pub a4_matrix: Vec<Vec<f64>>,
    pub a5_max: f64,
}

pub fn check_conditions(enc: &dyn LabeledEncoder, data: &LabeledDataset, tol: f64) -> Result<ConditionDiagnostics> {
    let fam = conditional_family_from_labeled(data)?;
    let mut a1: f64 = 0.0;
    let mut latents = Vec::with_capacity(fam.len());
    let mut dup = Vec::with_capacity(fam.len());
    for (k, m) in fam.measures().iter().enumerate() {
        let c = fam.label(k);
        let z = m.map_points(|x| enc.encode(x, c))?;
        for ((x, _), (zx, _)) in m.iter().zip(z.iter()) {
            a1 = a1.max(dist(&enc.decode(zx, c)?, x));
            a1 = a1.max(dist(&enc.encode(&enc.decode(zx, c)?, c)?, zx));
        }
        let repeats = (0..m.len()).filter(|&i| (0..i).any(|j| dist(m.point(i), m.point(j)) <= tol)).count();
        dup.push(repeats as f64 / m.len() as f64);
        latents.push(z);
    }
    let e2 = MetricSpec::euclidean(2.0)?;
    let k = latents.len();
    let mut a4 = vec![vec![0.0; k]; k];
    let mut a5: f64 = 0.0;
    for a in 0..k {
        for b in a + 1..k {
            let w = wasserstein_p(&latents[a], &latents[b], &e2)?;
            a4[a][b] = w;
            a4[b][a] = w;
            a5 = a5.max(w);
        }
    }
    let flags = dup.iter().map(|f| *f > 0.0).collect();
    Ok(ConditionDiagnostics { a1_residual: a1, a2_duplicate_fraction: dup, a2_flags: flags, a4_matrix: a4, a5_max: a5 })
}
