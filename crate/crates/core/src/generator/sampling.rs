//! Generation along edges (latent interpolation between two vertices) and at
//! barycentric labels (latent averaging over all vertices).

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::geodesic::{BarycenterWeights, GeodesicCurve};
use crate::linalg::sqrtm;
use crate::measures::DiscreteMeasure;
use crate::ot::MetricSpec;

use super::{AffineBijectionPair, SourceLaw, TransportMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GenerationMode {
    /// Push every atom (or the Gaussian law itself) through the generator.
    Exact,
    /// Draw `n` seeded samples from the source vertex.
    Sampling { n: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    /// Label attached to the output.
    pub label: Vec<f64>,
    pub output: SourceLaw,
    /// Source points aligned with the output atoms (discrete output only).
    pub sources: Option<DiscreteMeasure>,
}

impl Generated {
    /// Output atoms with the label appended.
    pub fn joint(&self) -> Result<DiscreteMeasure> {
        match &self.output {
            SourceLaw::Discrete(m) => Ok(m.with_suffix(&self.label)),
            SourceLaw::Gaussian(_) => Err(Error::InvalidArgument("joint points of a Gaussian output".into())),
        }
    }
}

/// `n` seeded draws from a law.
pub fn draw_samples(law: &SourceLaw, n: usize, seed: u64) -> Result<DiscreteMeasure> {
    if n == 0 {
        return Err(Error::EmptySupport);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts = Vec::new();
    match law {
        SourceLaw::Discrete(m) => {
            let idx = WeightedIndex::new(m.weights()).map_err(|e| Error::InvalidArgument(e.to_string()))?;
            for _ in 0..n {
                pts.extend_from_slice(m.point(idx.sample(&mut rng)));
            }
            DiscreteMeasure::uniform_flat(m.dim(), pts)
        }
        SourceLaw::Gaussian(g) => {
            let root = sqrtm(&g.cov);
            let d = g.dim();
            for _ in 0..n {
                let xi = DVector::from_fn(d, |_, _| StandardNormal.sample(&mut rng));
                pts.extend((&g.mean + &root * xi).iter());
            }
            DiscreteMeasure::uniform_flat(d, pts)
        }
    }
}

/// Affine map `f` recovered from `f(0)` and `f(e_i)`.
fn probe_affine(d: usize, f: &dyn Fn(&[f64]) -> Result<Vec<f64>>) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let h = DVector::from_vec(f(&vec![0.0; d])?);
    let mut g = DMatrix::zeros(h.len(), d);
    for i in 0..d {
        let mut e = vec![0.0; d];
        e[i] = 1.0;
        let col = DVector::from_vec(f(&e)?) - &h;
        g.set_column(i, &col);
    }
    Ok((g, h))
}

fn push_law(
    law: &SourceLaw,
    label: Vec<f64>,
    mode: GenerationMode,
    f: &dyn Fn(&[f64]) -> Result<Vec<f64>>,
) -> Result<Generated> {
    let src = match (mode, law) {
        (GenerationMode::Exact, SourceLaw::Discrete(m)) => m.clone(),
        (GenerationMode::Exact, SourceLaw::Gaussian(g)) => {
            let (a, b) = probe_affine(g.dim(), f)?;
            return Ok(Generated { label, output: SourceLaw::Gaussian(g.affine_pushforward(&a, &b)?), sources: None });
        }
        (GenerationMode::Sampling { n, seed }, law) => draw_samples(law, n, seed)?,
    };
    let out = src.map_points(f)?;
    Ok(Generated { label, output: SourceLaw::Discrete(out), sources: Some(src) })
}

fn lerp(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| (1.0 - t) * x + t * y).collect()
}

/// `Gen((1-t) Enc(X0, c0) + t Enc(T(X0, c0, c1), c1), c_t)` with
/// `X0 ~ P_{X|c0}` and `c_t = (1-t) c0 + t c1`. Exact mode on a Gaussian
/// vertex needs an affine transport entry.
pub fn geodesic_generate(
    pair: &AffineBijectionPair,
    tmap: &TransportMap,
    c0: &[f64],
    c1: &[f64],
    t: f64,
    mode: GenerationMode,
) -> Result<Generated> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::OutOfRange(t));
    }
    let (i, j) = (tmap.label_index(c0)?, tmap.label_index(c1)?);
    if !tmap.covers(i, j) {
        return Err(Error::LabelMismatch(format!("transport map does not cover {c0:?} -> {c1:?}")));
    }
    let ct = lerp(c0, c1, t);
    let (e0, e1, et) = (pair.at_label(c0)?, pair.at_label(c1)?, pair.at_label(&ct)?);
    let f = |x: &[f64]| -> Result<Vec<f64>> {
        let z0 = e0.apply(x);
        let z1 = e1.apply(&tmap.apply_indexed(x, i, j)?);
        Ok(et.apply_inverse(&lerp(&z0, &z1, t)))
    };
    push_law(tmap.family().measure(i), ct.clone(), mode, &f)
}

/// The generated edge `t -> w(t)` as a curve of joint `(x, c_t)` measures
/// under `d_Enc`. Requires discrete vertices.
pub fn generated_curve(
    pair: Arc<AffineBijectionPair>,
    tmap: Arc<TransportMap>,
    c0: &[f64],
    c1: &[f64],
    p: f64,
    eps: f64,
) -> Result<GeodesicCurve> {
    let metric = MetricSpec::encoder_induced(p, pair.clone(), eps)?;
    let (c0, c1) = (c0.to_vec(), c1.to_vec());
    tmap.family().measure(tmap.label_index(&c0)?).as_discrete()?;
    Ok(GeodesicCurve::new(
        move |t| geodesic_generate(&pair, &tmap, &c0, &c1, t, GenerationMode::Exact)?.joint(),
        metric,
    ))
}

/// Barycentric generation: encode a draw from the first vertex, regenerate it at `c_1`,
/// translate it to every vertex, average the latents with weights `α` and
/// generate at `c̄`.
pub fn algorithm1_generate(
    pair: &AffineBijectionPair,
    tmap: &TransportMap,
    bw: &BarycenterWeights,
    mode: GenerationMode,
) -> Result<Generated> {
    let labels = bw.labels();
    let idx = labels.iter().map(|c| tmap.label_index(c)).collect::<Result<Vec<_>>>()?;
    for &m in &idx {
        if !tmap.covers(idx[0], m) {
            return Err(Error::LabelMismatch(format!("transport map does not cover {:?} -> {:?}", labels[0], tmap.family().label(m))));
        }
    }
    let encs = labels.iter().map(|c| pair.at_label(c)).collect::<Result<Vec<_>>>()?;
    let bar = pair.at_label(bw.cbar())?;
    let alphas = bw.alphas();
    let f = |x: &[f64]| -> Result<Vec<f64>> {
        let x1 = encs[0].apply_inverse(&encs[0].apply(x));
        let mut z = vec![0.0; x.len()];
        for (m, &a) in alphas.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            let zm = encs[m].apply(&tmap.apply_indexed(&x1, idx[0], idx[m])?);
            for (s, v) in z.iter_mut().zip(zm) {
                *s += a * v;
            }
        }
        Ok(bar.apply_inverse(&z))
    };
    push_law(tmap.family().measure(idx[0]), bw.cbar().to_vec(), mode, &f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::oracle_transport_map;
    use crate::measures::ConditionalFamily;

    fn setup() -> (AffineBijectionPair, TransportMap) {
        let pair = AffineBijectionPair::identity(1, vec![vec![0.0], vec![1.0]]).unwrap();
        let m = |v: &[f64]| DiscreteMeasure::uniform(v.iter().map(|x| vec![*x]).collect()).unwrap();
        let fam = ConditionalFamily::new(vec![vec![0.0], vec![1.0]], vec![m(&[0.0, 2.0]), m(&[1.0, 3.0])], vec![0.5, 0.5]).unwrap();
        let t = oracle_transport_map(&pair, &fam, 2.0, 1.0).unwrap();
        (pair, t)
    }

    #[test]
    fn edge_endpoints_and_midpoint() {
        let (pair, t) = setup();
        let g = geodesic_generate(&pair, &t, &[0.0], &[1.0], 0.5, GenerationMode::Exact).unwrap();
        assert_eq!(g.label, vec![0.5]);
        assert_eq!(g.output.as_discrete().unwrap().points(), vec![vec![0.5], vec![2.5]]);
        let g1 = geodesic_generate(&pair, &t, &[0.0], &[1.0], 1.0, GenerationMode::Exact).unwrap();
        assert_eq!(g1.output.as_discrete().unwrap().points(), vec![vec![1.0], vec![3.0]]);
    }

    #[test]
    fn one_hot_weights_reproduce_the_vertex() {
        let (pair, t) = setup();
        let bw = BarycenterWeights::new(vec![0.0, 1.0], vec![vec![0.0], vec![1.0]]).unwrap();
        let g = algorithm1_generate(&pair, &t, &bw, GenerationMode::Exact).unwrap();
        assert_eq!(g.label, vec![1.0]);
        assert_eq!(g.output.as_discrete().unwrap().points(), vec![vec![1.0], vec![3.0]]);
    }

    #[test]
    fn sampling_is_seeded() {
        let (pair, t) = setup();
        let mode = GenerationMode::Sampling { n: 16, seed: 9 };
        let a = geodesic_generate(&pair, &t, &[0.0], &[1.0], 0.25, mode).unwrap();
        let b = geodesic_generate(&pair, &t, &[0.0], &[1.0], 0.25, mode).unwrap();
        assert_eq!(a, b);
        for (x, _) in a.output.as_discrete().unwrap().iter() {
            assert!(x[0] == 0.25 || x[0] == 2.25);
        }
    }

    #[test]
    fn out_of_range_time() {
        let (pair, t) = setup();
        assert!(matches!(
            geodesic_generate(&pair, &t, &[0.0], &[1.0], 1.5, GenerationMode::Exact),
            Err(Error::OutOfRange(_))
        ));
    }
}
