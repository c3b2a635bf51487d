//! Transport maps between observed conditionals: exact ones read off latent
//! optimal couplings, and fitted affine ones.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::sq_dist;
use crate::measures::{ConditionalFamily, DiscreteMeasure, GaussianMeasure, HasDim};
use crate::ot::{exact_coupling, gaussian_monge_matrix, monge_map_from_coupling, MetricSpec};

use super::AffineBijectionPair;

/// A conditional law, either finitely supported or Gaussian.
#[derive(Debug, Clone, PartialEq)]
pub enum SourceLaw {
    Discrete(DiscreteMeasure),
    Gaussian(GaussianMeasure),
}

impl HasDim for SourceLaw {
    fn data_dim(&self) -> usize {
        match self {
            SourceLaw::Discrete(m) => m.dim(),
            SourceLaw::Gaussian(g) => g.dim(),
        }
    }
}

impl SourceLaw {
    pub fn as_discrete(&self) -> Result<&DiscreteMeasure> {
        match self {
            SourceLaw::Discrete(m) => Ok(m),
            SourceLaw::Gaussian(_) => Err(Error::InvalidArgument("expected a discrete law, got a Gaussian".into())),
        }
    }

    pub fn as_gaussian(&self) -> Result<&GaussianMeasure> {
        match self {
            SourceLaw::Gaussian(g) => Ok(g),
            SourceLaw::Discrete(_) => Err(Error::InvalidArgument("expected a Gaussian law, got a discrete one".into())),
        }
    }
}

/// Wraps every measure of a discrete family.
pub fn discrete_family(fam: &ConditionalFamily) -> ConditionalFamily<SourceLaw> {
    fam.try_map(|_, m| Ok(SourceLaw::Discrete(m.clone()))).expect("infallible")
}

pub fn gaussian_family(fam: &ConditionalFamily<GaussianMeasure>) -> ConditionalFamily<SourceLaw> {
    fam.try_map(|_, g| Ok(SourceLaw::Gaussian(g.clone()))).expect("infallible")
}

#[derive(Debug, Clone, PartialEq)]
pub enum PointMap {
    /// Image of each source atom. Other points use the nearest atom, lowest
    /// index on ties.
    Table { sources: DiscreteMeasure, targets: Vec<f64> },
    /// `x -> G x + h`.
    Affine { matrix: DMatrix<f64>, offset: DVector<f64> },
}

impl PointMap {
    pub fn identity(dim: usize) -> Self {
        PointMap::Affine { matrix: DMatrix::identity(dim, dim), offset: DVector::zeros(dim) }
    }

    pub fn dim(&self) -> usize {
        match self {
            PointMap::Table { sources, .. } => sources.dim(),
            PointMap::Affine { offset, .. } => offset.len(),
        }
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), actual: x.len() });
        }
        match self {
            PointMap::Table { sources, targets } => {
                let mut best = (f64::INFINITY, 0);
                for i in 0..sources.len() {
                    let d = sq_dist(sources.point(i), x);
                    if d < best.0 {
                        best = (d, i);
                    }
                }
                let d = sources.dim();
                Ok(targets[best.1 * d..(best.1 + 1) * d].to_vec())
            }
            PointMap::Affine { matrix, offset } => {
                Ok((matrix * DVector::from_column_slice(x) + offset).as_slice().to_vec())
            }
        }
    }

    /// Target of source atom `i` of a table map.
    pub fn table_target(&self, i: usize) -> Option<&[f64]> {
        match self {
            PointMap::Table { targets, sources } => {
                let d = sources.dim();
                targets.get(i * d..(i + 1) * d)
            }
            PointMap::Affine { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransportEntry {
    /// Index of the source label in the family.
    pub from: usize,
    pub to: usize,
    pub map: PointMap,
    /// Some source atom split its mass and was sent to its barycentric target.
    pub projected: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    ExactLatentOt,
    Fitted,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::ExactLatentOt => "exact_latent_ot",
            Provenance::Fitted => "fitted",
        }
    }
}

/// `T(x, c, c')` for ordered pairs of observed labels. A missing diagonal
/// entry acts as the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportMap {
    family: ConditionalFamily<SourceLaw>,
    entries: Vec<TransportEntry>,
    provenance: Provenance,
}

impl TransportMap {
    pub fn new(family: ConditionalFamily<SourceLaw>, entries: Vec<TransportEntry>, provenance: Provenance) -> Result<Self> {
        let (k, d) = (family.len(), family.data_dim());
        for (n, e) in entries.iter().enumerate() {
            if e.from >= k || e.to >= k {
                return Err(Error::LabelMismatch(format!("entry ({}, {}) outside {k} labels", e.from, e.to)));
            }
            if e.map.dim() != d {
                return Err(Error::DimensionMismatch { expected: d, actual: e.map.dim() });
            }
            if entries[..n].iter().any(|o| o.from == e.from && o.to == e.to) {
                return Err(Error::LabelMismatch(format!("duplicate entry ({}, {})", e.from, e.to)));
            }
        }
        Ok(Self { family, entries, provenance })
    }

    pub fn family(&self) -> &ConditionalFamily<SourceLaw> {
        &self.family
    }

    pub fn entries(&self) -> &[TransportEntry] {
        &self.entries
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn entry(&self, from: usize, to: usize) -> Option<&TransportEntry> {
        self.entries.iter().find(|e| e.from == from && e.to == to)
    }

    pub fn label_index(&self, c: &[f64]) -> Result<usize> {
        self.family.index_of(c).ok_or_else(|| Error::UnknownLabel(c.to_vec()))
    }

    pub fn covers(&self, from: usize, to: usize) -> bool {
        from == to || self.entry(from, to).is_some()
    }

    pub fn apply_indexed(&self, x: &[f64], from: usize, to: usize) -> Result<Vec<f64>> {
        match self.entry(from, to) {
            Some(e) => e.map.apply(x),
            None if from == to => Ok(x.to_vec()),
            None => Err(Error::LabelMismatch(format!(
                "no transport from {:?} to {:?}",
                self.family.label(from),
                self.family.label(to)
            ))),
        }
    }

    /// `T(x, c, c')`.
    pub fn apply(&self, x: &[f64], c: &[f64], c_to: &[f64]) -> Result<Vec<f64>> {
        self.apply_indexed(x, self.label_index(c)?, self.label_index(c_to)?)
    }

    /// `T(·, c, c')♯P_{X|c}`.
    pub fn pushforward(&self, c: &[f64], c_to: &[f64]) -> Result<SourceLaw> {
        let (i, j) = (self.label_index(c)?, self.label_index(c_to)?);
        match self.family.measure(i) {
            SourceLaw::Discrete(m) => Ok(SourceLaw::Discrete(m.map_points(|x| self.apply_indexed(x, i, j))?)),
            SourceLaw::Gaussian(g) => {
                let (a, b) = self.affine_parts(i, j)?;
                Ok(SourceLaw::Gaussian(g.affine_pushforward(&a, &b)?))
            }
        }
    }

    /// `(G, h)` of an affine entry; the identity on a missing diagonal.
    pub fn affine_parts(&self, from: usize, to: usize) -> Result<(DMatrix<f64>, DVector<f64>)> {
        let d = self.family.data_dim();
        match self.entry(from, to).map(|e| &e.map) {
            Some(PointMap::Affine { matrix, offset }) => Ok((matrix.clone(), offset.clone())),
            None if from == to => Ok((DMatrix::identity(d, d), DVector::zeros(d))),
            _ => Err(Error::InvalidArgument(format!("transport ({from}, {to}) is not affine"))),
        }
    }
}

/// Exact transport from `P_{X|c0}` to `P_{X|c1}` read off the optimal latent
/// coupling under `(‖z - z'‖² + ε‖c0 - c1‖²)^{p/2}`, pulled back through the
/// generator. Rows of the coupling that land on a single atom map to that
/// data atom; split rows use `Gen(barycentric target, c1)`.
pub fn latent_ot_transport(
    pair: &AffineBijectionPair,
    family: &ConditionalFamily,
    c0: &[f64],
    c1: &[f64],
    p: f64,
    eps: f64,
) -> Result<TransportEntry> {
    let i = family.index_of(c0).ok_or_else(|| Error::UnknownLabel(c0.to_vec()))?;
    let j = family.index_of(c1).ok_or_else(|| Error::UnknownLabel(c1.to_vec()))?;
    let (src, dst) = (family.measure(i), family.measure(j));
    let z0 = pair.encode_measure(src, c0)?.with_suffix(c0);
    let z1 = pair.encode_measure(dst, c1)?.with_suffix(c1);
    let metric = MetricSpec::weighted_product(p, c0.len(), eps)?;
    let (cpl, _) = exact_coupling(&z0, &z1, &metric)?;
    let monge = monge_map_from_coupling(&cpl)?;
    let d = src.dim();
    let mut targets = Vec::with_capacity(src.len() * d);
    for r in 0..src.len() {
        match monge.assignment(r) {
            Some(col) => targets.extend_from_slice(dst.point(col)),
            None => targets.extend(pair.generate(&monge.target(r)[..d], c1)?),
        }
    }
    Ok(TransportEntry { from: i, to: j, map: PointMap::Table { sources: src.clone(), targets }, projected: monge.projected })
}

/// Gaussian version: the latent Monge map is affine, so the data map
/// `x -> Gen(m1 + M (Enc(x, c0) - m0), c1)` is too.
pub fn latent_ot_transport_gaussian(
    pair: &AffineBijectionPair,
    family: &ConditionalFamily<GaussianMeasure>,
    c0: &[f64],
    c1: &[f64],
) -> Result<TransportEntry> {
    let i = family.index_of(c0).ok_or_else(|| Error::UnknownLabel(c0.to_vec()))?;
    let j = family.index_of(c1).ok_or_else(|| Error::UnknownLabel(c1.to_vec()))?;
    let g0 = pair.encode_gaussian(family.measure(i), c0)?;
    let g1 = pair.encode_gaussian(family.measure(j), c1)?;
    let m = gaussian_monge_matrix(&g0.cov, &g1.cov)?;
    let (e0, e1) = (pair.at_label(c0)?, pair.at_label(c1)?);
    let inv1 = e1.inverse_matrix();
    let matrix = inv1 * &m * e0.matrix();
    let offset = inv1 * (&g1.mean + &m * (e0.offset() - &g0.mean) - e1.offset());
    Ok(TransportEntry { from: i, to: j, map: PointMap::Affine { matrix, offset }, projected: false })
}

/// Exact maps for every ordered pair of distinct labels. When the forward map
/// is a permutation the reverse one is its inverse, so cycles close exactly.
pub fn oracle_transport_map(pair: &AffineBijectionPair, family: &ConditionalFamily, p: f64, eps: f64) -> Result<TransportMap> {
    let k = family.len();
    let mut entries = Vec::new();
    for a in 0..k {
        for b in a + 1..k {
            let fwd = latent_ot_transport(pair, family, family.label(a), family.label(b), p, eps)?;
            let back = invert_permutation(&fwd, family.measure(b))
                .map(Ok)
                .unwrap_or_else(|| latent_ot_transport(pair, family, family.label(b), family.label(a), p, eps))?;
            entries.push(fwd);
            entries.push(back);
        }
    }
    entries.sort_by_key(|e| (e.from, e.to));
    TransportMap::new(discrete_family(family), entries, Provenance::ExactLatentOt)
}

fn invert_permutation(fwd: &TransportEntry, dst: &DiscreteMeasure) -> Option<TransportEntry> {
    let PointMap::Table { sources, targets } = &fwd.map else { return None };
    if fwd.projected || sources.len() != dst.len() {
        return None;
    }
    let d = dst.dim();
    let mut back = vec![None; dst.len()];
    for i in 0..sources.len() {
        let t = &targets[i * d..(i + 1) * d];
        let j = (0..dst.len()).find(|&j| back[j].is_none() && dst.point(j) == t)?;
        if dst.weight(j) != sources.weight(i) {
            return None;
        }
        back[j] = Some(i);
    }
    let mut inv = Vec::with_capacity(dst.len() * d);
    for b in back {
        inv.extend_from_slice(sources.point(b?));
    }
    Some(TransportEntry {
        from: fwd.to,
        to: fwd.from,
        map: PointMap::Table { sources: dst.clone(), targets: inv },
        projected: false,
    })
}

pub fn oracle_transport_map_gaussian(
    pair: &AffineBijectionPair,
    family: &ConditionalFamily<GaussianMeasure>,
) -> Result<TransportMap> {
    let k = family.len();
    let mut entries = Vec::new();
    for a in 0..k {
        for b in 0..k {
            if a != b {
                entries.push(latent_ot_transport_gaussian(pair, family, family.label(a), family.label(b))?);
            }
        }
    }
    TransportMap::new(gaussian_family(family), entries, Provenance::ExactLatentOt)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fam(a: &[f64], b: &[f64]) -> ConditionalFamily {
        let m = |v: &[f64]| DiscreteMeasure::uniform(v.iter().map(|x| vec![*x]).collect()).unwrap();
        ConditionalFamily::new(vec![vec![0.0], vec![1.0]], vec![m(a), m(b)], vec![0.5, 0.5]).unwrap()
    }

    #[test]
    fn sorted_assignment_on_the_line() {
        let pair = AffineBijectionPair::identity(1, vec![vec![0.0], vec![1.0]]).unwrap();
        let f = fam(&[2.0, 0.0], &[3.0, 1.0]);
        let e = latent_ot_transport(&pair, &f, &[0.0], &[1.0], 2.0, 1.0).unwrap();
        assert!(!e.projected);
        assert_eq!(e.map.apply(&[0.0]).unwrap(), vec![1.0]);
        assert_eq!(e.map.apply(&[2.0]).unwrap(), vec![3.0]);
    }

    #[test]
    fn equal_latents_give_the_identity_in_latent_space() {
        // Enc(x, 1) = x - 5 makes both latent families {0, 1}.
        let pair = AffineBijectionPair::from_parts(
            vec![vec![0.0], vec![1.0]],
            vec![DMatrix::identity(1, 1), DMatrix::identity(1, 1)],
            vec![DVector::zeros(1), DVector::from_element(1, -5.0)],
        )
        .unwrap();
        let f = fam(&[0.0, 1.0], &[5.0, 6.0]);
        let t = oracle_transport_map(&pair, &f, 2.0, 1.0).unwrap();
        for x in [0.0, 1.0] {
            let y = t.apply(&[x], &[0.0], &[1.0]).unwrap();
            assert_eq!(y, pair.generate(&pair.encode(&[x], &[0.0]).unwrap(), &[1.0]).unwrap());
            assert_eq!(t.apply(&y, &[1.0], &[0.0]).unwrap(), vec![x]);
        }
        assert_eq!(t.apply(&[0.3], &[1.0], &[1.0]).unwrap(), vec![0.3]);
    }

    #[test]
    fn gaussian_latent_shift() {
        let pair = AffineBijectionPair::identity(1, vec![vec![0.0], vec![1.0]]).unwrap();
        let g = |m: f64| GaussianMeasure::from_slices(&[m], &[1.0]).unwrap();
        let f = ConditionalFamily::new(vec![vec![0.0], vec![1.0]], vec![g(0.0), g(2.0)], vec![0.5, 0.5]).unwrap();
        let e = latent_ot_transport_gaussian(&pair, &f, &[0.0], &[1.0]).unwrap();
        let y = e.map.apply(&[0.7]).unwrap();
        assert!((y[0] - 2.7).abs() < 1e-12);
    }

    #[test]
    fn uneven_weights_are_projected() {
        let pair = AffineBijectionPair::identity(1, vec![vec![0.0], vec![1.0]]).unwrap();
        let a = DiscreteMeasure::uniform(vec![vec![0.0]]).unwrap();
        let b = DiscreteMeasure::uniform(vec![vec![1.0], vec![3.0]]).unwrap();
        let f = ConditionalFamily::new(vec![vec![0.0], vec![1.0]], vec![a, b], vec![0.5, 0.5]).unwrap();
        let e = latent_ot_transport(&pair, &f, &[0.0], &[1.0], 2.0, 1.0).unwrap();
        assert!(e.projected);
        assert_eq!(e.map.apply(&[0.0]).unwrap(), vec![2.0]);
    }
}
