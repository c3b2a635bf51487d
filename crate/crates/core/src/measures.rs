//! Discrete and Gaussian probability measures, labeled datasets and
//! conditional families built from them.

use std::io::Read;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;

/// Tolerance on the total mass of a weight vector.
pub const WEIGHT_TOL: f64 = 1e-9;

/// Finitely supported probability measure on R^d. Points are stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    dim: usize,
    points: Vec<f64>,
    weights: Vec<f64>,
}

/// Checks the weight vector and returns it renormalized to sum exactly to one
/// (up to rounding).
pub fn normalized_weights(weights: &[f64]) -> Result<Vec<f64>> {
    if weights.is_empty() {
        return Err(Error::EmptySupport);
    }
    for (index, &value) in weights.iter().enumerate() {
        if !(value >= 0.0) || !value.is_finite() {
            return Err(Error::NegativeWeight { index, value });
        }
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > WEIGHT_TOL {
        return Err(Error::WeightSum(sum));
    }
    Ok(weights.iter().map(|w| w / sum).collect())
}

fn flatten_points(points: &[Vec<f64>]) -> Result<(usize, Vec<f64>)> {
    let first = points.first().ok_or(Error::EmptySupport)?;
    let dim = first.len();
    if dim == 0 {
        return Err(Error::DimensionMismatch { expected: 1, actual: 0 });
    }
    let mut flat = Vec::with_capacity(dim * points.len());
    for p in points {
        if p.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, actual: p.len() });
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite coordinate in {p:?}")));
        }
        flat.extend_from_slice(p);
    }
    Ok((dim, flat))
}

impl DiscreteMeasure {
    pub fn new(points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        let (dim, flat) = flatten_points(&points)?;
        Self::from_flat(dim, flat, weights)
    }

    /// Builds a measure from row-major coordinates.
    pub fn from_flat(dim: usize, points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || points.is_empty() {
            return Err(Error::EmptySupport);
        }
        if dim == 0 {
            return Err(Error::DimensionMismatch { expected: 1, actual: 0 });
        }
        if points.len() != dim * weights.len() {
            return Err(Error::DimensionMismatch { expected: dim * weights.len(), actual: points.len() });
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite coordinate".into()));
        }
        let weights = normalized_weights(&weights)?;
        Ok(Self { dim, points, weights })
    }

    pub fn uniform(points: Vec<Vec<f64>>) -> Result<Self> {
        let n = points.len();
        if n == 0 {
            return Err(Error::EmptySupport);
        }
        Self::new(points, vec![1.0 / n as f64; n])
    }

    pub fn uniform_flat(dim: usize, points: Vec<f64>) -> Result<Self> {
        if dim == 0 || points.is_empty() {
            return Err(Error::EmptySupport);
        }
        let n = points.len() / dim;
        Self::from_flat(dim, points, vec![1.0 / n as f64; n])
    }

    pub fn dirac(point: Vec<f64>) -> Result<Self> {
        Self::new(vec![point], vec![1.0])
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn points_flat(&self) -> &[f64] {
        &self.points
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        self.points.chunks(self.dim).map(|c| c.to_vec()).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.points.chunks(self.dim).zip(self.weights.iter().cloned())
    }

    /// Re-checks every invariant.
    pub fn validate(&self) -> Result<()> {
        validate_discrete(&self.points(), &self.weights)
    }

    /// Pushes the measure forward through `f`, keeping weights and atom order.
    pub fn map_points(&self, mut f: impl FnMut(&[f64]) -> Result<Vec<f64>>) -> Result<Self> {
        let mut out = Vec::with_capacity(self.len());
        for p in self.points.chunks(self.dim) {
            out.push(f(p)?);
        }
        let (dim, flat) = flatten_points(&out)?;
        Ok(Self { dim, points: flat, weights: self.weights.clone() })
    }

    /// Same atoms with every point extended by `suffix`.
    pub fn with_suffix(&self, suffix: &[f64]) -> Self {
        let dim = self.dim + suffix.len();
        let mut points = Vec::with_capacity(dim * self.len());
        for p in self.points.chunks(self.dim) {
            points.extend_from_slice(p);
            points.extend_from_slice(suffix);
        }
        Self { dim, points, weights: self.weights.clone() }
    }

    /// Keeps the first `dim` coordinates of every atom.
    pub fn truncate_dims(&self, dim: usize) -> Result<Self> {
        if dim == 0 || dim > self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, actual: dim });
        }
        let points = self.points.chunks(self.dim).flat_map(|p| p[..dim].to_vec()).collect();
        Ok(Self { dim, points, weights: self.weights.clone() })
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for (p, w) in self.iter() {
            for (a, b) in m.iter_mut().zip(p) {
                *a += w * b;
            }
        }
        m
    }

    /// Largest pairwise distance between atoms.
    pub fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for i in 0..self.len() {
            for j in i + 1..self.len() {
                d = d.max(linalg::dist(self.point(i), self.point(j)));
            }
        }
        d
    }

    /// Mixture of measures on a common dimension.
    pub fn mixture(parts: &[(&DiscreteMeasure, f64)]) -> Result<Self> {
        let first = parts.first().ok_or(Error::EmptySupport)?;
        let dim = first.0.dim;
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for (m, a) in parts {
            if m.dim != dim {
                return Err(Error::DimensionMismatch { expected: dim, actual: m.dim });
            }
            points.extend_from_slice(&m.points);
            weights.extend(m.weights.iter().map(|w| w * a));
        }
        Self::from_flat(dim, points, weights)
    }
}

/// Validates raw points and weights against the discrete-measure invariants.
pub fn validate_discrete(points: &[Vec<f64>], weights: &[f64]) -> Result<()> {
    if points.is_empty() || weights.is_empty() {
        return Err(Error::EmptySupport);
    }
    if points.len() != weights.len() {
        return Err(Error::DimensionMismatch { expected: points.len(), actual: weights.len() });
    }
    flatten_points(points)?;
    normalized_weights(weights)?;
    Ok(())
}

/// Empirical measure of the given samples; duplicates stay separate atoms.
pub fn empirical_from_samples(points: Vec<Vec<f64>>, weights: Option<Vec<f64>>) -> Result<DiscreteMeasure> {
    match weights {
        Some(w) => {
            if w.len() != points.len() {
                return Err(Error::DimensionMismatch { expected: points.len(), actual: w.len() });
            }
            DiscreteMeasure::new(points, w)
        }
        None => DiscreteMeasure::uniform(points),
    }
}

/// Gaussian measure N(mean, covariance).
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMeasure {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl GaussianMeasure {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        if cov.nrows() != mean.len() || cov.ncols() != mean.len() {
            return Err(Error::DimensionMismatch { expected: mean.len(), actual: cov.nrows() });
        }
        if mean.is_empty() {
            return Err(Error::EmptySupport);
        }
        linalg::check_psd(&cov, 1e-9)?;
        Ok(Self { mean, cov: linalg::symmetrize(&cov) })
    }

    pub fn from_slices(mean: &[f64], cov_rows: &[f64]) -> Result<Self> {
        let d = mean.len();
        if cov_rows.len() != d * d {
            return Err(Error::DimensionMismatch { expected: d * d, actual: cov_rows.len() });
        }
        Self::new(DVector::from_column_slice(mean), DMatrix::from_row_slice(d, d, cov_rows))
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Pushforward through x -> a x + b.
    pub fn affine_pushforward(&self, a: &DMatrix<f64>, b: &DVector<f64>) -> Result<Self> {
        Self::new(a * &self.mean + b, a * &self.cov * a.transpose())
    }
}

/// Weighted records (x, c).
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    x_dim: usize,
    c_dim: usize,
    xs: Vec<f64>,
    cs: Vec<f64>,
    weights: Vec<f64>,
}

impl LabeledDataset {
    pub fn new(xs: Vec<Vec<f64>>, cs: Vec<Vec<f64>>, weights: Option<Vec<f64>>) -> Result<Self> {
        if xs.is_empty() {
            return Err(Error::EmptySupport);
        }
        if xs.len() != cs.len() {
            return Err(Error::DimensionMismatch { expected: xs.len(), actual: cs.len() });
        }
        let (x_dim, xf) = flatten_points(&xs)?;
        let (c_dim, cf) = flatten_points(&cs)?;
        let n = xs.len();
        let weights = match weights {
            Some(w) => {
                if w.len() != n {
                    return Err(Error::DimensionMismatch { expected: n, actual: w.len() });
                }
                normalized_weights(&w)?
            }
            None => vec![1.0 / n as f64; n],
        };
        Ok(Self { x_dim, c_dim, xs: xf, cs: cf, weights })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn x_dim(&self) -> usize {
        self.x_dim
    }

    pub fn c_dim(&self) -> usize {
        self.c_dim
    }

    pub fn x(&self, i: usize) -> &[f64] {
        &self.xs[i * self.x_dim..(i + 1) * self.x_dim]
    }

    pub fn c(&self, i: usize) -> &[f64] {
        &self.cs[i * self.c_dim..(i + 1) * self.c_dim]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    /// Joint measure on concatenated (x, c) points.
    pub fn joint(&self) -> DiscreteMeasure {
        let dim = self.x_dim + self.c_dim;
        let mut points = Vec::with_capacity(dim * self.len());
        for i in 0..self.len() {
            points.extend_from_slice(self.x(i));
            points.extend_from_slice(self.c(i));
        }
        DiscreteMeasure { dim, points, weights: self.weights.clone() }
    }

    /// Reads the CSV format `x1..xd,c1..ck[,w]`.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let (xs, cs, ws) = read_csv_columns(reader, true)?;
        Self::new(xs, cs, ws)
    }

    pub fn from_csv_path(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        Self::from_csv_reader(f)
    }
}

type CsvColumns = (Vec<Vec<f64>>, Vec<Vec<f64>>, Option<Vec<f64>>);

fn read_csv_columns<R: Read>(reader: R, labels: bool) -> Result<CsvColumns> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::Data(e.to_string()))?.clone();
    let mut x_cols = Vec::new();
    let mut c_cols = Vec::new();
    let mut w_col = None;
    for (i, h) in headers.iter().enumerate() {
        if h == "w" {
            w_col = Some(i);
        } else if let Some(k) = h.strip_prefix('x').and_then(|s| s.parse::<usize>().ok()) {
            x_cols.push((k, i));
        } else if let Some(k) = h.strip_prefix('c').and_then(|s| s.parse::<usize>().ok()) {
            c_cols.push((k, i));
        } else {
            return Err(Error::Data(format!("unrecognized column '{h}'")));
        }
    }
    x_cols.sort();
    c_cols.sort();
    if !labels && !c_cols.is_empty() {
        return Err(Error::Data("label columns are not allowed here".into()));
    }
    let groups: &[(&Vec<(usize, usize)>, char)] = if labels { &[(&x_cols, 'x'), (&c_cols, 'c')] } else { &[(&x_cols, 'x')] };
    for (cols, tag) in groups {
        if cols.is_empty() || cols.iter().enumerate().any(|(j, (k, _))| *k != j + 1) {
            return Err(Error::Data(format!("columns {tag}1..{tag}k must be present and contiguous")));
        }
    }
    let mut xs = Vec::new();
    let mut cs = Vec::new();
    let mut ws = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Data(e.to_string()))?;
        let field = |i: usize| -> Result<f64> {
            let s = rec.get(i).ok_or_else(|| Error::Data(format!("row {}: missing field", line + 2)))?;
            s.parse::<f64>().map_err(|_| Error::Data(format!("row {}: cannot parse '{s}'", line + 2)))
        };
        xs.push(x_cols.iter().map(|&(_, i)| field(i)).collect::<Result<Vec<_>>>()?);
        cs.push(c_cols.iter().map(|&(_, i)| field(i)).collect::<Result<Vec<_>>>()?);
        if let Some(i) = w_col {
            ws.push(field(i)?);
        }
    }
    Ok((xs, cs, w_col.map(|_| ws)))
}

/// Reads an unlabeled measure in the CSV format `x1..xd[,w]`; missing weights
/// are uniform.
pub fn measure_from_csv_reader<R: Read>(reader: R) -> Result<DiscreteMeasure> {
    let (xs, _, ws) = read_csv_columns(reader, false)?;
    empirical_from_samples(xs, ws)
}

pub fn measure_from_csv_path(path: &Path) -> Result<DiscreteMeasure> {
    let f = std::fs::File::open(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    measure_from_csv_reader(f)
}

/// Writes `x1..xd,w` with shortest round-trip decimals.
pub fn measure_to_csv<W: std::io::Write>(m: &DiscreteMeasure, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| Error::Data(e.to_string());
    let mut header: Vec<String> = (1..=m.dim()).map(|k| format!("x{k}")).collect();
    header.push("w".into());
    w.write_record(&header).map_err(io)?;
    for (x, wt) in m.iter() {
        let mut rec: Vec<String> = x.iter().map(|v| format!("{v:?}")).collect();
        rec.push(format!("{wt:?}"));
        w.write_record(&rec).map_err(io)?;
    }
    w.flush().map_err(|e| Error::Data(e.to_string()))
}

/// One measure per distinct label together with the label distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalFamily<M = DiscreteMeasure> {
    labels: Vec<Vec<f64>>,
    measures: Vec<M>,
    label_weights: Vec<f64>,
}

fn same_label(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

pub trait HasDim {
    fn data_dim(&self) -> usize;
}

impl HasDim for DiscreteMeasure {
    fn data_dim(&self) -> usize {
        self.dim
    }
}

impl HasDim for GaussianMeasure {
    fn data_dim(&self) -> usize {
        self.dim()
    }
}

impl<M: HasDim> ConditionalFamily<M> {
    pub fn new(labels: Vec<Vec<f64>>, measures: Vec<M>, label_weights: Vec<f64>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::EmptySupport);
        }
        if labels.len() != measures.len() || labels.len() != label_weights.len() {
            return Err(Error::DimensionMismatch { expected: labels.len(), actual: measures.len().min(label_weights.len()) });
        }
        let k = labels[0].len();
        for (i, l) in labels.iter().enumerate() {
            if l.len() != k {
                return Err(Error::DimensionMismatch { expected: k, actual: l.len() });
            }
            if labels[..i].iter().any(|o| same_label(o, l)) {
                return Err(Error::LabelMismatch(format!("duplicate label {l:?}")));
            }
        }
        let d = measures[0].data_dim();
        for m in &measures {
            if m.data_dim() != d {
                return Err(Error::DimensionMismatch { expected: d, actual: m.data_dim() });
            }
        }
        let label_weights = normalized_weights(&label_weights)?;
        Ok(Self { labels, measures, label_weights })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[Vec<f64>] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> &[f64] {
        &self.labels[i]
    }

    pub fn measures(&self) -> &[M] {
        &self.measures
    }

    pub fn measure(&self, i: usize) -> &M {
        &self.measures[i]
    }

    pub fn label_weights(&self) -> &[f64] {
        &self.label_weights
    }

    pub fn label_dim(&self) -> usize {
        self.labels[0].len()
    }

    pub fn data_dim(&self) -> usize {
        self.measures[0].data_dim()
    }

    /// Index of a label under bitwise equality.
    pub fn index_of(&self, c: &[f64]) -> Option<usize> {
        self.labels.iter().position(|l| same_label(l, c))
    }

    /// Same label structure with every measure replaced by `f(index, measure)`.
    pub fn try_map<N: HasDim>(&self, mut f: impl FnMut(usize, &M) -> Result<N>) -> Result<ConditionalFamily<N>> {
        let measures = self.measures.iter().enumerate().map(|(i, m)| f(i, m)).collect::<Result<Vec<_>>>()?;
        ConditionalFamily::new(self.labels.clone(), measures, self.label_weights.clone())
    }

    /// Checks that two families share labels in the same order.
    pub fn check_same_labels<N>(&self, other: &ConditionalFamily<N>) -> Result<()> {
        if self.labels.len() != other.labels.len()
            || self.labels.iter().zip(&other.labels).any(|(a, b)| !same_label(a, b))
        {
            return Err(Error::LabelMismatch(format!("{:?} vs {:?}", self.labels, other.labels)));
        }
        Ok(())
    }
}

impl ConditionalFamily<DiscreteMeasure> {
    /// Mixes the conditionals back into a joint measure on (x, c).
    pub fn flatten(&self) -> DiscreteMeasure {
        let dim = self.data_dim() + self.label_dim();
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for ((l, m), a) in self.labels.iter().zip(&self.measures).zip(&self.label_weights) {
            for (p, w) in m.iter() {
                points.extend_from_slice(p);
                points.extend_from_slice(l);
                weights.push(a * w);
            }
        }
        DiscreteMeasure { dim, points, weights }
    }

    /// Rebuilds a dataset from the family.
    pub fn to_dataset(&self) -> LabeledDataset {
        let joint = self.flatten();
        let d = self.data_dim();
        LabeledDataset {
            x_dim: d,
            c_dim: self.label_dim(),
            xs: joint.points.chunks(joint.dim).flat_map(|p| p[..d].to_vec()).collect(),
            cs: joint.points.chunks(joint.dim).flat_map(|p| p[d..].to_vec()).collect(),
            weights: joint.weights,
        }
    }
}

/// Groups records by exact label equality, in order of first appearance.
pub fn conditional_family_from_labeled(data: &LabeledDataset) -> Result<ConditionalFamily> {
    if data.is_empty() {
        return Err(Error::EmptySupport);
    }
    let mut labels: Vec<Vec<f64>> = Vec::new();
    let mut groups: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    for i in 0..data.len() {
        let c = data.c(i);
        let g = match labels.iter().position(|l| same_label(l, c)) {
            Some(g) => g,
            None => {
                labels.push(c.to_vec());
                groups.push((Vec::new(), Vec::new()));
                labels.len() - 1
            }
        };
        groups[g].0.extend_from_slice(data.x(i));
        groups[g].1.push(data.weight(i));
    }
    let mut measures = Vec::with_capacity(groups.len());
    let mut label_weights = Vec::with_capacity(groups.len());
    for (points, w) in groups {
        let mass: f64 = w.iter().sum();
        if mass <= 0.0 {
            return Err(Error::Data("label group with zero total weight".into()));
        }
        label_weights.push(mass);
        let weights = w.iter().map(|v| v / mass).collect();
        measures.push(DiscreteMeasure::from_flat(data.x_dim(), points, weights)?);
    }
    ConditionalFamily::new(labels, measures, label_weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn validation_examples() {
        assert!(validate_discrete(&[vec![0.0], vec![1.0]], &[0.5, 0.5]).is_ok());
        assert!(matches!(validate_discrete(&[vec![0.0], vec![1.0]], &[0.5, 0.6]), Err(Error::WeightSum(_))));
        assert!(matches!(
            validate_discrete(&[vec![0.0], vec![1.0]], &[-0.1, 1.1]),
            Err(Error::NegativeWeight { index: 0, .. })
        ));
        assert!(matches!(validate_discrete(&[vec![0.0], vec![1.0, 2.0]], &[0.5, 0.5]), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(validate_discrete(&[], &[]), Err(Error::EmptySupport)));
    }

    #[test]
    fn renormalizes_within_tolerance() {
        let m = DiscreteMeasure::new(vec![vec![0.0], vec![1.0]], vec![0.5, 0.5 + 5e-10]).unwrap();
        assert!((m.weights().iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn empirical_keeps_duplicates() {
        let m = empirical_from_samples(vec![vec![0.0], vec![0.0]], None).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.weights(), &[0.5, 0.5]);
        assert!(matches!(empirical_from_samples(vec![], None), Err(Error::EmptySupport)));
    }

    #[test]
    fn groups_by_label() {
        let data = LabeledDataset::new(vec![vec![0.0], vec![1.0], vec![2.0]], vec![vec![0.0], vec![0.0], vec![1.0]], None).unwrap();
        let fam = conditional_family_from_labeled(&data).unwrap();
        assert_eq!(fam.len(), 2);
        assert!((fam.label_weights()[0] - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(fam.measure(0).points(), vec![vec![0.0], vec![1.0]]);
        assert_eq!(fam.measure(1).points(), vec![vec![2.0]]);
    }

    #[test]
    fn negative_zero_is_a_distinct_label() {
        let data = LabeledDataset::new(vec![vec![0.0], vec![1.0]], vec![vec![0.0], vec![-0.0]], None).unwrap();
        assert_eq!(conditional_family_from_labeled(&data).unwrap().len(), 2);
    }

    #[test]
    fn csv_round_trip() {
        let text = "x1,x2,c1,w\n0,1,0,0.25\n2,3,1,0.75\n";
        let data = LabeledDataset::from_csv_reader(text.as_bytes()).unwrap();
        assert_eq!(data.x_dim(), 2);
        assert_eq!(data.c(1), &[1.0]);
        assert_eq!(data.weight(1), 0.75);
        assert!(LabeledDataset::from_csv_reader("x1,y\n0,1\n".as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn flatten_reproduces_joint(
            xs in proptest::collection::vec(-5.0f64..5.0, 1..20),
            ls in proptest::collection::vec(0u8..3, 1..20),
        ) {
            let n = xs.len().min(ls.len());
            let data = LabeledDataset::new(
                xs[..n].iter().map(|v| vec![*v]).collect(),
                ls[..n].iter().map(|v| vec![*v as f64]).collect(),
                None,
            ).unwrap();
            let fam = conditional_family_from_labeled(&data).unwrap();
            let flat = fam.flatten();
            let joint = data.joint();
            let mut a: Vec<(Vec<f64>, f64)> = flat.iter().map(|(p, w)| (p.to_vec(), w)).collect();
            let mut b: Vec<(Vec<f64>, f64)> = joint.iter().map(|(p, w)| (p.to_vec(), w)).collect();
            a.sort_by(|x, y| x.partial_cmp(y).unwrap());
            b.sort_by(|x, y| x.partial_cmp(y).unwrap());
            prop_assert_eq!(a.len(), b.len());
            for (x, y) in a.iter().zip(&b) {
                prop_assert_eq!(&x.0, &y.0);
                prop_assert!((x.1 - y.1).abs() < 1e-15);
            }
        }

        #[test]
        fn empirical_is_permutation_equivariant(
            xs in proptest::collection::vec(-5.0f64..5.0, 1..12),
            seed in 0u64..1000,
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut idx: Vec<usize> = (0..xs.len()).collect();
            idx.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let a = empirical_from_samples(xs.iter().map(|v| vec![*v]).collect(), None).unwrap();
            let b = empirical_from_samples(idx.iter().map(|&i| vec![xs[i]]).collect(), None).unwrap();
            for (k, &i) in idx.iter().enumerate() {
                prop_assert_eq!(b.point(k), a.point(i));
                prop_assert_eq!(b.weight(k), a.weight(i));
            }
        }
    }
}
