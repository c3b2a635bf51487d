//! Pipeline state (pair, transport map, fit configuration, seed) as JSON.
//! Numbers are shortest round-trip decimal strings and matrices are
//! row-major, so a load/save cycle is bit-exact.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{matrix_from_rows, matrix_to_rows};
use crate::measures::{ConditionalFamily, DiscreteMeasure, GaussianMeasure};

use super::{AffineBijectionPair, AffineMap, FitConfig, PointMap, Provenance, SourceLaw, TransportEntry, TransportMap};

pub const PIPELINE_SCHEMA: &str = "condgeo.pipeline.v1";

/// Shortest decimal string that parses back to the same `f64`.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}

fn nums(v: &[f64]) -> Vec<String> {
    v.iter().map(|x| num(*x)).collect()
}

fn parse(s: &str) -> Result<f64> {
    s.parse::<f64>().map_err(|_| Error::Data(format!("not a number: {s:?}")))
}

fn parse_all(v: &[String]) -> Result<Vec<f64>> {
    v.iter().map(|s| parse(s)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pipeline {
    pub pair: AffineBijectionPair,
    pub transport: TransportMap,
    pub config: FitConfig,
    pub seed: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PipelineDoc {
    schema: String,
    seed: String,
    config: FitConfig,
    pair: PairDoc,
    transport: TransportDoc,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PairDoc {
    dim: usize,
    labels: Vec<Vec<String>>,
    matrices: Vec<Vec<String>>,
    offsets: Vec<Vec<String>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TransportDoc {
    provenance: String,
    labels: Vec<Vec<String>>,
    label_weights: Vec<String>,
    laws: Vec<LawDoc>,
    entries: Vec<EntryDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum LawDoc {
    Discrete { dim: usize, points: Vec<String>, weights: Vec<String> },
    Gaussian { mean: Vec<String>, cov: Vec<String> },
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum EntryDoc {
    Table { from: usize, to: usize, projected: bool, targets: Vec<String> },
    Affine { from: usize, to: usize, projected: bool, matrix: Vec<String>, offset: Vec<String> },
}

fn law_doc(l: &SourceLaw) -> LawDoc {
    match l {
        SourceLaw::Discrete(m) => LawDoc::Discrete { dim: m.dim(), points: nums(m.points_flat()), weights: nums(m.weights()) },
        SourceLaw::Gaussian(g) => LawDoc::Gaussian { mean: nums(g.mean.as_slice()), cov: nums(&matrix_to_rows(&g.cov)) },
    }
}

fn law_from(d: &LawDoc) -> Result<SourceLaw> {
    Ok(match d {
        LawDoc::Discrete { dim, points, weights } => {
            SourceLaw::Discrete(DiscreteMeasure::from_flat(*dim, parse_all(points)?, parse_all(weights)?)?)
        }
        LawDoc::Gaussian { mean, cov } => SourceLaw::Gaussian(GaussianMeasure::from_slices(&parse_all(mean)?, &parse_all(cov)?)?),
    })
}

impl Pipeline {
    pub fn to_json(&self) -> Result<String> {
        let d = self.pair.dim();
        let pair = PairDoc {
            dim: d,
            labels: self.pair.labels().iter().map(|c| nums(c)).collect(),
            matrices: self.pair.maps().iter().map(|m| nums(&matrix_to_rows(m.matrix()))).collect(),
            offsets: self.pair.maps().iter().map(|m| nums(m.offset().as_slice())).collect(),
        };
        let fam = self.transport.family();
        let entries = self
            .transport
            .entries()
            .iter()
            .map(|e| match &e.map {
                PointMap::Table { targets, .. } => {
                    EntryDoc::Table { from: e.from, to: e.to, projected: e.projected, targets: nums(targets) }
                }
                PointMap::Affine { matrix, offset } => EntryDoc::Affine {
                    from: e.from,
                    to: e.to,
                    projected: e.projected,
                    matrix: nums(&matrix_to_rows(matrix)),
                    offset: nums(offset.as_slice()),
                },
            })
            .collect();
        let transport = TransportDoc {
            provenance: self.transport.provenance().as_str().into(),
            labels: fam.labels().iter().map(|c| nums(c)).collect(),
            label_weights: nums(fam.label_weights()),
            laws: fam.measures().iter().map(law_doc).collect(),
            entries,
        };
        let doc = PipelineDoc { schema: PIPELINE_SCHEMA.into(), seed: self.seed.to_string(), config: self.config.clone(), pair, transport };
        serde_json::to_string_pretty(&doc).map_err(|e| Error::Data(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(s);
        let doc: PipelineDoc = serde_path_to_error::deserialize(de).map_err(|e| Error::Data(format!("{}: {}", e.path(), e.inner())))?;
        if doc.schema != PIPELINE_SCHEMA {
            return Err(Error::Data(format!("unsupported schema {:?}", doc.schema)));
        }
        let seed = doc.seed.parse::<u64>().map_err(|_| Error::Data(format!("bad seed {:?}", doc.seed)))?;
        let d = doc.pair.dim;
        let labels = doc.pair.labels.iter().map(|c| parse_all(c)).collect::<Result<Vec<_>>>()?;
        if doc.pair.matrices.len() != labels.len() || doc.pair.offsets.len() != labels.len() {
            return Err(Error::Data("pair needs one matrix and offset per label".into()));
        }
        let mut maps = Vec::with_capacity(labels.len());
        for (m, b) in doc.pair.matrices.iter().zip(&doc.pair.offsets) {
            let m = parse_all(m)?;
            if m.len() != d * d {
                return Err(Error::DimensionMismatch { expected: d * d, actual: m.len() });
            }
            maps.push(AffineMap::new(matrix_from_rows(d, d, &m), nalgebra::DVector::from_vec(parse_all(b)?))?);
        }
        let pair = AffineBijectionPair::new(labels, maps)?;
        let t = &doc.transport;
        let fam = ConditionalFamily::new(
            t.labels.iter().map(|c| parse_all(c)).collect::<Result<Vec<_>>>()?,
            t.laws.iter().map(law_from).collect::<Result<Vec<_>>>()?,
            parse_all(&t.label_weights)?,
        )?;
        let provenance = match t.provenance.as_str() {
            "exact_latent_ot" => Provenance::ExactLatentOt,
            "fitted" => Provenance::Fitted,
            other => return Err(Error::Data(format!("unknown provenance {other:?}"))),
        };
        let mut entries = Vec::with_capacity(t.entries.len());
        for e in &t.entries {
            entries.push(match e {
                EntryDoc::Table { from, to, projected, targets } => {
                    let SourceLaw::Discrete(src) = fam.measures().get(*from).ok_or_else(|| Error::Data(format!("entry source {from}")))? else {
                        return Err(Error::Data("table entry on a Gaussian law".into()));
                    };
                    TransportEntry {
                        from: *from,
                        to: *to,
                        map: PointMap::Table { sources: src.clone(), targets: parse_all(targets)? },
                        projected: *projected,
                    }
                }
                EntryDoc::Affine { from, to, projected, matrix, offset } => {
                    let m = parse_all(matrix)?;
                    let o = parse_all(offset)?;
                    if m.len() != o.len() * o.len() {
                        return Err(Error::DimensionMismatch { expected: o.len() * o.len(), actual: m.len() });
                    }
                    TransportEntry {
                        from: *from,
                        to: *to,
                        map: PointMap::Affine { matrix: matrix_from_rows(o.len(), o.len(), &m), offset: nalgebra::DVector::from_vec(o) },
                        projected: *projected,
                    }
                }
            });
        }
        let transport = TransportMap::new(fam, entries, provenance)?;
        Ok(Self { pair, transport, config: doc.config, seed })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::oracle_transport_map;
    use nalgebra::{DMatrix, DVector};

    #[test]
    fn round_trip_is_bit_exact() {
        let labels = vec![vec![0.0], vec![0.1]];
        let pair = AffineBijectionPair::from_parts(
            labels.clone(),
            vec![DMatrix::from_row_slice(2, 2, &[1.0 / 3.0, 0.2, -0.7, 2.0]), DMatrix::identity(2, 2)],
            vec![DVector::from_vec(vec![1e-300, -0.0]), DVector::from_vec(vec![0.1, 7.0])],
        )
        .unwrap();
        let m = |v: &[[f64; 2]]| DiscreteMeasure::uniform(v.iter().map(|p| p.to_vec()).collect()).unwrap();
        let fam = ConditionalFamily::new(labels, vec![m(&[[0.0, 1.0], [0.3, 0.1]]), m(&[[5.0, 1.0], [std::f64::consts::PI, 2.0]])], vec![1.0 / 3.0, 2.0 / 3.0]).unwrap();
        let t = oracle_transport_map(&pair, &fam, 2.0, 1.0).unwrap();
        let p = Pipeline { pair, transport: t, config: FitConfig::default(), seed: u64::MAX };
        let s = p.to_json().unwrap();
        let back = Pipeline::from_json(&s).unwrap();
        assert_eq!(back, p);
        assert_eq!(back.to_json().unwrap(), s);
    }

    #[test]
    fn rejects_other_schemas() {
        let pair = AffineBijectionPair::identity(1, vec![vec![0.0], vec![1.0]]).unwrap();
        let fam = ConditionalFamily::new(
            vec![vec![0.0], vec![1.0]],
            vec![DiscreteMeasure::dirac(vec![0.0]).unwrap(), DiscreteMeasure::dirac(vec![1.0]).unwrap()],
            vec![0.5, 0.5],
        )
        .unwrap();
        let t = oracle_transport_map(&pair, &fam, 2.0, 1.0).unwrap();
        let s = Pipeline { pair, transport: t, config: FitConfig::default(), seed: 1 }.to_json().unwrap();
        let s = s.replace(PIPELINE_SCHEMA, "condgeo.pipeline.v0");
        assert!(matches!(Pipeline::from_json(&s), Err(Error::Data(_))));
    }
}
