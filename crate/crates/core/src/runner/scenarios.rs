//! One function per scenario kind. Each fills a `Report` and pushes its
//! artifact files as `(name, bytes)`.

use std::path::Path;
use std::sync::Arc;

use serde_json::{Map, Value};

use crate::conditional::{expected_conditional_wasserstein, subcoupling_cost};
use crate::generator::{
    algorithm1_generate, check_conditions, fit_autoencoder, fit_transport_map, generated_curve, geodesic_generate, num,
    objective6, oracle_transport_map, theorem4_bound, theorem6_gap, AffineBijectionPair, FitTrace, GenerationMode, Pipeline,
    SourceLaw,
};
use crate::geodesic::{barycenter_multimarginal, select_label_weights, verify_constant_speed, wasserstein_variance, GeodesicCurve};
use crate::measures::{conditional_family_from_labeled, measure_to_csv, DiscreteMeasure};
use crate::ot::{exact_coupling, sinkhorn_coupling, wasserstein_p, Coupling, MetricSpec, MARGINAL_TOL};

use super::config::{pair_from_rows, EncoderChoice, GenerationChoice, MeasureSource, OtSolver, PipelineScenario, Scenario, TransportChoice};
use super::report::{nums, Artifact, Check, Report, Series};
use super::{max_tuples, verify, RunError, ScenarioConfig};

type Files = Vec<(String, Vec<u8>)>;

/// Tolerances pinned for the flags the runner asserts.
const EQUALITY_TOL: f64 = 1e-9;
const ATTAINMENT_TOL: f64 = 1e-8;
const CHAIN_TOL: f64 = 1e-6;
const A1_TOL: f64 = 1e-10;

pub(super) fn run(cfg: &ScenarioConfig, base: &Path, files: &mut Files) -> Result<Report, RunError> {
    let mut rep = Report::default();
    match &cfg.scenario {
        Scenario::Ot { source, target, solver } => ot(cfg, base, source, target, solver, &mut rep, files)?,
        Scenario::Geodesic { source, target, times, tol } => geodesic(cfg, base, source, target, times, *tol, &mut rep, files)?,
        Scenario::Barycenter { measures, alphas } => barycenter(base, measures, alphas, &mut rep, files)?,
        Scenario::Conditional { p_data, q_data } => {
            let p = p_data.load(base)?;
            let q = q_data.load(base)?;
            conditional(cfg, &p, &q, &mut rep, files)?
        }
        Scenario::Pipeline(ps) => pipeline(cfg, base, ps, &mut rep, files)?,
        Scenario::Verify { filter } => {
            for c in verify::run_suite(filter.as_deref(), cfg.seed)? {
                rep.check(c);
            }
            rep.set_count("checks", rep.checks.len());
            rep.set_count("failed", rep.failures());
        }
    }
    Ok(rep)
}

fn cloud(files: &mut Files, name: &str, m: &DiscreteMeasure) -> Result<String, RunError> {
    let mut buf = Vec::new();
    measure_to_csv(m, &mut buf)?;
    let file = format!("{name}.csv");
    files.push((file.clone(), buf));
    Ok(file)
}

fn matrix(files: &mut Files, name: &str, cpl: &Coupling) -> Result<String, RunError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| RunError::Io(e.to_string());
    w.write_record((1..=cpl.cols()).map(|j| format!("y{j}"))).map_err(err)?;
    for i in 0..cpl.rows() {
        w.write_record((0..cpl.cols()).map(|j| num(cpl.get(i, j)))).map_err(err)?;
    }
    let buf = w.into_inner().map_err(|e| RunError::Io(e.to_string()))?;
    let file = format!("{name}.csv");
    files.push((file.clone(), buf));
    Ok(file)
}

fn ot(
    cfg: &ScenarioConfig,
    base: &Path,
    source: &MeasureSource,
    target: &MeasureSource,
    solver: &OtSolver,
    rep: &mut Report,
    files: &mut Files,
) -> Result<(), RunError> {
    let (mu, nu) = (source.load(base)?, target.load(base)?);
    let metric = cfg.metric_spec()?;
    let (cpl, cost) = match solver {
        OtSolver::Exact => exact_coupling(&mu, &nu, &metric)?,
        OtSolver::Sinkhorn { epsilon, max_iter, tol } => {
            let r = sinkhorn_coupling(&mu, &nu, &metric, *epsilon, *max_iter, *tol)?;
            rep.set_count("sinkhorn_iterations", r.iterations);
            rep.set_value("sinkhorn_converged", r.converged.into());
            (r.coupling, r.cost)
        }
    };
    rep.set("cost", cost);
    rep.set("distance", cost.max(0.0).powf(1.0 / metric.p));
    let err = cpl.max_marginal_error();
    rep.set("max_marginal_error", err);
    rep.check(Check::at_most("ot.marginals", "coupling marginals equal the inputs", err, MARGINAL_TOL));
    let file = matrix(files, "coupling", &cpl)?;
    rep.artifacts.insert("coupling".into(), Artifact::Matrix { file });
    let s = cloud(files, "source", &mu)?;
    let t = cloud(files, "target", &nu)?;
    rep.artifacts.insert(
        "marginals".into(),
        Artifact::Clouds(vec![
            Series { name: "source".into(), t: Some(0.0), file: s },
            Series { name: "target".into(), t: Some(1.0), file: t },
        ]),
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn geodesic(
    cfg: &ScenarioConfig,
    base: &Path,
    source: &MeasureSource,
    target: &MeasureSource,
    times: &[f64],
    tol: f64,
    rep: &mut Report,
    files: &mut Files,
) -> Result<(), RunError> {
    let (mu, nu) = (source.load(base)?, target.load(base)?);
    let metric = cfg.metric_spec()?;
    let curve = GeodesicCurve::mccann(&mu, &nu, &metric)?;
    let speed = verify_constant_speed(&curve, times, tol)?;
    rep.set("endpoint_distance", speed.endpoint_distance);
    rep.set("max_abs_deviation", speed.max_abs_deviation);
    rep.check(Check::at_most("geodesic.constant_speed", "W_p(w(t), w(s)) = |t-s| W_p(w(0), w(1))", speed.max_abs_deviation, tol));
    let series = snapshots(files, "geodesic", times, |t| curve.at(t))?;
    rep.artifacts.insert("geodesic".into(), Artifact::Clouds(series));
    Ok(())
}

fn snapshots(
    files: &mut Files,
    name: &str,
    times: &[f64],
    at: impl Fn(f64) -> crate::Result<DiscreteMeasure>,
) -> Result<Vec<Series>, RunError> {
    let mut out = Vec::with_capacity(times.len());
    for (k, &t) in times.iter().enumerate() {
        let file = cloud(files, &format!("{name}_{k}"), &at(t)?)?;
        out.push(Series { name: format!("{name}_t{}", num(t)), t: Some(t), file });
    }
    Ok(out)
}

fn barycenter(base: &Path, sources: &[MeasureSource], alphas: &[f64], rep: &mut Report, files: &mut Files) -> Result<(), RunError> {
    let ms = sources.iter().map(|s| s.load(base)).collect::<Result<Vec<_>, _>>()?;
    let cap = max_tuples()?;
    let bary = barycenter_multimarginal(&ms, alphas, cap)?;
    let variance = wasserstein_variance(&ms, alphas, cap)?;
    let e2 = MetricSpec::euclidean(2.0)?;
    let mut attained = 0.0;
    for (m, a) in ms.iter().zip(alphas) {
        attained += a * wasserstein_p(&bary, m, &e2)?.powi(2);
    }
    rep.set("variance", variance);
    rep.set("attained", attained);
    rep.set_count("atoms", bary.len());
    rep.check(Check::at_most(
        "barycenter.attainment",
        "sum_m alpha_m W2^2(barycenter, P_m) equals the Wasserstein variance",
        (attained - variance).abs(),
        ATTAINMENT_TOL,
    ));
    let file = cloud(files, "barycenter", &bary)?;
    rep.artifacts.insert("barycenter".into(), Artifact::Clouds(vec![Series { name: "barycenter".into(), t: None, file }]));
    let mut inputs = Vec::new();
    for (k, m) in ms.iter().enumerate() {
        let file = cloud(files, &format!("input_{k}"), m)?;
        inputs.push(Series { name: format!("input_{k}"), t: None, file });
    }
    rep.artifacts.insert("inputs".into(), Artifact::Clouds(inputs));
    Ok(())
}

fn conditional(
    cfg: &ScenarioConfig,
    p: &crate::LabeledDataset,
    q: &crate::LabeledDataset,
    rep: &mut Report,
    files: &mut Files,
) -> Result<(), RunError> {
    let fam_p = conditional_family_from_labeled(p)?;
    let fam_q = conditional_family_from_labeled(q)?;
    let metric = cfg.metric_spec()?;
    let ecw = expected_conditional_wasserstein(&fam_p, &fam_q, &metric)?;
    let (sc, couplings) = subcoupling_cost(&fam_p, &fam_q, &metric)?;
    let mix = |f: &crate::ConditionalFamily| {
        let parts: Vec<_> = f.measures().iter().zip(f.label_weights()).map(|(m, w)| (m, *w)).collect();
        DiscreteMeasure::mixture(&parts)
    };
    let marginal = wasserstein_p(&mix(&fam_p)?, &mix(&fam_q)?, &metric)?;
    rep.set("expected_conditional_wasserstein", ecw);
    rep.set("subcoupling_cost", sc);
    rep.set("marginal_wasserstein", marginal);
    rep.set_value("labels", Value::Array(fam_p.labels().iter().map(|c| nums(c)).collect()));
    rep.set_value("label_weights", nums(fam_p.label_weights()));
    rep.check(Check::at_most(
        "conditional.subcoupling_equality",
        "sub-coupling cost equals the expected conditional Wasserstein distance",
        (sc - ecw).abs(),
        EQUALITY_TOL,
    ));
    rep.check(Check::at_most(
        "conditional.marginal_ordering",
        "W_p of the mixed marginals is at most the sub-coupling cost",
        marginal - sc,
        EQUALITY_TOL,
    ));
    for (k, cpl) in couplings.iter().enumerate() {
        let name = format!("coupling_label_{k}");
        let file = matrix(files, &name, cpl)?;
        rep.artifacts.insert(name, Artifact::Matrix { file });
    }
    Ok(())
}

fn trace_json(t: &FitTrace) -> Value {
    let mut m = Map::new();
    m.insert("iterations".into(), (t.losses.len().saturating_sub(1)).to_string().into());
    m.insert("final_loss".into(), num(t.losses.last().copied().unwrap_or(f64::NAN)).into());
    m.insert("best_iteration".into(), t.best_iteration.to_string().into());
    m.insert("converged".into(), t.converged.into());
    let cps = t.checkpoints.iter().map(|(i, v)| Value::Array(vec![i.to_string().into(), num(*v).into()])).collect();
    m.insert("checkpoints".into(), Value::Array(cps));
    Value::Object(m)
}

fn pipeline(cfg: &ScenarioConfig, base: &Path, ps: &PipelineScenario, rep: &mut Report, files: &mut Files) -> Result<(), RunError> {
    let data = ps.data.load(base)?;
    let fam = conditional_family_from_labeled(&data)?;
    let mut fit = cfg.fit.clone().unwrap_or_default();
    fit.seed = cfg.seed;
    fit.validate().map_err(RunError::config)?;
    let (p, eps) = (fit.p, fit.epsilon_label);
    let labels = fam.labels().to_vec();
    let k = labels.len();
    if ps.edge.0 >= k || ps.edge.1 >= k || ps.edge.0 == ps.edge.1 {
        return Err(RunError::Config(format!("at `scenario.edge`: need two distinct label indices below {k}")));
    }
    let pair = match &ps.encoder {
        EncoderChoice::Identity => AffineBijectionPair::identity(fam.data_dim(), labels.clone())?,
        EncoderChoice::Affine { matrices, offsets } => pair_from_rows(labels.clone(), matrices, offsets).map_err(RunError::config)?,
        EncoderChoice::Fit { prior } => {
            let prior = SourceLaw::Discrete(prior.load(base)?);
            let (pair, trace) = fit_autoencoder(&data, &prior, &fit)?;
            rep.set_value("encoder_fit", trace_json(&trace));
            pair
        }
    };
    let oracle = oracle_transport_map(&pair, &fam, p, eps)?;
    let tmap = match ps.transport {
        TransportChoice::Oracle => oracle.clone(),
        TransportChoice::Fit => {
            let (t, trace) = fit_transport_map(&pair, &data, &fit)?;
            let rise = trace.checkpoints.windows(2).map(|w| w[1].1 - w[0].1).fold(0.0, f64::max);
            rep.check(Check::at_most("pipeline.fit_monotone", "tracked objective never rises between checkpoints", rise, 1e-9));
            rep.set_value("transport_fit", trace_json(&trace));
            t
        }
    };
    let is_oracle = matches!(ps.transport, TransportChoice::Oracle);
    let obj = objective6(&tmap, &pair, &fit)?;
    let gap = theorem6_gap(&tmap, &oracle, &pair, &fit)?;
    let mut o = Map::new();
    o.insert("transport_cost".into(), num(obj.transport_cost).into());
    o.insert("match_data".into(), num(obj.match_data).into());
    o.insert("cycle".into(), num(obj.cycle).into());
    o.insert("total".into(), num(obj.total).into());
    rep.set_value("objective", Value::Object(o));
    rep.set("oracle_gap", gap);
    rep.check(Check::at_least("pipeline.oracle_gap", "no map beats the exact latent OT map on the transport objective", gap, -CHAIN_TOL));

    let bw = select_label_weights(&labels, &ps.target_label)?;
    rep.set_value("alphas", nums(bw.alphas()));
    rep.set_value("cbar", nums(bw.cbar()));
    let mode = match ps.generation {
        GenerationChoice::Exact => GenerationMode::Exact,
        GenerationChoice::Sampling { n } => GenerationMode::Sampling { n, seed: cfg.seed },
    };
    let vertices: Vec<Vec<f64>> = bw.labels().to_vec();
    let gen_pair = pair.clone();
    let generated = algorithm1_generate(&gen_pair, &tmap, &bw, mode)?;
    let out = generated.output.as_discrete()?.clone();
    let file = cloud(files, "generated", &out)?;
    rep.artifacts.insert("generated".into(), Artifact::Clouds(vec![Series { name: "generated".into(), t: None, file }]));
    rep.set_value("vertices", Value::Array(vertices.iter().map(|c| nums(c)).collect()));

    let t4 = theorem4_bound(&pair, &tmap, &bw, eps, max_tuples()?)?;
    let mut m = Map::new();
    m.insert("achieved".into(), num(t4.achieved).into());
    m.insert("infimum".into(), num(t4.infimum).into());
    m.insert("gap".into(), num(t4.gap).into());
    m.insert("upper_bound".into(), num(t4.upper_bound).into());
    rep.set_value("barycenter_chain", Value::Object(m));
    rep.check(Check::at_least("pipeline.chain_lower", "achieved cost is at least the latent infimum", t4.gap, -CHAIN_TOL));
    let upper = Check::at_most(
        "pipeline.chain_upper",
        "achieved minus infimum is at most the transport inconsistency bound",
        t4.gap - t4.upper_bound,
        CHAIN_TOL,
    );
    rep.check(if is_oracle { upper } else { upper.advisory() });

    let diag = check_conditions(&pair, &data, A1_TOL)?;
    rep.set("a1_residual", diag.a1_residual);
    rep.set_value("a2_duplicate_fraction", nums(&diag.a2_duplicate_fraction));
    rep.set("a5_max", diag.a5_max);
    rep.set_value("a4_matrix", Value::Array(diag.a4_matrix.iter().map(|r| nums(r)).collect()));
    rep.check(Check::at_most("pipeline.a1_inverse", "Gen(Enc(x,c),c) = x and Enc(Gen(z,c),c) = z", diag.a1_residual, A1_TOL));

    let (c0, c1) = (labels[ps.edge.0].clone(), labels[ps.edge.1].clone());
    let series = snapshots(files, "geodesic", &ps.times, |t| {
        let g = geodesic_generate(&pair, &tmap, &c0, &c1, t, GenerationMode::Exact)?;
        g.output.as_discrete().cloned()
    })?;
    rep.artifacts.insert("geodesic".into(), Artifact::Clouds(series));
    let (v0, v1) = (fam.measure(ps.edge.0), fam.measure(ps.edge.1));
    let permutation = v0.len() == v1.len() && v0.weights().iter().chain(v1.weights()).all(|w| *w == v0.weight(0));
    let curve = generated_curve(Arc::new(pair.clone()), Arc::new(tmap.clone()), &c0, &c1, p, eps)?;
    let speed = verify_constant_speed(&curve, &ps.times, CHAIN_TOL)?;
    rep.set("edge_speed_deviation", speed.max_abs_deviation);
    let c = Check::at_most("pipeline.edge_constant_speed", "generated edge is a constant-speed geodesic", speed.max_abs_deviation, CHAIN_TOL);
    rep.check(if is_oracle && permutation { c } else { c.advisory().with_detail("vertices admit no permutation map or the map is fitted") });

    let saved = Pipeline { pair, transport: tmap, config: fit, seed: cfg.seed };
    files.push(("pipeline.json".into(), (saved.to_json()? + "\n").into_bytes()));
    rep.artifacts.insert("pipeline".into(), Artifact::Document { file: "pipeline.json".into() });
    Ok(())
}
