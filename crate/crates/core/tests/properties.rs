mod common;

use common::{dist, lp_wasserstein};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use condgeo::conditional::{expected_conditional_wasserstein, subcoupling_cost};
use condgeo::generator::{d_enc, AffineBijectionPair};
use condgeo::geodesic::mccann_interpolant;
use condgeo::measures::{ConditionalFamily, DiscreteMeasure};
use condgeo::ot::{exact_coupling, sinkhorn_coupling, wasserstein_p, MetricSpec};

fn measure(d: usize, max: usize) -> impl Strategy<Value = DiscreteMeasure> {
    (1..=max).prop_flat_map(move |n| {
        (proptest::collection::vec(proptest::collection::vec(-3.0f64..3.0, d), n), proptest::collection::vec(0.05f64..1.0, n))
            .prop_map(|(pts, w)| {
                let s: f64 = w.iter().sum();
                DiscreteMeasure::new(pts, w.iter().map(|v| v / s).collect()).unwrap()
            })
    })
}

fn invertible(d: usize) -> impl Strategy<Value = (DMatrix<f64>, DVector<f64>)> {
    (proptest::collection::vec(-0.4f64..0.4, d * d), proptest::collection::vec(-2.0f64..2.0, d)).prop_map(move |(a, b)| {
        (DMatrix::identity(d, d) + DMatrix::from_row_slice(d, d, &a), DVector::from_vec(b))
    })
}

/// Mixture of the conditionals by label weight, labels dropped.
fn mixed(f: &ConditionalFamily) -> DiscreteMeasure {
    let (mut pts, mut ws) = (Vec::new(), Vec::new());
    for k in 0..f.len() {
        for (x, w) in f.measure(k).iter() {
            pts.push(x.to_vec());
            ws.push(f.label_weights()[k] * w);
        }
    }
    DiscreteMeasure::new(pts, ws).unwrap()
}

fn e(p: f64) -> MetricSpec {
    MetricSpec::euclidean(p).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exact_plans_are_feasible(mu in measure(2, 7), nu in measure(2, 7)) {
        let (plan, cost) = exact_coupling(&mu, &nu, &e(2.0)).unwrap();
        prop_assert!(plan.max_marginal_error() <= 1e-9);
        prop_assert!(plan.matrix().iter().all(|&v| v >= 0.0));
        prop_assert!((cost - lp_wasserstein(&mu, &nu, 2.0).powi(2)).abs() <= 1e-9);
    }

    #[test]
    fn sinkhorn_plans_are_feasible(mu in measure(1, 6), nu in measure(1, 6), eps in 0.05f64..1.0) {
        let r = sinkhorn_coupling(&mu, &nu, &e(2.0), eps, 5000, 1e-10).unwrap();
        prop_assert!(r.coupling.max_marginal_error() <= 1e-8);
        let (_, exact) = exact_coupling(&mu, &nu, &e(2.0)).unwrap();
        prop_assert!(r.cost >= exact - 1e-9);
    }

    #[test]
    fn wasserstein_is_a_metric(a in measure(2, 5), b in measure(2, 5), c in measure(2, 5), p in 1.0f64..3.0) {
        let m = e(p);
        let ab = wasserstein_p(&a, &b, &m).unwrap();
        prop_assert!((ab - wasserstein_p(&b, &a, &m).unwrap()).abs() <= 1e-9);
        prop_assert!(wasserstein_p(&a, &a, &m).unwrap() <= 1e-9);
        let ac = wasserstein_p(&a, &c, &m).unwrap();
        let cb = wasserstein_p(&c, &b, &m).unwrap();
        prop_assert!(ab <= ac + cb + 1e-8);
    }

    #[test]
    fn cost_ignores_atom_order(mu in measure(2, 6), nu in measure(2, 6), seed in any::<u64>()) {
        let n = mu.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|&i| (seed.rotate_left(i as u32 * 7) ^ i as u64, i));
        let shuffled = DiscreteMeasure::new(
            order.iter().map(|&i| mu.point(i).to_vec()).collect(),
            order.iter().map(|&i| mu.weight(i)).collect(),
        )
        .unwrap();
        let a = wasserstein_p(&mu, &nu, &e(2.0)).unwrap();
        let b = wasserstein_p(&shuffled, &nu, &e(2.0)).unwrap();
        prop_assert!((a - b).abs() <= 1e-9);
    }

    #[test]
    fn subcoupling_bounds_marginal_transport(ps in proptest::collection::vec(measure(1, 4), 1..4), qs in proptest::collection::vec(measure(1, 4), 3)) {
        let k = ps.len();
        let labels: Vec<Vec<f64>> = (0..k).map(|i| vec![i as f64]).collect();
        let w = vec![1.0 / k as f64; k];
        let fp = ConditionalFamily::new(labels.clone(), ps, w.clone()).unwrap();
        let fq = ConditionalFamily::new(labels, qs[..k].to_vec(), w).unwrap();
        let (sc, _) = subcoupling_cost(&fp, &fq, &e(2.0)).unwrap();
        let ecw = expected_conditional_wasserstein(&fp, &fq, &e(2.0)).unwrap();
        prop_assert!((sc - ecw).abs() <= 1e-9);
        let marg = wasserstein_p(&mixed(&fp), &mixed(&fq), &e(2.0)).unwrap();
        prop_assert!(sc >= marg - 1e-9);
    }

    #[test]
    fn mccann_hits_its_endpoints(mu in measure(2, 5), nu in measure(2, 5)) {
        let m0 = mccann_interpolant(&mu, &nu, 0.0, &e(2.0)).unwrap();
        let m1 = mccann_interpolant(&mu, &nu, 1.0, &e(2.0)).unwrap();
        // Atoms land exactly on the endpoints; split weights re-sum to roundoff.
        for (m, end) in [(&m0, &mu), (&m1, &nu)] {
            prop_assert!(m.iter().all(|(x, _)| end.iter().any(|(y, _)| x == y)));
            prop_assert!(exact_coupling(m, end, &e(2.0)).unwrap().1 <= 1e-14);
        }
    }

    #[test]
    fn affine_pairs_invert_exactly(
        (a, b) in invertible(2),
        xs in proptest::collection::vec(proptest::collection::vec(-5.0f64..5.0, 2), 1..10),
    ) {
        let pair = AffineBijectionPair::from_parts(vec![vec![0.0]], vec![a], vec![b]).unwrap();
        for x in &xs {
            let z = pair.encode(x, &[0.0]).unwrap();
            prop_assert!(dist(&pair.generate(&z, &[0.0]).unwrap(), x) <= 1e-10);
        }
    }

    #[test]
    fn d_enc_is_an_isometry_of_encoded_space(
        (a0, b0) in invertible(2),
        (a1, b1) in invertible(2),
        x in proptest::collection::vec(-3.0f64..3.0, 2),
        y in proptest::collection::vec(-3.0f64..3.0, 2),
        c in 0.1f64..3.0,
    ) {
        let labels = vec![vec![0.0], vec![c]];
        let pair = AffineBijectionPair::from_parts(labels.clone(), vec![a0, a1], vec![b0, b1]).unwrap();
        let lhs = d_enc(&pair, (&x, &labels[0]), (&y, &labels[1]), 1.0).unwrap();
        let mut zx = pair.encode(&x, &labels[0]).unwrap();
        zx.push(0.0);
        let mut zy = pair.encode(&y, &labels[1]).unwrap();
        zy.push(c);
        prop_assert!((lhs - dist(&zx, &zy)).abs() <= 1e-9);
    }
}
