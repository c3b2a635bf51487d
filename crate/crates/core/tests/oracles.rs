mod common;

use common::*;
use condgeo::measures::DiscreteMeasure;

#[test]
fn oracles_agree_on_a_sorted_instance() {
    let x = vec![vec![0.0], vec![1.0], vec![3.0]];
    let y = vec![vec![2.0], vec![0.5], vec![1.5]];
    // Sorted matching in 1-D.
    let sorted = ((0.0f64 - 0.5).powi(2) + (1.0f64 - 1.5).powi(2) + (3.0f64 - 2.0).powi(2)) / 3.0;
    assert!((permutation_cost(&x, &y, 2.0) - sorted).abs() < 1e-15);
    let mu = DiscreteMeasure::uniform(x).unwrap();
    let nu = DiscreteMeasure::uniform(y).unwrap();
    assert!((lp_wasserstein(&mu, &nu, 2.0).powi(2) - sorted).abs() < 1e-12);
    assert!((quantile_w2(&mu, &nu).powi(2) - sorted).abs() < 1e-12);
}

#[test]
fn dense_lp_variance_of_two_measures_is_weighted_transport() {
    // For two measures the tuple cost is α1 α2 ‖x − y‖².
    let mu = DiscreteMeasure::uniform(vec![vec![0.0], vec![2.0]]).unwrap();
    let nu = DiscreteMeasure::uniform(vec![vec![1.0], vec![5.0]]).unwrap();
    let v = lp_variance(&[mu.clone(), nu.clone()], &[0.25, 0.75]);
    assert!((v - 0.25 * 0.75 * lp_wasserstein(&mu, &nu, 2.0).powi(2)).abs() < 1e-12);
}

#[test]
fn heap_enumeration_visits_every_permutation() {
    // The only zero-cost matching of a shuffled copy is the inverse shuffle.
    let x: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64]).collect();
    let y: Vec<Vec<f64>> = [3, 5, 0, 4, 1, 2].iter().map(|&i| vec![i as f64]).collect();
    assert_eq!(permutation_cost(&x, &y, 1.0), 0.0);
}
