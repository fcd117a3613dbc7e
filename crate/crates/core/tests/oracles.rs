//! Fast estimators against literal reference implementations.

mod common;

use common::*;
use copdep::data::{draw_uniforms, Dataset, RandomStream};
use copdep::dhsic::dhsic_estimate;
use copdep::kernels::CndfSpec;
use copdep::multivariance::{multivariance, MultivarianceKind};
use copdep::transform::empirical_transform_dataset;
use copdep::{PreparedStatistic, StatisticSpec};
use rand::Rng;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + b.abs())
}

#[test]
fn multivariance_kinds_match_subset_enumeration() {
    let mut r = rng(1);
    for trial in 0..40 {
        let n = r.random_range(2..=5);
        let n_obs = r.random_range(3..=30);
        let grouping: Vec<usize> = (0..n).map(|_| r.random_range(1..=2)).collect();
        let ds = random_dataset(&mut r, n_obs, &grouping);
        let mut kinds = vec![
            MultivarianceKind::Single,
            MultivarianceKind::Total,
            MultivarianceKind::NormalizedSingle,
            MultivarianceKind::NormalizedTotal,
        ];
        kinds.extend((2..=n).map(MultivarianceKind::MFold));
        for kind in kinds {
            let fast = multivariance(&ds, kind, CndfSpec::Euclidean).unwrap().value;
            let slow = multivariance_by_subsets(&ds, kind).max(0.0);
            assert!(close(fast, slow, 1e-10), "trial {trial} {kind}: {fast} vs {slow}");
        }
    }
}

#[test]
fn prepared_statistic_agrees_with_direct_path() {
    let mut r = rng(2);
    let ds = random_dataset(&mut r, 25, &[1, 2, 1]);
    for kind in [
        MultivarianceKind::Total,
        MultivarianceKind::MFold(3),
        MultivarianceKind::NormalizedTotal,
    ] {
        let spec = StatisticSpec::multivariance(kind, CndfSpec::Euclidean);
        let p = PreparedStatistic::new(&ds, spec).unwrap();
        let direct = multivariance(&ds, kind, CndfSpec::Euclidean).unwrap();
        assert_eq!(p.value().unwrap(), direct.value);
        assert_eq!(p.scaled().unwrap(), direct.scaled);
    }
}

#[test]
fn dhsic_three_term_matches_expanded_form() {
    let mut r = rng(3);
    for trial in 0..20 {
        let n = r.random_range(2..=3);
        let n_obs = r.random_range(2..=if n == 3 { 8 } else { 12 });
        let grouping: Vec<usize> = (0..n).map(|_| r.random_range(1..=2)).collect();
        let ds = random_dataset(&mut r, n_obs, &grouping);
        let delta = [0.5, 1.0, 3.0][trial % 3];
        let spec = CndfSpec::gaussian(delta).unwrap();
        let fast = dhsic_estimate(&ds.margins(), &vec![spec; n]).unwrap().value;
        let slow = dhsic_expanded(&ds, delta);
        assert!((fast - slow.max(0.0)).abs() < 1e-12, "trial {trial}: {fast} vs {slow}");
    }
}

#[test]
fn sorted_transform_matches_pairwise_definition() {
    let mut r = rng(4);
    for _ in 0..30 {
        let n_obs = r.random_range(1..60);
        // few distinct values so that ties are common
        let columns: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..n_obs).map(|_| r.random_range(0..5) as f64 * 0.5).collect())
            .collect();
        let ds = Dataset::from_columns(&columns).unwrap();
        let draws = draw_uniforms(n_obs, 3, RandomStream::new(r.random()));
        let t = empirical_transform_dataset(&ds, &draws).unwrap();
        for (c, column) in columns.iter().enumerate() {
            let expected = transform_by_pairs(column, &draws.values().column(c).to_vec());
            let got = t.dataset().column(c).to_vec();
            for (g, e) in got.iter().zip(&expected) {
                assert!((g - e).abs() < 1e-15, "{g} vs {e}");
            }
        }
    }
}
