//! Dataset and reference files on disk.

use copdep::data::{load_dataset, write_dataset, Dataset, RandomStream};
use copdep::multivariance::MultivarianceKind;
use copdep::pvalues::{build_h0_reference, ReferenceDistribution};
use copdep::{CndfSpec, Error, StatisticSpec};
use ndarray::array;

#[test]
fn dataset_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    let values = array![
        [0.1, 1e-300, -2.5],
        [1.0 / 3.0, 7.0, f64::MAX],
        [-0.0, 42.0, 1e16 + 2.0]
    ];
    let ds = Dataset::with_names(values, vec![1, 2], vec!["a".into(), "b".into(), "c".into()]).unwrap();
    write_dataset(&path, &ds).unwrap();
    let back = load_dataset(&path, &[1, 2]).unwrap();
    assert_eq!(back.values(), ds.values());
    assert_eq!(back.names(), ds.names());
    assert!(matches!(
        load_dataset(&path, &[1, 1]),
        Err(Error::GroupingMismatch { .. })
    ));
}

#[test]
fn missing_file_reports_its_path() {
    let err = load_dataset("/nonexistent/dir/d.csv", &[1]).unwrap_err();
    assert!(err.to_string().contains("/nonexistent/dir/d.csv"), "{err}");
}

#[test]
fn reference_file_is_reproducible_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let spec = StatisticSpec::multivariance(MultivarianceKind::NormalizedTotal, CndfSpec::Euclidean);
    let paths = [dir.path().join("a.ref"), dir.path().join("b.ref")];
    for p in &paths {
        build_h0_reference(spec, &[1, 1, 1], 25, 1000, RandomStream::new(3))
            .unwrap()
            .write(p)
            .unwrap();
    }
    let bytes = std::fs::read(&paths[0]).unwrap();
    assert_eq!(bytes, std::fs::read(&paths[1]).unwrap());
    assert!(bytes.starts_with(b"COPDEP-REF 1\n"));

    let r = ReferenceDistribution::read(&paths[0]).unwrap();
    assert_eq!(r.count(), 1000);
    assert_eq!(r.key().statistic, "normalized-total/euclidean");
    assert!(r.samples().windows(2).all(|w| w[0] <= w[1]));

    std::fs::write(&paths[1], &bytes[..bytes.len() - 3]).unwrap();
    assert!(matches!(
        ReferenceDistribution::read(&paths[1]),
        Err(Error::ReferenceFormat(_))
    ));
}
