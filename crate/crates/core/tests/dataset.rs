use std::io::Write;

use evbs::dataset::{acf, descriptive_stats, ingest_csv, IngestConfig, MomentConvention};
use evbs::{Error, RngState};

#[test]
fn normal_sample_moments() {
    let mut rng = RngState::new(17);
    let v: Vec<f64> = (0..100_000).map(|_| rng.standard_normal()).collect();
    let d = descriptive_stats(&v, MomentConvention::Raw).unwrap();
    assert!(d.skewness.unwrap().abs() < 0.03);
    assert!((d.kurtosis.unwrap() - 3.0).abs() < 0.1);
    let b = descriptive_stats(&v, MomentConvention::BiasCorrected).unwrap();
    assert!((b.skewness.unwrap() - d.skewness.unwrap()).abs() < 1e-4);
}

#[test]
fn white_noise_acf_stays_in_band() {
    let mut rng = RngState::new(23);
    let v: Vec<f64> = (0..10_000).map(|_| rng.standard_normal()).collect();
    let a = acf(&v, 50).unwrap();
    assert_eq!(a.values[0], 1.0);
    assert!(a.violations().len() as f64 <= 0.07 * 50.0);
}

#[test]
fn ingest_from_file_with_custom_columns() {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    writeln!(f, "month,speed,p,other").unwrap();
    for i in 0..12 {
        writeln!(f, "2010-{:02},{},{},x", i + 1, 10.0 + i as f64, 1000.0 + (i * 7 % 5) as f64).unwrap();
    }
    let cfg = IngestConfig {
        date_column: "month".into(),
        response_column: "speed".into(),
        covariate_columns: vec!["p".into()],
        log_response: false,
        bands: vec![],
    };
    let d = ingest_csv(f.path(), &cfg).unwrap();
    assert_eq!(d.data.n(), 12);
    assert_eq!(d.data.y()[3], 13.0);
    assert_eq!(d.records[0].line, 2);
}

#[test]
fn missing_file_is_an_io_error() {
    let e = ingest_csv(std::path::Path::new("/nonexistent/wind.csv"), &IngestConfig::default()).unwrap_err();
    assert!(matches!(e, Error::Io(_)));
}
