use eigenspline::datagen::{spring_mass_series, SpringParams};
use eigenspline::gensol::BasisLayout;
use eigenspline::pipeline::{discover, sparsity_map, Profile, RunConfig, RunReport};
use eigenspline::series::TimeSeries;

fn ci_spring(seed: u64) -> RunConfig {
    let mut cfg = RunConfig::spring().with_profile(Profile::Ci).with_seed(seed);
    cfg.basis_layout = BasisLayout::ExtendedPhase;
    cfg
}

#[test]
fn csv_round_trip_keeps_every_bit() {
    let ts = spring_mass_series(&SpringParams::benchmark_underdamped()).unwrap();
    let back = TimeSeries::from_csv(&ts.to_csv()).unwrap();
    assert_eq!(back, ts);
}

#[test]
fn clean_underdamped_spring_end_to_end() {
    let data = spring_mass_series(&SpringParams::benchmark_underdamped()).unwrap();
    let run = discover(&data, &ci_spring(5)).unwrap();
    let c = run.report.discovered.coefficients.as_slice();
    assert_eq!(c.len(), 6);
    for (got, want) in c.iter().zip([1.0, 2.0, 4.0]) {
        assert!((got - want).abs() / want < 0.05, "{c:?}");
    }
    assert!(run.report.general_solution.mse < 1e-10);
    assert!(run.report.spline.max_phi <= 1e-6);

    let dir = tempfile::tempdir().unwrap();
    let written = run.write_outputs(&data, dir.path().join("under")).unwrap();
    assert_eq!(written.len(), 5);
    let report = RunReport::read(&written[0]).unwrap();
    assert_eq!(report.to_json(), run.report.to_json());

    let map = sparsity_map(&[("under".into(), report)], 1e-4, 0.98).unwrap();
    let csv = map.to_csv();
    assert!(csv.starts_with("label,c0,c1,c2,c3,c4,c5\nunder,1.0,1.0,1.0,"));
}
