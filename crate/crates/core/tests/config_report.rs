use quadopo::analytic::{EffectiveCouplings, PropagatorMethod};
use quadopo::config::{render, ParamSet};
use quadopo::meanfield::steady_state;
use quadopo::report::{analytic_csv, parse_rows, spectrum_csv, steady_csv};
use quadopo::spectra::{frequency_grid, linearize_symmetric, scan_frequency};
use quadopo::{Error, SystemParams};

const SETUP: &str = "\
# symmetric cavity
gamma = 10
kappa = 1
chi = 0.01
eps = 400
";

#[test]
fn config_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cavity.cfg");
    std::fs::write(&path, SETUP).unwrap();
    let parsed = ParamSet::parse(&std::fs::read_to_string(&path).unwrap()).unwrap().resolve().unwrap();
    assert_eq!(parsed, SystemParams::symmetric(0.01, 400.0, 10.0, 1.0));
    let again = ParamSet::parse(&render(&parsed)).unwrap().resolve().unwrap();
    assert_eq!(again, parsed);
}

#[test]
fn odd_values_survive_rendering() {
    let p = SystemParams {
        chi: [0.1 + 0.2, 1e-300, 1.0 / 3.0, 0.0],
        eps: [123.456, 0.0, 7e10, 1.0],
        gamma: [10.0, 9.999999999999998, 1e-5, 2.0],
        kappa: [1.0, 2.0, 3.0, 4.0],
    };
    assert_eq!(ParamSet::parse(&render(&p)).unwrap().resolve().unwrap(), p);
}

#[test]
fn bad_config_lines() {
    assert!(matches!(ParamSet::parse("gamma 10\n"), Err(Error::Config { line: 1, .. })));
    assert!(matches!(ParamSet::parse("kappa = 1\nfoo = 2\n"), Err(Error::Config { line: 2, .. })));
    assert!(matches!(ParamSet::parse("eps = abc\n"), Err(Error::Config { line: 1, .. })));
    assert!(matches!(ParamSet::parse("chi = 1\n").unwrap().resolve(), Err(Error::InvalidInput(_))));
}

#[test]
fn tables_are_deterministic_and_round_trip() {
    let p = SystemParams::symmetric(0.01, 400.0, 10.0, 1.0).validate().unwrap();
    let sys = linearize_symmetric(&p).unwrap();
    let grid = frequency_grid(10.0, 50);
    let make = || spectrum_csv(&p, &[("eps_ratio", "0.8".into())], &scan_frequency(&sys, &grid).unwrap());
    let a = make();
    assert_eq!(a, make());
    let table = scan_frequency(&sys, &grid).unwrap();
    let rows = parse_rows(&a);
    assert_eq!(rows.len(), 50);
    for (r, expect) in rows.iter().zip(&table.rows) {
        assert_eq!(r[0], Some(expect.omega));
        assert_eq!(r[1], Some(expect.correlations.v56));
        assert_eq!(r[7], Some(expect.gains.g8));
    }

    let (s, regime) = steady_state(&p).unwrap();
    let csv = steady_csv(&p, &s, regime, 0.0);
    assert!(csv.contains("# regime = below"));
    assert_eq!(parse_rows(&csv)[0][1], Some(40.0));

    let xi = EffectiveCouplings::paired(1.0, 0.5).unwrap();
    let csv = analytic_csv(&xi, PropagatorMethod::ClosedPaired, &[0.0, 1.0]).unwrap();
    assert!(!csv.contains("v3_closed_form"));
}
