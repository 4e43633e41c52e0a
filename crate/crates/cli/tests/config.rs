use floquet_cli::config::{Grid, ParityName};
use floquet_cli::{ConfigError, Mode, RunConfig};

const MINIMAL: &str = r#"
mode = "pole-trace"
[well]
V0 = 0.557
A_over_pi = -0.504
p = 1
"#;

fn parse(text: &str, overrides: &[&str]) -> Result<RunConfig, ConfigError> {
    let o: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
    RunConfig::from_toml(text, &o)
}

#[test]
fn minimal_s_wave_echoes_the_radius() {
    let cfg = parse(MINIMAL, &[]).unwrap();
    let d = cfg.well.d.unwrap();
    assert!((d - 1.5002).abs() < 1e-4, "{d}");
    assert_eq!(d, 0.504 * std::f64::consts::PI / (2.0f64 * 0.557).sqrt());
    assert_eq!(cfg.well.a_over_pi, Some(-0.504));
    assert_eq!(cfg.mode, Some(Mode::PoleTrace));
    // defaults are materialized
    assert_eq!(cfg.truncation.parity, Some(ParityName::Even));
    assert_eq!(cfg.workers, 1);
    assert_eq!(cfg.solver.max_iter, 60);
}

#[test]
fn radius_gives_the_strength() {
    let cfg = parse("[well]\nV0 = 2.0\nd = 1.0\n", &[]).unwrap();
    let a = cfg.well.a_over_pi.unwrap();
    assert!((a + 2.0 / std::f64::consts::PI).abs() < 1e-15);
    assert_eq!(cfg.mode, None);
}

#[test]
fn both_well_sizes_conflict() {
    let e = parse("[well]\nV0 = 0.557\nd = 1.5\nA_over_pi = -0.504\n", &[]).unwrap_err();
    assert!(matches!(e, ConfigError::ConflictingWell));
    assert!(e.to_string().contains("A_over_pi"));
    assert!(matches!(parse("[well]\nV0 = 0.557\n", &[]), Err(ConfigError::MissingWellSize)));
}

#[test]
fn unknown_keys_are_named() {
    let e = parse(MINIMAL, &["solver.tolerance=1e-9"]).unwrap_err();
    assert!(e.to_string().contains("tolerance"), "{e}");
    let e = parse(&format!("{MINIMAL}\n[drive]\nF3 = 0.1\n"), &[]).unwrap_err();
    assert!(e.to_string().contains("F3"), "{e}");
}

#[test]
fn tolerances_must_be_positive() {
    for key in ["tol_sv", "tol_k", "tol_c", "eps_flux", "verify_tol"] {
        let e = parse(MINIMAL, &[&format!("solver.{key}=0.0")]).unwrap_err();
        assert!(matches!(e, ConfigError::NonPositive { .. }), "{key}: {e}");
        assert!(e.to_string().contains(key));
    }
    let e = parse(MINIMAL, &["solver.tol_k=-1e-9"]).unwrap_err();
    assert!(e.to_string().contains("solver.tol_k"));
}

#[test]
fn modes_parse_and_list() {
    for m in Mode::ALL {
        assert_eq!(m.name().parse::<Mode>().unwrap(), m);
    }
    let e = "trace".parse::<Mode>().unwrap_err().to_string();
    for m in Mode::ALL {
        assert!(e.contains(m.name()), "{e}");
    }
    assert!(ConfigError::MissingMode.to_string().contains("scatter-grid"));
}

#[test]
fn overrides_reach_nested_keys() {
    let cfg = parse(MINIMAL, &["drive.F2=0.12", "seed.boundary=capture", "mode=scatter", "truncation.l_max = 6"]).unwrap();
    assert_eq!(cfg.drive.f2, 0.12);
    assert_eq!(cfg.mode, Some(Mode::Scatter));
    assert_eq!(cfg.truncation.l_max, 6);
    assert_eq!(cfg.boundary(), floquet_core::channels::Boundary::Capture);
    assert!(matches!(parse(MINIMAL, &["drive.F2"]), Err(ConfigError::BadOverride(_))));
    assert!(matches!(parse(MINIMAL, &["well.V0.x=1"]), Err(ConfigError::BadOverride(_))));
}

#[test]
fn bad_truncation_and_variant() {
    let e = parse(MINIMAL, &["truncation.n_t=48"]).unwrap_err();
    assert!(e.to_string().contains("power of two"), "{e}");
    let e = parse(MINIMAL, &["well.p=5"]).unwrap_err();
    assert!(e.to_string().contains("well.p"), "{e}");
}

#[test]
fn grids_expand() {
    assert_eq!(Grid::Linspace { start: 0.0, stop: 1.0, count: 5 }.values(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    assert_eq!(Grid::Linspace { start: 0.3, stop: 1.0, count: 1 }.values(), vec![0.3]);
    assert!(Grid::Linspace { start: 0.3, stop: 1.0, count: 0 }.values().is_empty());
    let cfg = parse(MINIMAL, &["scatter.omega_range=[0.1, 0.2]", "drive.F2_range={start=0.0, stop=0.1, count=3}"]).unwrap();
    assert_eq!(cfg.scatter.omega_range.values(), vec![0.1, 0.2]);
    assert_eq!(cfg.drive.f2_range.values().len(), 3);
}

#[test]
fn p_seed_selects_the_odd_sector() {
    let cfg = parse(MINIMAL, &["seed.l=1"]).unwrap();
    assert_eq!(cfg.truncation.parity, Some(ParityName::Odd));
}
