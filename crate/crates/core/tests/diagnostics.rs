use std::f64::consts::PI;

use cns_core::diagnostics::*;
use cns_core::duhamel::{NodeFields, TimeMesh, Trajectory};
use cns_core::io::{read_trajectory, write_trajectory};
use cns_core::measures::*;
use cns_core::oracle::{run_oracle, OracleOptions};
use cns_core::problem::InitialFields;
use cns_core::{heat_propagate, lp_norm, GridSpec, ScalarField, VectorField};

fn bump(grid: GridSpec, b: GaussianBump) -> ScalarField {
    ScalarField::from_fn(grid, |x, y| b.eval(x, y))
}

fn smooth_data(grid: GridSpec) -> InitialFields {
    InitialFields::new(
        bump(grid, GaussianBump::new([0.3, 0.0], 0.55, 0.1)),
        bump(grid, GaussianBump::with_peak([0.0, 0.2], 0.6, 0.005)),
        bump(grid, GaussianBump::new([-0.3, 0.0], 0.5, 0.1)),
        None,
    )
    .unwrap()
}

fn oracle(data: &InitialFields, mesh: &TimeMesh) -> cns_core::Result<Trajectory> {
    // time step tied to the horizon so that rescaled runs take the same steps
    run_oracle(data, mesh, &OracleOptions::new(mesh.horizon() / 200.0))
}

fn heat_only(grid: GridSpec, n0: ScalarField, mesh: &TimeMesh) -> Trajectory {
    let z = ScalarField::zeros(grid);
    let nodes = mesh.times.iter().map(|&t| (heat_propagate(&n0, t).unwrap(), z.clone(), z.clone())).collect();
    Trajectory::from_fields(mesh, (n0, z.clone(), z.clone()), nodes).unwrap()
}

#[test]
fn zero_trajectory_passes_trivially() {
    let g = GridSpec::new(8.0, 32).unwrap();
    let mesh = TimeMesh::geometric(0.1, 8, 1e-2).unwrap();
    let traj = Trajectory::constant(&mesh, NodeFields::zeros(g));
    let recs = check_conservation_and_sign(&traj, &ConservationTolerances::default());
    assert_eq!(recs.len(), 4);
    assert!(recs.iter().all(|r| r.pass && r.measured_value == 0.0));
    let z = ScalarField::zeros(g);
    let data = InitialFields::new(z.clone(), z.clone(), z, None).unwrap();
    let ledger = standard_ledger(&traj, &data, &ConservationTolerances::default()).unwrap();
    assert!(ledger.all_pass());
    assert_eq!(ledger.records.len(), 6);
}

#[test]
fn heat_only_mass_drift() {
    let g = GridSpec::new(8.0, 64).unwrap();
    let mesh = TimeMesh::geometric(0.02, 10, 1e-2).unwrap();
    let traj = heat_only(g, bump(g, GaussianBump::new([0.0, 0.0], 0.3, 2.0)), &mesh);
    let recs = check_conservation_and_sign(&traj, &ConservationTolerances::default());
    let drift = recs.iter().find(|r| r.name.starts_with("mass drift")).unwrap();
    assert!(drift.measured_value <= 1e-8, "{}", drift.measured_value);
    assert!(recs.iter().all(|r| r.pass));
}

#[test]
fn detects_violations() {
    let g = GridSpec::new(8.0, 32).unwrap();
    let mesh = TimeMesh::geometric(0.1, 8, 1e-2).unwrap();
    let n0 = bump(g, GaussianBump::new([0.0, 0.0], 0.5, 1.0));
    let c0 = bump(g, GaussianBump::with_peak([0.0, 0.0], 0.5, 0.01));
    let z = ScalarField::zeros(g);
    // mass grows, c rises, n undershoots
    let nodes = mesh
        .times
        .iter()
        .map(|&t| (n0.scale(1.0 + t).add(&ScalarField::constant(g, -1e-3)).unwrap(), c0.scale(1.0 + t), z.clone()))
        .collect();
    let traj = Trajectory::from_fields(&mesh, (n0.clone(), c0.clone(), z.clone()), nodes).unwrap();
    let recs = check_conservation_and_sign(&traj, &ConservationTolerances::default());
    assert!(recs.iter().all(|r| !r.pass || r.name.starts_with("min c")), "{recs:?}");
    assert_eq!(recs.iter().filter(|r| !r.pass).count(), 3);
}

#[test]
fn scaling_identity_and_skip() {
    let g = GridSpec::new(8.0, 64).unwrap();
    let mesh = TimeMesh::geometric(0.05, 8, 1e-2).unwrap();
    let data = smooth_data(g);
    let rep = check_scaling_covariance(&data, &mesh, 1.0, oracle).unwrap();
    assert_eq!(rep.discrepancy, Some(0.0));

    let gp = VectorField::new(ScalarField::constant(g, 0.1), ScalarField::zeros(g)).unwrap();
    let forced = InitialFields::new(data.n0.clone(), data.c0.clone(), data.zeta0.clone(), Some(gp)).unwrap();
    let rep = check_scaling_covariance(&forced, &mesh, 2.0, oracle).unwrap();
    assert!(rep.discrepancy.is_none());
    assert!(rep.note.as_deref().unwrap().contains("skipped"));
    assert!(rep.record(1e-3).is_none());
}

#[test]
fn scaling_by_two() {
    let g = GridSpec::new(8.0, 64).unwrap();
    let mesh = TimeMesh::geometric(0.05, 8, 1e-2).unwrap();
    let rep = check_scaling_covariance(&smooth_data(g), &mesh, 2.0, oracle).unwrap();
    let d = rep.discrepancy.unwrap();
    assert!(d <= 1e-3, "{d}");
    assert!(rep.record(1e-3).unwrap().pass);
}

#[test]
fn rescaled_data_values() {
    let g = GridSpec::new(8.0, 64).unwrap();
    let data = smooth_data(g);
    let s = rescale_data(&data, 2.0).unwrap();
    assert_eq!(s.grid().extent(), 4.0);
    assert_eq!(s.grid().points(), 64);
    assert_eq!(s.n0.get(10, 20), 4.0 * data.n0.get(10, 20));
    assert_eq!(s.c0.get(10, 20), data.c0.get(10, 20));
    // mass and circulation are invariant
    assert!((s.n0.integral() - data.n0.integral()).abs() < 1e-14);
    assert!(rescale_data(&data, 0.0).is_err());
    assert!(rescale_data(&data, 1.0 / 64.0).is_err());
}

#[test]
fn zeta_bound_without_forcing() {
    let g = GridSpec::new(8.0, 64).unwrap();
    let z0 = bump(g, GaussianBump::new([0.0, 0.0], 0.3, 1.0));
    let zeta_sigma = lp_norm(&z0, 4.0).unwrap();
    let t = 0.7;
    let c = zeta_bound_constant(4.0, t, zeta_sigma, 0.0, 123.0);
    assert!((c - (3.0 * t / 8.0).exp() * zeta_sigma).abs() < 1e-14 * c);
    assert!((theta(1.5) - 5.0 / 9.0).abs() < 1e-15);
    assert_eq!(theta(4.0), 0.0);
}

#[test]
fn zeta_bound_on_lamb_oseen() {
    let g = GridSpec::new(8.0, 64).unwrap();
    let z = ScalarField::zeros(g);
    let data = InitialFields::new(z.clone(), z, bump(g, GaussianBump::new([0.0, 0.0], 0.4, 1.0)), None).unwrap();
    let mesh = TimeMesh::geometric(0.2, 10, 1e-2).unwrap();
    let traj = oracle(&data, &mesh).unwrap();
    let norms: Vec<f64> = traj.nodes().iter().map(|f| lp_norm(&f.zeta, 4.0).unwrap()).collect();
    assert!(norms.windows(2).all(|w| w[1] < w[0]));
    for (p, sigma) in [(4.0, None), (4.0, Some(3)), (1.5, None)] {
        let r = check_zeta_bound(&traj, p, sigma, 0.0).unwrap();
        assert!(r.pass && r.measured_value < 0.99 * r.claimed_bound, "{r:?}");
    }
    assert!(check_zeta_bound(&traj, 1.0, None, 0.0).is_err());
}

#[test]
fn zeta_bound_flags_growth() {
    let g = GridSpec::new(8.0, 32).unwrap();
    let mesh = TimeMesh::geometric(0.1, 8, 1e-2).unwrap();
    let z0 = bump(g, GaussianBump::new([0.0, 0.0], 0.4, 1.0));
    let zero = ScalarField::zeros(g);
    let nodes = mesh.times.iter().map(|_| (zero.clone(), zero.clone(), z0.scale(2.0))).collect();
    let traj = Trajectory::from_fields(&mesh, (zero.clone(), zero.clone(), z0), nodes).unwrap();
    assert!(!check_zeta_bound(&traj, 4.0, None, 0.0).unwrap().pass);
}

#[test]
fn weak_convergence_of_heat_dirac() {
    let g = GridSpec::new(8.0, 128).unwrap();
    let j = mollifier_level(&g).unwrap();
    let tau = mollifier_heat_age(j);
    let mu = RadonMeasureSpec::atom([0.0, 0.0], 1.0);
    let n0 = mollify(&mu, j, &g).unwrap();
    let mesh = TimeMesh::geometric(0.2, 12, 1e-3).unwrap();
    let traj = heat_only(g, n0, &mesh);
    let sigma = 0.6;
    let psi = TestFunction::gaussian([0.0, 0.0], sigma);
    let series = check_weak_initial_convergence(&traj, &mu, &psi, 5);
    assert!(series.monotone);
    assert!(series.record().pass);
    assert_eq!(series.errors.len(), 5);
    // |⟨e^{sΔ}δ − δ, ψ⟩| = 2s/(σ² + 2s) at heat age s = t + τ_j
    for (t, e) in series.times.iter().zip(&series.errors) {
        let s = t + tau;
        assert!((e - 2.0 * s / (sigma * sigma + 2.0 * s)).abs() < 1e-9);
    }
    assert!((series.floor - 2.0 * tau / (sigma * sigma + 2.0 * tau)).abs() < 1e-9);
    // O(t) above the floor: the secant slope lies between the derivatives at its ends
    let d = |s: f64| 2.0 * sigma * sigma / (sigma * sigma + 2.0 * s).powi(2);
    for (t, e) in series.times.iter().zip(&series.errors) {
        let slope = (e - series.floor) / t;
        assert!(slope <= d(tau) && slope >= d(t + tau));
    }
}

#[test]
fn weak_convergence_zero_data() {
    let g = GridSpec::new(8.0, 32).unwrap();
    let mesh = TimeMesh::geometric(0.1, 8, 1e-2).unwrap();
    let traj = Trajectory::constant(&mesh, NodeFields::zeros(g));
    let series = check_weak_initial_convergence(&traj, &RadonMeasureSpec::default(), &TestFunction::gaussian([0.0, 0.0], 0.5), 5);
    assert!(series.errors.iter().all(|&e| e == 0.0));
    assert_eq!(series.floor, 0.0);
    assert!(series.monotone);
}

#[test]
fn weak_convergence_flags_wrong_direction() {
    let g = GridSpec::new(8.0, 64).unwrap();
    let mu = RadonMeasureSpec::atom([0.0, 0.0], 1.0);
    let n0 = mollify(&mu, mollifier_level(&g).unwrap(), &g).unwrap();
    let mesh = TimeMesh::geometric(0.1, 8, 1e-2).unwrap();
    // drifts away as t ↓ 0
    let nodes = mesh.times.iter().map(|&t| (heat_propagate(&n0, 0.1 - t).unwrap(), ScalarField::zeros(g), ScalarField::zeros(g))).collect();
    let traj = Trajectory::from_fields(&mesh, (n0, ScalarField::zeros(g), ScalarField::zeros(g)), nodes).unwrap();
    let series = check_weak_initial_convergence(&traj, &mu, &TestFunction::gaussian([0.0, 0.0], 0.5), 5);
    assert!(!series.monotone);
    assert!(!series.record().pass);
}

fn unit_plateau() -> f64 {
    // t^{1/2}‖heat kernel‖₂ = (4π)^{-1/2} 2^{-1/2}
    1.0 / (8.0 * PI).sqrt()
}

#[test]
fn seminorm_atom_plateau() {
    let g = GridSpec::new(8.0, 128).unwrap();
    let j = mollifier_level(&g).unwrap();
    let f = mollify(&RadonMeasureSpec::atom([0.0, 0.0], 1.0), j, &g).unwrap();
    let est = estimate_atomic_seminorm_mollified(&f, 2.0, 3).unwrap();
    for v in &est.values {
        assert!((v / unit_plateau() - 1.0).abs() < 1e-6, "{v}");
    }
    assert!((est.limit / unit_plateau() - 1.0).abs() < 1e-6);
}

#[test]
fn seminorm_density_vanishes() {
    let g = GridSpec::new(8.0, 128).unwrap();
    let f = bump(g, GaussianBump::new([0.1, 0.0], 0.5, 1.0));
    let est = estimate_atomic_seminorm_mollified(&f, 2.0, 3).unwrap();
    assert!(est.limit < 1e-3 * unit_plateau(), "{}", est.limit);
    assert!(est.values.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn seminorm_mixture_reflects_atom() {
    let g = GridSpec::new(4.0, 256).unwrap();
    let j = mollifier_level(&g).unwrap();
    let w = 0.7;
    let mu = RadonMeasureSpec {
        atoms: vec![Atom { x: [0.0, 0.0], w }],
        filaments: vec![Filament::circle([0.0, 0.0], 0.8, 64, 0.1)],
        ..Default::default()
    };
    let est = estimate_atomic_seminorm_mollified(&mollify(&mu, j, &g).unwrap(), 2.0, 3).unwrap();
    let rel = est.limit / (w * unit_plateau());
    assert!((rel - 1.0).abs() < 0.1, "{rel}");
}

#[test]
fn seminorm_needs_levels() {
    let g = GridSpec::new(8.0, 64).unwrap();
    let f = ScalarField::zeros(g);
    assert!(estimate_atomic_seminorm_mollified(&f, 2.0, 2).is_err());
    assert!(estimate_atomic_seminorm(&f, 0.1, 0.05, 2.0, 0.5, 3).is_err());
    let mesh = TimeMesh::from_times(vec![0.1, 0.2]);
    if let Ok(mesh) = mesh {
        let traj = Trajectory::constant(&mesh, NodeFields::zeros(g));
        assert!(estimate_atomic_seminorm_traj(&traj, 2.0, 0.5).is_err());
    }
}

#[test]
fn ledger_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let mut ledger = DiagnosticLedger::new();
    ledger.push(DiagnosticRecord::at_most("a", 1.0, 2.0, PLUMBING));
    ledger.push(DiagnosticRecord::at_least("b, with comma", 1.0, 2.0, "anchor \"quoted\""));
    ledger.note("hello");
    assert!(!ledger.all_pass());
    assert_eq!(ledger.failures().count(), 1);
    assert!(ledger.get("a").unwrap().pass);
    let json = dir.path().join("ledger.json");
    let csv = dir.path().join("ledger.csv");
    ledger.write_json(&json).unwrap();
    ledger.write_csv(&csv).unwrap();
    let back: DiagnosticLedger = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(back, ledger);
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "name,relation,claimed_bound,measured_value,pass,anchor");
    assert_eq!(lines.count(), 2);
    assert!(ledger.records.iter().all(|r| !r.anchor.is_empty()));
}

#[test]
fn ledger_reproducible_from_dump() {
    let g = GridSpec::new(8.0, 64).unwrap();
    let data = smooth_data(g);
    let mesh = TimeMesh::geometric(0.1, 8, 1e-2).unwrap();
    let traj = oracle(&data, &mesh).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_trajectory(dir.path(), &traj).unwrap();
    let back = read_trajectory(dir.path()).unwrap();
    assert!(back == traj);
    let tol = ConservationTolerances::default();
    let a = standard_ledger(&traj, &data, &tol).unwrap();
    let b = standard_ledger(&back, &data, &tol).unwrap();
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    assert!(a.all_pass(), "{:?}", a.failures().collect::<Vec<_>>());
}
