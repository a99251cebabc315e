use std::f64::consts::PI;

use cns_core::condition_a::KatoIndices;
use cns_core::duhamel::{Component, TimeMesh};
use cns_core::error::Error;
use cns_core::measures::{mollifier_heat_age, GaussianBump, RadonMeasureSpec};
use cns_core::picard::*;
use cns_core::problem::{InitialFields, ProblemData};
use cns_core::{lp_norm, GridSpec, ScalarField};
use proptest::prelude::*;

fn grid() -> GridSpec {
    GridSpec::new(8.0, 64).unwrap()
}

fn bump(grid: GridSpec, b: GaussianBump) -> ScalarField {
    ScalarField::from_fn(grid, |x, y| b.eval(x, y))
}

fn smooth_data(grid: GridSpec, amp: f64) -> InitialFields {
    InitialFields::new(
        bump(grid, GaussianBump::new([0.2, 0.0], 0.5, amp)),
        bump(grid, GaussianBump::with_peak([0.0, 0.2], 0.6, 0.05 * amp)),
        bump(grid, GaussianBump::new([-0.2, 0.1], 0.5, amp)),
        None,
    )
    .unwrap()
}

fn dirac_problem(grid: GridSpec) -> ProblemData {
    ProblemData {
        n0: RadonMeasureSpec::atom([0.0, 0.0], 1.0),
        c0: bump(grid, GaussianBump::with_peak([0.0, 0.0], 0.6, 0.01)),
        zeta0: RadonMeasureSpec::default(),
        grad_phi: None,
    }
}

#[test]
fn seed_of_dirac_keeps_unit_mass() {
    let g = grid();
    let data = dirac_problem(g).discretize().unwrap();
    let mesh = TimeMesh::geometric(0.2, 10, 1e-3).unwrap();
    let seed = seed_trajectory(&data, &mesh).unwrap();
    for f in seed.nodes() {
        assert!((f.n.integral() - 1.0).abs() < 1e-6);
        assert!((lp_norm(&f.n, 1.0).unwrap() - 1.0).abs() < 1e-6);
    }
}

#[test]
fn seed_of_zero_data_is_zero() {
    let g = grid();
    let z = ScalarField::zeros(g);
    let data = InitialFields::new(z.clone(), z.clone(), z, None).unwrap();
    let seed = seed_trajectory(&data, &TimeMesh::geometric(0.1, 8, 1e-2).unwrap()).unwrap();
    assert!(seed.nodes().iter().all(|f| f.n.max_abs() == 0.0 && f.c.max_abs() == 0.0 && f.zeta.max_abs() == 0.0));
}

#[test]
fn gaussian_seed_matches_closed_form() {
    let g = GridSpec::new(8.0, 128).unwrap();
    let b = GaussianBump::new([-0.3, 0.2], 0.4, 0.7);
    let z = ScalarField::zeros(g);
    let data = InitialFields::new(z.clone(), z, bump(g, b), None).unwrap();
    let mesh = TimeMesh::geometric(0.3, 8, 1e-2).unwrap();
    let seed = seed_trajectory(&data, &mesh).unwrap();
    for (t, f) in mesh.times.iter().zip(seed.nodes()) {
        let want = bump(g, b.evolved(*t));
        assert!(f.zeta.sub(&want).unwrap().max_abs() < 1e-8 * want.max_abs());
    }
}

#[test]
fn dirac_l2_kato_plateau() {
    let g = GridSpec::new(8.0, 256).unwrap();
    let data = dirac_problem(g).discretize().unwrap();
    let tau = mollifier_heat_age(data.level);
    let mesh = TimeMesh::geometric(0.1, 8, 0.2).unwrap();
    let seed = seed_trajectory(&data, &mesh).unwrap();
    let plateau = (4.0 * PI).powf(-0.5) * 2f64.powf(-0.5);
    for (t, f) in mesh.times.iter().zip(seed.nodes()) {
        // e^{tΔ}φ_j∗δ is the heat kernel at t + τ_j
        let want = plateau * (t / (t + tau)).sqrt();
        let got = t.sqrt() * lp_norm(&f.n, 2.0).unwrap();
        assert!((got - want).abs() < 1e-6 * want, "t = {t}: {got} vs {want}");
    }
    let sup = seed.kato_norm(Component::N, 2.0, 0.5).unwrap();
    // the last node sits at 25 mollifier ages
    assert!(sup < plateau && sup > 0.98 * plateau, "{sup} vs {plateau}");
}

#[test]
fn zero_data_converges_at_once() {
    let g = grid();
    let z = ScalarField::zeros(g);
    let data = InitialFields::new(z.clone(), z.clone(), z, None).unwrap();
    let mesh = TimeMesh::geometric(0.1, 8, 1e-2).unwrap();
    let sol = solve_picard_fields(&data, &KatoIndices::reference(), &mesh, &PicardOptions::default()).unwrap();
    assert!(sol.report.converged);
    assert_eq!(sol.iterations(), 1);
    assert_eq!(sol.kato_norms().total(), 0.0);
    assert_eq!(sol.seed_norm(), 0.0);
    assert_eq!(sol.report.residual.total(), 0.0);
}

#[test]
fn tiny_data_contracts_inside_the_ball() {
    let g = grid();
    let idx = KatoIndices::reference();
    let mesh = TimeMesh::geometric(0.1, 8, 1e-2).unwrap();
    let opts = PicardOptions { tol: 1e-12, ..PicardOptions::default() };
    // measure eps_max first, then scale the data to a tenth of it
    let probe = smooth_data(g, 1.0);
    let first = solve_picard_fields(&probe, &idx, &mesh, &PicardOptions { max_iter: 1, ..opts.clone() }).unwrap();
    let eps_max = first.report.budget.as_ref().unwrap().eps_max;
    let data = probe.scale(0.1 * eps_max / first.seed_norm());
    let sol = solve_picard_fields(&data, &idx, &mesh, &opts).unwrap();
    let r = &sol.report;
    assert!(r.converged && r.within_eps_max);
    assert!((r.seed_norm - 0.1 * eps_max).abs() < 1e-6 * eps_max);
    let ratios = sol.contraction_ratios();
    assert!(ratios.len() >= 2, "{ratios:?}");
    let budget = r.budget.as_ref().unwrap();
    let bound = 4.0 * budget.k1 * budget.k2 * r.seed_norm;
    for w in ratios.windows(2) {
        assert!(w[1] < w[0], "{ratios:?}");
    }
    assert!(ratios.iter().all(|&q| q < 1.0 && q <= bound), "{ratios:?} vs {bound}");
    assert!(r.iterates.iter().all(|it| it.in_ball == Some(true)));
    assert!(r.residual.total() <= 2.0 * opts.tol);
    assert!(r.regime.contains("small"));
    assert!(r.warnings.is_empty(), "{:?}", r.warnings);
}

#[test]
fn dirac_density_keeps_mass_and_sign() {
    let g = grid();
    let mesh = TimeMesh::geometric(0.1, 8, 1e-2).unwrap();
    let sol = solve_picard(&dirac_problem(g), &KatoIndices::reference(), &mesh, &PicardOptions::default()).unwrap();
    assert!(sol.report.converged);
    let n0 = sol.trajectory.initial().n.max_abs();
    for f in sol.trajectory.nodes() {
        assert!((f.n.integral() - 1.0).abs() < 1e-4);
        assert!(f.n.min() >= -1e-6 * n0);
    }
    let c0 = sol.trajectory.initial().c.max_abs();
    assert!(sol.trajectory.nodes().iter().all(|f| f.c.min() >= -1e-6 * c0));
    assert!(sol.report.residual.total() <= 2.0 * 1e-6);
}

#[test]
fn large_data_halves_the_horizon() {
    let g = grid();
    let idx = KatoIndices::reference();
    let mesh = TimeMesh::geometric(1.0, 8, 1e-2).unwrap();
    let data = InitialFields::new(
        bump(g, GaussianBump::new([0.0, 0.0], 0.3, 30.0)),
        bump(g, GaussianBump::with_peak([0.0, 0.0], 0.4, 3.0)),
        bump(g, GaussianBump::new([0.3, 0.0], 0.3, 30.0)),
        None,
    )
    .unwrap();
    let strict = PicardOptions { max_halvings: 0, ..PicardOptions::default() };
    match solve_picard_fields(&data, &idx, &mesh, &strict) {
        Err(Error::Diverged(report)) => {
            assert!(!report.converged);
            assert_eq!(report.horizon, 1.0);
            assert!(report.contraction_ratios().iter().rev().take(3).all(|&r| r >= 1.0));
            assert!(report.warnings.iter().any(|w| w.contains("c0")));
        }
        other => panic!("expected divergence, got {:?}", other.map(|s| s.report.iterates.len())),
    }
    let sol = solve_picard_fields(&data, &idx, &mesh, &PicardOptions::default()).unwrap();
    assert!(sol.report.converged);
    assert!(sol.report.halvings >= 1);
    assert_eq!(sol.report.horizon, 0.5f64.powi(sol.report.halvings as i32));
    assert_eq!(sol.trajectory.times().last(), Some(&sol.report.horizon));
}

#[test]
fn csv_log_columns() {
    let g = grid();
    let mesh = TimeMesh::geometric(0.1, 8, 1e-2).unwrap();
    let sol = solve_picard_fields(&smooth_data(g, 0.01), &KatoIndices::reference(), &mesh, &PicardOptions::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("picard.csv");
    sol.report.write_csv(&path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "iter,dn_X1,dc_X2,dzeta_X3,ratio");
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), sol.iterations());
    assert_eq!(rows[0][0], "1");
    assert_eq!(rows[0][4], "");
    for (row, it) in rows.iter().zip(&sol.report.iterates).skip(1) {
        assert_eq!(row.len(), 5);
        let ratio: f64 = row[4].parse().unwrap();
        assert_eq!(ratio, it.ratio.unwrap());
    }
}

#[test]
fn inadmissible_indices_rejected() {
    let g = grid();
    let mesh = TimeMesh::geometric(0.1, 8, 1e-2).unwrap();
    let bad = KatoIndices::new(2.0, 3.0, 2.0, 0.5, 1.0 / 6.0, 0.5);
    match solve_picard_fields(&smooth_data(g, 0.01), &bad, &mesh, &PicardOptions::default()) {
        Err(Error::Inadmissible(names)) => assert!(names.contains("p3 < 2"), "{names}"),
        other => panic!("{:?}", other.map(|_| ())),
    }
}

#[test]
fn negative_density_rejected() {
    let g = grid();
    let mut data = smooth_data(g, 0.01);
    data.n0 = data.n0.scale(-1.0);
    match seed_trajectory(&data, &TimeMesh::geometric(0.1, 8, 1e-2).unwrap()) {
        Err(Error::Schema { path, .. }) => assert_eq!(path, "n0"),
        other => panic!("{:?}", other.map(|_| ())),
    }
}

#[test]
fn fixed_point_satisfies_the_map() {
    let g = grid();
    let idx = KatoIndices::reference();
    let mesh = TimeMesh::geometric(0.1, 8, 1e-2).unwrap();
    let data = smooth_data(g, 0.02);
    let opts = PicardOptions { tol: 1e-10, ..PicardOptions::default() };
    let sol = solve_picard_fields(&data, &idx, &mesh, &opts).unwrap();
    let seed = seed_trajectory(&data, &mesh).unwrap();
    let again = picard_map(&sol.trajectory, &seed, &data, &opts.quadrature).unwrap();
    let d = again.x_distance(&sol.trajectory, &idx).unwrap().total();
    assert!(d <= 2.0 * opts.tol);
    assert!((d - sol.report.residual.total()).abs() <= 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 4, ..ProptestConfig::default() })]

    #[test]
    fn ratios_respect_the_contraction_bound(amp in 0.005..0.05f64, shift in -0.3..0.3f64) {
        // successive ratios follow the direction of the increment and need not decrease;
        // what a contraction guarantees is a common factor below the Lipschitz bound
        let g = grid();
        let data = InitialFields::new(
            bump(g, GaussianBump::new([shift, 0.0], 0.5, amp)),
            bump(g, GaussianBump::with_peak([0.0, shift], 0.6, 0.005)),
            bump(g, GaussianBump::new([-shift, 0.1], 0.5, amp)),
            None,
        ).unwrap();
        let mesh = TimeMesh::geometric(0.1, 8, 1e-2).unwrap();
        let opts = PicardOptions { tol: 1e-11, ..PicardOptions::default() };
        let sol = solve_picard_fields(&data, &KatoIndices::reference(), &mesh, &opts).unwrap();
        prop_assert!(sol.report.converged);
        let b = sol.report.budget.as_ref().unwrap();
        let lip = 4.0 * b.k1 * b.k2 * sol.seed_norm();
        let r = sol.contraction_ratios();
        let q = r.iter().cloned().fold(0.0, f64::max);
        prop_assert!(q < 1.0 && q <= lip, "{:?} vs {}", r, lip);
        let incs: Vec<f64> = sol.report.iterates.iter().map(|i| i.increment.total()).collect();
        for (k, d) in incs.iter().enumerate() {
            prop_assert!(*d <= incs[0] * q.powi(k as i32) * (1.0 + 1e-12));
        }
    }
}
