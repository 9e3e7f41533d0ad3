use std::sync::Arc;

use gelfand::fem::{continue_branch, BranchOptions, GelfandProblem, NewtonOptions};
use gelfand::green::GreenEvaluator;
use gelfand::hamiltonian::{report, Configuration};
use gelfand::mesh::Mesh;
use gelfand::spectrum::{
    absolute_residuals, extrapolate, index_inequalities, linearized_spectrum, verify_theorem2, SpectrumOptions, SpectrumReport,
};
use gelfand::{Error, Point2};

fn synthetic(lambda: f64, mu: Vec<f64>) -> SpectrumReport {
    SpectrumReport {
        lambda,
        morse_index: mu.iter().filter(|&&v| v < 1.0).count(),
        augmented_morse_index: mu.iter().filter(|&&v| v <= 1.0 + 1e-8).count(),
        mu,
        eigenvectors: Vec::new(),
        residuals: Vec::new(),
        inertia_below_one: None,
    }
}

#[test]
fn extrapolation_cancels_second_order_error() {
    let exact = [0.5, 1.2, 2.0];
    let coarse = synthetic(0.1, exact.iter().map(|m| m + 4e-3).collect());
    let fine = synthetic(0.1, exact.iter().map(|m| m + 1e-3).collect());
    let e = extrapolate(&coarse, &fine).unwrap();
    for (a, b) in e.mu.iter().zip(exact) {
        assert!((a - b).abs() < 1e-14);
    }
    assert_eq!(e.morse_index, 1);
    assert!(extrapolate(&coarse, &synthetic(0.1, vec![1.0])).is_err());
}

#[test]
fn index_relations_on_a_model_report() {
    let ev = GreenEvaluator::unit_disk();
    let h = report(&ev, &Configuration::new(vec![Point2::ORIGIN])).unwrap();
    let v = index_inequalities(&synthetic(1e-3, vec![0.1, 0.9999, 0.9999, 3.0]), &h, 1);
    assert_eq!(v.index, 3);
    assert!(!v.upper && v.lower && v.universal);
    let ok = index_inequalities(&synthetic(1e-3, vec![0.1, 1.0004, 1.0004, 1.3]), &h, 1);
    assert!(ok.all_hold());
    assert_eq!(ok.equality, Some(true));
}

#[test]
fn blow_up_branch_has_index_one() {
    let mesh = Arc::new(Mesh::disk_graded(2e-3, 0.08, 0.12).unwrap());
    let problem = GelfandProblem::new(mesh).unwrap();
    let ev = GreenEvaluator::unit_disk();
    let c = Configuration::new(vec![Point2::ORIGIN]);
    let branch = continue_branch(&problem, &ev, &c, &[6.0, 8.0, 10.0], &BranchOptions::default()).unwrap();
    let opts = SpectrumOptions::default();
    let reports: Vec<SpectrumReport> =
        branch.iter().map(|b| linearized_spectrum(&problem, &b.solution, 4, &opts).unwrap()).collect();
    for (b, r) in branch.iter().zip(&reports) {
        assert_eq!(r.morse_index, 1);
        assert_eq!(r.inertia_below_one, Some(1));
        assert!(r.mu[1] > 1.0 && r.mu[3] > 1.0);
        let res = absolute_residuals(&problem, &b.solution, r);
        assert!(res.iter().all(|&x| x < 1e-6), "{res:?}");
    }
    let h = report(&ev, &c).unwrap();
    let fits = verify_theorem2(&branch, &reports, &h.eta).unwrap();
    assert_eq!(fits.fits.len(), 3);
    assert!(fits.upper_above_one);
    assert!(matches!(verify_theorem2(&branch[..2], &reports[..2], &h.eta), Err(Error::InsufficientSamples(_))));
    let mut wrong = reports.clone();
    wrong[0].lambda *= 2.0;
    assert!(matches!(verify_theorem2(&branch, &wrong, &h.eta), Err(Error::MismatchedBranch(_))));
}

#[test]
fn too_many_pairs_is_an_error() {
    let mesh = Arc::new(Mesh::disk_uniform(12).unwrap());
    let problem = GelfandProblem::new(mesh.clone()).unwrap();
    let sol = problem.solve(0.5, &vec![0.0; mesh.n_vertices()], &NewtonOptions::default()).unwrap();
    let n = mesh.interior_vertices().len();
    assert!(matches!(
        linearized_spectrum(&problem, &sol, n + 1, &SpectrumOptions::default()),
        Err(Error::TooManyEigenpairs { .. })
    ));
}
