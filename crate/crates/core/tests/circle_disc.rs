mod common;

use std::f64::consts::PI;

use common::c;
use hydrospec::circle::{self, CircleDisc, FourierGrid};
use hydrospec::contour::DeformedContour;
use hydrospec::eigen;
use hydrospec::linalg;
use hydrospec::profile::Domain;
use hydrospec::resonance;
use num_complex::Complex64;
use proptest::prelude::*;

#[test]
fn grid_layout() {
    assert!(FourierGrid::new(7).is_err());
    let g = FourierGrid::new(8).unwrap();
    assert_eq!(g.k, vec![0.0, 1.0, 2.0, 3.0, -4.0, -3.0, -2.0, -1.0]);
    for (j, &x) in g.x.iter().enumerate() {
        assert!((x - 2.0 * PI * j as f64 / 8.0).abs() < 1e-15);
    }
    circle::convention_self_test(&g).unwrap();
}

#[test]
fn derivative_examples() {
    let g = FourierGrid::new(32).unwrap();
    let flat = DeformedContour::undeformed(Domain::standard_circle());
    let d = circle::fourier_deformed_d(&g, &flat).unwrap();
    let e3: Vec<Complex64> = g.x.iter().map(|&x| c(0.0, 3.0 * x).exp()).collect();
    let out = g.to_samples(&linalg::matvec(&d, &g.to_coefficients(&e3)));
    for (o, e) in out.iter().zip(&e3) {
        assert!((o - c(0.0, 3.0) * e).norm() < 1e-12);
    }
    let ones = vec![c(1.0, 0.0); 32];
    assert!(linalg::matvec(&d, &g.to_coefficients(&ones)).iter().all(|z| z.norm() < 1e-12));

    let g = FourierGrid::new(128).unwrap();
    let contour = common::kolmogorov(3.0, 0.15).contour;
    let d = circle::fourier_deformed_d(&g, &contour).unwrap();
    let f: Vec<Complex64> = g.x.iter().map(|&x| (c(0.0, 1.0) * contour.gamma(x)).exp()).collect();
    let out = linalg::matvec(&d, &g.to_coefficients(&f));
    let expected = g.to_coefficients(&f.iter().map(|z| c(0.0, 1.0) * z).collect::<Vec<_>>());
    for (o, e) in out.iter().zip(&expected) {
        assert!((o - e).norm() < 1e-8);
    }
}

#[test]
fn laplacian_sign_convention() {
    let case = common::kolmogorov(3.0, 0.0);
    let disc = CircleDisc::new(&case.profile, &case.contour, 1.5, 32).unwrap();
    for k in [-3.0f64, 0.0, 2.0] {
        let v: Vec<Complex64> = disc.grid.x.iter().map(|&x| c(0.0, k * x).exp()).collect();
        let out = disc.grid.to_samples(&linalg::matvec(&disc.lap, &disc.grid.to_coefficients(&v)));
        for (o, s) in out.iter().zip(&v) {
            assert!((o - (-k * k - 2.25) * s).norm() < 1e-11);
        }
    }
}

#[test]
fn q_examples() {
    let simple = common::kolmogorov(3.0, 0.15);
    let q = circle::assemble_q_circle(&simple.profile, &simple.contour, 3.0, 0.0, 128).unwrap();
    let s = eigen::eig(&q, true).unwrap();
    let (i, z) = s.nearest(c(0.0, 0.0)).unwrap();
    assert!(z.norm() < 1e-8);
    assert_eq!(eigen::cluster(&s.eigenvalues, c(0.0, 0.0), 1e-4).0, 1);

    let disc = CircleDisc::new(&simple.profile, &simple.contour, 3.0, 128).unwrap();
    let psi = disc.stream_function(&s.eigenvector(i).unwrap());
    let mean: Complex64 = psi.iter().sum::<Complex64>() / 128.0;
    assert!(psi.iter().all(|z| (z - mean).norm() < 1e-6 * mean.norm()));

    let double = common::kolmogorov(8f64.sqrt(), 0.15);
    let rs = resonance::rayleigh_spectrum(&double.profile, &double.contour, double.alpha, 128).unwrap();
    let (count, idx) = eigen::cluster(&rs.spectrum.eigenvalues, c(0.0, 0.0), 1e-4);
    assert_eq!(count, 2);
    let states: Vec<Vec<Complex64>> = idx.iter().map(|&i| rs.states[i].clone()).collect();
    let g = FourierGrid::new(128).unwrap();
    let exact: Vec<Vec<Complex64>> =
        [1.0, -1.0].iter().map(|&s| g.x.iter().map(|&x| (c(0.0, s) * double.contour.gamma(x)).exp()).collect()).collect();
    assert!(common::subspace_angle(&states, &exact) < 1e-5);
}

#[test]
fn doubling_n_keeps_resonances() {
    for (alpha, tau) in [(3.0, 0.15), (8f64.sqrt(), 0.15), (3.0, 0.2)] {
        let case = common::kolmogorov(alpha, tau);
        let a = resonance::rayleigh_spectrum(&case.profile, &case.contour, alpha, 128).unwrap();
        let b = resonance::rayleigh_spectrum(&case.profile, &case.contour, alpha, 256).unwrap();
        let near = |s: &eigen::Spectrum| s.eigenvalues.iter().filter(|z| z.norm() < 1e-3).cloned().collect::<Vec<_>>();
        let (za, zb) = (near(&a.spectrum), near(&b.spectrum));
        assert_eq!(za.len(), zb.len());
        assert!(eigen::multiset_distance(&za, &zb) < 1e-9);
    }
}

#[test]
fn viscous_term_is_scaled_laplacian() {
    let case = common::kolmogorov(3.0, 0.1);
    let disc = CircleDisc::new(&case.profile, &case.contour, 3.0, 32).unwrap();
    let diff = disc.q(0.1).unwrap() - disc.q(0.0).unwrap();
    let expected = linalg::scale_rows(&vec![c(0.0, 0.01 / 3.0); 32], &disc.lap);
    assert!(linalg::frobenius(&(diff - expected)) < 1e-12 * linalg::frobenius(&disc.lap));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn transform_round_trip(half in 2usize..40, seed in any::<u64>()) {
        let n = 2 * half;
        let g = FourierGrid::new(n).unwrap();
        let v: Vec<Complex64> = (0..n).map(|j| {
            let t = (seed.wrapping_mul(6364136223846793005).wrapping_add(j as u64) % 1000) as f64 / 1000.0;
            c(t - 0.5, (3.0 * t).sin())
        }).collect();
        let back = g.to_samples(&g.to_coefficients(&v));
        for (a, b) in back.iter().zip(&v) {
            prop_assert!((a - b).norm() < 1e-12);
        }
    }
}
