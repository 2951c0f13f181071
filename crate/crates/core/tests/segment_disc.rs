mod common;

use std::f64::consts::PI;

use common::c;
use hydrospec::contour::DeformedContour;
use hydrospec::eigen;
use hydrospec::linalg;
use hydrospec::profile::Domain;
use hydrospec::resonance::{self, Window, ResonanceOptions};
use hydrospec::segment::{self, SegmentDisc};
use num_complex::Complex64;
use proptest::prelude::*;

fn flat() -> DeformedContour {
    DeformedContour::undeformed(Domain::unit_segment())
}

#[test]
fn cheb_grid_examples() {
    assert!(segment::cheb_grid(1).is_err());
    let g = segment::cheb_grid(8).unwrap();
    for (j, &x) in g.x.iter().enumerate() {
        assert!((x - (j as f64 * PI / 8.0).cos()).abs() < 1e-15);
        let row_sum: f64 = (0..9).map(|k| g.d[(j, k)]).sum();
        assert!(row_sum.abs() < 1e-12);
        let cubic: f64 = (0..9).map(|k| g.d[(j, k)] * g.x[k].powi(3)).sum();
        assert!((cubic - 3.0 * x * x).abs() < 1e-11);
    }
}

#[test]
fn monomials_up_to_degree_n() {
    for n in [4usize, 16, 32] {
        let g = segment::cheb_grid(n).unwrap();
        let tol = 1e-10 * (n as f64).powi(4);
        for m in 1..=n as i32 {
            for (j, &x) in g.x.iter().enumerate() {
                let du: f64 = (0..=n).map(|k| g.d[(j, k)] * g.x[k].powi(m)).sum();
                assert!((du - m as f64 * x.powi(m - 1)).abs() < tol, "n={n} m={m}");
            }
        }
    }
}

#[test]
fn deformed_differentiation_follows_chain_rule() {
    let contour = common::cos07(0.1).contour;
    for (n, f, df, tol) in [
        (32usize, (|z: Complex64| z * z) as fn(Complex64) -> Complex64, (|z: Complex64| 2.0 * z) as fn(Complex64) -> Complex64, 1e-8),
        (48, |z| (2.0 * z).exp(), |z| 2.0 * (2.0 * z).exp(), 1e-6),
    ] {
        let g = segment::cheb_grid(n).unwrap();
        let d = segment::deform_d(&g, &contour).unwrap();
        let samples: Vec<Complex64> = g.x.iter().map(|&x| f(contour.gamma(x))).collect();
        let out = linalg::matvec(&d, &samples);
        for (j, &x) in g.x.iter().enumerate() {
            assert!((out[j] - df(contour.gamma(x))).norm() < tol);
        }
    }
    let g = segment::cheb_grid(16).unwrap();
    let d = segment::deform_d(&g, &flat()).unwrap();
    for i in 0..17 {
        for j in 0..17 {
            assert_eq!(d[(i, j)], c(g.d[(i, j)], 0.0));
        }
    }
}

#[test]
fn helmholtz_examples() {
    let g = segment::cheb_grid(32).unwrap();
    let d = segment::deform_d(&g, &flat()).unwrap();
    let h1 = segment::helmholtz_dirichlet(&d, 1.0).unwrap();
    let f: Vec<Complex64> = g.x[1..32].iter().map(|&x| c(-(PI * x).sin() * (PI * PI + 1.0), 0.0)).collect();
    let u = linalg::matvec(&h1.inverse, &f);
    for (j, &x) in g.x[1..32].iter().enumerate() {
        assert!((u[j] - c((PI * x).sin(), 0.0)).norm() < 1e-8);
    }
    let h2 = segment::helmholtz_dirichlet(&d, 2.0).unwrap();
    assert!(linalg::matvec(&h2.inverse, &vec![c(0.0, 0.0); 31]).iter().all(|z| z.norm() == 0.0));
    let ones = vec![c(1.0, 0.0); 33];
    let oracle = segment::greens_oracle(1.0, &ones, &g);
    let u = linalg::matvec(&h1.inverse, &ones[1..32]);
    for j in 0..31 {
        assert!((u[j] - oracle[j + 1]).norm() < 1e-9);
    }
}

#[test]
fn bilaplacian_on_deformed_clamped_function() {
    let n = 48;
    let g = segment::cheb_grid(n).unwrap();
    let contour = common::cos07(0.1).contour;
    let d = segment::deform_d(&g, &contour).unwrap();
    let d4 = segment::clamped_bilaplacian(&d, &contour, &g);
    let v: Vec<Complex64> = g.x[1..n].iter().map(|&x| (1.0 - contour.gamma(x).powi(2)).powi(2)).collect();
    let out = linalg::matvec(&d4, &v);
    for z in out {
        assert!((z - c(24.0, 0.0)).norm() < 1e-6, "{z}");
    }
}

#[test]
fn pencil_examples() {
    let case = common::cos07(0.1);
    let disc = SegmentDisc::new(&case.profile, &case.contour, case.alpha, 64).unwrap();
    let p = disc.pencil(0.0).unwrap();
    let s = eigen::eig_pencil(&p.a, &p.b, false).unwrap();
    let (_, z) = s.nearest(c(0.0, 0.0)).unwrap();
    assert!(z.norm() < 1e-6);

    let q = eigen::eig(&disc.rayleigh_q(), false).unwrap();
    for m in eigen::match_spectra(&s.eigenvalues, &q.eigenvalues) {
        assert!(m.2 < 1e-8, "{m:?}");
    }

    for alpha in [0.5, 1.0, 2.0] {
        let case = common::couette(alpha, 0.1);
        let disc = SegmentDisc::new(&case.profile, &case.contour, alpha, 64).unwrap();
        let p = disc.pencil(0.0).unwrap();
        let s = eigen::eig_pencil(&p.a, &p.b, false).unwrap();
        let curve = segment::ellipticity_samples(&case.profile, &case.contour, 2049);
        for z in &s.eigenvalues {
            let off_curve = resonance::distance_to_polyline(*z, &curve, false) > resonance::DEFAULT_BAND;
            assert!(!(off_curve && (z - c(0.2, 0.0)).norm() < 0.05), "alpha {alpha}: {z}");
        }
    }
}

#[test]
fn couette_rayleigh_operator_is_multiplication() {
    let case = common::couette(1.0, 0.5);
    let disc = SegmentDisc::new(&case.profile, &case.contour, 1.0, 24).unwrap();
    let q = disc.rayleigh_q();
    for i in 0..23 {
        for j in 0..23 {
            let expected = if i == j { case.contour.gamma(disc.grid.x[i + 1]) } else { c(0.0, 0.0) };
            assert!((q[(i, j)] - expected).norm() < 1e-15);
        }
    }
}

#[test]
fn cos3pi_has_resonance_at_zero() {
    let case = common::cos3pi(0.1);
    let q = segment::assemble_rayleigh_q(&case.profile, &case.contour, case.alpha, 96).unwrap();
    let s = eigen::eig(&q, false).unwrap();
    assert!(s.nearest(c(0.0, 0.0)).unwrap().1.norm() < 1e-6);
}

#[test]
fn ellipticity_samples_examples() {
    let couette = common::couette(1.0, 0.0);
    for z in segment::ellipticity_samples(&couette.profile, &couette.contour, 64) {
        assert!(z.im.abs() < 1e-15 && z.re.abs() <= 1.0 + 1e-15);
    }
    let cos07 = common::cos07(0.1);
    assert!(segment::ellipticity_samples(&cos07.profile, &cos07.contour, 512).iter().all(|z| z.im <= 1e-10));
    let k = common::kolmogorov(3.0, 0.15);
    let xs = k.contour.sample_grid(512);
    for (z, x) in segment::ellipticity_samples(&k.profile, &k.contour, 512).iter().zip(xs) {
        assert!(z.im <= 1e-12);
        if z.im.abs() < 1e-12 {
            assert!(k.contour.escape.m0(x).abs() < 1e-6);
        }
    }
}

#[test]
fn resonances_converge_with_n() {
    let cases = [common::cos07(0.1), common::cos3pi(0.1), common::trig_resonant(1.2 * PI, PI / 2.0, 2, 0.1)];
    for case in cases {
        let opts = ResonanceOptions { shooting: false, ..Default::default() };
        let w = Window::disk(c(0.0, 0.0), 0.3);
        let coarse = resonance::resonances_in_window(&case.profile, &case.contour, case.alpha, 64, w, opts).unwrap();
        let fine = resonance::resonances_in_window(&case.profile, &case.contour, case.alpha, 128, w, opts).unwrap();
        let a: Vec<Complex64> = coarse.iter().map(|r| r.c).collect();
        let b: Vec<Complex64> = fine.iter().map(|r| r.c).collect();
        let zero = |v: &[Complex64]| v.iter().cloned().min_by(|x, y| x.norm().total_cmp(&y.norm())).unwrap();
        assert!((zero(&a) - zero(&b)).norm() < 1e-8, "{}", case.name);
    }
}

#[test]
fn tau_invariance_on_segment() {
    // τ = 0.15 would push |τ m₀'| past 1 for m₀ = sin(3πx)
    let opts = ResonanceOptions::default();
    let w = Window::disk(c(0.0, 0.0), 0.3);
    let lists: Vec<Vec<Complex64>> = [0.05, 0.075, 0.1]
        .iter()
        .map(|&t| {
            let case = common::cos3pi(t);
            resonance::resonances_in_window(&case.profile, &case.contour, case.alpha, 96, w, opts).unwrap().iter().map(|r| r.c).collect()
        })
        .collect();
    for l in &lists[1..] {
        assert!(eigen::multiset_distance(&lists[0], l) < 1e-6);
    }
}

#[test]
fn helmholtz_block_is_well_conditioned_on_examples() {
    for case in [common::cos07(0.1), common::cos3pi(0.1), common::couette(5.0, 0.5)] {
        for n in [32, 64, 96] {
            let disc = SegmentDisc::new(&case.profile, &case.contour, case.alpha, n).unwrap();
            assert!(disc.helmholtz.condition < 1e10, "{} N={n}", case.name);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn helmholtz_matches_kernel_oracle(alpha in 0.3f64..4.0, a in -2.0f64..2.0, b in -2.0f64..2.0, k in 0.5f64..4.0) {
        let g = segment::cheb_grid(48).unwrap();
        let d = segment::deform_d(&g, &flat()).unwrap();
        let h = segment::helmholtz_dirichlet(&d, alpha).unwrap();
        let f: Vec<Complex64> = g.x.iter().map(|&x| c(a * (k * x).cos() + b * x, (k * x).sin())).collect();
        let u = linalg::matvec(&h.inverse, &f[1..48]);
        let oracle = segment::greens_oracle(alpha, &f, &g);
        for j in 0..47 {
            prop_assert!((u[j] - oracle[j + 1]).norm() < 1e-7);
        }
    }

    #[test]
    fn pencil_entries_are_finite(tau in 0.0f64..0.2, eps in 0.0f64..0.05, n in 8usize..40) {
        let case = common::cos07(tau);
        let disc = SegmentDisc::new(&case.profile, &case.contour, case.alpha, n).unwrap();
        let p = disc.pencil(eps).unwrap();
        prop_assert_eq!(p.a.nrows(), n - 1);
        prop_assert_eq!(p.b.ncols(), n - 1);
        prop_assert!(linalg::all_finite(&p.a) && linalg::all_finite(&p.b));
    }
}
