mod common;

use hydrospec::eigen;
use hydrospec::experiment::{execute, Command, ExperimentConfig};
use hydrospec::segment::SegmentDisc;
use num_complex::Complex64;

fn load(name: &str) -> ExperimentConfig {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    ExperimentConfig::load(&path).unwrap()
}

fn parse_csv(src: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut rd = csv::Reader::from_reader(src.as_bytes());
    let header = rd.headers().unwrap().iter().map(String::from).collect();
    let rows = rd.records().map(|r| r.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-15 * a.abs().max(b.abs()) || a == b
}

#[test]
fn spectrum_csv_reparses_to_library_values() {
    let out = execute(&load("couette_spectrum.toml")).unwrap();
    assert_eq!(out.command, Command::Spectrum);
    let (header, rows) = parse_csv(&out.csv);
    assert_eq!(header, ["re_c", "im_c", "residual"]);

    let case = common::couette(1.0, 0.25);
    let disc = SegmentDisc::new(&case.profile, &case.contour, case.alpha, 64).unwrap();
    let p = disc.pencil(0.01).unwrap();
    let mut lib: Vec<Complex64> = eigen::eig_pencil(&p.a, &p.b, true).unwrap().eigenvalues;
    lib.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));

    assert_eq!(rows.len(), lib.len());
    for (row, z) in rows.iter().zip(&lib) {
        let re: f64 = row[0].parse().unwrap();
        let im: f64 = row[1].parse().unwrap();
        assert!(close(re, z.re) && close(im, z.im), "{row:?} vs {z}");
        assert!(row[2].parse::<f64>().unwrap() < 1e-6);
    }
}

#[test]
fn resonance_csv_matches_meta_records() {
    let out = execute(&load("cos07_resonances.toml")).unwrap();
    let (header, rows) = parse_csv(&out.csv);
    assert_eq!(header, ["re_c", "im_c", "multiplicity", "dist_to_curve", "wronskian_abs"]);
    let records = out.meta["records"].as_array().unwrap();
    assert_eq!(rows.len(), records.len());
    assert!(!rows.is_empty());
    for (row, rec) in rows.iter().zip(records) {
        let c = rec["c"].as_array().unwrap();
        assert!(close(row[0].parse().unwrap(), c[0].as_f64().unwrap()));
        assert!(close(row[1].parse().unwrap(), c[1].as_f64().unwrap()));
        assert_eq!(row[2], rec["multiplicity"].to_string());
    }
}

#[test]
fn plot_lines_are_json_records() {
    let out = execute(&load("couette_spectrum.toml")).unwrap();
    let mut series = std::collections::BTreeSet::new();
    for line in out.plot.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        for key in ["series", "param", "value", "re", "im"] {
            assert!(v.get(key).is_some(), "{line}");
        }
        series.insert(v["series"].as_str().unwrap().to_string());
    }
    assert!(series.contains("spectrum") && series.contains("ellipticity"));
}

#[test]
fn circle_meta_records_fourier_convention() {
    let mut cfg = load("kolmogorov_track.toml");
    cfg.command = Command::Spectrum;
    cfg.n = Some(32);
    let out = execute(&cfg).unwrap();
    assert_eq!(out.meta["fourier_convention"]["self_test"], "pass");
    assert_eq!(out.meta["tool"]["name"], "hydrospec");
}
