use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cpf_core::design::{lcav_opt, tex_loss};
use cpf_core::params::{rates_from_geometry, CavityGeometry};
use cpf_core::response::series_coefficients;
use tempfile::TempDir;

fn cpf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cpf"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &TempDir, text: &str) -> PathBuf {
    let path = dir.path().join("cfg.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn stdout(o: &Output) -> String {
    assert!(
        o.status.success(),
        "exit {:?}: {}",
        o.status.code(),
        String::from_utf8_lossy(&o.stderr)
    );
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn report(text: &str) -> HashMap<String, String> {
    text.lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect()
}

fn num(map: &HashMap<String, String>, key: &str) -> f64 {
    map[key].parse().unwrap_or_else(|_| panic!("{key} = {}", map[key]))
}

fn read_table(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let header = rdr.headers().unwrap().iter().map(str::to_string).collect();
    let rows = rdr
        .records()
        .map(|r| r.unwrap().iter().map(|x| x.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

fn col(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap()
}

#[test]
fn response_is_even_and_real_on_resonance() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("response.csv");
    stdout(&cpf(&["response", "--out", out.to_str().unwrap()]));
    let (h, rows) = read_table(&out);
    let n = rows.len();
    assert_eq!(n, 601);
    for name in ["abs_l0", "abs_l1", "abs_l0_first", "abs_l1_first"] {
        let c = col(&h, name);
        for i in 0..n / 2 {
            assert!((rows[i][c] - rows[n - 1 - i][c]).abs() < 1e-12, "{name} row {i}");
        }
    }
    let mid = &rows[n / 2];
    assert_eq!(mid[col(&h, "delta")], 0.0);
    assert_eq!(mid[col(&h, "arg_l1")], 0.0);
    assert!((mid[col(&h, "abs_l1")] - 0.95627).abs() < 1e-5);

    // the overlay columns are the first-order model evaluated at the same detuning
    let geo = CavityGeometry::new(tex_loss(1.0, 0.001), lcav_opt(1.0, 0.001), 1.0, 0.001).unwrap();
    let series = series_coefficients(&geo).unwrap();
    for row in rows.iter().step_by(37) {
        let (f0, f1) = series.first_order(row[col(&h, "delta")]);
        assert!((row[col(&h, "abs_l0_first")] - f0.norm()).abs() < 1e-12);
        assert!((row[col(&h, "arg_l1_first")] - f1.arg()).abs() < 1e-12);
    }
}

#[test]
fn design_curves_cross_at_the_optimal_length() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("design.csv");
    let rep = report(&stdout(&cpf(&["design", "--out", out.to_str().unwrap()])));
    let l_opt = lcav_opt(1.0, 0.001);
    assert!((num(&rep, "l_cav_opt") - l_opt).abs() < 1e-12 * l_opt);
    assert!((num(&rep, "curve_crossing") - l_opt).abs() < 1e-6 * l_opt);
    assert!((num(&rep, "w_t_min") - 0.02236).abs() < 1e-5);
    assert!((num(&rep, "w_t_marker") - 0.1118).abs() < 1e-4);
    assert_eq!(rep["flags"], "none");
    let (h, rows) = read_table(&out);
    assert_eq!(rows.len(), 61);
    let loss = col(&h, "t_ex_loss");
    assert!(rows.iter().all(|r| (r[loss] - rows[0][loss]).abs() < 1e-15));
}

#[test]
fn strong_bulk_loss_flags_zero_length() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "[bulk]\nalpha_prime = 0.001\nbeta = 5.0\n");
    let rep = report(&stdout(&cpf(&["design", "--config", cfg.to_str().unwrap()])));
    assert!(rep["flags"].contains("zero_length_optimal"), "{:?}", rep["flags"]);
    assert_eq!(num(&rep, "l_cav_bulk"), 0.0);

    let cfg = write_config(&dir, "[bulk]\nalpha_prime = 0.001\nbeta = 2.0\n");
    let rep = report(&stdout(&cpf(&["design", "--config", cfg.to_str().unwrap()])));
    assert!((num(&rep, "l_cav_bulk") - 5e-4).abs() < 1e-12);
}

#[test]
fn fidelity_report_with_oracle() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "[pulse]\nw_t = 30.0\n");
    let out = dir.path().join("fidelity.txt");
    let text = stdout(&cpf(&[
        "fidelity",
        "--oracle",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]));
    assert_eq!(std::fs::read_to_string(&out).unwrap(), text);
    let rep = report(&text);
    assert!((num(&rep, "fidelity") - 0.9567).abs() < 1e-3);
    assert!(num(&rep, "oracle_distance") < 1e-3);
    assert!(num(&rep, "fidelity_difference") < 1e-6);
    assert_eq!(rep["first_order_valid"], "true");

    let cfg = write_config(&dir, "[pulse]\nw_t = 1.0\n[amplitudes]\nah = 0.0\nav = 1.0\n");
    let rep = report(&stdout(&cpf(&["fidelity", "--config", cfg.to_str().unwrap()])));
    assert!((num(&rep, "fidelity") - 1.0).abs() < 1e-9);
}

#[test]
fn short_pulse_fidelity_is_degraded() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "[pulse]\nw_t = 0.05\n");
    let rep = report(&stdout(&cpf(&["fidelity", "--config", cfg.to_str().unwrap()])));
    assert!(1.0 - num(&rep, "fidelity") > 0.05);
    assert_eq!(rep["first_order_valid"], "false");
}

#[test]
fn sweep_writes_csv_and_svg() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        r#"
[sweep]
quantities = ["fidelity", "g_over_kappa"]
axis = [
  { name = "w_t", min = 0.1, max = 10.0, count = 3 },
  { name = "l_cav", min = 1e-4, max = 1e-3, count = 4 },
]
"#,
    );
    let csv_path = dir.path().join("sweep.csv");
    let svg_path = dir.path().join("sweep.svg");
    let run = |threads: &str| {
        stdout(&cpf(&[
            "sweep",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            csv_path.to_str().unwrap(),
            "--svg",
            svg_path.to_str().unwrap(),
            "--threads",
            threads,
        ]));
        std::fs::read(&csv_path).unwrap()
    };
    let one = run("1");
    assert_eq!(run("3"), one);

    let (h, rows) = read_table(&csv_path);
    assert_eq!(h, ["w_t", "l_cav", "t_ex", "fidelity", "g_over_kappa"]);
    assert_eq!(rows.len(), 12);
    let svg = std::fs::read_to_string(&svg_path).unwrap();
    assert!(svg.starts_with("<svg") || svg.starts_with("<?xml"));
    assert!(svg.trim_end().ends_with("</svg>"));
    assert!(svg.matches("<rect").count() >= 12);
    // no stray temporaries left beside the outputs
    let names: Vec<_> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    assert_eq!(names.len(), 3, "{names:?}");
}

#[test]
fn single_point_sweep_prints_to_stdout() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "[pulse]\nw_t = 1.0\n[sweep]\nquantities = [\"fidelity\"]\nt_ex = 0.0447326\naxis = []\n",
    );
    let text = stdout(&cpf(&["sweep", "--config", cfg.to_str().unwrap()]));
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("w_t,l_cav,t_ex,fidelity"));
    assert_eq!(lines.count(), 1);
}

#[test]
fn exit_codes_follow_error_kind() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "[cavity]\nunknown_key = 1\n");
    assert_eq!(cpf(&["design", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));

    let cfg = write_config(&dir, "[cavity]\nt_ex = 1.5\n");
    assert_eq!(cpf(&["fidelity", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));

    // impedance-matched bare cavity: the delay diverges
    let cfg = write_config(&dir, "[cavity]\nt_ex = 0.001\n");
    assert_eq!(cpf(&["fidelity", "--config", cfg.to_str().unwrap()]).status.code(), Some(3));

    let missing = dir.path().join("no/such/dir/out.csv");
    assert_eq!(cpf(&["response", "--out", missing.to_str().unwrap()]).status.code(), Some(4));

    let o = cpf(&["design", "--config", dir.path().join("absent.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
    assert!(!o.stderr.is_empty());
}

#[test]
fn rates_in_report_match_library() {
    let rep = report(&stdout(&cpf(&["fidelity"])));
    let geo = CavityGeometry::new(
        num(&rep, "t_ex"),
        num(&rep, "l_cav"),
        num(&rep, "a_eff"),
        num(&rep, "alpha_loss"),
    )
    .unwrap();
    let gk = rates_from_geometry(&geo).unwrap().g_over_kappa();
    assert!((num(&rep, "g_over_kappa") - gk).abs() < 1e-13);
}
