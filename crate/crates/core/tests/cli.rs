use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn mprk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mprk"))
        .args(args)
        .output()
        .expect("binary runs")
}

struct Csv {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Csv {
    fn read(path: &Path) -> Csv {
        let text = std::fs::read_to_string(path).unwrap();
        let mut lines = text.lines().map(|l| l.split(',').map(String::from).collect::<Vec<_>>());
        let header = lines.next().unwrap();
        let rows: Vec<Vec<String>> = lines.collect();
        for r in &rows {
            assert_eq!(r.len(), header.len());
        }
        Csv { header, rows }
    }

    fn column(&self, name: &str) -> Vec<&str> {
        let i = self.header.iter().position(|h| h == name).unwrap();
        self.rows.iter().map(|r| r[i].as_str()).collect()
    }

    fn numbers(&self, name: &str) -> Vec<f64> {
        self.column(name).iter().map(|s| s.parse().unwrap()).collect()
    }
}

fn prefix(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_str().unwrap().to_owned()
}

fn assert_ok(out: &Output) {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).lines().count() <= 1);
}

#[test]
fn convergence_mpe_is_first_order() {
    let dir = TempDir::new().unwrap();
    let p = prefix(&dir, "conv");
    let out = mprk(&[
        "convergence", "--problem", "linear-test", "--scheme", "mpe", "--dt0", "0.125", "--levels", "6",
        "--t-end", "1", "--out", &p,
    ]);
    assert_ok(&out);
    let csv = Csv::read(Path::new(&format!("{p}.csv")));
    assert_eq!(csv.header, ["dt", "error", "eoc"]);
    assert_eq!(csv.rows.len(), 6);
    assert_eq!(csv.column("eoc")[0], "");
    let eocs: Vec<f64> = csv.column("eoc")[3..].iter().map(|s| s.parse().unwrap()).collect();
    let mean = eocs.iter().sum::<f64>() / 3.0;
    assert!((0.8..=1.2).contains(&mean), "{mean}");
}

#[test]
fn figure1_explicit_curve_undershoots() {
    let dir = TempDir::new().unwrap();
    let p = prefix(&dir, "fig1");
    assert_ok(&mprk(&["figure1", "--out", &p, "--plot"]));
    let csv = Csv::read(Path::new(&format!("{p}.csv")));
    assert_eq!(csv.header, ["t", "curve", "y1"]);
    let y1 = csv.numbers("y1");
    let curves = csv.column("curve");
    let min_of = |c: &str| {
        curves
            .iter()
            .zip(&y1)
            .filter(|(k, _)| **k == c)
            .map(|(_, y)| *y)
            .fold(f64::INFINITY, f64::min)
    };
    assert!(min_of("explicit") < 0.0);
    assert!(min_of("implicit") > 0.0);
    assert!(min_of("nodal") > 0.0);
    let svg = std::fs::read_to_string(format!("{p}.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 3);
    assert!(svg.matches("<circle").count() >= 6);
}

#[test]
fn integrate_mprk4_conserves_mass() {
    let dir = TempDir::new().unwrap();
    let p = prefix(&dir, "int");
    assert_ok(&mprk(&[
        "integrate", "--problem", "linear-test", "--scheme", "mprk4", "--dt", "2", "--t-end", "10", "--out", &p,
    ]));
    let csv = Csv::read(Path::new(&format!("{p}.csv")));
    assert_eq!(csv.header, ["t", "y_1", "y_2", "mass"]);
    assert_eq!(csv.rows.len(), 6);
    assert_eq!(csv.numbers("t")[5], 10.0);
    for m in csv.numbers("mass") {
        assert!((m - 1.99).abs() <= 1e-12, "{m}");
    }
}

#[test]
fn dense_csv_round_trips_bit_exactly() {
    let dir = TempDir::new().unwrap();
    let p = prefix(&dir, "dense");
    assert_ok(&mprk(&[
        "dense", "--problem", "nonlinear-test", "--scheme", "mprk4", "--dense", "do3", "--dt", "0.3",
        "--t-end", "1", "--theta", "0,0.5,1", "--out", &p,
    ]));
    let csv = Csv::read(Path::new(&format!("{p}.csv")));
    assert_eq!(csv.header, ["t", "theta", "y_1", "y_2", "y_3", "mass", "formula"]);
    assert_eq!(csv.rows.len(), 4 * 3);
    assert!(csv.column("formula").iter().all(|f| *f == "do3"));
    for row in &csv.rows {
        for field in &row[..row.len() - 1] {
            let v: f64 = field.parse().unwrap();
            assert_eq!(&format!("{v:.16e}"), field);
            assert!(!field.contains(' '));
        }
    }
}

#[test]
fn matrix_file_problem() {
    let dir = TempDir::new().unwrap();
    let file = dir.path().join("sys.txt");
    std::fs::write(&file, "# three-box chain\n3\n-1 0 0.5\n1 -2 0\n0 2 -0.5\n1 1 1\n").unwrap();
    let p = prefix(&dir, "m");
    assert_ok(&mprk(&[
        "integrate", "--problem", file.to_str().unwrap(), "--scheme", "mprk43:0.5,0.75", "--dt", "0.5", "--t-end",
        "3", "--out", &p, "--plot",
    ]));
    let csv = Csv::read(Path::new(&format!("{p}.csv")));
    for m in csv.numbers("mass") {
        assert!((m - 3.0).abs() <= 1e-12);
    }
    assert!(Path::new(&format!("{p}.svg")).exists());
}

#[test]
fn usage_errors_exit_2() {
    let out = mprk(&["integrate", "--problem", "brusselator", "--scheme", "mpe", "--dt", "1", "--t-end", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("linear-test") && err.contains("nonlinear-test"), "{err}");

    let out = mprk(&["integrate", "--scheme", "rk4", "--dt", "1", "--t-end", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("mprk22:<alpha>"));

    let out = mprk(&["dense", "--scheme", "mprk22:1", "--dense", "do2", "--dt", "1", "--t-end", "1"]);
    assert_eq!(out.status.code(), Some(2));

    assert_eq!(mprk(&["integrate", "--scheme", "mpe"]).status.code(), Some(2));
    assert_eq!(mprk(&["bogus"]).status.code(), Some(2));
}

#[test]
fn unwritable_output_exits_3() {
    let dir = TempDir::new().unwrap();
    let p = dir.path().join("missing").join("out");
    let out = mprk(&["figure1", "--out", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(out.stdout.is_empty());
}
