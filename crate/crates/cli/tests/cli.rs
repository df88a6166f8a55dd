use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_paramodular")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

/// Two classes at N = 3, D = −15: `[3, 3, 2]` with value 4 and `[6, 3, 1]` with value 6.
fn coefficient_file(dir: &Path) -> String {
    let path = dir.join("f3.txt");
    std::fs::write(&path, "PARAMODULAR level=3 weight=2 AL=3:1\n# D = -15\n1 3 2 4\n2 3 1 6\n").unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn classes_lists_representatives() {
    let o = run(&["classes", "--level", "3", "--disc", "-15"]);
    assert_eq!(code(&o), 0);
    let s = stdout(&o);
    assert!(s.starts_with("# level=3 disc=-15 classes=2"));
    assert!(s.contains("[3, 3, 2] rho=3 eps=2"));
    assert!(s.contains("[6, 3, 1] rho=3 eps=2"));
    let o = run(&["classes", "--level", "3", "--disc", "-15", "--rho", "1"]);
    assert!(stdout(&o).contains("classes=0"));
}

#[test]
fn genus_character_values() {
    let o = run(&["genus-char", "--level", "3", "--ell", "-3", "--form", "15,3,13"]);
    assert_eq!((code(&o), stdout(&o).trim()), (0, "1"));
    // [3, 3, 2] represents 3 and (3/5) = −1.
    let o = run(&["genus-char", "--level", "1", "--ell", "5", "--form", "3,3,2"]);
    assert_eq!(stdout(&o).trim(), "-1");
    let o = run(&["genus-char", "--level", "3", "--ell", "-3", "--form", "2,3,1"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn averages_from_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let f = coefficient_file(dir.path());
    // ½ (4/2 + 6/2)
    let o = run(&["average", "--coeffs", &f, "--ell", "1", "--disc", "-15"]);
    assert_eq!((code(&o), stdout(&o).trim()), (0, "5/2"));
    // χ_5 is −1 on [3, 3, 2] (represents 3) and 1 on [6, 3, 1] (represents 1).
    let o = run(&["average", "--coeffs", &f, "--ell", "5", "--disc", "-3"]);
    assert_eq!(stdout(&o).trim(), "1/2");
    let o = run(&["average", "--coeffs", &f, "--ell", "1", "--disc", "-20"]);
    assert_eq!(stdout(&o).trim(), "--");
    let o = run(&["average", "--coeffs", &f, "--ell", "1", "--disc", "-4"]);
    assert_eq!(stdout(&o).trim(), "0 (empty)");
}

#[test]
fn data_and_usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.txt");
    std::fs::write(&bad, "PARAMODULAR level=3 weight=2 AL=3:1\n1 3 2 x\n").unwrap();
    let o = run(&["average", "--coeffs", bad.to_str().unwrap(), "--ell", "1", "--disc", "-15"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
    let missing = dir.path().join("missing.txt");
    assert_eq!(code(&run(&["average", "--coeffs", missing.to_str().unwrap(), "--ell", "1", "--disc", "-15"])), 1);
    assert_eq!(code(&run(&["lvalue", "--curve", "NOPE", "--twist", "-3"])), 1);
    assert_eq!(code(&run(&["classes", "--level", "3"])), 1);
    assert_eq!(code(&run(&["frobnicate"])), 1);
    assert_eq!(code(&run(&["--help"])), 0);
}

#[test]
fn lvalue_of_a_builtin_curve_and_a_curve_file() {
    let o = run(&["lvalue", "--curve", "F277", "--twist", "-3"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).starts_with("L(1/2, chi_-3) = 2.16543558"), "{}", stdout(&o));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.txt");
    let line = paramodular_line("F277");
    std::fs::write(&path, format!("{line}\n")).unwrap();
    let o = run(&["lvalue", "--curve", path.to_str().unwrap(), "--twist", "-3"]);
    assert!(stdout(&o).starts_with("L(1/2, chi_-3) = 2.16543558"), "{}", stdout(&o));
}

fn paramodular_line(label: &str) -> String {
    paramodular::lseries::builtin_curve(label).unwrap().to_line()
}

#[test]
fn table_writes_csv_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("t.csv");
    let o = run(&["table", "--curve", "F249", "--ell", "-4", "--discs", "5,8", "--out", csv.to_str().unwrap(), "--format", "csv"]);
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("D,5,8\n"));
    assert!(text.contains("B_{-4}(D),28,28"));
    let json = dir.path().join("t.json");
    let o = run(&["table", "--curve", "F249", "--ell", "-4", "--discs", "5", "--out", json.to_str().unwrap(), "--format", "json"]);
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(&json).unwrap();
    assert!(text.contains("\"ell\": -4") && text.contains("\"value\": \"28\""));
    let o = run(&["table", "--curve", "F249", "--ell", "-4", "--discs", "5", "--out", json.to_str().unwrap(), "--format", "xml"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn fit_kf_and_torsion() {
    let o = run(&["fit-kf", "--curve", "F249", "--dmin", "-60"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("k_F = 0.831968"), "{}", stdout(&o));
    let o = run(&["torsion-check", "--curve", "F249"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("0 violations"));
    let o = run(&["torsion-check", "--curve", "F249", "--torsion", "4"]);
    assert_eq!(code(&o), 2);
}
