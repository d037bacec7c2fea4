//! Command line behaviour: exit codes and output files.

use std::path::Path;
use std::process::Command;

fn sscm(args: &[&str], out: &Path) -> (i32, String) {
    let o = Command::new(env!("CARGO_BIN_EXE_sscm"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap();
    (o.status.code().unwrap(), String::from_utf8_lossy(&o.stdout).into_owned())
}

fn header(path: &str) -> String {
    std::fs::read_to_string(path.trim()).unwrap().lines().next().unwrap().to_string()
}

#[test]
fn mp_curve_writes_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let (code, stdout) = sscm(&["mp-curve", "--y", "0.5", "--sigma", "two-atom:1.2,0.8"], dir.path());
    assert_eq!(code, 0);
    let files: Vec<&str> = stdout.lines().collect();
    let csv = files.iter().find(|f| f.ends_with(".csv")).unwrap();
    assert_eq!(header(csv), "x,density,cdf");
    assert!(files.iter().any(|f| f.ends_with(".json")));
}

#[test]
fn esd_and_moments_headers() {
    let dir = tempfile::tempdir().unwrap();
    let (code, stdout) = sscm(&["esd", "--n", "60", "--p", "30", "--alpha", "3", "--reps", "3"], dir.path());
    assert_eq!(code, 0);
    let csvs: Vec<String> = stdout.lines().filter(|f| f.ends_with(".csv")).map(header).collect();
    assert!(csvs.contains(&"replicate,index,eigenvalue".to_string()));
    assert!(csvs.contains(&"bin_left,bin_right,count,density".to_string()));

    let (code, stdout) = sscm(&["moments", "--p", "16", "--alpha", "5", "--reps", "1000", "--exponents", "4"], dir.path());
    assert_eq!(code, 0);
    let csv = stdout.lines().find(|f| f.ends_with(".csv")).unwrap();
    assert_eq!(header(csv), "p,alpha,exponents,method,value,stderr");
}

#[test]
fn replay_reproduces_data() {
    let dir = tempfile::tempdir().unwrap();
    let (code, stdout) = sscm(&["clt", "--n", "40", "--p", "20", "--alpha", "6", "--reps", "50"], dir.path());
    assert_eq!(code, 0);
    let csv = stdout.lines().find(|f| f.ends_with(".csv")).unwrap().to_string();
    let json = stdout.lines().find(|f| f.ends_with(".json")).unwrap().to_string();
    let first = std::fs::read(&csv).unwrap();
    let again = tempfile::tempdir().unwrap();
    let (code, stdout) = sscm(&["replay", &json], again.path());
    assert_eq!(code, 0);
    let csv2 = stdout.lines().find(|f| f.ends_with(".csv")).unwrap();
    assert_eq!(std::fs::read(csv2).unwrap(), first);
}

#[test]
fn invalid_configuration_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["clt", "--n", "200", "--p", "200", "--alpha", "3"][..],
        &["esd", "--n", "60", "--p", "30", "--alpha", "3", "--sigma", "banana"][..],
        &["moments", "--p", "16", "--alpha", "-1"][..],
    ] {
        assert_eq!(sscm(args, dir.path()).0, 2, "{args:?}");
    }
}
