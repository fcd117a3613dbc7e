//! End-to-end behaviour of the `copdep` binary.

use std::path::Path;
use std::process::{Command, Output};

fn copdep(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_copdep")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn field<'a>(report: &'a str, key: &str) -> &'a str {
    report
        .lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
        .unwrap_or_else(|| panic!("no `{key}` in\n{report}"))
}

fn write_pair(path: &Path, n: usize, comonotone: bool) {
    let mut s = String::from("x,y\n");
    for i in 0..n {
        let x = (i * 37 % n) as f64 + 0.25;
        let y = if comonotone {
            x * x * x
        } else {
            ((i * 53 + 7) % n) as f64
        };
        s.push_str(&format!("{x},{y}\n"));
    }
    std::fs::write(path, s).unwrap();
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn transform_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("d.csv");
    write_pair(&input, 40, false);
    let run = |seed: &str, out: &str| {
        let out = dir.path().join(out);
        let o = copdep(&[
            "transform",
            "--in",
            path_str(&input),
            "--grouping",
            "1,1",
            "--seed",
            seed,
            "--out",
            path_str(&out),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read(out).unwrap()
    };
    assert_eq!(run("7", "a.csv"), run("7", "b.csv"));
    assert_ne!(run("7", "a.csv"), run("8", "c.csv"));
}

#[test]
fn missing_grouping_is_a_usage_error() {
    let o = copdep(&["transform", "--in", "x.csv", "--out", "y.csv"]);
    assert_eq!(o.status.code(), Some(2));
    let o = copdep(&["test", "--in", "x.csv", "--grouping", "1,1", "--no-such-flag"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unreadable_input_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = copdep(&[
        "test",
        "--in",
        path_str(&dir.path().join("missing.csv")),
        "--grouping",
        "1,1",
    ]);
    assert_eq!(o.status.code(), Some(3));
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "x,y\n1,2\n3,oops\n").unwrap();
    let o = copdep(&["test", "--in", path_str(&bad), "--grouping", "1,1"]);
    assert_eq!(o.status.code(), Some(3));
    let o = copdep(&["test", "--in", path_str(&bad), "--grouping", "1,2"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn comonotone_pair_gives_minimal_permutation_pvalue() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("d.csv");
    let out = dir.path().join("report.txt");
    write_pair(&input, 50, true);
    let o = copdep(&[
        "test",
        "--in",
        path_str(&input),
        "--grouping",
        "1,1",
        "--statistic",
        "total-multivariance",
        "--copula",
        "--method",
        "permutation",
        "--B",
        "300",
        "--seed",
        "3",
        "--out",
        path_str(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = stdout(&o);
    assert_eq!(field(&report, "p").parse::<f64>().unwrap(), 1.0 / 301.0);
    assert_eq!(field(&report, "method"), "permutation");
    assert_eq!(field(&report, "seed"), "3");
    assert_eq!(field(&report, "flags"), "none");
    assert_eq!(std::fs::read_to_string(out).unwrap(), report);
}

#[test]
fn pearson_with_multivariate_margin_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("d.csv");
    std::fs::write(&input, "a,b,c\n1,2,3\n2,1,5\n3,4,1\n4,3,2\n5,5,4\n").unwrap();
    let o = copdep(&[
        "test",
        "--in",
        path_str(&input),
        "--grouping",
        "1,2",
        "--copula",
        "--method",
        "pearson-uniform",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("multivariate"));
}

#[test]
fn reference_workflow() {
    let dir = tempfile::tempdir().unwrap();
    let r1 = dir.path().join("a.ref");
    let r2 = dir.path().join("b.ref");
    for r in [&r1, &r2] {
        let o = copdep(&[
            "h0-ref",
            "--n",
            "2",
            "--N",
            "40",
            "--count",
            "1000",
            "--seed",
            "5",
            "--out",
            path_str(r),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let report = stdout(&o);
        assert_eq!(field(&report, "statistic"), "normalized-total/euclidean");
        assert_eq!(field(&report, "count"), "1000");
    }
    assert_eq!(std::fs::read(&r1).unwrap(), std::fs::read(&r2).unwrap());

    let input = dir.path().join("d.csv");
    write_pair(&input, 40, false);
    let o = copdep(&[
        "test",
        "--in",
        path_str(&input),
        "--grouping",
        "1,1",
        "--copula",
        "--method",
        "montecarlo-ref",
        "--ref",
        path_str(&r1),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let p: f64 = field(&stdout(&o), "p").parse().unwrap();
    assert!(p > 0.0 && p <= 1.0);

    // wrong statistic for this reference
    let o = copdep(&[
        "test",
        "--in",
        path_str(&input),
        "--grouping",
        "1,1",
        "--statistic",
        "dhsic",
        "--copula",
        "--method",
        "montecarlo-ref",
        "--ref",
        path_str(&r1),
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("mismatch"));

    let o = copdep(&[
        "h0-ref",
        "--grouping",
        "1,2",
        "--N",
        "40",
        "--count",
        "1000",
        "--out",
        path_str(&r2),
    ]);
    assert_ne!(o.status.code(), Some(0));
}

#[test]
fn small_power_grid_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("power.csv");
    let o = copdep(&[
        "power",
        "--copula-family",
        "clayton,frank",
        "--tau",
        "0.1",
        "--marginal",
        "U,P20",
        "--n",
        "3",
        "--N",
        "30",
        "--reps",
        "10",
        "--count",
        "1000",
        "--seed",
        "1",
        "--out",
        path_str(&out),
        "--threads",
        "1",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out).unwrap();
    assert_eq!(
        csv.lines().next().unwrap(),
        "copula,tau,marginal,normalized-total_cop,dhsic_cop"
    );
    assert_eq!(csv.lines().count(), 5);
    assert!(stdout(&o).contains("power in %"));
}

#[test]
fn bins_writes_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bins.csv");
    let o = copdep(&[
        "bins",
        "--copula-family",
        "gumbel",
        "--tau",
        "0.3",
        "--N",
        "500",
        "--bins",
        "5",
        "--out",
        path_str(&out),
    ]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(out).unwrap();
    let total: u64 = text
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse::<u64>().unwrap())
        .sum();
    assert_eq!(total, 500);
}

#[test]
fn bench_reports_every_method() {
    let o = copdep(&[
        "bench", "--n", "3", "--N", "30", "--reps", "5", "--B", "50", "--count", "1000",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = stdout(&o);
    for key in [
        "N",
        "n",
        "B",
        "count",
        "transform_median_ms",
        "reference_build_ms",
        "pearson-uniform_median_ms",
        "montecarlo-ref_median_ms",
        "permutation_median_ms",
        "gamma_median_ms",
    ] {
        field(&report, key);
    }
}
