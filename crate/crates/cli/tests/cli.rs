use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

/// Relative tolerance for numeric tokens; error estimates sit near machine
/// epsilon so they also get an absolute floor.
const REL: f64 = 1e-9;
const ABS: f64 = 1e-12;

fn crate_dir() -> &'static Path {
    Path::new(env!("CARGO_MANIFEST_DIR"))
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_heatgauge"))
        .args(args)
        .current_dir(crate_dir())
        .output()
        .expect("binary runs")
}

fn tokens_match(a: &str, b: &str) -> bool {
    if a == b {
        return true;
    }
    let strip = ['(', ')', '[', ']', ';'];
    match (
        a.trim_matches(strip).parse::<f64>(),
        b.trim_matches(strip).parse::<f64>(),
    ) {
        (Ok(x), Ok(y)) => (x - y).abs() <= ABS.max(REL * x.abs().max(y.abs())),
        _ => false,
    }
}

fn split(line: &str) -> Vec<&str> {
    line.split(|c: char| c.is_whitespace() || c == ',' || c == '=')
        .filter(|t| !t.is_empty())
        .collect()
}

fn assert_same(name: &str, stream: &str, actual: &str) {
    let path: PathBuf = crate_dir()
        .join("tests/golden")
        .join(format!("{name}.{stream}"));
    let expected = fs::read_to_string(&path).unwrap_or_default();
    let (exp, act): (Vec<_>, Vec<_>) = (expected.lines().collect(), actual.lines().collect());
    assert_eq!(
        exp.len(),
        act.len(),
        "{name}.{stream}: line count differs\n{actual}"
    );
    for (n, (e, a)) in exp.iter().zip(&act).enumerate() {
        let (te, ta) = (split(e), split(a));
        let ok = te.len() == ta.len() && te.iter().zip(&ta).all(|(x, y)| tokens_match(x, y));
        assert!(
            ok,
            "{name}.{stream} line {}:\n  expected: {e}\n  actual:   {a}",
            n + 1
        );
    }
}

fn golden(name: &str, args: &[&str], code: i32) {
    let out = run(args);
    assert_eq!(
        out.status.code(),
        Some(code),
        "{name}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_same(name, "out", &String::from_utf8_lossy(&out.stdout));
    assert_same(name, "err", &String::from_utf8_lossy(&out.stderr));
}

macro_rules! golden_tests {
    ($($name:ident: [$($arg:expr),*] => $code:expr;)*) => {
        $(
            #[test]
            fn $name() {
                golden(stringify!($name), &[$($arg),*], $code);
            }
        )*
    };
}

golden_tests! {
    check_contact3: ["check", "--system", "contact3"] => 2;
    check_contact3_file: ["check", "tests/data/contact3.toml"] => 2;
    check_flat3: ["check", "--system", "flat3"] => 0;
    check_flat3_file: ["check", "tests/data/flat3.toml"] => 0;
    check_ideal_gas: ["check", "tests/data/ideal_gas.toml"] => 0;
    check_wankel: ["check", "tests/data/wankel.toml"] => 0;
    check_zero_work: ["check", "tests/data/zero_work.toml"] => 0;
    check_contact3_csv: ["check", "tests/data/contact3.toml", "--grid", "3", "--csv", "-"] => 2;
    check_bad_count: ["check", "tests/data/bad_count.toml"] => 1;
    check_bad_expr: ["check", "tests/data/bad_expr.toml"] => 1;
    check_bad_syntax: ["check", "tests/data/bad_syntax.toml"] => 1;
    check_unknown_system: ["check", "--system", "nope"] => 1;
    lift_wankel: ["lift", "tests/data/wankel.toml", "--curve", "tests/data/circle.toml", "--u0", "0"] => 0;
    lift_wankel_builtin: ["lift", "--system", "wankel", "--curve", "tests/data/circle.toml", "--u0", "0"] => 0;
    lift_zero_work: ["lift", "tests/data/zero_work.toml", "--curve", "tests/data/path.csv", "--u0", "0.3", "--csv", "-"] => 0;
    lift_unknown_column: ["lift", "tests/data/contact3.toml", "--curve", "tests/data/unknown_column.csv"] => 1;
    holonomy_contact3: ["holonomy", "tests/data/contact3.toml", "--curve", "tests/data/square.csv", "--u0", "0"] => 2;
    holonomy_flat3: ["holonomy", "tests/data/flat3.toml", "--curve", "tests/data/square.csv", "--u0", "0"] => 0;
    holonomy_open: ["holonomy", "tests/data/flat3.toml", "--curve", "tests/data/unknown_column.csv"] => 1;
    jauch_flat3: ["jauch", "--system", "flat3"] => 0;
    jauch_contact3: ["jauch", "--system", "contact3"] => 2;
    jauch_wankel_circle: ["jauch", "--system", "wankel", "--loops", "circle", "--u0", "0"] => 2;
    entropy_flat3: ["entropy", "tests/data/flat3.toml", "--ref", "V1=0,V2=0"] => 0;
    entropy_contact3: ["entropy", "--system", "contact3", "--grid", "5"] => 2;
    entropy_ideal_gas: ["entropy", "tests/data/ideal_gas.toml", "--ref", "V=1"] => 0;
    entropy_zero_work_csv: ["entropy", "tests/data/zero_work.toml", "--grid", "2", "--csv", "-"] => 0;
    phase_wankel: ["phase", "--system", "wankel", "--revs", "2", "--csv", "-"] => 2;
    phase_wankel_cos: ["phase", "--system", "wankel", "--tau", "cos(theta)", "--revs", "1"] => 0;
    phase_flat3: ["phase", "--system", "flat3"] => 1;
}

#[test]
fn csv_output_is_byte_identical_across_runs() {
    let dir = std::env::temp_dir().join(format!("heatgauge-cli-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    let runs: Vec<Vec<u8>> = (0..2)
        .map(|k| {
            let path = dir.join(format!("jauch{k}.csv"));
            let out = run(&[
                "jauch",
                "--system",
                "contact3",
                "--seed",
                "7",
                "--csv",
                path.to_str().unwrap(),
            ]);
            assert_eq!(out.status.code(), Some(2));
            fs::read(&path).unwrap()
        })
        .collect();
    fs::remove_dir_all(&dir).ok();
    assert!(!runs[0].is_empty());
    assert_eq!(runs[0], runs[1]);
}

#[test]
fn seed_changes_the_default_family() {
    let a = run(&["jauch", "--system", "contact3", "--seed", "1", "--csv", "-"]);
    let b = run(&["jauch", "--system", "contact3", "--seed", "2", "--csv", "-"]);
    assert_ne!(a.stdout, b.stdout);
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(run(&["check"]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(
        run(&["check", "--system", "flat3", "--grid", "0"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        run(&["check", "tests/data/flat3.toml", "--tau", "1"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn missing_file_is_reported_with_its_path() {
    let out = run(&["check", "tests/data/absent.toml"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("tests/data/absent.toml"));
}
