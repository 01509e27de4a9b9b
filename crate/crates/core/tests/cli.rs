use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::io::Write;

use modattach::catalog::{parse_catalog, topo_levels};
use modattach::loader::{audit_trace, parse_trace};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_modattach"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn error_code(o: &Output) -> String {
    let err = stderr(o);
    let line = err.lines().find(|l| l.starts_with("error: ")).unwrap_or_else(|| panic!("no error line in {err:?}"));
    line["error: ".len()..].split(':').next().unwrap().to_string()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

const CHAIN: &str = "MODCAT v1\na|10||\nb|20|a|\nc|30|b|\n";

#[test]
fn gen_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    for tag in ["x", "y"] {
        let o = run(
            dir.path(),
            &["gen", "--modules", "5", "--max-depth", "2", "--seed", "1", "--hw-coverage", "1.0", "--catalog", &format!("{tag}.cat"), "--inventory", &format!("{tag}.inv")],
        );
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let read = |n: &str| fs::read(dir.path().join(n)).unwrap();
    assert_eq!(read("x.cat"), read("y.cat"));
    assert_eq!(read("x.inv"), read("y.inv"));
}

#[test]
fn gen_respects_depth_bound() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["gen", "--modules", "50", "--max-depth", "5", "--seed", "7", "--hw-coverage", "0.5", "--catalog", "c", "--inventory", "i"]);
    assert!(o.status.success());
    let cat = parse_catalog(&fs::read_to_string(dir.path().join("c")).unwrap()).unwrap();
    assert!(topo_levels(&cat).values().all(|&l| l <= 5));
}

#[test]
fn gen_rejects_bad_coverage() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["gen", "--modules", "5", "--hw-coverage", "1.5", "--catalog", "c", "--inventory", "i"]);
    assert!(!o.status.success());
    assert_eq!(error_code(&o), "usage");
}

#[test]
fn register_all_load_v0() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "c", CHAIN);
    let o = run(dir.path(), &["register", "--catalog", "c", "--policy", "all-load", "--version", "v0"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o), "MODINDEX v0\na 1\nb 1\nc 1\n");
}

#[test]
fn register_from_file_v1_matches_levels() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "c", CHAIN);
    write(dir.path(), "sel.txt", "# just the top\nc\n");
    write(dir.path(), "inv", "HWINV v1\n");
    let o = run(dir.path(), &["register", "--catalog", "c", "--policy", "file:sel.txt", "--version", "v1", "--inventory", "inv", "--index", "idx"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let cat = parse_catalog(CHAIN).unwrap();
    let levels = topo_levels(&cat);
    let expected: String = ["a", "b", "c"].iter().map(|n| format!("{n} {}\n", levels[*n])).collect();
    assert_eq!(fs::read_to_string(dir.path().join("idx")).unwrap(), format!("MODINDEX v1\n{expected}"));
}

#[test]
fn register_v1_needs_inventory() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "c", CHAIN);
    let o = run(dir.path(), &["register", "--catalog", "c", "--version", "v1"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_code(&o), "usage");
}

#[test]
fn register_interactive_reads_stdin() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "c", CHAIN);
    let mut child = bin()
        .current_dir(dir.path())
        .args(["register", "--catalog", "c", "--interactive"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(b"n\ny\nn\n").unwrap();
    let o = child.wait_with_output().unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o), "MODINDEX v0\na 0\nb 1\nc 0\n");
    assert_eq!(stderr(&o), "load a? [y/n] load b? [y/n] load c? [y/n] ");
}

#[test]
fn register_interactive_eof_fails() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "c", CHAIN);
    let o = bin().current_dir(dir.path()).args(["register", "--catalog", "c", "--interactive"]).stdin(Stdio::null()).output().unwrap();
    assert!(!o.status.success());
    assert_eq!(error_code(&o), "prompt");
}

#[test]
fn register_unknown_selection_names_module() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "c", CHAIN);
    write(dir.path(), "sel", "zzz\n");
    let o = run(dir.path(), &["register", "--catalog", "c", "--policy", "file:sel"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("zzz"));
}

#[test]
fn assume_yes_equals_all_load() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "c", CHAIN);
    let a = run(dir.path(), &["register", "--catalog", "c", "--assume-yes"]);
    let b = run(dir.path(), &["register", "--catalog", "c", "--policy", "all-load"]);
    assert_eq!(stdout(&a), stdout(&b));
}

#[test]
fn unknown_flag_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["register", "--catalog", "c", "--bogus"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_code(&o), "usage");
}

#[test]
fn bad_catalog_reports_code() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "c", "MODCAT v1\na|1|b|\nb|1|a|\n");
    let o = run(dir.path(), &["register", "--catalog", "c"]);
    assert!(!o.status.success());
    assert_eq!(error_code(&o), "circular-dependency");
}

#[test]
fn load_every_strategy_writes_clean_trace() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["gen", "--modules", "40", "--max-depth", "4", "--seed", "3", "--catalog", "c", "--inventory", "i"]);
    assert!(o.status.success());
    let cat = parse_catalog(&fs::read_to_string(dir.path().join("c")).unwrap()).unwrap();
    run(dir.path(), &["register", "--catalog", "c", "--version", "v0", "--index", "v0"]);
    run(dir.path(), &["register", "--catalog", "c", "--version", "v1", "--inventory", "i", "--index", "v1"]);
    let mut loaded = Vec::new();
    for (strategy, index, workers) in [("stage0", "v0", "1"), ("stage1", "v1", "1"), ("stage2", "v0", "4"), ("stage3", "v0", "4")] {
        let trace = format!("{strategy}.trace");
        let o = run(
            dir.path(),
            &["load", "--catalog", "c", "--index", index, "--inventory", "i", "--strategy", strategy, "--workers", workers, "--trace", &trace],
        );
        assert!(o.status.success(), "{strategy}: {}", stderr(&o));
        let t = parse_trace(&fs::read_to_string(dir.path().join(&trace)).unwrap()).unwrap();
        assert!(audit_trace(&cat, &t).is_clean(), "{strategy}");
        let mut names: Vec<String> = t.loads().into_iter().map(String::from).collect();
        names.sort();
        loaded.push(names);
    }
    assert!(loaded.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn load_stage3_one_worker_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "c", CHAIN);
    write(dir.path(), "idx", "MODINDEX v0\na 1\nb 1\nc 1\n");
    let o = run(dir.path(), &["load", "--catalog", "c", "--index", "idx", "--strategy", "stage3", "--workers", "1", "--trace", "t"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_code(&o), "usage");
    assert_eq!(fs::read_to_string(dir.path().join("t")).unwrap(), "");
}

#[test]
fn load_wrong_index_version_is_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "c", CHAIN);
    write(dir.path(), "idx", "MODINDEX v1\na 1\nb 2\nc 3\n");
    let o = run(dir.path(), &["load", "--catalog", "c", "--index", "idx", "--strategy", "stage0", "--trace", "t"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(error_code(&o), "index-mismatch");
    assert!(dir.path().join("t").exists());
}

#[test]
fn bench_csv_has_row_per_strategy() {
    let dir = tempfile::tempdir().unwrap();
    run(dir.path(), &["gen", "--modules", "200", "--max-depth", "4", "--seed", "3", "--hw-coverage", "0.8", "--catalog", "c", "--inventory", "i"]);
    let o = run(
        dir.path(),
        &["bench", "--catalog", "c", "--inventory", "i", "--strategy", "stage0,stage1,stage2,stage3", "--workers", "8", "--reps", "2", "--format", "csv"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let rows: Vec<&str> = out.lines().collect();
    assert_eq!(rows.len(), 5);
    assert!(rows[0].starts_with("strategy,"));
    let header: Vec<&str> = rows[0].split(',').collect();
    let col = header.iter().position(|h| *h == "normalized").unwrap();
    let stage0: Vec<&str> = rows[1].split(',').collect();
    assert_eq!(stage0[0], "stage0");
    assert_eq!(stage0[col].parse::<f64>().unwrap(), 1.0);
}

#[test]
fn bench_text_mentions_composite() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "c", CHAIN);
    let o = run(dir.path(), &["bench", "--catalog", "c", "--reps", "1", "--workers", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("normalized to stage0"));
    assert!(out.contains("composite"));
}

#[test]
fn report_on_empty_trace() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "c", "MODCAT v1\na|10||\nb|20|a|\nk|100||@base\n");
    write(dir.path(), "t", "");
    let o = run(dir.path(), &["report", "--catalog", "c", "--trace", "t", "--format", "csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let row: Vec<u64> = out.lines().nth(1).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    // loads, ..., total, loaded, saved, base
    assert_eq!(row[0], 0);
    assert_eq!(&row[5..], [130, 0, 30, 100]);
}

#[test]
fn report_after_load() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "c", CHAIN);
    write(dir.path(), "idx", "MODINDEX v0\na 0\nb 1\nc 0\n");
    let o = run(dir.path(), &["load", "--catalog", "c", "--index", "idx", "--strategy", "stage0", "--trace", "t"]);
    assert!(o.status.success());
    let o = run(dir.path(), &["report", "--catalog", "c", "--trace", "t"]);
    let out = stdout(&o);
    assert!(out.contains("loads        2"), "{out}");
    assert!(out.contains("saved_kb     30"), "{out}");
}

#[test]
fn instant_load_is_reproducible_modulo_timestamps() {
    let dir = tempfile::tempdir().unwrap();
    run(dir.path(), &["gen", "--modules", "60", "--seed", "9", "--catalog", "c", "--inventory", "i"]);
    run(dir.path(), &["register", "--catalog", "c", "--index", "idx"]);
    let strip = |t: &str| -> Vec<String> { t.lines().map(|l| l.split_once(' ').unwrap().1.to_string()).collect() };
    let a = run(dir.path(), &["load", "--catalog", "c", "--index", "idx", "--inventory", "i", "--strategy", "stage0"]);
    let b = run(dir.path(), &["load", "--catalog", "c", "--index", "idx", "--inventory", "i", "--strategy", "stage0"]);
    assert_eq!(strip(&stdout(&a)), strip(&stdout(&b)));
}
