use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_flowsynth"))
}

fn data(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data").join(rel)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn mine_worked_example() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("m.json");
    let dot = dir.path().join("m.dot");
    let gdot = dir.path().join("g.dot");
    let trace = data("traces/worked_example.trace");
    let o = run(&[
        "mine", "--trace", s(&trace), "--json", s(&json), "--dot", s(&dot), "--graph-dot", s(&gdot), "--stats", "json",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let stats: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(stats["unique_messages"], 6);
    assert_eq!(stats["length"], 12);
    assert!(stats["seconds"]["solve"].is_number());
    assert!(fs::read_to_string(&dot).unwrap().contains("doublecircle"));
    assert!(fs::read_to_string(&gdot).unwrap().contains("(2)"));
    let o = run(&["check", "--model", s(&json), "--trace", s(&trace)]);
    assert_eq!(code(&o), 0);
    let text = run(&["mine", "--trace", s(&trace)]);
    assert!(String::from_utf8_lossy(&text.stdout).contains("unique messages"));
}

#[test]
fn separate_dictionary() {
    let dir = tempfile::tempdir().unwrap();
    let dict = dir.path().join("d.txt");
    let events = dir.path().join("e.trace");
    fs::write(&dict, "1 (a:b:req)\n2 (b:a:resp)\n").unwrap();
    fs::write(&events, "1\n2\n{1}\n2\n").unwrap();
    let o = run(&["mine", "--trace", s(&events), "--dict", s(&dict), "--stats", "json"]);
    assert_eq!(code(&o), 0);
    let stats: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(stats["length"], 4);
    assert_eq!(stats["states"], 2);
}

#[test]
fn truncated_trace_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.trace");
    fs::write(
        &trace,
        "1 (cpu0:cache:rd_req)\n2 (cache:mem:rd_req)\n3 (mem:cache:rd_resp)\n4 (cache:cpu0:rd_resp)\n1\n2\n3\n4\n1\n2\n",
    )
    .unwrap();
    let o = run(&["mine", "--trace", s(&trace)]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("(cache:cpu0:rd_resp)"));
}

#[test]
fn io_and_parse_errors_exit_1() {
    let o = run(&["mine", "--trace", "/nonexistent/trace"]);
    assert_eq!(code(&o), 1);
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.trace");
    fs::write(&bad, "1 (a:b:c)\n7\n").unwrap();
    let o = run(&["mine", "--trace", s(&bad)]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
}

#[test]
fn gen_then_mine_then_check() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("g.trace");
    let model = dir.path().join("m.json");
    let o = run(&["gen", "--flows", s(&data("cpu_read.flow")), "--limit", "1", "--seed", "7", "--out", s(&trace)]);
    assert_eq!(code(&o), 0);
    let o = run(&["mine", "--trace", s(&trace), "--json", s(&model)]);
    assert_eq!(code(&o), 0);
    let o = run(&["check", "--model", s(&model), "--trace", s(&trace)]);
    assert_eq!(code(&o), 0);
}

#[test]
fn gen_limit_zero_and_malformed_spec() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("empty.trace");
    let o = run(&["gen", "--flows", s(&data("soc_library.flow")), "--limit", "0", "--out", s(&out)]);
    assert_eq!(code(&o), 0);
    let model = dir.path().join("m.json");
    let o = run(&["mine", "--trace", s(&data("traces/worked_example.trace")), "--json", s(&model)]);
    assert_eq!(code(&o), 0);
    let o = run(&["check", "--model", s(&model), "--trace", s(&out)]);
    assert_eq!(code(&o), 0);

    let bad = dir.path().join("bad.flow");
    fs::write(&bad, "flow f\nmsg 1 (cpu0:cache:rd_req)\nmsg 3 (cpu1:cache:rd_req)\nbranch: 1,3\n").unwrap();
    let o = run(&["gen", "--flows", s(&bad), "--limit", "1", "--out", s(&out)]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 4"));
}

#[test]
fn check_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let trace = data("traces/worked_example.trace");
    let empty = dir.path().join("empty.json");
    fs::write(
        &empty,
        r#"{"format":"flowsynth-fsa-1","states":["q0"],"initial":"q0","accepting":["q0"],
            "alphabet":[{"src":"cpu0","dest":"cache","cmd":"rd_req"}],"transitions":[]}"#,
    )
    .unwrap();
    let o = run(&["check", "--model", s(&empty), "--trace", s(&trace)]);
    assert_eq!(code(&o), 3);

    let model = dir.path().join("m.json");
    assert_eq!(code(&run(&["mine", "--trace", s(&trace), "--json", s(&model)])), 0);
    let o = run(&["check", "--model", s(&model), "--trace", s(&trace), "--budget", "1"]);
    assert_eq!(code(&o), 4);

    let witness = dir.path().join("w.txt");
    let o = run(&["check", "--model", s(&model), "--trace", s(&trace), "--witness", s(&witness)]);
    assert_eq!(code(&o), 0);
    let lines = fs::read_to_string(&witness).unwrap();
    assert_eq!(lines.lines().filter(|l| !l.starts_with('#')).count(), 12);

    let o = run(&["check", "--model", "/nonexistent.json", "--trace", s(&trace)]);
    assert_eq!(code(&o), 1);
}

#[test]
fn export_matches_golden() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("w.smt2");
    let o = run(&["export-smt", "--trace", s(&data("traces/worked_example.trace")), "--out", s(&out)]);
    assert_eq!(code(&o), 0);
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/golden/worked_example.smt2");
    assert_eq!(fs::read_to_string(out).unwrap(), fs::read_to_string(golden).unwrap());
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("g.trace");
    let o = run(&["gen", "--flows", s(&data("soc_library.flow")), "--limit", "6", "--seed", "3", "--simul", "0.2", "--out", s(&trace)]);
    assert_eq!(code(&o), 0);
    let render = |tag: &str, extra: &[&str]| {
        let json = dir.path().join(format!("{tag}.json"));
        let dot = dir.path().join(format!("{tag}.dot"));
        let mut args = vec!["mine", "--trace", s(&trace), "--seed", "5", "--json", s(&json), "--dot", s(&dot)];
        args.extend_from_slice(extra);
        assert_eq!(code(&run(&args)), 0);
        (fs::read(json).unwrap(), fs::read(dot).unwrap())
    };
    let a = render("a", &[]);
    assert_eq!(render("b", &[]), a);
    assert_eq!(render("c", &["--sequential"]), a);
}

#[test]
fn smtlib_backend_when_available() {
    let has_z3 = Command::new("z3").arg("--version").output().is_ok_and(|o| o.status.success());
    if !has_z3 {
        eprintln!("z3 not on PATH, skipping");
        return;
    }
    let o = run(&["mine", "--trace", s(&data("traces/worked_example.trace")), "--backend", "smtlib", "--stats", "json"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let stats: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(stats["solution_edges"], 4);
}
