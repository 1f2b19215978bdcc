//! End-to-end tests of the `invfold` binary: exit codes, output shapes,
//! JSONL records, and rerun determinism, all through real process spawns.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};
use std::sync::atomic::{AtomicU32, Ordering};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_invfold"))
        .args(args)
        .output()
        .expect("the solver binary spawns")
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("stdout is UTF-8")
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("stderr is UTF-8")
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("the solver exits normally")
}

/// A scratch directory unique to one test, cleaned up on drop.
struct Scratch(PathBuf);

impl Scratch {
    fn new() -> Self {
        static COUNTER: AtomicU32 = AtomicU32::new(0);
        let dir = std::env::temp_dir().join(format!(
            "invfold-cli-test-{}-{}",
            std::process::id(),
            COUNTER.fetch_add(1, Ordering::Relaxed)
        ));
        fs::create_dir_all(&dir).expect("scratch dir creates");
        Scratch(dir)
    }

    fn file(&self, name: &str, content: &str) -> PathBuf {
        let path = self.0.join(name);
        fs::write(&path, content).expect("scratch file writes");
        path
    }

    fn path(&self, name: &str) -> PathBuf {
        self.0.join(name)
    }
}

impl Drop for Scratch {
    fn drop(&mut self) {
        let _ = fs::remove_dir_all(&self.0);
    }
}

#[test]
fn solve_smoke_solves_a_hairpin_and_writes_a_self_contained_record() {
    let scratch = Scratch::new();
    let json = scratch.path("runs.jsonl");
    let out = run(&[
        "solve",
        "((...))",
        "--level",
        "2",
        "--n",
        "100",
        "--seed",
        "0",
        "--json",
        json.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_of(&out));
    let text = stdout_of(&out);
    assert!(text.contains("target: solved"), "stdout: {text}");
    assert!(text.contains("score 1.0000"), "stdout: {text}");

    let record: serde_json::Value =
        serde_json::from_str(fs::read_to_string(&json).unwrap().lines().next().unwrap())
            .expect("the JSONL record parses");
    assert_eq!(record["solved"], serde_json::json!(true));
    assert_eq!(record["config"]["target"], serde_json::json!("((...))"));
    assert_eq!(record["config"]["seed"], serde_json::json!(0));
    assert_eq!(record["config"]["level"], serde_json::json!(2));
    assert_eq!(record["config"]["algo"], serde_json::json!("gnrpa"));
    let sequence = record["best_sequence"]
        .as_str()
        .expect("a solved record carries its witness sequence");

    // The witness round-trips: folding it reproduces the target exactly.
    let fold = run(&["fold", sequence, "--target", "((...))"]);
    assert_eq!(exit_code(&fold), 0);
    let fold_text = stdout_of(&fold);
    assert!(fold_text.contains("base pair distance 0"), "{fold_text}");
    assert!(fold_text.contains("solved true"), "{fold_text}");
}

#[test]
fn unsolved_runs_still_exit_zero() {
    // Pairs need a span over three; this target cannot fold, so the run
    // reports unsolved — which is a successful run, not an error.
    let out = run(&["solve", "((..))", "--n", "5"]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_of(&out));
    let text = stdout_of(&out);
    assert!(text.contains("target: unsolved"), "stdout: {text}");
}

#[test]
fn malformed_puzzle_files_name_the_offending_line() {
    let scratch = Scratch::new();
    let path = scratch.file("bad.tsv", "ok\t((...))\nbroken\t(()\n");
    let out = run(&["solve", "--puzzles", path.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 2);
    let err = stderr_of(&out);
    assert!(err.contains("line 2"), "stderr: {err}");
}

#[test]
fn bad_targets_and_sequences_exit_two() {
    let unbalanced = run(&["solve", "((()"]);
    assert_eq!(exit_code(&unbalanced), 2);
    assert!(stderr_of(&unbalanced).starts_with("error:"));

    let bad_base = run(&["fold", "GAXGA"]);
    assert_eq!(exit_code(&bad_base), 2);

    let mismatch = run(&["fold", "AAA", "--target", "....."]);
    assert_eq!(exit_code(&mismatch), 2);
    assert!(stderr_of(&mismatch).contains("length"));
}

#[test]
fn contradictory_flag_combinations_exit_two() {
    let cases: &[&[&str]] = &[
        // tree search takes no beam
        &["solve", "(((...)))", "--algo", "uct", "--beam", "4"],
        // nrpa is the unbiased variant
        &["solve", "(((...)))", "--algo", "nrpa", "--beta", "on"],
        // leaf and root parallelism do not compose
        &["solve", "(((...)))", "--workers", "2", "--instances", "2"],
        // custom tables contradict disabling the bias
        &["solve", "(((...)))", "--beta", "off", "--bias-file", "x.conf"],
        // clap-level: no target and no puzzle file
        &["solve"],
    ];
    for args in cases {
        let out = run(args);
        assert_eq!(exit_code(&out), 2, "{args:?} must be rejected");
    }
}

#[test]
fn fold_reports_the_oracle_verdict() {
    // Four GC pairs admit exactly one nested maximum-pairing structure,
    // so the fold is forced and matches the hairpin target.
    let out = run(&["fold", "GGGGAAAACCCC", "--target", "((((....))))"]);
    assert_eq!(exit_code(&out), 0);
    let text = stdout_of(&out);
    assert!(text.starts_with("((((....))))\n"), "stdout: {text}");
    assert!(text.contains("mfe energy -12"), "stdout: {text}");
    assert!(text.contains("delta-g 0"), "stdout: {text}");
    assert!(text.contains("score 1"), "stdout: {text}");

    // Without a target the fold and its energy print alone; a pairless
    // sequence folds flat at zero.
    let flat = run(&["fold", "AAAA"]);
    assert_eq!(exit_code(&flat), 0);
    let flat_text = stdout_of(&flat);
    assert!(flat_text.starts_with("....\n"), "stdout: {flat_text}");
    assert!(flat_text.contains("mfe energy 0"), "stdout: {flat_text}");
}

#[test]
fn contexts_lists_slots_with_their_classification() {
    let out = run(&["contexts", "((..((....))..))", "--order", "string"]);
    assert_eq!(exit_code(&out), 0);
    let text = stdout_of(&out);
    assert!(text.contains("16 positions, 4 pairs, 12 slots"), "{text}");
    assert!(text.contains("Internal"), "{text}");
    assert!(text.contains("faces 13"), "{text}");

    let locked = run(&[
        "contexts",
        "((((....))))",
        "--constraint",
        "GGNNNNNNNNCC",
    ]);
    assert_eq!(exit_code(&locked), 0);
    assert!(stdout_of(&locked).contains("locked"));
}

#[test]
fn suite_reruns_reproduce_the_summary_byte_for_byte() {
    let scratch = Scratch::new();
    let puzzles = scratch.file(
        "mini.tsv",
        "a\t((....))\nb\t(((...)))\nc\t((((....))))\tNNNNGAAANNNN\nd\t(....)\n",
    );
    let grid = scratch.file(
        "grid.txt",
        "# two cells over the mini suite\nlevel=1 n=30\nlevel=1 n=30 beta=off algo=nrpa\n",
    );

    let mut summaries = Vec::new();
    let mut csvs = Vec::new();
    for attempt in 0..2 {
        let csv = scratch.path(&format!("summary-{attempt}.csv"));
        let json = scratch.path(&format!("runs-{attempt}.jsonl"));
        let out = run(&[
            "suite",
            "--puzzles",
            puzzles.to_str().unwrap(),
            "--grid",
            grid.to_str().unwrap(),
            "--csv",
            csv.to_str().unwrap(),
            "--json",
            json.to_str().unwrap(),
            "--bucket-by",
            "playouts",
        ]);
        assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_of(&out));
        summaries.push(stdout_of(&out));
        csvs.push(fs::read_to_string(&csv).unwrap());

        let jsonl = fs::read_to_string(&json).unwrap();
        let records: Vec<serde_json::Value> = jsonl
            .lines()
            .map(|line| serde_json::from_str(line).expect("each JSONL line parses"))
            .collect();
        assert_eq!(records.len(), 8, "two cells over four puzzles");
        for record in &records {
            assert!(record["config"]["seed"].is_u64(), "records are self-contained");
            assert!(record["config"]["n"].is_string());
            assert!(record["id"].is_string());
        }
    }
    assert_eq!(summaries[0], summaries[1], "summary must be reproducible");
    assert_eq!(csvs[0], csvs[1], "CSV must be reproducible");
    assert!(summaries[0].contains("Solved"), "{}", summaries[0]);
    assert!(summaries[0].contains("/4"), "{}", summaries[0]);
}

#[test]
fn bad_grid_cells_exit_two_and_name_their_line() {
    let scratch = Scratch::new();
    let puzzles = scratch.file("one.tsv", "a\t((....))\n");

    let unknown_key = scratch.file("unknown.txt", "level=1 bogus-key=3\n");
    let out = run(&[
        "suite",
        "--puzzles",
        puzzles.to_str().unwrap(),
        "--grid",
        unknown_key.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 2);
    assert!(stderr_of(&out).contains("line 1"), "{}", stderr_of(&out));

    let bad_value = scratch.file("badvalue.txt", "# comment\nlevel=two\n");
    let out = run(&[
        "suite",
        "--puzzles",
        puzzles.to_str().unwrap(),
        "--grid",
        bad_value.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 2);
    assert!(stderr_of(&out).contains("line 2"), "{}", stderr_of(&out));
}

#[test]
fn puzzle_file_solves_can_select_one_id() {
    let scratch = Scratch::new();
    let puzzles = scratch.file("two.tsv", "a\t((....))\nb\t(((...)))\n");
    let out = run(&[
        "solve",
        "--puzzles",
        puzzles.to_str().unwrap(),
        "--id",
        "b",
        "--n",
        "50",
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_of(&out));
    let text = stdout_of(&out);
    assert!(text.contains("b:"), "stdout: {text}");
    assert!(!text.contains("a:"), "stdout: {text}");

    let missing = run(&[
        "solve",
        "--puzzles",
        puzzles.to_str().unwrap(),
        "--id",
        "zzz",
    ]);
    assert_eq!(exit_code(&missing), 2);
    assert!(stderr_of(&missing).contains("zzz"));
}

#[test]
fn verbose_solves_trace_progress_to_stderr() {
    let out = run(&["solve", "((...))", "--n", "5", "--verbose"]);
    assert_eq!(exit_code(&out), 0);
    assert!(
        stderr_of(&out).contains("iteration"),
        "stderr: {}",
        stderr_of(&out)
    );
}
