use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use tempfile::TempDir;

fn dialekt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dialekt")).args(args).output().expect("spawn dialekt")
}

fn dialekt_stdin(args: &[&str], input: &str) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_dialekt"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("spawn dialekt");
    child.stdin.take().unwrap().write_all(input.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn ok(out: &Output) {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

fn p(dir: &TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

fn s(path: &Path) -> &str {
    path.to_str().unwrap()
}

const TINY_MODEL: [&str; 8] = ["--embedding-dim", "8", "--hidden-dim", "8", "--train-steps", "4", "--batch-size", "8"];

#[test]
fn preprocess_rewrites_numbers_and_keeps_clean_rows() {
    let dir = TempDir::new().unwrap();
    let corpus = p(&dir, "corpus.tsv");
    fs::write(
        &corpus,
        "region\tdialect\tnormalized\nNyland\tnittånhondratrettitvåå\t1932\nÅland\tKan jo, nåo!\tkan ju nog\n",
    )
    .unwrap();
    let table = p(&dir, "rewrites.tsv");
    fs::write(&table, "1932\tnittonhundratrettitvå\n").unwrap();
    let (out, report) = (p(&dir, "pairs.tsv"), p(&dir, "report.txt"));
    ok(&dialekt(&["preprocess", "--corpus", s(&corpus), "--rewrites", s(&table), "-o", s(&out), "--report", s(&report)]));
    assert_eq!(
        fs::read_to_string(&out).unwrap(),
        "nittånhondratrettitvåå\tnittonhundratrettitvå\tNyland\nkan jo nåo\tkan ju nog\tÅland\n"
    );
    let r = fs::read_to_string(&report).unwrap();
    assert!(r.contains("rewritten\t1\tnormalized\t1932\tnittonhundratrettitvå"));
    assert!(r.contains("rejected 0"));
}

#[test]
fn preprocess_fails_closed_on_unmapped_characters() {
    let dir = TempDir::new().unwrap();
    let corpus = p(&dir, "corpus.tsv");
    fs::write(&corpus, "region\tdialect\tnormalized\nNyland\ttie euro\t10 €\n").unwrap();
    let out = dialekt(&["preprocess", "--corpus", s(&corpus), "-o", s(&p(&dir, "x.tsv"))]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("rejected\t1\t"), "{err}");
    assert!(!p(&dir, "x.tsv").exists());
}

#[test]
fn chunk_size_outside_range_is_a_usage_error() {
    let out = dialekt(&["experiment", "-i", "missing.tsv", "-k", "1,6"]);
    assert_eq!(out.status.code(), Some(2));
    let out = dialekt(&["chunk", "-i", "x", "-k", "0", "--source-out", "a", "--target-out", "b"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn experiment_is_reproducible_and_has_one_row_per_system() {
    let dir = TempDir::new().unwrap();
    let pairs = p(&dir, "synth.tsv");
    ok(&dialekt(&["synth", "--lines", "40", "-o", s(&pairs), "--join-probability", "0.3"]));
    let mut outputs = Vec::new();
    for run in 0..2 {
        let (table, kv) = (p(&dir, &format!("t{run}.txt")), p(&dir, &format!("r{run}.kv")));
        let mut args = vec!["experiment", "-i", s(&pairs), "-k", "1,2", "-o", s(&table), "--report", s(&kv)];
        args.extend(TINY_MODEL);
        ok(&dialekt(&args));
        outputs.push((fs::read(&table).unwrap(), fs::read(&kv).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
    let table = String::from_utf8(outputs[0].0.clone()).unwrap();
    assert_eq!(table.lines().count(), 4, "{table}");
    assert!(table.lines().nth(1).unwrap().starts_with("no normalization"));
    let kv = String::from_utf8(outputs[0].1.clone()).unwrap();
    assert_eq!(kv.matches("system_label=").count(), 3);
}

#[test]
fn staged_pipeline_runs_end_to_end() {
    let dir = TempDir::new().unwrap();
    let (all, train, test) = (p(&dir, "all.tsv"), p(&dir, "train.tsv"), p(&dir, "test.tsv"));
    ok(&dialekt(&[
        "synth", "--lines", "30", "-o", s(&all), "--train-out", s(&train), "--test-out", s(&test),
        "--join-probability", "0.5",
    ]));
    let n_train = fs::read_to_string(&train).unwrap().lines().count();
    assert_eq!(n_train, 21);
    let aligned = p(&dir, "train.aligned");
    let aligner = p(&dir, "aligner.txt");
    ok(&dialekt(&["align", "-i", s(&train), "--extra", s(&test), "-o", s(&aligned), "--save-model", s(&aligner)]));
    assert_eq!(fs::read_to_string(&aligned).unwrap().lines().count(), n_train);
    assert!(fs::read_to_string(&aligner).unwrap().starts_with("dialekt-aligner v1"));
    let (src, tgt) = (p(&dir, "src.txt"), p(&dir, "tgt.txt"));
    ok(&dialekt(&["chunk", "-i", s(&aligned), "-k", "2", "--source-out", s(&src), "--target-out", s(&tgt)]));
    assert!(fs::read_to_string(&src).unwrap().contains(" _ "));
    let (model, log) = (p(&dir, "model.bin"), p(&dir, "loss.tsv"));
    let mut args = vec!["train", "--source", s(&src), "--target", s(&tgt), "-k", "2", "-m", s(&model), "--loss-log", s(&log)];
    args.extend(TINY_MODEL);
    args.extend(["--set", "log_interval=2"]);
    ok(&dialekt(&args));
    assert_eq!(fs::read_to_string(&log).unwrap().lines().count(), 2);
    let out = dialekt(&["evaluate", "-m", s(&model), "-i", s(&test)]);
    ok(&out);
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.contains("chunk of 2"), "{table}");
}

fn train_toy(dir: &TempDir, source: &str, target: &str) -> PathBuf {
    let (src, tgt, model) = (p(dir, "toy.src"), p(dir, "toy.tgt"), p(dir, "toy.bin"));
    fs::write(&src, format!("{source}\n")).unwrap();
    fs::write(&tgt, format!("{target}\n")).unwrap();
    ok(&dialekt(&[
        "train", "--source", s(&src), "--target", s(&tgt), "-k", "1", "-m", s(&model), "--embedding-dim", "16",
        "--hidden-dim", "32", "--dropout", "0", "--train-steps", "600", "--batch-size", "1",
    ]));
    model
}

#[test]
fn normalize_reads_stdin_line_by_line() {
    let dir = TempDir::new().unwrap();
    let model = train_toy(&dir, "h u u v u i n t r e s s e", "h u v u d i n t r e s s e n");
    let out = dialekt_stdin(&["normalize", "-m", s(&model)], "Huuvuintresse\n\nhuuvuintresse€ xq\n");
    ok(&out);
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[0], "huvudintressen");
    assert_eq!(lines[1], "");

    let empty = dialekt_stdin(&["normalize", "-m", s(&model)], "");
    ok(&empty);
    assert!(empty.stdout.is_empty());
}

#[test]
fn unreadable_model_is_an_error() {
    let dir = TempDir::new().unwrap();
    let bad = p(&dir, "bad.bin");
    fs::write(&bad, "not a model\n").unwrap();
    let out = dialekt_stdin(&["normalize", "-m", s(&bad)], "hej\n");
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
    let out = dialekt_stdin(&["normalize", "-m", s(&p(&dir, "missing.bin"))], "");
    assert!(!out.status.success());
}
