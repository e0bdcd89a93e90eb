//! Helpers shared by the CLI integration and acceptance suites.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use riskcal_core::ScoredRecord;

pub fn riskcal_exe() -> &'static str {
    env!("CARGO_BIN_EXE_riskcal")
}

/// Runs the binary with a pinned seed environment so tests are hermetic.
pub fn run_riskcal(dir: &Path, args: &[&str]) -> Output {
    Command::new(riskcal_exe())
        .args(args)
        .current_dir(dir)
        .env("RISKCAL_SEED", "42")
        .output()
        .expect("riskcal binary runs")
}

pub fn write_lines(path: &Path, lines: &[String]) {
    std::fs::write(path, lines.join("\n") + "\n").expect("write test input");
}

pub fn write_scored_jsonl(path: &Path, records: &[ScoredRecord]) {
    let lines: Vec<String> = records
        .iter()
        .map(|r| serde_json::to_string(r).expect("record serializes"))
        .collect();
    write_lines(path, &lines);
}

/// Blanks every `"timestamp":<digits>` occurrence so reruns can be compared
/// byte for byte.
pub fn normalize_timestamps(text: &str) -> String {
    let needle = "\"timestamp\":";
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(pos) = rest.find(needle) {
        let after = pos + needle.len();
        out.push_str(&rest[..after]);
        let tail = &rest[after..];
        let skip = tail
            .char_indices()
            .find(|(_, c)| !c.is_ascii_digit() && *c != ' ')
            .map_or(tail.len(), |(i, _)| i);
        out.push('0');
        rest = &tail[skip..];
    }
    out.push_str(rest);
    out
}

pub fn read_normalized(path: &Path) -> String {
    normalize_timestamps(&std::fs::read_to_string(path).expect("read output"))
}

/// Parses a CSV produced by the tool: skips `#` comment lines, returns the
/// header fields and per-row field vectors.
pub fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(path).expect("read csv");
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<String> =
        lines.next().expect("csv header").split(',').map(str::to_string).collect();
    let rows = lines
        .map(|line| {
            line.split(',')
                .map(|field| field.parse::<f64>().unwrap_or(f64::NAN))
                .collect()
        })
        .collect();
    (header, rows)
}

pub fn temp_dir(label: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("riskcal-test-{label}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).expect("create temp dir");
    dir
}
