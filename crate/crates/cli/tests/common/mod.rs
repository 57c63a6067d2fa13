//! Helpers shared by the CLI test targets.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn preset(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("presets").join(name)
}

pub fn molcomm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_molcomm")).args(args).output().expect("binary runs")
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

/// Writes a preset with some keys replaced.
pub fn preset_with(dir: &Path, name: &str, overrides: &[(&str, &str)]) -> PathBuf {
    let text = std::fs::read_to_string(preset(name)).unwrap();
    let mut lines: Vec<String> = text
        .lines()
        .filter(|l| !overrides.iter().any(|(k, _)| l.split('=').next().is_some_and(|lhs| lhs.trim() == *k)))
        .map(str::to_owned)
        .collect();
    lines.extend(overrides.iter().map(|(k, v)| format!("{k} = {v}")));
    let path = dir.join(format!("custom-{name}"));
    std::fs::write(&path, lines.join("\n")).unwrap();
    path
}
