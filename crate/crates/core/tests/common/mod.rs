#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn fixture(name: &str) -> String {
    fs::read_to_string(fixture_dir().join(name)).unwrap()
}

/// `(file name, contents)` for every `.c` file in a fixture subdirectory,
/// sorted by name.
pub fn fixture_set(sub: &str) -> Vec<(String, String)> {
    let mut files: Vec<_> = fs::read_dir(fixture_dir().join(sub))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "c"))
        .collect();
    files.sort();
    files
        .into_iter()
        .map(|p| {
            let name = p.file_name().unwrap().to_string_lossy().into_owned();
            (name, fs::read_to_string(&p).unwrap())
        })
        .collect()
}

pub fn expected_metrics() -> serde_json::Value {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/oracles/expected_metrics.json");
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}
