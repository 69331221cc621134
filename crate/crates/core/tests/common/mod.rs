#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

pub fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aeroforge"))
        .args(args)
        .env_remove("AEROFORGE_ROOT")
        .env_remove("AEROFORGE_MAX_PARALLEL")
        .env_remove("AEROFORGE_PLANNER_URL")
        .output()
        .expect("binary runs")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().unwrap_or(-1)
}

/// Every file under `root`, relative path → bytes.
pub fn tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p
                    .strip_prefix(root)
                    .unwrap()
                    .to_string_lossy()
                    .replace('\\', "/");
                out.insert(rel, fs::read(&p).unwrap());
            }
        }
    }
    out
}

const TIMING_KEYS: [&str; 5] = [
    "timestamp",
    "wall_time_s",
    "started_s",
    "makespan_s",
    "max_concurrency",
];

fn strip_keys(v: &mut serde_json::Value) {
    match v {
        serde_json::Value::Object(m) => {
            for k in TIMING_KEYS {
                m.remove(k);
            }
            for x in m.values_mut() {
                strip_keys(x);
            }
        }
        serde_json::Value::Array(a) => a.iter_mut().for_each(strip_keys),
        _ => {}
    }
}

/// Removes wall-clock content: log line prefixes, timestamp fields in JSON
/// documents and note headers, and scheduler timings.
pub fn without_timestamps(rel: &str, bytes: &[u8]) -> Vec<u8> {
    let text = String::from_utf8_lossy(bytes);
    let normalized: String = if rel == "pipeline.log" {
        text.lines()
            .map(|l| l.split_once(' ').map_or(l, |(_, rest)| rest))
            .collect::<Vec<_>>()
            .join("\n")
    } else if rel == "provenance.log" {
        text.lines()
            .map(|l| {
                let mut v: serde_json::Value = serde_json::from_str(l).unwrap();
                strip_keys(&mut v);
                // The run report embeds timings, so its digest varies too.
                if v["path"] == "run_report.json" {
                    v.as_object_mut().unwrap().remove("digest");
                }
                v.to_string()
            })
            .collect::<Vec<_>>()
            .join("\n")
    } else if rel.ends_with(".meta") || rel == "run_report.json" {
        let mut v: serde_json::Value = serde_json::from_slice(bytes).unwrap();
        strip_keys(&mut v);
        v.to_string()
    } else if rel.starts_with("knowledge/") {
        text.lines()
            .filter(|l| !l.starts_with("timestamp:"))
            .collect::<Vec<_>>()
            .join("\n")
    } else {
        return bytes.to_vec();
    };
    normalized.into_bytes()
}

/// Paths whose normalized content differs between two trees (or exist in only one).
pub fn tree_diff(a: &Path, b: &Path, filter: impl Fn(&str) -> bool) -> Vec<String> {
    let ta = tree(a);
    let tb = tree(b);
    let mut keys: Vec<&String> = ta.keys().chain(tb.keys()).filter(|k| filter(k)).collect();
    keys.sort();
    keys.dedup();
    keys.into_iter()
        .filter(|k| match (ta.get(*k), tb.get(*k)) {
            (Some(x), Some(y)) => without_timestamps(k, x) != without_timestamps(k, y),
            _ => true,
        })
        .cloned()
        .collect()
}
