//! Shared inputs for the benchmarks.

use std::path::PathBuf;

pub fn fixture(name: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

/// A log of `n` lines cycling through three line shapes.
pub fn synthetic_log(n: usize) -> String {
    let mut out = String::new();
    for i in 0..n {
        match i % 3 {
            0 => out.push_str(&format!("2024-01-{:02} 10:{:02}:{:02} INFO worker-{} started job {}\n", i % 28 + 1, i % 60, (i * 7) % 60, i % 5, i)),
            1 => out.push_str(&format!("2024-01-{:02} 10:{:02}:{:02} WARN queue depth {} above {}\n", i % 28 + 1, i % 60, (i * 7) % 60, i * 3, 100)),
            _ => out.push_str(&format!("user={} action=login ok={}\n", ["ann", "bob", "cy"][i % 3], i % 2 == 0)),
        }
    }
    out
}
