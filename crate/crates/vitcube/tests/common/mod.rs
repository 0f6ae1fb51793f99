#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

pub fn approx(name: &str) -> PathBuf {
    data_dir().join("approx").join(name)
}

pub fn vitcube(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vitcube")).args(args).output().expect("spawn vitcube")
}

/// Runs and insists on success.
pub fn run(args: &[&str]) -> Output {
    let out = vitcube(args);
    assert!(
        out.status.success(),
        "vitcube {args:?} failed with {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

/// Factor curves the synthetic records are drawn from.
pub fn truth(c: f64) -> [f64; 4] {
    [0.6 + 0.5 * c, 0.8 + 0.2 * c, 0.7 + 0.3 * c, 0.6 + 0.4 * c]
}

pub const M0: f64 = 1_812_645_888.0;

/// Observation CSV of records lying exactly on [`truth`].
pub fn truth_csv(n: usize, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = String::from("id,r,d_i,d_m,w,macs,top1,top5\n");
    for k in 0..n {
        let c: f64 = rng.gen_range(0.25..1.05);
        let [r, d_i, d_m, w] = truth(c);
        let acc = 0.7 + 0.1 * c;
        s.push_str(&format!("t{k},{r},{d_i},{d_m},{w},{},{acc},\n", c * M0));
    }
    s
}

/// Every file under `dir` with its bytes, sorted by relative path.
pub fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}
