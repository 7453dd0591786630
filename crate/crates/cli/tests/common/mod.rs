#![allow(dead_code)]

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_coldstart"));
    c.env("RUST_LOG", "warn");
    c
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

pub fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn prototypes(
    rng: &mut ChaCha8Rng,
    groups: usize,
    items: usize,
    lo: f64,
    hi: f64,
) -> Vec<Vec<f64>> {
    (0..groups)
        .map(|_| (0..items).map(|_| rng.random_range(lo..hi)).collect())
        .collect()
}

/// Jester-format file (count column, then 100 cells, 99 for unrated) of users
/// scattered around a few taste prototypes.
pub fn write_jester(path: &Path, n_users: usize, groups: usize, seed: u64) -> PathBuf {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let protos = prototypes(&mut rng, groups, 100, -9.0, 9.0);
    let noise = Normal::new(0.0, 3.0).unwrap();
    let mut out = String::new();
    for u in 0..n_users {
        let p = &protos[u % groups];
        let n = rng.random_range(36..=100);
        let mut cells = vec!["99".to_string(); 100];
        for i in sample(&mut rng, 100, n) {
            let v: f64 = (p[i] + noise.sample(&mut rng)).clamp(-10.0, 10.0);
            cells[i] = format!("{v:.2}");
        }
        writeln!(out, "{n}\t{}", cells.join("\t")).unwrap();
    }
    fs::write(path, out).unwrap();
    path.to_path_buf()
}

/// MovieLens `user::item::rating::timestamp` file; about a third of users
/// rate exactly `min` items.
pub fn write_movielens(
    path: &Path,
    n_users: usize,
    n_items: usize,
    min: usize,
    seed: u64,
) -> PathBuf {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let protos = prototypes(&mut rng, 5, n_items, 1.0, 5.0);
    let noise = Normal::new(0.0, 0.7).unwrap();
    let mut out = String::new();
    for u in 0..n_users {
        let p = &protos[u % 5];
        let n = if rng.random_bool(0.35) {
            min
        } else {
            rng.random_range(min + 1..=3 * min)
        };
        let mut ts: i64 = 978_300_000 + rng.random_range(0..1_000_000);
        for i in sample(&mut rng, n_items, n) {
            let v = (p[i] + noise.sample(&mut rng)).round().clamp(1.0, 5.0);
            ts += rng.random_range(0..500);
            writeln!(out, "{}::{}::{}::{}", u + 1, i + 1, v, ts).unwrap();
        }
    }
    fs::write(path, out).unwrap();
    path.to_path_buf()
}

pub fn read(path: &Path) -> Vec<u8> {
    fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}
