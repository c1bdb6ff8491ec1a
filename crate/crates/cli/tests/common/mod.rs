#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::Rng;
use roomsim::io::write_wav_f32;
use roomsim::rng::substream;

pub fn roomsim() -> Command {
    Command::new(env!("CARGO_BIN_EXE_roomsim"))
}

/// Runs the binary with `args` on a rayon pool of `threads` workers.
pub fn run_with_threads(threads: usize, args: &[&str]) -> Output {
    roomsim()
        .args(args)
        .env("RAYON_NUM_THREADS", threads.to_string())
        .output()
        .expect("spawn roomsim")
}

pub fn run(args: &[&str]) -> Output {
    roomsim().args(args).output().expect("spawn roomsim")
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn noise(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = substream(seed, 99, 0);
    (0..n).map(|_| rng.gen::<f64>() * 0.6 - 0.3).collect()
}

pub fn write_mono(path: &Path, x: &[f64]) -> PathBuf {
    write_wav_f32(path, &[x.to_vec()], 16000).unwrap();
    path.to_path_buf()
}

/// Sorted key paths of a JSON value; array elements collapse to `[]`.
pub fn key_paths(v: &serde_json::Value) -> Vec<String> {
    fn walk(v: &serde_json::Value, prefix: &str, out: &mut Vec<String>) {
        match v {
            serde_json::Value::Object(m) => {
                for (k, x) in m {
                    let p = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                    out.push(p.clone());
                    walk(x, &p, out);
                }
            }
            serde_json::Value::Array(a) => {
                for x in a {
                    walk(x, &format!("{prefix}[]"), out);
                }
            }
            _ => {}
        }
    }
    let mut out = Vec::new();
    walk(v, "", &mut out);
    out.sort();
    out.dedup();
    out
}

pub fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Every file under `dir` (recursively) as (relative path, bytes), sorted.
pub fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<(String, Vec<u8>)>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out);
    out.sort();
    out
}
