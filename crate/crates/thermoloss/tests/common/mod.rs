#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

pub const BIN: &str = env!("CARGO_BIN_EXE_thermoloss");

pub fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data")
}

pub fn toy_bundle() -> PathBuf {
    data_dir().join("toy16")
}

pub fn run(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("THERMOLOSS_THREADS")
        .output()
        .expect("spawn thermoloss")
}

/// Runs with `--out FILE` and returns the parsed envelope; panics on a non-zero exit.
pub fn run_json(args: &[&str], out: &Path) -> Value {
    let mut full: Vec<&str> = args.to_vec();
    let out_s = out.to_str().unwrap();
    full.extend(["--out", out_s]);
    let o = run(&full);
    assert!(
        o.status.success(),
        "{args:?} exited {:?}: {}",
        o.status.code(),
        String::from_utf8_lossy(&o.stderr)
    );
    serde_json::from_slice(&fs::read(out).unwrap()).unwrap()
}

pub fn sha256_file(path: &Path) -> String {
    let bytes = fs::read(path).unwrap();
    format!("{:x}", Sha256::digest(bytes))
}

/// Hash over relative paths and contents of every file below `root`, in sorted order.
pub fn sha256_tree(root: &Path) -> String {
    let mut files = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                files.push(p);
            }
        }
    }
    files.sort();
    let mut h = Sha256::new();
    for f in files {
        h.update(f.strip_prefix(root).unwrap().to_string_lossy().as_bytes());
        h.update([0]);
        h.update(fs::read(&f).unwrap());
    }
    format!("{:x}", h.finalize())
}

pub fn write_json(path: &Path, v: &Value) {
    fs::write(path, serde_json::to_string_pretty(v).unwrap()).unwrap();
}

/// Small input files for every command, written into `dir`.
pub struct Fixtures {
    pub mu: PathBuf,
    pub nu: PathBuf,
    pub landmarks: PathBuf,
    pub targets: PathBuf,
    pub sigma2: PathBuf,
    pub windows: PathBuf,
    pub manifest: PathBuf,
    pub frame: PathBuf,
}

pub fn fixtures(dir: &Path) -> Fixtures {
    let f = Fixtures {
        mu: dir.join("mu.json"),
        nu: dir.join("nu.json"),
        landmarks: dir.join("pred.json"),
        targets: dir.join("gt.json"),
        sigma2: dir.join("sigma2.json"),
        windows: dir.join("windows.json"),
        manifest: dir.join("manifest.jsonl"),
        frame: toy_bundle().join("real").join("r000.pgm"),
    };
    write_json(&f.mu, &json!([[0.0, 0.0], [1.0, 0.5], [0.2, 0.9]]));
    write_json(&f.nu, &json!({ "points": [[0.1, 0.1], [0.8, 0.4], [0.5, 1.0]] }));
    write_json(
        &f.landmarks,
        &json!({ "convention_size": 3, "points": [[0.3, 0.4], [0.6, 0.4], [0.45, 0.7]] }),
    );
    write_json(
        &f.targets,
        &json!({ "convention_size": 3, "points": [[0.31, 0.41], [0.58, 0.42], [0.45, 0.66]] }),
    );
    write_json(&f.sigma2, &json!([0.01, 0.02, 0.5]));
    write_json(
        &f.windows,
        &json!({
            "image_height": 300,
            "image_width": 400,
            "windows": [
                { "level": 0, "scale": 1.0, "top": 0, "left": 0, "height": 224, "width": 224,
                  "landmarks": { "convention_size": 2, "points": [[0.5, 0.5], [0.9, 0.9]], "sigmas": [1.0, 3.0] } },
                { "level": 0, "scale": 1.0, "top": 76, "left": 176, "height": 224, "width": 224,
                  "landmarks": { "convention_size": 2, "points": [[0.1, 0.1], [0.4, 0.4]], "sigmas": [2.0, 0.5] } }
            ]
        }),
    );
    let gt = json!({ "convention_size": 2, "points": [[0.2, 0.2], [0.6, 0.8]] });
    let lines = [
        json!({ "frame": "f0", "height": 100, "width": 100, "prediction":
            { "convention_size": 2, "points": [[0.23, 0.24], [0.6, 0.8]], "sigmas": [0.1, 0.1] }, "ground_truth": gt }),
        json!({ "frame": "f1", "height": 100, "width": 100, "prediction": null, "ground_truth": gt }),
        json!({ "frame": "f2", "height": 100, "width": 100, "prediction":
            { "convention_size": 2, "points": [[0.2, 0.2], [0.6, 0.8]], "sigmas": [3.0, 3.0] }, "ground_truth": gt }),
    ];
    let text: String = lines.iter().map(|l| format!("{l}\n")).collect();
    fs::write(&f.manifest, text).unwrap();
    f
}
