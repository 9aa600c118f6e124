use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::{execute, Command, Global};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Relative tolerance for floating outputs that are not byte-identical.
const FLOAT_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileHash {
    pub path: String,
    pub sha256: String,
}

/// Everything needed to reproduce a run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Materialized command arguments.
    pub config: Value,
    pub global: Global,
    pub working_dir: PathBuf,
    pub inputs: Vec<FileHash>,
    pub seed: u64,
    pub tool_version: String,
    pub started: String,
    pub finished: String,
    /// Output files, relative to the output directory.
    pub outputs: Vec<FileHash>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Tracks the files a command reads and writes.
pub struct Recorder {
    out_dir: PathBuf,
    inputs: Vec<FileHash>,
    outputs: Vec<FileHash>,
}

impl Recorder {
    pub fn new(out_dir: &Path) -> anyhow::Result<Self> {
        fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
        Ok(Self { out_dir: out_dir.to_path_buf(), inputs: Vec::new(), outputs: Vec::new() })
    }

    pub fn read_input(&mut self, path: &Path) -> anyhow::Result<String> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let entry = FileHash { path: path.display().to_string(), sha256: sha256_hex(text.as_bytes()) };
        if !self.inputs.contains(&entry) {
            self.inputs.push(entry);
        }
        Ok(text)
    }

    pub fn write(&mut self, name: &str, contents: &str) -> anyhow::Result<PathBuf> {
        let path = self.out_dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        self.outputs.retain(|f| f.path != name);
        self.outputs.push(FileHash { path: name.to_string(), sha256: sha256_hex(contents.as_bytes()) });
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> anyhow::Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, &text)
    }
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339()
}

fn run_and_record(command: &Command, global: &Global) -> anyhow::Result<RunManifest> {
    let started = now();
    let mut rec = Recorder::new(&global.out_dir)?;
    execute(command, global, &mut rec)?;
    let manifest = RunManifest {
        command: command.name().to_string(),
        config: serde_json::to_value(command)?,
        global: global.clone(),
        working_dir: std::env::current_dir()?,
        inputs: rec.inputs.clone(),
        seed: global.seed,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        started,
        finished: now(),
        outputs: rec.outputs.clone(),
    };
    rec.write_json(MANIFEST_FILE, &manifest)?;
    Ok(manifest)
}

pub fn record(command: &Command, global: &Global) -> anyhow::Result<()> {
    run_and_record(command, global).map(|_| ())
}

#[derive(Clone, Debug, clap::Args, Serialize, Deserialize)]
pub struct ReplayArgs {
    /// Manifest written by an earlier run.
    pub manifest: PathBuf,
    /// Directory for the replayed outputs (defaults to `replay/` next to the
    /// manifest).
    #[arg(long)]
    pub into: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct FileVerdict {
    path: String,
    verdict: &'static str,
}

/// Re-runs a manifest and compares every recorded output.
pub fn replay(args: &ReplayArgs, _global: &Global) -> anyhow::Result<()> {
    let text = fs::read_to_string(&args.manifest).with_context(|| format!("reading {}", args.manifest.display()))?;
    let manifest: RunManifest = serde_json::from_str(&text).context("parsing manifest")?;
    let command: Command = serde_json::from_value(manifest.config.clone()).context("parsing recorded command")?;
    let base = args.manifest.parent().unwrap_or(Path::new(".")).to_path_buf();
    let into = args.into.clone().unwrap_or_else(|| base.join("replay"));
    let into = std::path::absolute(&into)?;
    let orig_dir = std::path::absolute(&base)?;
    std::env::set_current_dir(&manifest.working_dir)
        .with_context(|| format!("entering recorded working directory {}", manifest.working_dir.display()))?;
    for input in &manifest.inputs {
        let bytes = fs::read(&input.path).with_context(|| format!("reading input {}", input.path))?;
        if sha256_hex(&bytes) != input.sha256 {
            bail!(crate::InputError(format!("input {} changed since the recorded run", input.path)));
        }
    }
    let mut global = manifest.global.clone();
    global.out_dir = into.clone();
    let rerun = run_and_record(&command, &global)?;

    let mut verdicts = Vec::new();
    for out in &manifest.outputs {
        let verdict = match rerun.outputs.iter().find(|o| o.path == out.path) {
            None => "missing",
            Some(o) if o.sha256 == out.sha256 => "identical",
            Some(_) => {
                let a = fs::read_to_string(orig_dir.join(&out.path))?;
                let b = fs::read_to_string(into.join(&out.path))?;
                if outputs_close(&out.path, &a, &b) {
                    "within tolerance"
                } else {
                    "differs"
                }
            }
        };
        println!("{:<40} {verdict}", out.path);
        verdicts.push(FileVerdict { path: out.path.clone(), verdict });
    }
    let mut rec = Recorder::new(&into)?;
    rec.write_json("replay_report.json", &verdicts)?;
    let bad = verdicts.iter().filter(|v| v.verdict == "differs" || v.verdict == "missing").count();
    if bad > 0 {
        bail!("{bad} output(s) did not reproduce");
    }
    println!("replay reproduced {} output(s)", verdicts.len());
    Ok(())
}

fn close(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= FLOAT_TOL * a.abs().max(b.abs()).max(1.0)
}

fn json_close(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => match (x.as_f64(), y.as_f64()) {
            (Some(x), Some(y)) => close(x, y),
            _ => x == y,
        },
        (Value::Array(x), Value::Array(y)) => x.len() == y.len() && x.iter().zip(y).all(|(p, q)| json_close(p, q)),
        (Value::Object(x), Value::Object(y)) => {
            x.len() == y.len() && x.iter().all(|(k, v)| y.get(k).is_some_and(|w| json_close(v, w)))
        }
        _ => a == b,
    }
}

fn csv_close(a: &str, b: &str) -> bool {
    let (la, lb): (Vec<&str>, Vec<&str>) = (a.lines().collect(), b.lines().collect());
    la.len() == lb.len()
        && la.iter().zip(&lb).all(|(x, y)| {
            let (cx, cy): (Vec<&str>, Vec<&str>) = (x.split(',').collect(), y.split(',').collect());
            cx.len() == cy.len()
                && cx.iter().zip(&cy).all(|(p, q)| match (p.parse::<f64>(), q.parse::<f64>()) {
                    (Ok(p), Ok(q)) => close(p, q) || (p.is_nan() && q.is_nan()),
                    _ => p == q,
                })
        })
}

/// Byte-different outputs still count as reproduced when every number agrees
/// to the float tolerance.
fn outputs_close(path: &str, a: &str, b: &str) -> bool {
    if path.ends_with(".json") {
        match (serde_json::from_str::<Value>(a), serde_json::from_str::<Value>(b)) {
            (Ok(x), Ok(y)) => json_close(&x, &y),
            _ => false,
        }
    } else if path.ends_with(".csv") {
        csv_close(a, b)
    } else {
        a == b
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_comparison() {
        assert!(csv_close("T,D\n1e0,2.5\n", "T,D\n1e0,2.5000000000000004\n"));
        assert!(!csv_close("T,D\n1e0,2.5\n", "T,D\n1e0,2.6\n"));
        let a: Value = serde_json::json!({"x": [1.0, 2.0], "s": "a"});
        let b: Value = serde_json::json!({"x": [1.0, 2.0000000000001], "s": "a"});
        assert!(json_close(&a, &b));
        assert!(!json_close(&a, &serde_json::json!({"x": [1.0, 2.1], "s": "a"})));
    }

    #[test]
    fn hashes_are_hex_sha256() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
