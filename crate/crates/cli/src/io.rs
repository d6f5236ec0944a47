//! Output plumbing: deterministic CSV files, the run manifest, and the flat
//! key=value config format.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

/// 17 significant digits, enough to round-trip any f64.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Hash of the semantic configuration: sorted key=value lines.
pub fn config_hash(entries: &BTreeMap<String, String>) -> String {
    let mut canon = String::new();
    for (k, v) in entries {
        canon.push_str(k);
        canon.push('=');
        canon.push_str(v);
        canon.push('\n');
    }
    format!("{:016x}", fnv1a64(canon.as_bytes()))
}

/// Write a CSV file: a comment line carrying the config hash, a header row,
/// then the data rows at 17 significant digits.
pub fn write_csv(
    path: &Path,
    hash: &str,
    header: &[&str],
    rows: impl Iterator<Item = Vec<String>>,
) -> io::Result<()> {
    let mut out = String::new();
    out.push_str(&format!("# config-hash: {hash}\n"));
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out)
}

/// Flat key = value configuration file; `#` starts a comment.
pub fn load_config_file(path: &Path) -> io::Result<BTreeMap<String, String>> {
    let text = fs::read_to_string(path)?;
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        match line.split_once('=') {
            Some((k, v)) => {
                map.insert(k.trim().to_string(), v.trim().to_string());
            }
            None => {
                return Err(io::Error::new(
                    io::ErrorKind::InvalidData,
                    format!("{}:{}: expected key = value", path.display(), lineno + 1),
                ));
            }
        }
    }
    Ok(map)
}

pub struct Manifest {
    pub command: String,
    pub hash: String,
    pub started: u64,
    pub outputs: Vec<PathBuf>,
}

impl Manifest {
    pub fn new(command: String, hash: String) -> Self {
        Manifest {
            command,
            hash,
            started: unix_now(),
            outputs: Vec::new(),
        }
    }

    pub fn add_output(&mut self, path: PathBuf) {
        self.outputs.push(path);
    }

    pub fn write(&self, dir: &Path) -> io::Result<()> {
        let mut f = fs::File::create(dir.join("manifest.txt"))?;
        writeln!(f, "command = {}", self.command)?;
        writeln!(f, "config_hash = {}", self.hash)?;
        writeln!(f, "version = sigmaflow-cli {}", env!("CARGO_PKG_VERSION"))?;
        writeln!(f, "started_unix = {}", self.started)?;
        writeln!(f, "finished_unix = {}", unix_now())?;
        for o in &self.outputs {
            writeln!(f, "output = {}", o.display())?;
        }
        Ok(())
    }
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}
