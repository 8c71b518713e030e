//! File formats. Every float is written with 17 significant digits so that
//! reading a file back yields the same `f64`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use hawkes_renewal::rates::RateCurve;
use hawkes_renewal::{EventStream, Kernel, WindowSample};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

pub const EVENTS_SCHEMA: &str = "hawkes-events/1";
pub const WINDOWS_SCHEMA: &str = "hawkes-windows/1";
pub const RATE_SCHEMA: &str = "hawkes-rate/1";

pub fn float(x: f64) -> String {
    format!("{x:.16e}")
}

/// First 16 hex digits of the SHA-256 of the segment list.
pub fn kernel_hash(kernel: &Kernel) -> String {
    let mut canonical = String::new();
    for s in kernel.segments() {
        let _ = write!(
            canonical,
            "{:016x}:{:016x}:{:016x};",
            s.start.to_bits(),
            s.end.to_bits(),
            s.value.to_bits()
        );
    }
    hex::encode(&Sha256::digest(canonical.as_bytes())[..8])
}

/// Identification written at the top of an events file.
#[derive(Debug, Clone, PartialEq)]
pub struct EventsHeader {
    pub lambda: f64,
    pub kernel_hash: String,
    pub seed: u64,
    pub replica: u64,
    pub horizon: f64,
    /// `L(h)` of the simulated kernel, so the file can be decomposed alone.
    pub support: f64,
}

pub fn events_csv(header: &EventsHeader, stream: &EventStream) -> String {
    let mut out = format!(
        "# schema={EVENTS_SCHEMA} lambda={} kernel={} seed={} replica={} horizon={} support={}\ntime\n",
        float(header.lambda),
        header.kernel_hash,
        header.seed,
        header.replica,
        float(header.horizon),
        float(header.support),
    );
    for &t in stream.times() {
        out.push_str(&float(t));
        out.push('\n');
    }
    out
}

pub fn read_events(path: &Path) -> Result<(EventsHeader, EventStream), CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let bad = |msg: String| CliError::Config(format!("{}: {msg}", path.display()));
    let mut lines = text.lines();
    let first = lines.next().ok_or_else(|| bad("empty file".into()))?;
    let fields: std::collections::HashMap<&str, &str> = first
        .strip_prefix('#')
        .ok_or_else(|| bad("missing '#' header line".into()))?
        .split_whitespace()
        .filter_map(|kv| kv.split_once('='))
        .collect();
    let get = |key: &str| {
        fields
            .get(key)
            .copied()
            .ok_or_else(|| bad(format!("header lacks '{key}'")))
    };
    let num = |key: &str| -> Result<f64, CliError> {
        get(key)?
            .parse()
            .map_err(|e| bad(format!("header '{key}': {e}")))
    };
    let int = |key: &str| -> Result<u64, CliError> {
        get(key)?
            .parse()
            .map_err(|e| bad(format!("header '{key}': {e}")))
    };
    let header = EventsHeader {
        lambda: num("lambda")?,
        kernel_hash: get("kernel")?.to_string(),
        seed: int("seed")?,
        replica: int("replica")?,
        horizon: num("horizon")?,
        support: num("support")?,
    };
    let times = lines
        .filter(|l| !l.trim().is_empty() && l.trim() != "time")
        .map(|l| {
            l.trim()
                .parse::<f64>()
                .map_err(|e| bad(format!("time '{l}': {e}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let stream = EventStream::new(times, header.horizon).map_err(|e| bad(e.to_string()))?;
    Ok((header, stream))
}

pub fn windows_csv(sample: &WindowSample) -> String {
    let mut out = String::from("index,tau,w,first_offset\n");
    for (i, w) in sample.windows().iter().enumerate() {
        let _ = writeln!(
            out,
            "{i},{},{},{}",
            float(w.tau()),
            w.w(),
            float(w.first_offset())
        );
    }
    out
}

#[derive(Debug, Serialize)]
pub struct WindowsMeta<'a> {
    pub schema: &'static str,
    pub n_windows: usize,
    pub discarded_tail_count: usize,
    pub support: f64,
    pub horizon: f64,
    pub provenance: &'a hawkes_renewal::renewal::Provenance,
}

impl<'a> WindowsMeta<'a> {
    pub fn new(sample: &'a WindowSample) -> Self {
        Self {
            schema: WINDOWS_SCHEMA,
            n_windows: sample.len(),
            discarded_tail_count: sample.discarded_tail_count(),
            support: sample.support(),
            horizon: sample.horizon(),
            provenance: &sample.provenance,
        }
    }
}

pub fn rate_csv(curve: &RateCurve) -> String {
    let mut out = String::from("z,J,provenance,flag\n");
    for p in &curve.points {
        let j = if p.j.is_finite() {
            float(p.j)
        } else {
            "inf".to_string()
        };
        let flag = match p.flag {
            hawkes_renewal::rates::RateFlag::Ok => "ok",
            hawkes_renewal::rates::RateFlag::Truncated => "truncated",
            hawkes_renewal::rates::RateFlag::Infinite => "infinite",
        };
        let _ = writeln!(
            out,
            "{},{j},{},{flag}",
            float(p.z),
            curve.provenance.as_str()
        );
    }
    out
}

/// Record of one command run. Everything except `generated_at` is a function
/// of the configuration.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub toolkit: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub lambda: f64,
    pub kernel: Vec<[f64; 3]>,
    pub kernel_hash: String,
    pub seed: u64,
    pub replicas: Vec<u64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub coupling_group: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub event_counts: Vec<Vec<usize>>,
    pub schemas: Schemas,
    pub files: Vec<String>,
    pub config: crate::config::ExperimentConfig,
    /// Seconds since the Unix epoch; the only field that differs between
    /// replays.
    pub generated_at: u64,
}

#[derive(Debug, Serialize)]
pub struct Schemas {
    pub events: &'static str,
    pub windows: &'static str,
    pub rate: &'static str,
}

impl Default for Schemas {
    fn default() -> Self {
        Self {
            events: EVENTS_SCHEMA,
            windows: WINDOWS_SCHEMA,
            rate: RATE_SCHEMA,
        }
    }
}

pub fn now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

/// Output directory with write helpers that map failures to I/O errors.
pub struct OutDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf, CliError> {
        let path = self.root.join(name);
        std::fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
        self.written.push(name.to_string());
        Ok(path)
    }

    pub fn write_json(&mut self, name: &str, value: &impl Serialize) -> Result<PathBuf, CliError> {
        let mut text = serde_json::to_string_pretty(value).expect("plain data serializes");
        text.push('\n');
        self.write(name, &text)
    }

    pub fn files(&self) -> Vec<String> {
        self.written.clone()
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, 12345.678_901_234_5, 5e-324, f64::MAX] {
            assert_eq!(float(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn kernel_hash_depends_on_segments() {
        let a = Kernel::new([(0.0, 1.0, 0.5)]).unwrap();
        let b = Kernel::new([(0.0, 1.0, 0.25)]).unwrap();
        assert_eq!(kernel_hash(&a).len(), 16);
        assert_ne!(kernel_hash(&a), kernel_hash(&b));
        assert_eq!(kernel_hash(&a), kernel_hash(&a.clone()));
    }

    #[test]
    fn events_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let stream = EventStream::new(vec![0.25, 1.0 / 3.0, 7.5], 10.0).unwrap();
        let header = EventsHeader {
            lambda: 1.5,
            kernel_hash: "00ff".into(),
            seed: 3,
            replica: 2,
            horizon: 10.0,
            support: 2.0,
        };
        let path = dir.path().join("e.csv");
        std::fs::write(&path, events_csv(&header, &stream)).unwrap();
        let (h, s) = read_events(&path).unwrap();
        assert_eq!(h, header);
        assert_eq!(s, stream);
    }
}
