//! On-disk cache of sampled dimension-function curves.
//!
//! One file per `(family, parameter hash, grid hash)` key. Values are stored
//! as the hex of their IEEE bits, so loads are bit-identical, and the body is
//! covered by a SHA-256 content hash; a file whose hash does not match is
//! treated as a miss and rewritten.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use mfhs::analytic::dimension_functions;
use mfhs::{CurveLabel, MeasureSpecF64, SpectrumCurveF64};
use sha2::{Digest, Sha256};

use crate::config::measure_lines;

pub const CACHE_ENV: &str = "MFHS_CACHE_DIR";
const MAGIC: &str = "mfhs-curves 1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CacheOutcome {
    Hit,
    Miss,
    /// file present but unreadable or failing its content hash
    Corrupt,
    Disabled,
}

#[derive(Debug, Clone)]
pub struct CurveCache {
    dir: PathBuf,
    enabled: bool,
}

fn sha_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn bits(x: f64) -> String {
    hex::encode(x.to_bits().to_be_bytes())
}

fn unbits(s: &str) -> Option<f64> {
    let raw: [u8; 8] = hex::decode(s).ok()?.try_into().ok()?;
    Some(f64::from_bits(u64::from_be_bytes(raw)))
}

impl CurveCache {
    pub fn new(dir: impl Into<PathBuf>, enabled: bool) -> Self {
        Self {
            dir: dir.into(),
            enabled,
        }
    }

    /// `$MFHS_CACHE_DIR` when set, `fallback` otherwise.
    pub fn from_env(fallback: &Path, enabled: bool) -> Self {
        let dir = std::env::var_os(CACHE_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| fallback.to_path_buf());
        Self::new(dir, enabled)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn parameter_hash(spec: &MeasureSpecF64) -> String {
        sha_hex(measure_lines(spec).join("\n").as_bytes())
    }

    pub fn grid_hash(q_grid: &[f64]) -> String {
        let text: Vec<String> = q_grid.iter().map(|&q| bits(q)).collect();
        sha_hex(text.join(",").as_bytes())
    }

    pub fn key(spec: &MeasureSpecF64, q_grid: &[f64]) -> String {
        sha_hex(
            format!(
                "{}|{}|{}",
                spec.family(),
                Self::parameter_hash(spec),
                Self::grid_hash(q_grid)
            )
            .as_bytes(),
        )
    }

    pub fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.curves"))
    }

    pub fn store(&self, key: &str, curves: &[SpectrumCurveF64]) -> io::Result<()> {
        fs::create_dir_all(&self.dir)?;
        let body = encode(curves);
        let text = format!("{MAGIC}\nkey={key}\ncontent={}\n{body}", sha_hex(body.as_bytes()));
        fs::write(self.path(key), text)
    }

    /// `Ok(None)` on a miss; `Err(())` when the file exists but is corrupt.
    pub fn load(&self, key: &str) -> Result<Option<Vec<SpectrumCurveF64>>, ()> {
        let text = match fs::read_to_string(self.path(key)) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(None),
            Err(_) => return Err(()),
        };
        let mut parts = text.splitn(4, '\n');
        let (Some(MAGIC), Some(k), Some(content), Some(body)) = (parts.next(), parts.next(), parts.next(), parts.next())
        else {
            return Err(());
        };
        if k.strip_prefix("key=") != Some(key) || content.strip_prefix("content=") != Some(&sha_hex(body.as_bytes())) {
            return Err(());
        }
        decode(body).map(Some).ok_or(())
    }

    /// Sampled closed-form curves of `spec` on `q_grid`, from the cache when
    /// a valid entry exists.
    pub fn curves(&self, spec: &MeasureSpecF64, q_grid: &[f64]) -> mfhs::Result<(Vec<SpectrumCurveF64>, CacheOutcome)> {
        let compute = || -> mfhs::Result<Vec<SpectrumCurveF64>> {
            dimension_functions(spec)?
                .curves(q_grid)?
                .into_iter()
                .map(|c| SpectrumCurveF64::from_samples(c.label, c.q_grid, c.values))
                .collect()
        };
        if !self.enabled {
            return Ok((compute()?, CacheOutcome::Disabled));
        }
        let key = Self::key(spec, q_grid);
        let outcome = match self.load(&key) {
            Ok(Some(curves)) => return Ok((curves, CacheOutcome::Hit)),
            Ok(None) => CacheOutcome::Miss,
            Err(()) => CacheOutcome::Corrupt,
        };
        let curves = compute()?;
        // a cache that cannot be written only costs a recompute next time
        let _ = self.store(&key, &curves);
        Ok((curves, outcome))
    }
}

fn encode(curves: &[SpectrumCurveF64]) -> String {
    let mut out = String::new();
    for c in curves {
        out.push_str(&format!("curve {} {}\n", c.label, c.q_grid.len()));
        for (q, v) in c.q_grid.iter().zip(&c.values) {
            out.push_str(&format!("{} {}\n", bits(*q), bits(*v)));
        }
    }
    out
}

fn decode(body: &str) -> Option<Vec<SpectrumCurveF64>> {
    let mut lines = body.lines();
    let mut out = Vec::new();
    while let Some(head) = lines.next() {
        let mut words = head.split(' ');
        if words.next()? != "curve" {
            return None;
        }
        let label = CurveLabel::from_name(words.next()?)?;
        let n: usize = words.next()?.parse().ok()?;
        let mut q = Vec::with_capacity(n);
        let mut v = Vec::with_capacity(n);
        for _ in 0..n {
            let (a, b) = lines.next()?.split_once(' ')?;
            q.push(unbits(a)?);
            v.push(unbits(b)?);
        }
        out.push(SpectrumCurveF64::from_samples(label, q, v).ok()?);
    }
    Some(out)
}
