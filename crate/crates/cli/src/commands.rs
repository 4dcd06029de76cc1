//! The five subcommands. Each writes its CSV under the output directory and
//! ends it with a `# generated-by=..., config-hash=...` line.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use mfhs::analytic::dimension_functions;
use mfhs::coarse::{
    box_dimensions, cylinder_radii, default_level_depths, moment_scaling_with, MomentOptions, COVER_CAP,
};
use mfhs::legendre::{alpha_window, format_value, legendre_at, slope_range};
use mfhs::measures::{Family, BRUTE_FORCE_MAX_DEPTH, ENUMERATION_CAP};
use mfhs::symbolic::{fibonacci_word, Letter};
use mfhs::verify::{self, VerifyOptions};
use mfhs::{
    CurveLabel, DimEstimateF64, Geometry, LevelSetEstimator, MeasureSpecF64, RegimeRule, SpectrumCurveF64,
};

use crate::cache::{CacheOutcome, CurveCache};
use crate::config::{config_hash, ConfigError, RunConfig};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{0}")]
    Compute(#[from] mfhs::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Compute(_) => 2,
            CliError::Io { .. } => 3,
        }
    }

    pub fn io(path: &Path, source: io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// A parsed config with the command-line switches applied.
#[derive(Debug, Clone)]
pub struct Run {
    pub config: RunConfig,
    pub hash: String,
    pub oracle: bool,
    pub skip: Vec<String>,
    pub cache: CurveCache,
}

/// What a command wrote, plus the lines it reports on stdout.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub messages: Vec<String>,
    /// set by `verify` when a hard check fails
    pub failed: bool,
}

impl Run {
    pub fn new(config: RunConfig, oracle: bool, skip: Vec<String>) -> Self {
        let cache = CurveCache::from_env(&config.out_dir.join(".cache"), config.cache);
        Self {
            hash: config_hash(&config),
            config,
            oracle,
            skip,
            cache,
        }
    }

    pub fn trailer(&self) -> String {
        format!("# generated-by=mfhs {VERSION}, config-hash={}\n", self.hash)
    }

    fn spec(&self) -> &MeasureSpecF64 {
        &self.config.measure
    }

    fn q_grid(&self) -> Result<Vec<f64>, CliError> {
        Ok(self.config.q_grid.points()?)
    }

    fn write(&self, name: &str, mut body: String, outcome: &mut Outcome) -> Result<(), CliError> {
        let dir = &self.config.out_dir;
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let path = dir.join(name);
        body.push_str(&self.trailer());
        fs::write(&path, body).map_err(|e| CliError::io(&path, e))?;
        outcome.files.push(path);
        Ok(())
    }

    fn cached_curves(&self, outcome: &mut Outcome) -> Result<Vec<SpectrumCurveF64>, CliError> {
        let (curves, status) = self.cache.curves(self.spec(), &self.q_grid()?)?;
        if status == CacheOutcome::Corrupt {
            outcome
                .messages
                .push(format!("cache entry in {} failed its content hash, recomputed", self.cache.dir().display()));
        }
        Ok(curves)
    }

    /// Depths for the moment series: the configured ones, depths small enough
    /// to enumerate under `--oracle`, phase flips up to 50000 for switching
    /// rules, or powers of two from 256 to 65536 for the Fibonacci rule.
    pub fn moment_depths(&self) -> Result<Vec<usize>, CliError> {
        if let Some(d) = &self.config.depths {
            return Ok(d.clone());
        }
        let cascade = self.spec().cascade()?;
        if self.oracle {
            let mut out = Vec::new();
            for n in 1..=BRUTE_FORCE_MAX_DEPTH {
                if cascade.cylinder_count(n)? > ENUMERATION_CAP {
                    break;
                }
                out.push(n);
            }
            return Ok(out);
        }
        Ok(match cascade.rule {
            RegimeRule::Switching { .. } => {
                let mut flips = cascade.rule.flip_depths(50_001)?;
                flips.retain(|&d| d <= 50_000);
                flips
            }
            _ => (8..=16).map(|k| 1usize << k).collect(),
        })
    }

    fn moments(&self, q: f64, depths: &[usize]) -> mfhs::Result<DimEstimateF64> {
        let options = MomentOptions {
            oracle: self.oracle,
            ..MomentOptions::default()
        };
        moment_scaling_with(self.spec(), q, depths, options)
    }

    /// Closed-form curves on the q grid followed by the moment liminf and
    /// limsup estimates at each q.
    pub fn spectra(&self) -> Result<Outcome, CliError> {
        let mut outcome = Outcome::default();
        let curves = self.cached_curves(&mut outcome)?;
        let mut body = String::from("q,value,label\n");
        for c in &curves {
            for (q, v) in c.q_grid.iter().zip(&c.values) {
                writeln!(body, "{q},{},{}", format_value(*v), c.label).unwrap();
            }
        }
        let depths = self.moment_depths()?;
        let q_grid = self.q_grid()?;
        let mut lines = (String::new(), String::new());
        let mut skipped = None;
        for &q in &q_grid {
            match self.moments(q, &depths) {
                Ok(est) => {
                    writeln!(lines.0, "{q},{},{}", est.liminf_est, CurveLabel::MomentLiminf).unwrap();
                    writeln!(lines.1, "{q},{},{}", est.limsup_est, CurveLabel::MomentLimsup).unwrap();
                }
                Err(e @ mfhs::Error::InsufficientDepths { .. }) => {
                    skipped = Some(e);
                    break;
                }
                Err(e) => return Err(e.into()),
            }
        }
        match skipped {
            Some(e) => outcome.messages.push(format!("moment estimates omitted: {e}")),
            None => {
                body.push_str(&lines.0);
                body.push_str(&lines.1);
            }
        }
        self.write("spectra.csv", body, &mut outcome)?;
        Ok(outcome)
    }

    /// Covering exponents of the support and moment exponents at a few q,
    /// each next to the closed-form lower and upper values.
    pub fn dims(&self) -> Result<Outcome, CliError> {
        let mut outcome = Outcome::default();
        let spec = self.spec();
        let dims = dimension_functions(spec)?;
        let mut body = String::from("quantity,q,liminf_est,limsup_est,predicted_lower,predicted_upper,points\n");
        let mut row = |name: &str, q: f64, est: &DimEstimateF64| {
            writeln!(
                body,
                "{name},{q},{},{},{},{},{}",
                est.liminf_est,
                est.limsup_est,
                (dims.lower)(q),
                (dims.upper)(q),
                est.subsequence_used.len()
            )
            .unwrap();
        };
        let cascade = spec.cascade()?;
        let mut depth = 0;
        while depth < 40 && cascade.cylinder_count(depth + 1)? <= COVER_CAP / 4 {
            depth += 1;
        }
        let box_depths: Vec<usize> = (1..=depth).collect();
        match cylinder_radii(spec, &box_depths).and_then(|r| box_dimensions(&Geometry::of(spec)?, &r)) {
            Ok(est) => row("covering", 0.0, &est),
            Err(e) => outcome.messages.push(format!("covering exponents omitted: {e}")),
        }
        let depths = self.moment_depths()?;
        for q in [-2.0, -1.0, 0.0, 0.5, 1.0, 2.0] {
            match self.moments(q, &depths) {
                Ok(est) => row("moment", q, &est),
                Err(e @ mfhs::Error::InsufficientDepths { .. }) => {
                    outcome.messages.push(format!("moment exponents omitted: {e}"));
                    break;
                }
                Err(e) => return Err(e.into()),
            }
        }
        self.write("dims.csv", body, &mut outcome)?;
        Ok(outcome)
    }

    /// Exponents for `levelset`: the configured grid or 41 points over the
    /// range of `-B'`, kept inside the open exponent window for the switched
    /// Bernoulli family.
    pub fn alphas(&self, lower: &SpectrumCurveF64, upper: &SpectrumCurveF64) -> Result<Vec<f64>, CliError> {
        let window = (self.spec().family() == Family::SwitchedBernoulli).then(|| alpha_window(|q| lower.eval(q)));
        let mut alphas = match (&self.config.alpha_grid, window) {
            (Some(g), _) => g.points()?,
            (None, Some((lo, hi))) => (1..=41).map(|i| lo + (hi - lo) * f64::from(i) / 42.0).collect(),
            (None, None) => {
                let (lo, hi) = slope_range(upper)?;
                if hi - lo <= 1e-9 {
                    vec![lo]
                } else {
                    (0..=40).map(|i| lo + (hi - lo) * f64::from(i) / 40.0).collect()
                }
            }
        };
        if let Some((lo, hi)) = window {
            alphas.retain(|&a| a > lo && a < hi);
        }
        Ok(alphas)
    }

    pub fn levelset(&self) -> Result<Outcome, CliError> {
        let mut outcome = Outcome::default();
        let spec = self.spec();
        let dims = dimension_functions(spec)?;
        let q_grid = self.q_grid()?;
        let lower = SpectrumCurveF64::from_evaluator(CurveLabel::LowerMultifractal, q_grid.clone(), dims.lower.clone())?;
        let upper = SpectrumCurveF64::from_evaluator(CurveLabel::UpperMultifractal, q_grid, dims.upper.clone())?;
        let alphas = self.alphas(&lower, &upper)?;
        let depths = match &self.config.depths {
            Some(d) => d.clone(),
            None => default_level_depths(spec)?,
        };
        let max = depths.iter().copied().max().unwrap_or(1);
        let mut estimator = LevelSetEstimator::new(spec, max)?;
        let mut body = String::from("alpha,b_star,B_star,lower_est,upper_est,stable\n");
        for &alpha in &alphas {
            let est = estimator.spectrum(alpha, &self.config.eps, &depths)?;
            writeln!(
                body,
                "{alpha},{},{},{},{},{}",
                format_value(legendre_at(&lower, alpha)?),
                format_value(legendre_at(&upper, alpha)?),
                format_value(est.lower_est),
                format_value(est.upper_est),
                est.stable
            )
            .unwrap();
        }
        if alphas.is_empty() {
            outcome.messages.push("no exponent inside the admissible window".into());
        }
        self.write("levelset.csv", body, &mut outcome)?;
        Ok(outcome)
    }

    pub fn verify_options(&self) -> Result<VerifyOptions<f64>, CliError> {
        Ok(VerifyOptions {
            q_grid: self.q_grid()?,
            eps_schedule: self.config.eps.clone(),
            level_depths: self.config.depths.clone(),
            seed: self.config.seed,
            skip: self.skip.clone(),
            ..VerifyOptions::default()
        })
    }

    /// Writes `verify.txt` and `verify.csv`; `failed` is set when a hard
    /// check fails.
    pub fn verify(&self) -> Result<Outcome, CliError> {
        let mut outcome = Outcome::default();
        let curves = self.cached_curves(&mut outcome)?;
        let report = verify::run_with_curves(self.spec(), &self.verify_options()?, &curves)?;
        self.write("verify.txt", report.to_text(), &mut outcome)?;
        self.write("verify.csv", report.to_csv(), &mut outcome)?;
        outcome.failed = report.has_failures();
        outcome.messages.push(format!("verify: {}", report.summary()));
        for c in report.checks.iter().filter(|c| c.status == verify::CheckStatus::Fail) {
            outcome.messages.push(c.to_string());
        }
        Ok(outcome)
    }

    /// Letter counts of Fibonacci-word prefixes: the configured depths or
    /// powers of two up to `2^20`.
    pub fn fib(&self) -> Result<Outcome, CliError> {
        let mut outcome = Outcome::default();
        let lengths = match &self.config.depths {
            Some(d) => d.clone(),
            None => (0..=20).map(|k| 1usize << k).collect(),
        };
        let longest = lengths.iter().copied().max().unwrap_or(1);
        let word = fibonacci_word(longest)?;
        let eta = mfhs::analytic::eta::<f64>();
        let mut body = String::from("n,count_a,frequency,scaled_gap\n");
        let mut count = 0usize;
        let mut next = lengths.iter().peekable();
        for (i, &letter) in word.iter().enumerate() {
            count += usize::from(letter == Letter::A);
            let n = i + 1;
            if next.peek() == Some(&&n) {
                next.next();
                let freq = count as f64 / n as f64;
                writeln!(body, "{n},{count},{freq},{}", n as f64 * (freq - eta).abs()).unwrap();
            }
        }
        let prefix: String = word.iter().take(64).map(|l| l.as_char()).collect();
        outcome.messages.push(format!("prefix: {prefix}"));
        self.write("fib.csv", body, &mut outcome)?;
        Ok(outcome)
    }
}
