//! Line-oriented run configuration.
//!
//! ```text
//! # comment
//! measure.family = switched_bernoulli
//! measure.p = 0.2
//! measure.p_hat = 0.4
//! grids.q = -5, 5, 0.05
//! schedules.eps = 0.2, 0.1, 0.05, 0.02
//! output.dir = out
//! ```
//!
//! Keys missing from the text keep their defaults. A `#` starts a comment
//! anywhere on a line.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use mfhs::analytic::uniform_grid;
use mfhs::coarse::DEFAULT_EPS;
use mfhs::measures::Family;
use mfhs::{MeasureSpecF64, Schedule};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub struct ConfigError {
    /// 1-based line, 0 when the problem is not tied to one line
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            write!(f, "config: {}", self.message)
        } else {
            write!(f, "config line {}: {}", self.line, self.message)
        }
    }
}

fn err(line: usize, message: impl Into<String>) -> ConfigError {
    ConfigError {
        line,
        message: message.into(),
    }
}

/// `min, max, step` of a uniform grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl GridSpec {
    pub fn points(&self) -> mfhs::Result<Vec<f64>> {
        uniform_grid(self.min, self.max, self.step)
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}, {}, {}", self.min, self.max, self.step)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub measure: MeasureSpecF64,
    pub q_grid: GridSpec,
    /// `None` picks the exponent range from the measure
    pub alpha_grid: Option<GridSpec>,
    /// `None` uses the per-command default depths
    pub depths: Option<Vec<usize>>,
    pub eps: Vec<f64>,
    pub out_dir: PathBuf,
    pub cache: bool,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            measure: MeasureSpecF64::default_for(Family::SwitchedBernoulli),
            q_grid: GridSpec {
                min: -5.0,
                max: 5.0,
                step: 0.05,
            },
            alpha_grid: None,
            depths: None,
            eps: DEFAULT_EPS.to_vec(),
            out_dir: PathBuf::from("out"),
            cache: true,
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn for_family(family: Family) -> Self {
        Self {
            measure: MeasureSpecF64::default_for(family),
            ..Self::default()
        }
    }
}

const KEYS: [&str; 8] = [
    "measure.family",
    "grids.q",
    "grids.alpha",
    "schedules.depths",
    "schedules.eps",
    "output.dir",
    "output.cache",
    "output.seed",
];

fn measure_keys(family: Family) -> &'static [&'static str] {
    match family {
        Family::FibonacciMoran => &["r_a", "r_b", "p_a", "p_b"],
        Family::NonRegularMoran => &["r_a", "r_b", "p_a", "p_b", "schedule"],
        Family::SwitchedBernoulli => &["p", "p_hat", "schedule"],
        Family::FourLetter => &["a", "b", "schedule"],
        Family::YuanSwitching => &["scale_a", "scale_b", "p", "p_tilde", "schedule"],
    }
}

struct Entry<'a> {
    line: usize,
    value: &'a str,
}

fn number(key: &str, e: &Entry) -> Result<f64, ConfigError> {
    e.value
        .parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| err(e.line, format!("{key} = {} is not a finite number", e.value)))
}

fn list<T: std::str::FromStr>(key: &str, e: &Entry, what: &str) -> Result<Vec<T>, ConfigError> {
    e.value
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<T>()
                .map_err(|_| err(e.line, format!("{key}: `{}` is not {what}", s.trim())))
        })
        .collect()
}

fn floats(key: &str, e: &Entry) -> Result<Vec<f64>, ConfigError> {
    let v: Vec<f64> = list(key, e, "a number")?;
    if let Some(x) = v.iter().find(|x| !x.is_finite()) {
        return Err(err(e.line, format!("{key}: {x} is not finite")));
    }
    Ok(v)
}

fn grid(key: &str, e: &Entry) -> Result<GridSpec, ConfigError> {
    let v = floats(key, e)?;
    let [min, max, step] = v[..] else {
        return Err(err(e.line, format!("{key} needs `min, max, step`, got {} values", v.len())));
    };
    let g = GridSpec { min, max, step };
    g.points().map_err(|x| err(e.line, format!("{key} = {g}: {x}")))?;
    Ok(g)
}

fn schedule(key: &str, e: &Entry) -> Result<Schedule, ConfigError> {
    match e.value {
        "factorial" => Ok(Schedule::Factorial),
        "doubling" => Ok(Schedule::Doubling),
        _ => {
            let v: Vec<u64> = list(key, e, "factorial, doubling or a positive integer")?;
            Schedule::custom(v).map_err(|x| err(e.line, format!("{key}: {x}")))
        }
    }
}

fn schedule_text(s: &Schedule) -> String {
    match s {
        Schedule::Factorial => "factorial".into(),
        Schedule::Doubling => "doubling".into(),
        Schedule::Custom(v) => join(v),
    }
}

fn join<D: fmt::Display>(v: &[D]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

fn auto<'a>(e: &'a Entry) -> Option<&'a Entry<'a>> {
    (e.value != "auto").then_some(e)
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut entries: BTreeMap<String, Entry> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| err(line, format!("expected `section.key = value`, got `{content}`")))?;
        let (key, value) = (key.trim(), value.trim());
        if !key.contains('.') {
            return Err(err(line, format!("key `{key}` has no section")));
        }
        if value.is_empty() {
            return Err(err(line, format!("{key} has an empty value")));
        }
        if let Some(prev) = entries.get(key) {
            return Err(err(line, format!("{key} already set on line {}", prev.line)));
        }
        entries.insert(key.to_string(), Entry { line, value });
    }

    let family = match entries.get("measure.family") {
        Some(e) => Family::from_name(e.value).ok_or_else(|| {
            let names: Vec<&str> = Family::ALL.iter().map(|f| f.name()).collect();
            err(e.line, format!("unknown family `{}`, expected one of {}", e.value, names.join(", ")))
        })?,
        None => return Err(err(0, "measure.family is required")),
    };
    let allowed = measure_keys(family);
    for (key, e) in &entries {
        if KEYS.contains(&key.as_str()) {
            continue;
        }
        match key.strip_prefix("measure.") {
            Some(k) if allowed.contains(&k) => {}
            Some(k) => {
                return Err(err(e.line, format!("measure.{k} is not a parameter of {family}")));
            }
            None => return Err(err(e.line, format!("unknown key `{key}`"))),
        }
    }

    let get = |k: &str| entries.get(&format!("measure.{k}"));
    let mut spec = MeasureSpecF64::default_for(family);
    match &mut spec {
        MeasureSpecF64::FibonacciMoran { r_a, r_b, p_a, p_b } => {
            set_measure(&get, r_a, r_b, p_a, p_b)?;
        }
        MeasureSpecF64::NonRegularMoran {
            r_a,
            r_b,
            p_a,
            p_b,
            schedule: s,
        } => {
            set_measure(&get, r_a, r_b, p_a, p_b)?;
            set(&get, "schedule", s, schedule)?;
        }
        MeasureSpecF64::SwitchedBernoulli { p, p_hat, schedule: s } => {
            set(&get, "p", p, number)?;
            set(&get, "p_hat", p_hat, number)?;
            set(&get, "schedule", s, schedule)?;
        }
        MeasureSpecF64::FourLetter { a, b, schedule: s } => {
            set(&get, "a", a, floats)?;
            set(&get, "b", b, floats)?;
            set(&get, "schedule", s, schedule)?;
        }
        MeasureSpecF64::YuanSwitching {
            scale_a,
            scale_b,
            p,
            p_tilde,
            schedule: s,
        } => {
            set(&get, "scale_a", scale_a, number)?;
            set(&get, "scale_b", scale_b, number)?;
            set(&get, "p", p, number)?;
            set(&get, "p_tilde", p_tilde, number)?;
            set(&get, "schedule", s, schedule)?;
        }
    }
    if let Err(e) = spec.validate() {
        let message = match e {
            mfhs::Error::InvalidSpec(m) => m,
            other => other.to_string(),
        };
        // blame the last line that set a parameter named in the message
        let line = message
            .split(|c: char| !(c.is_alphanumeric() || c == '_'))
            .filter(|w| allowed.contains(w))
            .filter_map(|w| get(w).map(|e| e.line))
            .max()
            .unwrap_or(0);
        return Err(err(line, format!("measure.{message}")));
    }

    let mut config = RunConfig {
        measure: spec,
        ..RunConfig::default()
    };
    if let Some(e) = entries.get("grids.q") {
        config.q_grid = grid("grids.q", e)?;
    }
    if let Some(e) = entries.get("grids.alpha").and_then(auto) {
        config.alpha_grid = Some(grid("grids.alpha", e)?);
    }
    if let Some(e) = entries.get("schedules.depths").and_then(auto) {
        let d: Vec<usize> = list("schedules.depths", e, "a positive integer")?;
        if d.first() == Some(&0) || d.windows(2).any(|w| w[0] >= w[1]) {
            return Err(err(e.line, "schedules.depths must be positive and strictly increasing"));
        }
        config.depths = Some(d);
    }
    if let Some(e) = entries.get("schedules.eps") {
        let v = floats("schedules.eps", e)?;
        if v.iter().any(|&x| x <= 0.0) {
            return Err(err(e.line, format!("schedules.eps = {} must be positive", e.value)));
        }
        config.eps = v;
    }
    if let Some(e) = entries.get("output.dir") {
        config.out_dir = PathBuf::from(e.value);
    }
    if let Some(e) = entries.get("output.cache") {
        config.cache = match e.value {
            "true" => true,
            "false" => false,
            v => return Err(err(e.line, format!("output.cache = {v} is not true or false"))),
        };
    }
    if let Some(e) = entries.get("output.seed") {
        config.seed = e
            .value
            .parse()
            .map_err(|_| err(e.line, format!("output.seed = {} is not a non-negative integer", e.value)))?;
    }
    Ok(config)
}

fn set<'a, V>(
    get: &impl Fn(&str) -> Option<&'a Entry<'a>>,
    key: &str,
    slot: &mut V,
    parse: impl Fn(&str, &Entry) -> Result<V, ConfigError>,
) -> Result<(), ConfigError> {
    if let Some(e) = get(key) {
        *slot = parse(&format!("measure.{key}"), e)?;
    }
    Ok(())
}

fn set_measure<'a>(
    get: &impl Fn(&str) -> Option<&'a Entry<'a>>,
    r_a: &mut f64,
    r_b: &mut f64,
    p_a: &mut Vec<f64>,
    p_b: &mut Vec<f64>,
) -> Result<(), ConfigError> {
    set(get, "r_a", r_a, number)?;
    set(get, "r_b", r_b, number)?;
    set(get, "p_a", p_a, floats)?;
    set(get, "p_b", p_b, floats)
}

/// Measure section lines, shared by [`serialize_config`] and the cache keys.
pub fn measure_lines(spec: &MeasureSpecF64) -> Vec<String> {
    let mut out = vec![format!("measure.family = {}", spec.family())];
    let mut push = |k: &str, v: String| out.push(format!("measure.{k} = {v}"));
    match spec {
        MeasureSpecF64::FibonacciMoran { r_a, r_b, p_a, p_b } => {
            push("r_a", r_a.to_string());
            push("r_b", r_b.to_string());
            push("p_a", join(p_a));
            push("p_b", join(p_b));
        }
        MeasureSpecF64::NonRegularMoran {
            r_a,
            r_b,
            p_a,
            p_b,
            schedule,
        } => {
            push("r_a", r_a.to_string());
            push("r_b", r_b.to_string());
            push("p_a", join(p_a));
            push("p_b", join(p_b));
            push("schedule", schedule_text(schedule));
        }
        MeasureSpecF64::SwitchedBernoulli { p, p_hat, schedule } => {
            push("p", p.to_string());
            push("p_hat", p_hat.to_string());
            push("schedule", schedule_text(schedule));
        }
        MeasureSpecF64::FourLetter { a, b, schedule } => {
            push("a", join(a));
            push("b", join(b));
            push("schedule", schedule_text(schedule));
        }
        MeasureSpecF64::YuanSwitching {
            scale_a,
            scale_b,
            p,
            p_tilde,
            schedule,
        } => {
            push("scale_a", scale_a.to_string());
            push("scale_b", scale_b.to_string());
            push("p", p.to_string());
            push("p_tilde", p_tilde.to_string());
            push("schedule", schedule_text(schedule));
        }
    }
    out
}

fn content_lines(config: &RunConfig) -> Vec<String> {
    let mut out = measure_lines(&config.measure);
    out.push(format!("grids.q = {}", config.q_grid));
    out.push(format!(
        "grids.alpha = {}",
        config.alpha_grid.map_or("auto".to_string(), |g| g.to_string())
    ));
    out.push(format!(
        "schedules.depths = {}",
        config.depths.as_deref().map_or("auto".to_string(), join)
    ));
    out.push(format!("schedules.eps = {}", join(&config.eps)));
    out.push(format!("output.cache = {}", config.cache));
    out.push(format!("output.seed = {}", config.seed));
    out
}

/// Every field written out, so that `parse_config(&serialize_config(c)) == c`
/// whenever `out_dir` is valid UTF-8 without `#`.
pub fn serialize_config(config: &RunConfig) -> String {
    let mut lines = content_lines(config);
    lines.push(format!("output.dir = {}", config.out_dir.display()));
    lines.join("\n") + "\n"
}

/// SHA-256 over the serialized config without `output.dir`, so that the hash
/// names the computation and not where its files land.
pub fn config_hash(config: &RunConfig) -> String {
    let text = content_lines(config).join("\n");
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_switched_bernoulli() {
        let c = parse_config("measure.family = switched_bernoulli\nmeasure.p = 0.2\nmeasure.p_hat = 0.4\n").unwrap();
        assert_eq!(c.measure, MeasureSpecF64::default_for(Family::SwitchedBernoulli));
        assert_eq!(c.q_grid, RunConfig::default().q_grid);
        assert!(c.cache && c.seed == 0 && c.depths.is_none());
    }

    #[test]
    fn constraint_errors_name_the_line() {
        let e = parse_config("measure.family = switched_bernoulli\n# hat\nmeasure.p_hat = 0.6\n").unwrap_err();
        assert_eq!(e.line, 3);
        assert!(e.message.contains("0 < p < p_hat <= 1/2"), "{e}");
        let e = parse_config("measure.family = fibonacci_moran\nmeasure.r_b = 0.4\n").unwrap_err();
        assert_eq!(e.to_string(), "config line 2: measure.r_b = 0.4 violates 0 < r_b < 1/3");
        let e = parse_config("measure.family = non_regular_moran\nmeasure.p_a = 0.3, 0.5\n").unwrap_err();
        assert_eq!(e.line, 2);
        assert!(e.message.contains("p_a sums to 0.8"), "{e}");
    }

    #[test]
    fn syntax_errors() {
        let cases = [
            ("measure.p = 0.2\n", 0, "measure.family is required"),
            ("measure.family = cantor\n", 1, "unknown family"),
            ("measure.family = four_letter\nmeasure.p = 0.2\n", 2, "not a parameter of four_letter"),
            ("measure.family = four_letter\nfoo.bar = 1\n", 2, "unknown key"),
            ("measure.family = four_letter\ngrids.q = 1, 0, 0.1\n", 2, "grids.q"),
            ("measure.family = four_letter\ngrids.q = 1, 2\n", 2, "min, max, step"),
            ("measure.family = four_letter\nmeasure.a = 0.25, x, 0.25, 0.25\n", 2, "`x`"),
            ("measure.family = four_letter\nno equals sign\n", 2, "expected"),
            ("measure.family = four_letter\nmeasure.family = four_letter\n", 2, "already set on line 1"),
            ("measure.family = four_letter\nmeasure.schedule = 3, 2\n", 2, "strictly increasing"),
            ("measure.family = four_letter\noutput.cache = yes\n", 2, "true or false"),
            ("measure.family = four_letter\nschedules.depths = 5, 5\n", 2, "strictly increasing"),
        ];
        for (text, line, needle) in cases {
            let e = parse_config(text).unwrap_err();
            assert_eq!(e.line, line, "{text:?}: {e}");
            assert!(e.to_string().contains(needle), "{text:?}: {e}");
        }
    }

    #[test]
    fn roundtrip_all_families() {
        for family in Family::ALL {
            let mut c = RunConfig::for_family(family);
            c.alpha_grid = Some(GridSpec {
                min: 0.5,
                max: 1.5,
                step: 0.01,
            });
            c.depths = Some(vec![100, 200, 400, 800]);
            c.seed = 17;
            c.cache = false;
            let text = serialize_config(&c);
            assert_eq!(parse_config(&text).unwrap(), c, "{text}");
        }
        let mut c = RunConfig::for_family(Family::YuanSwitching);
        if let MeasureSpecF64::YuanSwitching { schedule, .. } = &mut c.measure {
            *schedule = Schedule::Custom(vec![1, 3, 9, 27]);
        }
        assert_eq!(parse_config(&serialize_config(&c)).unwrap(), c);
    }

    #[test]
    fn hash_ignores_output_dir() {
        let a = RunConfig::default();
        let b = RunConfig {
            out_dir: PathBuf::from("elsewhere"),
            ..a.clone()
        };
        let c = RunConfig { seed: 1, ..a.clone() };
        assert_eq!(config_hash(&a), config_hash(&b));
        assert_ne!(config_hash(&a), config_hash(&c));
        assert_eq!(config_hash(&a).len(), 64);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn switched_bernoulli_roundtrip(
                p in 0.001f64..0.25,
                gap in 0.001f64..0.24,
                step in 0.01f64..0.5,
                seed in any::<u64>(),
                eps in proptest::collection::vec(0.001f64..1.0, 1..5),
            ) {
                let c = RunConfig {
                    measure: MeasureSpecF64::SwitchedBernoulli {
                        p,
                        p_hat: p + gap,
                        schedule: Schedule::Doubling,
                    },
                    q_grid: GridSpec { min: -2.0, max: 2.0, step },
                    eps,
                    seed,
                    ..RunConfig::default()
                };
                prop_assert_eq!(parse_config(&serialize_config(&c)).unwrap(), c);
            }
        }
    }
}
