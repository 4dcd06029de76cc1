//! Acceptance criteria, one PASS/FAIL line each. The process exits nonzero
//! when any criterion fails.
#![allow(clippy::needless_range_loop)]

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use mfhs::analytic::{beta_k_bisection, beta_k_fibonacci, dimension_functions, uniform_grid};
use mfhs::coarse::{default_level_depths, level_set_spectrum, moment_scaling, partition_sum, DEFAULT_EPS};
use mfhs::legendre::{legendre_at, one_sided_derivatives};
use mfhs::measures::Family;
use mfhs::symbolic::{fibonacci_word, Letter};
use mfhs::{CurveLabel, MeasureSpecF64, SpectrumCurveF64};
use mfhs_cli::{serialize_config, RunConfig};

const QS: [f64; 6] = [-2.0, -1.0, 0.0, 0.5, 1.0, 2.0];

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn defaults(family: Family) -> MeasureSpecF64 {
    MeasureSpecF64::default_for(family)
}

fn grid() -> Vec<f64> {
    uniform_grid(-5.0, 5.0, 0.05).unwrap()
}

fn curve(label: CurveLabel, f: mfhs::Evaluator<f64>) -> SpectrumCurveF64 {
    SpectrumCurveF64::from_evaluator(label, grid(), f).unwrap()
}

/// `sum mu(J)^q` for every depth up to `levels.len()`, by visiting every
/// cylinder. Each node totals its own subtree before handing it to the
/// parent, so rounding grows with the depth and not with the cylinder count.
fn enumerate(levels: &[Vec<f64>], qs: &[f64]) -> Vec<Vec<f64>> {
    const K: usize = QS.len();
    assert_eq!(qs.len(), K);
    let depth = levels.len();
    // powers[level][child][q]
    let powers: Vec<Vec<[f64; K]>> = levels
        .iter()
        .map(|ws| ws.iter().map(|&w| std::array::from_fn(|i| w.powf(qs[i]))).collect())
        .collect();
    // acc[level][d]: sums at depth d below the node currently open at `level`
    let mut acc = vec![vec![[0.0; K]; depth + 1]; depth + 1];

    fn visit(powers: &[Vec<[f64; K]>], level: usize, prefix: [f64; K], acc: &mut [Vec<[f64; K]>]) {
        let depth = powers.len();
        for d in level..=depth {
            acc[level][d] = [0.0; K];
        }
        acc[level][level] = prefix;
        if level == depth {
            return;
        }
        if level + 1 == depth {
            for pw in &powers[level] {
                for i in 0..K {
                    acc[level][depth][i] += prefix[i] * pw[i];
                }
            }
            return;
        }
        for pw in &powers[level] {
            let child = std::array::from_fn(|i| prefix[i] * pw[i]);
            visit(powers, level + 1, child, acc);
            let (parent, below) = acc.split_at_mut(level + 1);
            for d in level + 1..=depth {
                for i in 0..K {
                    parent[level][d][i] += below[0][d][i];
                }
            }
        }
    }
    visit(&powers, 0, [1.0; K], &mut acc);
    acc[0].iter().map(|a| a.to_vec()).collect()
}

fn criterion_1() -> Verdict {
    let mut worst = (0.0f64, String::new());
    for family in Family::ALL {
        let spec = defaults(family);
        let cascade = spec.cascade().unwrap();
        let seq = cascade.regime_sequence(16).unwrap();
        let levels: Vec<Vec<f64>> = seq.iter().map(|&r| cascade.regimes[r].weights.clone()).collect();
        let sums = enumerate(&levels, &QS);
        for n in 1..=16 {
            for (qi, &q) in QS.iter().enumerate() {
                let factored = partition_sum(&spec, n, q, false).unwrap();
                let err = (factored - sums[n][qi].ln()).abs();
                if err > worst.0 {
                    worst = (err, format!("{family} n={n} q={q}"));
                }
            }
        }
    }
    verdict(
        worst.0 <= 1e-10,
        format!("largest |factored - enumerated| = {:e} at {}", worst.0, worst.1),
    )
}

fn criterion_2() -> Verdict {
    let spec = defaults(Family::FibonacciMoran);
    let mut worst = 0.0f64;
    for k in 1..=20 {
        for q in QS {
            let closed = beta_k_fibonacci(q, k, &spec).unwrap();
            let solved = beta_k_bisection(&spec, q, k, false).unwrap();
            worst = worst.max((closed - solved).abs());
        }
    }
    verdict(worst <= 1e-9, format!("largest |bisection - closed form| = {worst:e} for k <= 20"))
}

fn criterion_3() -> Verdict {
    let mut worst = 0.0f64;
    let mut moments_zero = true;
    for family in Family::ALL {
        let spec = defaults(family);
        for (_, f) in dimension_functions(&spec).unwrap().all() {
            worst = worst.max(f(1.0).abs());
        }
        let depths: Vec<usize> = (1..=800).collect();
        let est = moment_scaling(&spec, 1.0, &depths).unwrap();
        moments_zero &= est.series.entries.iter().all(|e| e.log_quantity == 0.0 && e.ratio() == 0.0)
            && est.liminf_est == 0.0
            && est.limsup_est == 0.0;
    }
    verdict(
        worst <= 1e-12 && moments_zero,
        format!("largest |f(1)| = {worst:e}, moment series at q=1 exactly zero: {moments_zero}"),
    )
}

fn criterion_4() -> Verdict {
    let q = grid();
    let mut problems = Vec::new();
    for family in Family::ALL {
        let spec = defaults(family);
        let dims = dimension_functions(&spec).unwrap();
        for (label, f) in dims.all() {
            let v: Vec<f64> = q.iter().map(|&x| f(x)).collect();
            if v.windows(2).any(|w| !(w[1] < w[0])) {
                problems.push(format!("{family} {label} not strictly decreasing"));
            }
            let convex_expected = !matches!(label, CurveLabel::LowerMultifractal | CurveLabel::BetaLower);
            if convex_expected && v.windows(3).any(|w| w[0] - 2.0 * w[1] + w[2] < -1e-10) {
                problems.push(format!("{family} {label} not convex"));
            }
        }
        for &x in &q {
            let (b, big_b, delta) = ((dims.lower)(x), (dims.upper)(x), (dims.packing)(x));
            let ordered = b <= big_b + 1e-12 && big_b <= delta + 1e-12;
            let signed = if (x - 1.0).abs() < 1e-12 {
                b.abs().max(big_b.abs()).max(delta.abs()) <= 1e-12
            } else if x < 1.0 {
                b >= -1e-12
            } else {
                delta <= 1e-12
            };
            if !(ordered && signed) {
                problems.push(format!("{family} ordering or sign at q={x}"));
            }
        }
        if matches!(family, Family::NonRegularMoran | Family::SwitchedBernoulli | Family::FourLetter) {
            let equal: Vec<f64> = q
                .iter()
                .copied()
                .filter(|&x| ((dims.upper)(x) - (dims.lower)(x)).abs() <= 1e-12)
                .collect();
            if equal != [0.0, 1.0] {
                problems.push(format!("{family}: b = B exactly at q in {equal:?}, expected [0, 1]"));
            }
        }
    }
    if problems.is_empty() {
        verdict(true, "decreasing, convexity, sign pattern and ordering hold on [-5, 5]")
    } else {
        verdict(false, problems.join("; "))
    }
}

fn tau(s: f64, q: f64) -> f64 {
    (s.powf(q) + (1.0 - s).powf(q)).log2()
}

fn criterion_5() -> Verdict {
    let mut problems = Vec::new();
    let ex3 = defaults(Family::SwitchedBernoulli);
    let depths: Vec<usize> = (1..=720).collect();
    for q in [-1.0, 0.5, 2.0] {
        let est = moment_scaling(&ex3, q, &depths).unwrap();
        let (a, b) = (tau(0.2, q), tau(0.4, q));
        let (lo, hi) = (a.min(b), a.max(b));
        let err = (est.liminf_est - lo).abs().max((est.limsup_est - hi).abs());
        if err > 0.02 {
            problems.push(format!(
                "switched_bernoulli q={q}: [{:.4}, {:.4}] vs [{lo:.4}, {hi:.4}] over depths {:?}",
                est.liminf_est, est.limsup_est, est.subsequence_used
            ));
        }
    }
    let ex2 = defaults(Family::NonRegularMoran);
    let dims = dimension_functions(&ex2).unwrap();
    let depths: Vec<usize> = (1..=24_576).collect();
    for q in [-1.0, 0.5, 2.0] {
        let est = moment_scaling(&ex2, q, &depths).unwrap();
        let (lo, hi) = ((dims.lower)(q), (dims.upper)(q));
        let err = (est.liminf_est - lo).abs().max((est.limsup_est - hi).abs());
        if err > 0.05 {
            problems.push(format!(
                "non_regular_moran q={q}: [{:.4}, {:.4}] vs [{lo:.4}, {hi:.4}]",
                est.liminf_est, est.limsup_est
            ));
        }
    }
    if problems.is_empty() {
        verdict(true, "moment extremes within 0.02 (switched_bernoulli) and 0.05 (non_regular_moran)")
    } else {
        verdict(false, problems.join("; "))
    }
}

fn criterion_6() -> Verdict {
    let spec = defaults(Family::SwitchedBernoulli);
    let tau_lower = dimension_functions(&spec).unwrap().named(CurveLabel::TauLower).unwrap().clone();
    let c = curve(CurveLabel::TauLower, tau_lower);
    let p: f64 = 0.2;
    let mut worst = 0.0f64;
    for q in [-2.0, 0.3, 0.7, 2.0] {
        let (l, r) = one_sided_derivatives(&c, q).unwrap();
        let alpha = -(l + r) / 2.0;
        let s = p.powf(q) / (p.powf(q) + (1.0 - p).powf(q));
        let h = -(s * s.log2() + (1.0 - s) * (1.0 - s).log2());
        worst = worst.max((legendre_at(&c, alpha).unwrap() - h).abs());
    }
    verdict(worst <= 1e-6, format!("largest |transform - H(s)| = {worst:e}"))
}

fn criterion_7() -> Verdict {
    const N: usize = 1_000_000;
    // the fixed point of a -> ab, b -> a, generated here for comparison
    let mut oracle = vec![b'a'];
    while oracle.len() < N {
        oracle = oracle
            .iter()
            .flat_map(|&c| if c == b'a' { &b"ab"[..] } else { &b"a"[..] })
            .copied()
            .collect();
    }
    let word = fibonacci_word(N).unwrap();
    let same = word
        .iter()
        .zip(&oracle)
        .all(|(l, &c)| (*l == Letter::A) == (c == b'a'));
    let eta = (5f64.sqrt() - 1.0) / 2.0;
    let mut count = 0usize;
    let mut worst = 0.0f64;
    let mut bad = None;
    for (i, l) in word.iter().enumerate() {
        count += usize::from(*l == Letter::A);
        let n = (i + 1) as f64;
        let scaled = n * (count as f64 / n - eta).abs();
        worst = worst.max(scaled);
        if scaled > 2.0 && bad.is_none() {
            bad = Some(i + 1);
        }
    }
    verdict(
        same && bad.is_none(),
        format!("word matches substitution: {same}; max n*|freq - eta| = {worst:.4} over n <= 10^6"),
    )
}

fn legendre_of(f: &mfhs::Evaluator<f64>, label: CurveLabel, alpha: f64) -> f64 {
    legendre_at(&curve(label, f.clone()), alpha).unwrap()
}

fn criterion_8() -> Verdict {
    let mut problems = Vec::new();
    let ex1 = defaults(Family::FibonacciMoran);
    let beta = dimension_functions(&ex1).unwrap().lower;
    let depths = default_level_depths(&ex1).unwrap();
    for q in [-2.0, 0.5, 2.0] {
        let (l, r) = one_sided_derivatives(&curve(CurveLabel::Beta, beta.clone()), q).unwrap();
        let alpha = -(l + r) / 2.0;
        let target = legendre_of(&beta, CurveLabel::Beta, alpha);
        let est = level_set_spectrum(&ex1, alpha, &DEFAULT_EPS, &depths).unwrap();
        let err = (est.lower_est - target).abs().max((est.upper_est - target).abs());
        if err > 0.1 {
            problems.push(format!("fibonacci_moran q={q}: {est} vs beta* = {target:.4}"));
        }
    }
    let ex4 = defaults(Family::FourLetter);
    let MeasureSpecF64::FourLetter { b, .. } = &ex4 else { unreachable!() };
    let max = b.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = b.iter().copied().fold(f64::INFINITY, f64::min);
    let (lo, hi) = (-max.log(4.0), -min.log(4.0));
    if hi - lo <= 1e-12 {
        problems.push(format!(
            "four_letter defaults: the window (-log4 b4, -log4 b1) = ({lo}, {hi}) is empty, no interior alpha exists"
        ));
    } else {
        let dims = dimension_functions(&ex4).unwrap();
        let depths = default_level_depths(&ex4).unwrap();
        for k in 1..=3 {
            let alpha = lo + (hi - lo) * k as f64 / 4.0;
            let est = level_set_spectrum(&ex4, alpha, &DEFAULT_EPS, &depths).unwrap();
            let b_star = legendre_of(&dims.lower, CurveLabel::LowerMultifractal, alpha);
            let big_b_star = legendre_of(&dims.upper, CurveLabel::UpperMultifractal, alpha);
            if (est.lower_est - b_star).abs() > 0.1 || (est.upper_est - big_b_star).abs() > 0.1 {
                problems.push(format!("four_letter alpha={alpha:.4}: {est} vs ({b_star:.4}, {big_b_star:.4})"));
            }
        }
    }
    if problems.is_empty() {
        verdict(true, "level-set estimates within 0.1 of the transforms")
    } else {
        verdict(false, problems.join("; "))
    }
}

fn criterion_9() -> Verdict {
    let spec = defaults(Family::SwitchedBernoulli);
    let dims = dimension_functions(&spec).unwrap();
    // (-tau_upper'(+inf), -tau_upper'(-inf)) = (-log2(1 - p_hat), -log2(p_hat))
    let (lo, hi) = (-(0.6f64).log2(), -(0.4f64).log2());
    let depths = default_level_depths(&spec).unwrap();
    let mut problems = Vec::new();
    for k in 1..=5 {
        let alpha = lo + (hi - lo) * k as f64 / 6.0;
        let est = level_set_spectrum(&spec, alpha, &DEFAULT_EPS, &depths).unwrap();
        let b_star = legendre_of(&dims.lower, CurveLabel::LowerMultifractal, alpha);
        let big_b_star = legendre_of(&dims.upper, CurveLabel::UpperMultifractal, alpha);
        if est.lower_est > b_star + 0.05 {
            problems.push(format!("alpha={alpha:.4}: lower {:.4} > b* + 0.05 = {:.4}", est.lower_est, b_star + 0.05));
        }
        if est.upper_est > big_b_star + 0.05 {
            problems.push(format!("alpha={alpha:.4}: upper {:.4} > B* + 0.05 = {:.4}", est.upper_est, big_b_star + 0.05));
        }
    }
    if problems.is_empty() {
        verdict(true, "both estimates below the transforms plus 0.05 at five alphas")
    } else {
        verdict(false, problems.join("; "))
    }
}

fn run_verify(config: &Path, out: &Path, cache: &Path) -> (i32, Vec<u8>, Vec<u8>) {
    let status = Command::new(env!("CARGO_BIN_EXE_mfhs"))
        .args(["verify", "--seed", "11", "--config"])
        .arg(config)
        .arg("--out")
        .arg(out)
        .env("MFHS_CACHE_DIR", cache)
        .output()
        .unwrap()
        .status;
    let read = |name: &str| std::fs::read(out.join(name)).unwrap_or_default();
    (status.code().unwrap_or(-1), read("verify.txt"), read("verify.csv"))
}

fn criterion_10(started: Instant) -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let mut problems = Vec::new();
    for family in Family::ALL {
        let config = dir.path().join(format!("{family}.conf"));
        std::fs::write(&config, serialize_config(&RunConfig::for_family(family))).unwrap();
        let cache = dir.path().join("cache");
        let first = run_verify(&config, &dir.path().join(format!("{family}-1")), &cache);
        let second = run_verify(&config, &dir.path().join(format!("{family}-2")), &cache);
        if first.0 != 0 || second.0 != 0 {
            problems.push(format!("{family}: exit codes {} and {}", first.0, second.0));
        }
        if first.1.is_empty() || first.1 != second.1 || first.2 != second.2 {
            problems.push(format!("{family}: reports differ between runs"));
        }
    }
    let elapsed = started.elapsed().as_secs_f64();
    if elapsed > 600.0 {
        problems.push(format!("suite took {elapsed:.0} s"));
    }
    if problems.is_empty() {
        verdict(true, format!("identical reports and exit 0 for every family; suite ran in {elapsed:.1} s"))
    } else {
        verdict(false, problems.join("; "))
    }
}

fn main() {
    let started = Instant::now();
    let criteria: [(&str, &dyn Fn() -> Verdict); 10] = [
        ("oracle equivalence of partition sums", &criterion_1),
        ("closed form vs fixed point", &criterion_2),
        ("zero at q = 1", &criterion_3),
        ("shape suite", &criterion_4),
        ("oscillation bracketing", &criterion_5),
        ("Legendre/entropy identity", &criterion_6),
        ("Fibonacci frequency", &criterion_7),
        ("formalism at differentiability points", &criterion_8),
        ("upper-bound direction", &criterion_9),
        ("end-to-end reproducibility", &|| criterion_10(started)),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let v = check();
        failed += usize::from(!v.pass);
        println!(
            "{} criterion {}: {name} ({:.1} s): {}",
            if v.pass { "PASS" } else { "FAIL" },
            i + 1,
            t.elapsed().as_secs_f64(),
            v.detail
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
