//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::alloc::{GlobalAlloc, Layout, System};
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use inferkit::dataio::{block_path, read_histogram, Format};
use inferkit::effects::{pure, sample, score, Model};
use inferkit::inference::{
    acceptance_probability, importance_sampling, mh_step, multinomial_indices, pmmh, rmsmc, smc, smc_with, tmcmc,
    Histogram, PmmhConfig, SmcConfig, TraceRecord, Workers,
};
use inferkit::models::{
    coin_model, gaussian_mean_likelihood, gaussian_mean_posterior, gaussian_mean_prior, linear_gaussian_model,
    many_scores_model, markov_chain_model, LinearGaussian, GAUSSIAN_MEAN_DATA,
};
use inferkit::oracles::{enumerate_discrete_posterior, kalman_filter_exact, total_variation};
use inferkit::{LogWeight, RngState};

struct Counting;

static CURRENT: AtomicUsize = AtomicUsize::new(0);
static PEAK: AtomicUsize = AtomicUsize::new(0);

unsafe impl GlobalAlloc for Counting {
    unsafe fn alloc(&self, layout: Layout) -> *mut u8 {
        let p = System.alloc(layout);
        if !p.is_null() {
            let now = CURRENT.fetch_add(layout.size(), Ordering::Relaxed) + layout.size();
            PEAK.fetch_max(now, Ordering::Relaxed);
        }
        p
    }

    unsafe fn dealloc(&self, ptr: *mut u8, layout: Layout) {
        System.dealloc(ptr, layout);
        CURRENT.fetch_sub(layout.size(), Ordering::Relaxed);
    }
}

#[global_allocator]
static ALLOC: Counting = Counting;

/// Runs `f` and returns its peak live heap above the starting level.
fn peak_heap<T>(f: impl FnOnce() -> T) -> (T, usize) {
    let base = CURRENT.load(Ordering::Relaxed);
    PEAK.store(base, Ordering::Relaxed);
    let out = f();
    (out, PEAK.load(Ordering::Relaxed).saturating_sub(base))
}

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn mass_2_to_4(h: &Histogram<f64>) -> f64 {
    h.clone()
        .normalise()
        .unwrap()
        .mass_where(|x| (2.0..=4.0).contains(x))
        .unwrap()
}

fn chain_smc_mode() -> Check {
    let start = Instant::now();
    let mut masses = Vec::new();
    for seed in 1..=5 {
        let h = smc(
            &markov_chain_model(),
            &SmcConfig::new(5000, 6, 1),
            &mut RngState::new(seed),
        )
        .map_err(|e| e.to_string())?;
        masses.push(mass_2_to_4(&h));
    }
    let elapsed = start.elapsed();
    let worst = masses.iter().cloned().fold(f64::INFINITY, f64::min);
    ensure(
        worst >= 0.9 && elapsed < Duration::from_secs(30),
        format!(
            "min mass in [2,4] = {worst:.4} over 5 seeds, {:.2} s",
            elapsed.as_secs_f64()
        ),
    )
}

fn is_degeneracy() -> Check {
    let k = 2000;
    let mut worst: f64 = 0.0;
    for seed in 1..=5 {
        let h = importance_sampling(&markov_chain_model(), k, &mut RngState::new(seed)).map_err(|e| e.to_string())?;
        worst = worst.max(h.ess());
    }
    ensure(
        worst < 0.05 * k as f64,
        format!("max ESS {worst:.2} < {}", 0.05 * k as f64),
    )
}

fn kalman_equivalence() -> Check {
    let start = Instant::now();
    let p = LinearGaussian::example();
    let exact =
        kalman_filter_exact(&p.a, &p.c, p.q, &p.r, &p.y, p.prior_mean, p.prior_var).map_err(|e| e.to_string())?;
    let target = *exact.means.last().unwrap();
    let model = linear_gaussian_model(p).map_err(|e| e.to_string())?;
    let workers = Workers::new(4).map_err(|e| e.to_string())?;
    let mut estimates = Vec::new();
    for seed in 1..=10 {
        let out = smc_with(
            &model,
            &SmcConfig::new(10_000, 5, 1),
            &mut RngState::new(seed),
            &workers,
        )
        .map_err(|e| e.to_string())?;
        estimates.push(out.histogram.estimate_expectation(|x| *x).map_err(|e| e.to_string())?);
    }
    let n = estimates.len() as f64;
    let mean = estimates.iter().sum::<f64>() / n;
    let sd = (estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let per_seed = estimates.iter().map(|e| (e - target).abs() / sd).fold(0.0, f64::max);
    let pooled = (mean - target).abs() / (sd / n.sqrt());
    let elapsed = start.elapsed();
    ensure(
        per_seed <= 3.0 && pooled <= 3.0 && elapsed < Duration::from_secs(60),
        format!(
            "exact {target:.5}, pooled {mean:.5}, worst seed {per_seed:.2} SE, pooled {pooled:.2} SE, {:.2} s",
            elapsed.as_secs_f64()
        ),
    )
}

fn tmcmc_enumeration() -> Check {
    let start = Instant::now();
    let exact = enumerate_discrete_posterior(&coin_model(), 10).map_err(|e| e.to_string())?;
    let out =
        tmcmc(&coin_model(), 100_000, LogWeight::ONE, 10_000, &mut RngState::new(7)).map_err(|e| e.to_string())?;
    let tv = total_variation(&out.histogram().normalise().map_err(|e| e.to_string())?, &exact);
    let elapsed = start.elapsed();
    ensure(
        tv <= 0.02 && elapsed < Duration::from_secs(60),
        format!("TV {tv:.5}, {:.2} s", elapsed.as_secs_f64()),
    )
}

fn trace_arithmetic() -> Check {
    let model = markov_chain_model();
    for seed in 0..20 {
        let rec = TraceRecord::run(&model, Vec::new(), LogWeight::ONE, &mut RngState::new(seed))
            .map_err(|e| e.to_string())?;
        if rec.trace.len() != 12 {
            return Err(format!("seed {seed}: trace length {}", rec.trace.len()));
        }
        let again = TraceRecord::run(
            &model,
            rec.trace.clone(),
            LogWeight::ONE,
            &mut RngState::new(seed + 1000),
        )
        .map_err(|e| e.to_string())?;
        if again.weight.log_value().to_bits() != rec.weight.log_value().to_bits()
            || again.result.to_bits() != rec.result.to_bits()
            || again.trace != rec.trace
        {
            return Err(format!("seed {seed}: replay differs"));
        }
    }
    Ok("20 traces of length 12, replays bit-exact".into())
}

fn mh_ratio_cases() -> Check {
    let lw = LogWeight::from_log;
    // (p, q, old length, new length, expected)
    let fixtures: Vec<(LogWeight, LogWeight, usize, usize, f64)> = vec![
        (lw(0.0), lw(0.0), 12, 12, 1.0),
        (lw(-3.7), lw(-3.7), 5, 5, 1.0),
        (lw(-1e6), lw(-1e6), 7, 7, 1.0),
        (lw(700.0), lw(700.0), 1, 1, 1.0),
        (lw(-2.0), LogWeight::ZERO, 4, 4, 0.0),
        (lw(-1e6), LogWeight::ZERO, 4, 9, 0.0),
        (LogWeight::ZERO, LogWeight::ZERO, 3, 3, 0.0),
        (LogWeight::ZERO, lw(-5.0), 3, 3, 1.0),
        (lw(0.0), lw(2f64.ln()), 6, 6, 1.0),
        (lw(0.0), lw(0.5f64.ln()), 6, 6, 0.5),
        (lw(0.0), lw(0.0), 6, 12, 0.5),
        (lw(0.0), lw(0.0), 12, 6, 1.0),
        (lw(-1e6), lw(-1e6 - 2.0), 8, 8, (-2f64).exp()),
    ];
    for (i, (p, q, a, b, want)) in fixtures.iter().enumerate() {
        let got = acceptance_probability(*p, *q, *a, *b);
        if (got - want).abs() > 1e-12 {
            return Err(format!("fixture {i}: got {got}, want {want}"));
        }
    }
    // A chain that starts in the positive-weight half never moves into the
    // zero-weight half.
    let model: Model<f64> = sample().bind(|u| {
        let w = if u < 0.5 { LogWeight::ZERO } else { LogWeight::ONE };
        score(w).then(pure(u))
    });
    let mut rng = RngState::new(3);
    let mut rec = TraceRecord::run(&model, vec![0.9], LogWeight::ONE, &mut rng).map_err(|e| e.to_string())?;
    for step in 0..5000 {
        rec = mh_step(rec, &mut rng).map_err(|e| e.to_string())?;
        if rec.result < 0.5 || rec.weight.is_zero() {
            return Err(format!("zero-weight proposal accepted at step {step}"));
        }
    }
    Ok(format!(
        "{} ratio fixtures, 5000 steps with no zero-weight acceptance",
        fixtures.len()
    ))
}

fn resampling_chi_square() -> Check {
    let probs = [0.5, 0.3, 0.2];
    let weights: Vec<LogWeight> = probs.iter().map(|p: &f64| LogWeight::from_log(p.ln())).collect();
    let n = 100_000;
    let idx = multinomial_indices(&weights, n, &mut RngState::new(11)).map_err(|e| e.to_string())?;
    let mut counts = [0usize; 3];
    for i in idx {
        counts[i] += 1;
    }
    let chi2: f64 = counts
        .iter()
        .zip(probs)
        .map(|(c, p)| {
            let e = p * n as f64;
            (*c as f64 - e).powi(2) / e
        })
        .sum();
    // Chi-square with two degrees of freedom is exponential with mean 2.
    let critical = -2.0 * 0.01f64.ln();
    ensure(
        chi2 < critical,
        format!("chi2 {chi2:.3} < {critical:.3}, counts {counts:?}"),
    )
}

fn space_leak() -> Check {
    let config = |n: usize| SmcConfig::new(100, n, 1);
    let timed = |n: usize| -> Result<(Duration, usize), String> {
        let model = many_scores_model(n);
        let mut best = Duration::MAX;
        let mut peak = 0;
        for rep in 0..2 {
            let start = Instant::now();
            let (r, p) = peak_heap(|| smc(&model, &config(n), &mut RngState::new(rep)));
            r.map_err(|e| e.to_string())?;
            best = best.min(start.elapsed());
            peak = peak.max(p);
        }
        Ok((best, peak))
    };
    let (t1, m1) = timed(10_000)?;
    let (t2, m2) = timed(20_000)?;
    let ratio = t2.as_secs_f64() / t1.as_secs_f64();
    let mem = m2 as f64 / m1 as f64;
    ensure(
        ratio <= 3.0 && (mem - 1.0).abs() <= 0.2,
        format!(
            "time {:.2} s -> {:.2} s (x{ratio:.2}), peak heap {m1} -> {m2} bytes (x{mem:.3})",
            t1.as_secs_f64(),
            t2.as_secs_f64()
        ),
    )
}

fn rmsmc_robust() -> Check {
    let mut masses = Vec::new();
    for seed in 1..=5 {
        let h = rmsmc(
            &markov_chain_model(),
            &SmcConfig::new(1000, 3, 2),
            2,
            &mut RngState::new(seed),
        )
        .map_err(|e| e.to_string())?;
        masses.push(mass_2_to_4(&h));
    }
    let worst = masses.iter().cloned().fold(f64::INFINITY, f64::min);
    ensure(
        worst >= 0.9,
        format!("3 resamples, t=2: min mass in [2,4] = {worst:.4} over 5 seeds"),
    )
}

fn pmmh_conjugate() -> Check {
    let start = Instant::now();
    let config = PmmhConfig {
        mh_steps: 2000,
        ..PmmhConfig::default()
    };
    let out = pmmh(
        &gaussian_mean_prior(),
        |t: &f64| gaussian_mean_likelihood(*t, &GAUSSIAN_MEAN_DATA),
        &config,
        &mut RngState::new(2000),
    )
    .map_err(|e| e.to_string())?;
    let est = out
        .histogram()
        .estimate_expectation(|x| *x)
        .map_err(|e| e.to_string())?;
    let (exact, _) = gaussian_mean_posterior(&GAUSSIAN_MEAN_DATA);
    let elapsed = start.elapsed();
    ensure(
        out.samples.len() == 2000 && (est - exact).abs() <= 0.15 && elapsed < Duration::from_secs(120),
        format!(
            "{} samples, mean {est:.4} vs {exact:.4}, {:.2} s",
            out.samples.len(),
            elapsed.as_secs_f64()
        ),
    )
}

const BIN: &str = env!("CARGO_BIN_EXE_inferkit");

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/land_temperatures.csv")
}

fn cli(args: &[&str]) -> Result<(), String> {
    let o = Command::new(BIN)
        .args(args)
        .env_remove("INFERKIT_SEED")
        .output()
        .map_err(|e| e.to_string())?;
    if o.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?}: {}", String::from_utf8_lossy(&o.stderr).trim()))
    }
}

fn climate_shape() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let data = fixture();
    let data = data.to_str().unwrap();
    let smc_out = dir.path().join("smc.csv");
    cli(&[
        "smc",
        "--model",
        "climate",
        "--data",
        data,
        "--month",
        "1",
        "--particles",
        "500",
        "--seed",
        "1",
        "--out",
        smc_out.to_str().unwrap(),
    ])?;
    let mut worst: f64 = 0.0;
    for b in 1..=13 {
        let (_, h) = read_histogram(&block_path(&smc_out, b), Format::Csv).map_err(|e| e.to_string())?;
        worst = worst.max((h.total_weight().to_prob() - 1.0).abs());
    }
    if block_path(&smc_out, 14).exists() || worst > 1e-9 {
        return Err(format!("SMC blocks off by {worst:e}"));
    }
    let mc_out = dir.path().join("mc.csv");
    cli(&[
        "tmcmc",
        "--model",
        "climate",
        "--data",
        data,
        "--month",
        "1",
        "--steps",
        "5000",
        "--burnin",
        "4000",
        "--seed",
        "1",
        "--out",
        mc_out.to_str().unwrap(),
    ])?;
    let mut sizes = Vec::new();
    for b in 1..=13 {
        let (_, h) = read_histogram(&block_path(&mc_out, b), Format::Csv).map_err(|e| e.to_string())?;
        sizes.push(h.len());
    }
    ensure(
        sizes.iter().all(|s| *s == 1000),
        format!(
            "13 SMC histograms within {worst:.1e} of 1; TMCMC kept {} samples per block",
            sizes[0]
        ),
    )
}

fn determinism() -> Check {
    let data = fixture();
    let data = data.to_str().unwrap();
    let runs: Vec<Vec<&str>> = vec![
        vec!["is", "--model", "chain", "--particles", "2000"],
        vec!["smc", "--model", "chain", "--particles", "1000", "--threads", "4"],
        vec![
            "rmsmc",
            "--model",
            "chain",
            "--particles",
            "200",
            "--steps",
            "3",
            "--step-size",
            "2",
        ],
        vec!["tmcmc", "--model", "coin", "--steps", "5000"],
        vec!["pmmh", "--model", "gauss", "--mh-steps", "200"],
        vec![
            "smc",
            "--model",
            "climate",
            "--data",
            data,
            "--month",
            "4",
            "--particles",
            "50",
        ],
    ];
    for args in &runs {
        let dirs = [
            tempfile::tempdir().map_err(|e| e.to_string())?,
            tempfile::tempdir().map_err(|e| e.to_string())?,
        ];
        let mut listings = Vec::new();
        for dir in &dirs {
            let out = dir.path().join("out.json");
            let mut full = args.clone();
            full.extend(["--seed", "42", "--out", out.to_str().unwrap()]);
            cli(&full)?;
            let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir.path())
                .map_err(|e| e.to_string())?
                .map(|e| {
                    let e = e.unwrap();
                    (
                        e.file_name().to_string_lossy().into_owned(),
                        std::fs::read(e.path()).unwrap(),
                    )
                })
                .collect();
            files.sort();
            listings.push(files);
        }
        if listings[0] != listings[1] || listings[0].is_empty() {
            return Err(format!("{} output differs between runs", args[0]));
        }
    }
    Ok(format!("{} configurations, byte-identical reruns", runs.len()))
}

fn main() {
    let criteria: Vec<Criterion> = vec![
        ("markov chain posterior mode under SMC", chain_smc_mode),
        ("importance sampling degeneracy", is_degeneracy),
        ("Kalman oracle equivalence", kalman_equivalence),
        ("TMCMC enumeration equivalence", tmcmc_enumeration),
        ("trace arithmetic", trace_arithmetic),
        ("MH ratio unit cases", mh_ratio_cases),
        ("resampling unbiasedness", resampling_chi_square),
        ("constant space and linear time in score count", space_leak),
        ("RMSMC robustness", rmsmc_robust),
        ("PMMH conjugate check", pmmh_conjugate),
        ("climate pipeline shape", climate_shape),
        ("determinism", determinism),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS {name}: {detail} [{secs:.1}s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail} [{secs:.1}s]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
    println!("all criteria passed");
}
