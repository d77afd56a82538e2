//! Acceptance criteria 1-8, one PASS/FAIL line each.
//!
//! Runs without the libtest harness so the lines are always printed; the
//! process exits nonzero when any criterion fails.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use biasaudit::fixtures::{synthetic_universe, FixtureSpec};
use biasaudit::inference::{pair_confidence, read_records, BackendRegistry, SyntheticBiasParams};
use biasaudit::protocol::{build_schedule, ScheduleParams, TemplateSet, PROMPT_CATEGORIES};
use biasaudit::reporting::{
    cmd_report_rq1, cmd_report_rq2, cmd_report_rq3, cmd_run, load_store, rq1_analysis, rq2_analysis,
    ReportOutput, RunConfig, STAR_NOTE,
};
use biasaudit::stats::special::reg_incomplete_beta;
use biasaudit::stats::{anova_oneway, bh_fdr, kendall_tau_b, pearson, spearman, BootstrapSpec, Method};
use biasaudit::universe::load_universe;
use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn all_categories() -> Vec<&'static str> {
    PROMPT_CATEGORIES.to_vec()
}

fn run_quiet(config: &RunConfig) -> Result<(), String> {
    let outcome = cmd_run(config, &BackendRegistry::default(), None).map_err(|e| e.to_string())?;
    if !outcome.summary.is_clean() {
        return Err(format!("run not clean: {:?}", outcome.summary));
    }
    Ok(())
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let universe = synthetic_universe(&FixtureSpec {
        n_firms: 150,
        months: 1,
        seed: 1,
    })
    .map_err(|e| e.to_string())?;
    let params = ScheduleParams {
        categories: all_categories().iter().map(|c| c.to_string()).collect(),
        variants: 1,
        orders: 2,
        reps: 3,
        seed: 0,
    };
    let tasks = build_schedule(&universe.firms, &TemplateSet::shipped(), &params).map_err(|e| e.to_string())?;
    let mut per_firm: BTreeMap<&str, usize> = BTreeMap::new();
    for t in &tasks {
        *per_firm.entry(&t.firm_a).or_default() += 1;
        *per_firm.entry(&t.firm_b).or_default() += 1;
    }
    let counts: BTreeSet<usize> = per_firm.values().copied().collect();
    let elapsed = start.elapsed();
    check(
        per_firm.len() == 150 && counts == BTreeSet::from([8046]) && elapsed < Duration::from_secs(5),
        format!(
            "{} tasks, per-firm counts {counts:?} over {} firms, {:.2}s",
            tasks.len(),
            per_firm.len(),
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_direct = 0.0f64;
    let mut worst_shift = 0.0f64;
    let mut complement_exact = true;
    let mut swap_exact = true;
    for _ in 0..10_000 {
        let a: f64 = rng.random_range(-30.0..0.0);
        let b: f64 = rng.random_range(-30.0..0.0);
        let c: f64 = rng.random_range(-20.0..20.0);
        let (p, q) = pair_confidence(a, b).map_err(|e| e.to_string())?;
        let direct = a.exp() / (a.exp() + b.exp());
        worst_direct = worst_direct.max((p - direct).abs());
        complement_exact &= p + q == 1.0;
        let (q2, p2) = pair_confidence(b, a).map_err(|e| e.to_string())?;
        swap_exact &= p2 == p && q2 == q;
        let (ps, _) = pair_confidence(a + c, b + c).map_err(|e| e.to_string())?;
        worst_shift = worst_shift.max((ps - p).abs());
    }
    check(
        worst_direct <= 1e-12 && worst_shift <= 1e-12 && complement_exact && swap_exact,
        format!(
            "max |p - softmax| {worst_direct:.1e}, max shift drift {worst_shift:.1e}, p+q==1 {complement_exact}, swap symmetric {swap_exact}"
        ),
    )
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let boot = BootstrapSpec { iters: 100, seed: 0 };
    let mut worst_corr = 0.0f64;
    for i in 0..200 {
        let n = rng.random_range(5..=30);
        let x = random_vector(&mut rng, n, i % 2 == 0);
        let y = random_vector(&mut rng, n, i % 4 == 0);
        let lib = [
            pearson(&x, &y).map(|r| r.estimate),
            spearman(&x, &y, &boot).map(|r| r.estimate),
            kendall_tau_b(&x, &y, &boot).map(|r| r.estimate),
        ];
        let oracle = [brute_pearson(&x, &y), brute_spearman(&x, &y), brute_kendall(&x, &y)];
        for (l, o) in lib.iter().zip(oracle) {
            match l {
                Ok(v) => worst_corr = worst_corr.max((v - o).abs()),
                // an undefined marker must coincide with an undefined oracle
                Err(_) if !o.is_finite() => {}
                Err(e) => return Err(format!("vector {i}: library error {e} where oracle gives {o}")),
            }
        }
    }

    let mut worst_bh = 0.0f64;
    for _ in 0..50 {
        let m = rng.random_range(1..=40);
        let p: Vec<f64> = (0..m)
            .map(|_| if rng.random_bool(0.2) { 0.05 } else { rng.random::<f64>() })
            .collect();
        let lib = bh_fdr(&p).map_err(|e| e.to_string())?;
        for (l, o) in lib.iter().zip(brute_bh(&p)) {
            worst_bh = worst_bh.max((l - o).abs());
        }
    }

    let mut worst_f = 0.0f64;
    for _ in 0..50 {
        let (na, nb) = (rng.random_range(2..15), rng.random_range(2..15));
        let a = random_vector(&mut rng, na, false);
        let b = random_vector(&mut rng, nb, false);
        let t = brute_pooled_t(&a, &b);
        let f = anova_oneway(&[a, b]).map_err(|e| e.to_string())?.f_stat;
        worst_f = worst_f.max((f - t * t).abs() / (t * t).max(1.0));
    }

    let mut worst_beta = 0.0f64;
    let mut points = 0;
    for a in [0.5, 1.5, 3.0, 7.0, 15.0] {
        for b in [0.5, 2.0, 4.5, 10.0] {
            for x in [0.05, 0.25, 0.5, 0.75, 0.95] {
                let lib = reg_incomplete_beta(a, b, x).map_err(|e| e.to_string())?;
                worst_beta = worst_beta.max((lib - beta_oracle(a, b, x)).abs());
                points += 1;
            }
        }
    }
    check(
        worst_corr <= 1e-12 && worst_bh <= 1e-12 && worst_f <= 1e-9 && worst_beta <= 1e-10,
        format!(
            "correlations {worst_corr:.1e}, BH {worst_bh:.1e}, F vs t^2 {worst_f:.1e}, incomplete beta {worst_beta:.1e} over {points} points"
        ),
    )
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut config = fixture_config(dir.path(), 20, 4);
    config.schedule = schedule(&all_categories(), 2, 2, 3, 4);
    config.backend.synthetic = size_bias(1.0);
    config.run.parallelism = 4;
    run_quiet(&config)?;
    let store = load_store(&config.store_path()).map_err(|e| e.to_string())?;
    let universe = load_universe(&config.universe).map_err(|e| e.to_string())?;
    let report = rq1_analysis(&store.records, &universe, &config.stats).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let top = report.features()[0].to_string();
    let row = report.row(&top, Method::Pearson).ok_or("no Pearson row for top feature")?;
    let p_adj = row.p_adjusted.unwrap_or(1.0);
    check(
        top == "market_cap" && row.estimate > 0.95 && p_adj < 0.001 && elapsed < Duration::from_secs(60),
        format!(
            "{} records, top feature {top}, r={:.4}, p_adj={p_adj:.2e}, {:.1}s",
            store.records.len(),
            row.estimate,
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_5() -> Outcome {
    let mut fractions = Vec::new();
    for seed in 0..20u64 {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let mut config = fixture_config(dir.path(), 20, 500 + seed);
        config.schedule = schedule(&["baseline"], 2, 2, 3, seed);
        config.backend.synthetic = SyntheticBiasParams {
            noise_sd: 0.5,
            seed,
            ..SyntheticBiasParams::default()
        };
        config.stats.bootstrap_seed = seed;
        config.run.parallelism = 4;
        run_quiet(&config)?;
        let store = load_store(&config.store_path()).map_err(|e| e.to_string())?;
        let universe = load_universe(&config.universe).map_err(|e| e.to_string())?;
        let report = rq1_analysis(&store.records, &universe, &config.stats).map_err(|e| e.to_string())?;
        // a feature counts once if any of its three methods is significant
        let features = report.features();
        let significant = features
            .iter()
            .filter(|f| report.rows.iter().any(|r| r.feature == **f && r.p_adjusted.unwrap_or(1.0) < 0.05))
            .count();
        fractions.push(significant as f64 / features.len() as f64);
    }
    let mean = fractions.iter().sum::<f64>() / fractions.len() as f64;
    let clean = fractions.iter().filter(|&&f| f == 0.0).count();
    check(
        mean <= 0.05,
        format!(
            "mean fraction of features with p_adj<0.05 under any method {:.2}% over 20 seeds; {clean}/20 seeds with none",
            100.0 * mean
        ),
    )
}

fn criterion_6() -> Outcome {
    let sigma = 0.3;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut config = fixture_config(dir.path(), 30, 6);
    config.schedule = schedule(&all_categories(), 1, 2, 1, 6);
    config.backend.synthetic = SyntheticBiasParams {
        category_offset_sd: sigma,
        seed: 6,
        ..SyntheticBiasParams::default()
    };
    config.run.parallelism = 4;
    run_quiet(&config)?;
    let universe = load_universe(&config.universe).map_err(|e| e.to_string())?;
    let store = load_store(&config.store_path()).map_err(|e| e.to_string())?;
    let varying = rq2_analysis(&store.records, &universe, &config.stats).map_err(|e| e.to_string())?;
    let mean_sd = varying.mean_firm_sd();

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut config = fixture_config(dir.path(), 30, 6);
    config.schedule = schedule(&all_categories(), 1, 2, 1, 6);
    config.backend.synthetic = size_bias(1.0);
    config.run.parallelism = 4;
    run_quiet(&config)?;
    let store = load_store(&config.store_path()).map_err(|e| e.to_string())?;
    let invariant = rq2_analysis(&store.records, &universe, &config.stats).map_err(|e| e.to_string())?;
    let all_zero = invariant
        .firms
        .iter()
        .chain(&invariant.sectors)
        .all(|d| d.sd == 0.0 && d.mad == 0.0);

    check(
        (mean_sd - sigma).abs() <= 0.1 * sigma && all_zero,
        format!(
            "mean firm SD {mean_sd:.4} vs sigma {sigma} ({:+.1}%), invariant generator SD=MAD=0 for all {} firms and {} sectors: {all_zero}",
            100.0 * (mean_sd / sigma - 1.0),
            invariant.firms.len(),
            invariant.sectors.len()
        ),
    )
}

fn report_files(out: &ReportOutput) -> Result<BTreeMap<String, Vec<u8>>, String> {
    out.files
        .iter()
        .map(|p| {
            let name = p.file_name().unwrap().to_string_lossy().into_owned();
            fs::read(p).map(|b| (name, b)).map_err(|e| e.to_string())
        })
        .collect()
}

fn all_reports(config: &RunConfig) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let store = config.store_path();
    let mut files = BTreeMap::new();
    for out in [
        cmd_report_rq1(config, &store),
        cmd_report_rq2(config, &store),
        cmd_report_rq3(config, &store),
    ] {
        files.extend(report_files(&out.map_err(|e| e.to_string())?)?);
    }
    Ok(files)
}

fn task_keys(path: &Path) -> Result<BTreeSet<String>, String> {
    Ok(read_records(path)
        .map_err(|e| e.to_string())?
        .into_iter()
        .map(|r| r.task_key)
        .collect())
}

fn criterion_7() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut base = fixture_config(dir.path(), 10, 7);
    base.backend.synthetic = SyntheticBiasParams {
        size_coeff: 1.0,
        noise_sd: 0.5,
        category_offset_sd: 0.2,
        order_coeff: 0.1,
        seed: 7,
        ..SyntheticBiasParams::default()
    };
    base.schedule.seed = 7;
    base.run.parallelism = 4;

    let mut first = base.clone();
    first.out = dir.path().join("first");
    let mut second = base.clone();
    second.out = dir.path().join("second");
    run_quiet(&first)?;
    run_quiet(&second)?;
    let store_a = fs::read(first.store_path()).map_err(|e| e.to_string())?;
    let store_b = fs::read(second.store_path()).map_err(|e| e.to_string())?;
    let reports_a = all_reports(&first)?;
    let reports_b = all_reports(&second)?;

    let mut resumed = base.clone();
    resumed.out = dir.path().join("resumed");
    let total = base.schedule.total_tasks(10);
    let partial = cmd_run(&resumed, &BackendRegistry::default(), Some(total / 2)).map_err(|e| e.to_string())?;
    let rest = cmd_run(&resumed, &BackendRegistry::default(), None).map_err(|e| e.to_string())?;
    let keys_full = task_keys(&first.store_path())?;
    let keys_resumed = task_keys(&resumed.store_path())?;
    let resumed_bytes_equal = fs::read(resumed.store_path()).map_err(|e| e.to_string())? == store_a;

    check(
        store_a == store_b && reports_a == reports_b && keys_full == keys_resumed && rest.summary.skipped == total / 2,
        format!(
            "store identical {}, {} report files identical {}, resume {}+{} tasks gives same key set {} (bytes identical {resumed_bytes_equal})",
            store_a == store_b,
            reports_a.len(),
            reports_a == reports_b,
            partial.summary.completed,
            rest.summary.completed,
            keys_full == keys_resumed
        ),
    )
}

fn stars_oracle(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        ""
    }
}

/// Checks the stars column and that p_adj is BH over p_raw per method.
fn check_correlation_csv(bytes: &[u8]) -> Result<(usize, usize), String> {
    let mut reader = csv::Reader::from_reader(bytes);
    let header: Vec<String> = reader.headers().map_err(|e| e.to_string())?.iter().map(String::from).collect();
    let expected = ["feature", "category", "method", "estimate", "ci_low", "ci_high", "p_raw", "p_adj", "stars"];
    if header != expected {
        return Err(format!("header {header:?}"));
    }
    let mut by_method: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    let mut rows = 0;
    let mut raw_would_differ = 0;
    for record in reader.records() {
        let record = record.map_err(|e| e.to_string())?;
        let p_raw: f64 = record[6].parse().map_err(|e| format!("{e}"))?;
        let p_adj: f64 = record[7].parse().map_err(|e| format!("{e}"))?;
        if &record[8] != stars_oracle(p_adj) {
            return Err(format!("row {rows}: stars {:?} for p_adj {p_adj}", &record[8]));
        }
        if stars_oracle(p_raw) != stars_oracle(p_adj) {
            raw_would_differ += 1;
        }
        by_method.entry(record[2].to_string()).or_default().push((p_raw, p_adj));
        rows += 1;
    }
    for (method, pairs) in &by_method {
        let raw: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        for ((_, adj), oracle) in pairs.iter().zip(brute_bh(&raw)) {
            if (adj - oracle).abs() > 1e-12 {
                return Err(format!("{method}: p_adj {adj} is not BH of p_raw ({oracle})"));
            }
        }
    }
    Ok((rows, raw_would_differ))
}

fn criterion_8() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut config = fixture_config(dir.path(), 16, 8);
    config.schedule = schedule(&all_categories(), 1, 2, 1, 8);
    config.backend.synthetic = SyntheticBiasParams {
        size_coeff: 0.6,
        noise_sd: 0.3,
        seed: 8,
        ..SyntheticBiasParams::default()
    };
    run_quiet(&config)?;
    let files = all_reports(&config)?;
    let mut detail = Vec::new();
    for md in ["rq1.md", "rq3.md"] {
        let text = String::from_utf8_lossy(&files[md]).into_owned();
        let notes: Vec<&str> = text.lines().filter(|l| l.contains("p<0.05")).collect();
        if notes.len() != 1 || !notes[0].starts_with(STAR_NOTE) {
            return Err(format!("{md}: notes lines {notes:?}"));
        }
        if STAR_NOTE != "*** p<0.001, ** p<0.01, * p<0.05 (FDR corrected)" {
            return Err(format!("note text {STAR_NOTE:?}"));
        }
    }
    for csv_name in ["rq1.csv", "rq3.csv"] {
        let (rows, differ) = check_correlation_csv(&files[csv_name]).map_err(|e| format!("{csv_name}: {e}"))?;
        detail.push(format!("{csv_name} {rows} rows ({differ} where raw-p stars would differ)"));
    }
    Ok(format!("notes line exact in rq1.md and rq3.md; stars follow p_adj in {}", detail.join(", ")))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("schedule balance", criterion_1),
        ("pair confidence", criterion_2),
        ("statistics oracles", criterion_3),
        ("size-bias recovery", criterion_4),
        ("null calibration", criterion_5),
        ("dispersion recovery", criterion_6),
        ("determinism and resume", criterion_7),
        ("report format", criterion_8),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("criterion {} ({name}): PASS [{secs:.1}s] {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} ({name}): FAIL [{secs:.1}s] {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
