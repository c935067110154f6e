//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//!
//! Runs without the libtest harness so every criterion is evaluated and
//! reported even when an earlier one fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use ergolab::asymptotics::ReturnSequence;
use ergolab::experiments::{run, run_with_threads, ExperimentConfig, ExperimentKind, Outcome, ResultTable};
use ergolab::limit_laws::{dkw_threshold, ks_distance, lil_constants, ml_cdf, ml_moment, stable_cdf, stable_laplace};
use ergolab::limit_laws::{ml_sample, stable_sample};
use ergolab::numeric::mean_se;
use ergolab::rng::stream;
use ergolab::transfer::transfer_apply;
use ergolab::IntervalMapSystem;

type Check = std::result::Result<String, String>;

macro_rules! config {
    ($file:literal) => {
        (concat!("configs/", $file), include_str!(concat!("../../../configs/", $file)))
    };
}

fn load((name, text): (&str, &str)) -> ExperimentConfig {
    ExperimentConfig::from_toml(text).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn ensure(ok: bool, msg: impl Into<String>) -> std::result::Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(elapsed: Duration, limit_s: f64) -> std::result::Result<(), String> {
    ensure(elapsed.as_secs_f64() < limit_s, format!("runtime {:.1}s over {limit_s}s", elapsed.as_secs_f64()))
}

/// Every judged verdict of `rule` passed, and at least one was judged.
fn rule_passes(table: &ResultTable, rule: &str) -> std::result::Result<usize, String> {
    let judged: Vec<_> = table.rule(rule).into_iter().filter(|v| v.outcome != Outcome::Info).collect();
    ensure(!judged.is_empty(), format!("{rule}: no judged rows"))?;
    let failed = judged.iter().filter(|v| v.outcome != Outcome::Pass).count();
    ensure(failed == 0, format!("{rule}: {failed} of {} rows not passing", judged.len()))?;
    Ok(judged.len())
}

fn last_value(table: &ResultTable, statistic: &str) -> f64 {
    table.rows_of(statistic).last().map(|r| r.value).unwrap_or(f64::NAN)
}

fn transfer_fixed_point() -> Check {
    let t = Instant::now();
    let system = IntervalMapSystem::boole_like();
    let pts: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
    let out = transfer_apply(&system, &|x| 1.0 / x, &pts).map_err(|e| e.to_string())?;
    let worst = pts.iter().zip(&out.values).map(|(x, v)| (v * x - 1.0).abs()).fold(0.0, f64::max);
    let el = t.elapsed();
    ensure(worst < 1e-10, format!("relative error {worst:e}"))?;
    within(el, 1.0)?;
    Ok(format!("max relative error {worst:.2e} in {:.3}s", el.as_secs_f64()))
}

fn ulam_densities() -> Check {
    let t = Instant::now();
    let doubling = load(config!("ulam_doubling.toml"));
    ensure(doubling.ulam.tol == 1e-8, "doubling tolerance must be 1e-8")?;
    let d = run(ExperimentKind::Ulam, &doubling).map_err(|e| e.to_string())?;
    rule_passes(&d, "ULAM-REF")?;
    let boole = load(config!("ulam_boole.toml"));
    let u = &boole.ulam;
    ensure(u.cells == 1 << 13 && u.tol == 0.03, "Boole grid must be 2^13 cells at 3%")?;
    ensure(u.window.map(|w| (w.lo, w.hi)) == Some((0.05, 1.0)), "Boole window must be (0.05, 1)")?;
    ensure(u.compare.map(|w| (w.lo, w.hi)) == Some((0.1, 0.9)), "comparison range must be (0.1, 0.9)")?;
    ensure(u.ref_set.map(|w| (w.lo, w.hi)) == Some((0.5, 1.0)), "reference set must be (1/2, 1)")?;
    ensure(u.ref_mass == Some(std::f64::consts::LN_2), "reference mass must be ln 2")?;
    let b = run(ExperimentKind::Ulam, &boole).map_err(|e| e.to_string())?;
    rule_passes(&b, "ULAM-REF")?;
    let el = t.elapsed();
    within(el, 30.0)?;
    Ok(format!(
        "doubling sup {:.1e}, Boole sup rel {:.2e} in {:.1}s",
        last_value(&d, "ulam_sup_rel_error"),
        last_value(&b, "ulam_sup_rel_error"),
        el.as_secs_f64()
    ))
}

fn distribution_laws() -> Check {
    let t = Instant::now();
    let n = 1_000_000;
    let mut worst_z: f64 = 0.0;
    for (gi, &g) in [0.3, 0.5, 0.8].iter().enumerate() {
        let mut rng = stream(3, 100, gi as u64);
        let ys: Vec<f64> = (0..n).map(|_| ml_sample(&mut rng, g).unwrap()).collect();
        for p in 1..=4u32 {
            let powers: Vec<f64> = ys.iter().map(|y| y.powi(p as i32)).collect();
            let (m, se) = mean_se(&powers);
            let z = (m - ml_moment(g, p)).abs() / se;
            worst_z = worst_z.max(z);
            ensure(z <= 3.0, format!("ML moment g={g} p={p}: {m} vs {} ({z:.2} SE)", ml_moment(g, p)))?;
        }
    }
    ensure((ml_moment(0.5, 2) - std::f64::consts::FRAC_PI_2).abs() < 1e-12, "ML second moment at 1/2")?;
    let l1 = stable_laplace(0.5, 1.0);
    ensure((l1 - (-ergolab::numeric::gamma(1.5)).exp()).abs() < 1e-14, format!("stable Laplace at t = 1: {l1}"))?;
    ensure((l1 - 0.41218).abs() < 1e-4, format!("stable Laplace at t = 1: {l1}"))?;
    let mut rng = stream(3, 101, 0);
    let zs: Vec<f64> = (0..n).map(|_| stable_sample(&mut rng, 0.5).unwrap()).collect();
    for &tt in &[0.5, 1.0, 2.0] {
        let e: Vec<f64> = zs.iter().map(|z| (-tt * z).exp()).collect();
        let (m, se) = mean_se(&e);
        let z = (m - stable_laplace(0.5, tt)).abs() / se;
        worst_z = worst_z.max(z);
        ensure(z <= 3.0, format!("stable Laplace t={tt}: {m} vs {} ({z:.2} SE)", stable_laplace(0.5, tt)))?;
    }
    let m = 100_000;
    let band = dkw_threshold(m, 0.01);
    let mut worst_ks: f64 = 0.0;
    let mut outside = Vec::new();
    for (gi, &g) in [0.3, 0.5, 0.8].iter().enumerate() {
        let mut rng = stream(3, 102, gi as u64);
        let mut ys: Vec<f64> = (0..m).map(|_| ml_sample(&mut rng, g).unwrap()).collect();
        ys.sort_by(|a, b| a.total_cmp(b));
        let ks = ks_distance(&ys, |y| ml_cdf(g, y).unwrap()).map_err(|e| e.to_string())?;
        let mut zs: Vec<f64> = (0..m).map(|_| stable_sample(&mut rng, g).unwrap()).collect();
        zs.sort_by(|a, b| a.total_cmp(b));
        let ks_z = ks_distance(&zs, |z| stable_cdf(g, z).unwrap()).map_err(|e| e.to_string())?;
        worst_ks = worst_ks.max(ks).max(ks_z);
        if !(ks < band && ks_z < band) {
            outside.push(format!("g={g}: KS {ks:.4}/{ks_z:.4}"));
        }
    }
    let el = t.elapsed();
    ensure(outside.is_empty(), format!("{} vs DKW {band:.4} in {:.1}s", outside.join(", "), el.as_secs_f64()))?;
    within(el, 120.0)?;
    Ok(format!("worst {worst_z:.2} SE, worst KS {worst_ks:.4} < {band:.4} in {:.1}s", el.as_secs_f64()))
}

fn lil_limits() -> Check {
    let l = lil_constants(0.5).map_err(|e| e.to_string())?;
    ensure((l.k - std::f64::consts::PI.sqrt()).abs() < 1e-12, format!("K = {}", l.k))?;
    ensure((l.c - 1.0 / std::f64::consts::PI).abs() < 1e-12, format!("C = {}", l.c))?;
    let near = lil_constants(0.999).map_err(|e| e.to_string())?;
    ensure((near.c - 1.0).abs() < 1e-2, format!("C at 0.999 = {}", near.c))?;
    Ok(format!("(K, C)(1/2) = ({:.15}, {:.15}), C(0.999) = {:.5}", l.k, l.c, near.c))
}

fn neutral_tail() -> Check {
    let t = Instant::now();
    let cfg = load(config!("tail_thaler.toml"));
    ensure(cfg.tail.n_max == 1_000_000 && cfg.tail.slope_tol == 0.01 && cfg.tail.const_tol == 0.02, "tail tolerances")?;
    let table = run(ExperimentKind::Tail, &cfg).map_err(|e| e.to_string())?;
    rule_passes(&table, "TAIL-SLOPE")?;
    rule_passes(&table, "TAIL-CONST")?;
    let el = t.elapsed();
    within(el, 10.0)?;
    Ok(format!(
        "slope {:.5}, scaled tail {:.5} in {:.2}s",
        last_value(&table, "tail_slope"),
        last_value(&table, "tail_scaled"),
        el.as_secs_f64()
    ))
}

fn duality() -> Check {
    let t = Instant::now();
    let cfg = load(config!("duality_boole.toml"));
    ensure(cfg.run.trajectories == 100 && cfg.run.grid_max == 10_000, "100 orbits to n = 1e4")?;
    let table = run(ExperimentKind::Duality, &cfg).map_err(|e| e.to_string())?;
    rule_passes(&table, "DUAL-EXACT")?;
    let v = last_value(&table, "duality_violations");
    ensure(v == 0.0, format!("{v} violations"))?;
    let el = t.elapsed();
    within(el, 10.0)?;
    Ok(format!("0 violations over {} pairs in {:.2}s", last_value(&table, "duality_pairs"), el.as_secs_f64()))
}

fn darling_kac() -> Check {
    let t = Instant::now();
    let thaler = load(config!("dk_thaler.toml"));
    ensure(thaler.gamma() == 0.5 && thaler.run.trajectories == 2000 && thaler.run.grid_max == 1_000_000, "Thaler run")?;
    ensure(thaler.run.calibration_factor == 2.0, "calibration factor 2")?;
    let a = run(ExperimentKind::Dk, &thaler).map_err(|e| e.to_string())?;
    rule_passes(&a, "DK-KS")?;
    let boole = load(config!("dk_boole.toml"));
    let b = run(ExperimentKind::Dk, &boole).map_err(|e| e.to_string())?;
    rule_passes(&b, "DK-CV")?;
    let ks = a.rows_of("dk_ks").last().map(|r| (r.value, r.se)).unwrap_or((f64::NAN, f64::NAN));
    let el = t.elapsed();
    within(el, 1200.0)?;
    Ok(format!(
        "Thaler KS {:.4} < {:.4}; Boole CV {:.4} at n = {} in {:.1}s",
        ks.0,
        ks.1,
        last_value(&b, "dk_cv"),
        boole.run.grid_max,
        el.as_secs_f64()
    ))
}

fn stable_limit() -> Check {
    let t = Instant::now();
    let mut notes = Vec::new();
    let mut failures = Vec::new();
    for (cfg, rule) in [
        (config!("stable_iid.toml"), "STABLE-KS"),
        (config!("stable_thaler.toml"), "STABLE-KS"),
        (config!("stable_constant.toml"), "STABLE-NEG"),
    ] {
        let name = cfg.0;
        let c = load(cfg);
        ensure(c.run.trajectories == 10_000 && c.run.grid_max == 10_000, format!("{name}: N = n = 1e4"))?;
        ensure(c.run.calibration_factor == 2.0, "calibration factor 2")?;
        let table = run(ExperimentKind::Stable, &c).map_err(|e| e.to_string())?;
        let row = table.rows_of("stable_ks_scale_free").last().map(|r| (r.value, r.se)).unwrap();
        notes.push(format!("{name} {:.4}/{:.4}", row.0, row.1));
        if let Err(e) = rule_passes(&table, rule) {
            failures.push(format!("{name}: {e}"));
        }
    }
    let el = t.elapsed();
    ensure(failures.is_empty(), format!("{} [{}]", failures.join("; "), notes.join(", ")))?;
    within(el, 600.0)?;
    Ok(format!("KS/threshold {} in {:.1}s", notes.join(", "), el.as_secs_f64()))
}

fn renewal() -> Check {
    let a = ReturnSequence::analytic(|n| n as f64, 100_000);
    let ones = vec![1u64; 16];
    let mut worst: f64 = 0.0;
    for &l in &[1e-1, 1e-2, 1e-3] {
        let row = ergolab::asymptotics::renewal_residual(&a, &ones, l).map_err(|e| e.to_string())?;
        worst = worst.max(row.residual.abs()).max(row.residual_with_origin.abs());
    }
    ensure(worst < 1e-12, format!("constant return time residual {worst:e}"))?;
    let cfg = load(config!("renewal_thaler.toml"));
    ensure(cfg.renewal.tol == 0.05 && cfg.renewal.window == [1e-3, 1e-2], "renewal window and tolerance")?;
    let table = run(ExperimentKind::Renewal, &cfg).map_err(|e| e.to_string())?;
    let judged = rule_passes(&table, "RENEWAL-RES")?;
    let max_res = table
        .rows_of("renewal_residual")
        .iter()
        .filter(|r| r.verdict.outcome != Outcome::Info)
        .map(|r| r.value.abs())
        .fold(0.0, f64::max);
    Ok(format!("constant residual {worst:.1e}; Thaler max |cu-1| {max_res:.4} over {judged} lambdas"))
}

fn renyi_moments() -> Check {
    let cfg = load(config!("renyi_thaler.toml"));
    ensure(cfg.renyi.band == Some([1.35, 1.8]), "ratio band [1.35, 1.8]")?;
    let r = run(ExperimentKind::Renyi, &cfg).map_err(|e| e.to_string())?;
    rule_passes(&r, "RENYI-TARGET")?;
    let m = load(config!("moments_thaler.toml"));
    ensure(m.moments.band == [0.8, 1.25] && m.moments.p_max >= 2, "moment band [0.8, 1.25]")?;
    let mt = run(ExperimentKind::Moments, &m).map_err(|e| e.to_string())?;
    let judged = rule_passes(&mt, "MOM-RATIO")?;
    ensure(judged == 4, format!("{judged} judged moment rows, expected 4"))?;
    Ok(format!("ratio {:.4} at n = {}; {judged} moment ratios in band", last_value(&r, "renyi_ratio"), cfg.run.grid_max))
}

fn mixing() -> Check {
    let cfg = load(config!("mixing_doubling.toml"));
    let table = run(ExperimentKind::Mixing, &cfg).map_err(|e| e.to_string())?;
    let mut n = 0;
    for rule in ["MIX-PSI", "MIX-PSISTAR", "MIX-PHI", "MIX-ORDER", "MIX-THETA"] {
        n += rule_passes(&table, rule)?;
    }
    Ok(format!("{n} judged rows over {} grid points", table.rows_of("mixing_psi").len()))
}

fn small(text: &str) -> ExperimentConfig {
    ExperimentConfig::from_toml(text).unwrap()
}

fn reproducibility() -> Check {
    let thaler = "[map]\nfamily = \"thaler\"\ngamma = 0.5\n";
    let boole = "[map]\nfamily = \"boole_like\"\n";
    let doubling = "[map]\nfamily = \"doubling\"\n";
    let run_small = "[run]\ntrajectories = 64\ngrid_max = 4096\nreturn_cap = 1000000000000\n";
    let cases: Vec<(ExperimentKind, String)> = vec![
        (ExperimentKind::Simulate, format!("{thaler}{run_small}")),
        (ExperimentKind::Dk, format!("{thaler}{run_small}")),
        (ExperimentKind::Stable, format!("{thaler}{run_small}")),
        (ExperimentKind::Lil, format!("{thaler}{run_small}")),
        (ExperimentKind::Duality, format!("{boole}{run_small}")),
        (ExperimentKind::Renyi, format!("{thaler}{run_small}")),
        (ExperimentKind::Moments, format!("{thaler}{run_small}")),
        (ExperimentKind::Wpde, format!("{boole}[run]\ngrid_max = 256\n[wpde]\npoints = 4\n")),
        (ExperimentKind::Renewal, format!("{thaler}{run_small}")),
        (ExperimentKind::Mixing, format!("{doubling}[mixing]\nsamples = 20000\nn_max = 4\n")),
        (ExperimentKind::Ulam, format!("{boole}[ulam]\ncells = 512\nexport_matrix = true\n")),
        (ExperimentKind::Tail, format!("{thaler}[tail]\nn_max = 10000\n")),
    ];
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    for (kind, text) in &cases {
        let cfg = small(text);
        let mut outputs = Vec::new();
        for (k, threads) in [1usize, 1, 4].iter().enumerate() {
            let table = run_with_threads(*kind, &cfg, *threads).map_err(|e| format!("{kind}: {e}"))?;
            let dir = tmp.path().join(format!("{kind}-{k}"));
            table.write_dir(&dir, &ergolab::experiments::metadata(*kind, &cfg, &table)).map_err(|e| e.to_string())?;
            let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(&dir)
                .map_err(|e| e.to_string())?
                .map(|e| {
                    let p = e.unwrap().path();
                    (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
                })
                .collect();
            files.sort();
            outputs.push(files);
        }
        ensure(outputs[0] == outputs[1], format!("{kind}: repeated run differs"))?;
        ensure(outputs[0] == outputs[2], format!("{kind}: output depends on worker count"))?;
    }
    Ok(format!("{} experiments byte-identical across repeats and 1/4 workers", cases.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 12] = [
        ("transfer fixed point", transfer_fixed_point),
        ("Ulam densities", ulam_densities),
        ("distribution laws", distribution_laws),
        ("LIL constants", lil_limits),
        ("neutral tail", neutral_tail),
        ("duality", duality),
        ("Darling-Kac", darling_kac),
        ("stable limit", stable_limit),
        ("renewal equation", renewal),
        ("Renyi and moment structure", renyi_moments),
        ("mixing calibration", mixing),
        ("reproducibility", reproducibility),
    ];
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let number = i + 1;
        if !only.is_empty() && !only.contains(&number) {
            continue;
        }
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or(p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        match result {
            Ok(detail) => println!("criterion {number:>2} pass  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {number:>2} FAIL  {name}: {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
