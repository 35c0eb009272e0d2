//! Acceptance checks, one line per criterion. Runs without the libtest
//! harness so the lines always print; exits non-zero if any check fails.

use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use decical::decision::{bayes_action, evaluate, DecisionRecord};
use decical::diagnostics::{crps_ensemble, summarize, CrpsEstimator, DiagnosticsConfig};
use decical::grid_store::{align, parse_timestamp, GridSpec, RegionMask};
use decical::report::{run_evaluate, synth_to_dir, RunConfig, SynthConfig};
use decical::synthetic::{
    generate, oracle_cost_variance, ForecasterSpec, LatentField, SyntheticDgp, SyntheticRun,
};
use decical::tasks::{
    frost_cost, frost_crossing, heat_cost, heat_crossing, hub_speed_to_power, wind_cost,
    wind_speed_to_hub, wind_speed_to_power, FrostTaskParams, HeatTaskParams, Task,
    WindTaskParams, WindTransformParams, NO_PROTECT, PROTECT, TURBINE_OFF,
};

type Criterion<'a> = (&'static str, Box<dyn Fn() -> Check + 'a>);

struct Check {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: impl Into<String>) -> Check {
    Check { pass, detail: detail.into() }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

/// 10×10 grid, ~1.5° spacing over western Europe.
fn grid10() -> GridSpec {
    GridSpec::regular(54.0, 40.5, 0.0, 13.5, 1.5).unwrap()
}

fn temperature_run(seed: u64, days: usize, leads: &[u32]) -> SyntheticRun {
    let dgp = SyntheticDgp::temperature(grid10(), seed)
        .with_start(parse_timestamp("2021-01-01").unwrap());
    generate(&dgp, days, leads).unwrap()
}

fn records_for(run: &SyntheticRun, forecaster: &str, members: usize, task: &Task) -> Vec<DecisionRecord> {
    let ens = run
        .latent
        .forecast(&ForecasterSpec::new(forecaster.parse().unwrap(), members))
        .unwrap();
    let view = align(&ens, &run.observations, &RegionMask::all(run.latent.grid())).unwrap();
    evaluate(&view, &task.cost_function().unwrap(), Some(task.transform().as_ref())).unwrap()
}

fn mean(x: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = x.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    s / n as f64
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let m = mean(x.iter().copied());
    let v = x.iter().map(|a| (a - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64;
    (m, v)
}

// ---------------------------------------------------------------- 1

fn cost_function_exactness() -> Check {
    let tol = 1e-12;
    let mut ok = true;
    for (theta, c) in [(0.0, 0.5), (2.0, 0.3), (-1.5, 0.8)] {
        let f = frost_cost(&FrostTaskParams { theta, cost_ratio: c }).unwrap();
        let cost = |a, t| f.cost(a, t).unwrap();
        ok &= close(cost(NO_PROTECT, theta - 1.0), 10.0 * c, tol);
        ok &= close(cost(NO_PROTECT, theta), 10.0 * c, tol);
        ok &= close(cost(NO_PROTECT, theta + 1.5), 5.0 * c, tol);
        ok &= close(cost(NO_PROTECT, theta + 3.0), 0.0, tol);
        ok &= close(cost(PROTECT, theta), 0.0, tol);
        ok &= close(cost(PROTECT, theta + 3.0), 10.0 * (1.0 - c), tol);
        ok &= close(cost(PROTECT, theta + 5.0), 10.0 * (1.0 - c), tol);
        let t = frost_crossing(&FrostTaskParams { theta, cost_ratio: c });
        ok &= close(t, theta + 3.0 * c, tol);
        ok &= close(cost(NO_PROTECT, t), 10.0 * c * (1.0 - c), tol);
        ok &= close(cost(PROTECT, t), 10.0 * c * (1.0 - c), tol);

        let h = heat_cost(&HeatTaskParams { theta: theta + 30.0, cost_ratio: c }).unwrap();
        let hc = |a, t| h.cost(a, t).unwrap();
        let th = theta + 30.0;
        ok &= close(hc(NO_PROTECT, th), 10.0 * c, tol);
        ok &= close(hc(NO_PROTECT, th - 3.0), 0.0, tol);
        ok &= close(hc(PROTECT, th - 3.0), 10.0 * (1.0 - c), tol);
        ok &= close(hc(PROTECT, th), 0.0, tol);
        let t = heat_crossing(&HeatTaskParams { theta: th, cost_ratio: c });
        ok &= close(hc(NO_PROTECT, t), hc(PROTECT, t), tol);
        ok &= close(hc(PROTECT, t), 10.0 * c * (1.0 - c), tol);
    }
    let w = wind_cost(&WindTaskParams::new(2.0)).unwrap();
    let v = w.cost(5, 0.2).unwrap();
    ok &= close(v, 1.1, tol);
    for u in [1.5, 2.0, 4.0] {
        let w = wind_cost(&WindTaskParams::new(u)).unwrap();
        for id in 1..=10 {
            let p = id as f64 / 10.0;
            for y in [0.0, 0.05, 0.33, p, 0.97, 1.0] {
                ok &= close(w.cost(id, y).unwrap(), (1.0 - p) + u * (p - y).max(0.0), tol);
            }
        }
    }
    check(ok, format!("knots, crossings and wind formula within 1e-12 (u=2,p=0.5,y=0.2 -> {v})"))
}

// ---------------------------------------------------------------- 2

/// Hand-written costs, independent of the library's cost tables.
fn direct_cost(task: &str, theta: f64, c: f64, u: f64, a: usize, y: f64) -> f64 {
    let ramp = |x: f64| x.clamp(0.0, 1.0);
    match task {
        "frost" if a == 0 => 10.0 * c * ramp((theta + 3.0 - y) / 3.0),
        "frost" => 10.0 * (1.0 - c) * ramp((y - theta) / 3.0),
        "heat" if a == 0 => 10.0 * c * ramp((y - theta + 3.0) / 3.0),
        "heat" => 10.0 * (1.0 - c) * ramp((theta - y) / 3.0),
        _ if a == 0 => 1.02,
        _ => {
            let p = a as f64 / 10.0;
            (1.0 - p) + u * (p - y).max(0.0)
        }
    }
}

fn bayes_oracle_equivalence() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut details = Vec::new();
    let mut all = true;
    for task in ["frost", "heat", "wind"] {
        let mut agree = 0;
        let n = 10_000;
        for _ in 0..n {
            let theta = rng.random_range(-5.0..5.0) + if task == "heat" { 30.0 } else { 0.0 };
            let c = rng.random_range(0.05..0.95);
            let u = rng.random_range(1.2..6.0);
            let m = rng.random_range(1..=60);
            let centre = theta + rng.random_range(-4.0..4.0);
            let spread = rng.random_range(0.1..5.0);
            let members: Vec<f64> = (0..m)
                .map(|_| {
                    if task == "wind" {
                        match rng.random_range(0..5) {
                            0 => 0.0,
                            1 => 1.0,
                            _ => rng.random_range(0.0..1.0),
                        }
                    } else {
                        centre + spread * rng.random_range(-1.0..1.0)
                    }
                })
                .collect();
            let cf = match task {
                "frost" => frost_cost(&FrostTaskParams { theta, cost_ratio: c }).unwrap(),
                "heat" => heat_cost(&HeatTaskParams { theta, cost_ratio: c }).unwrap(),
                _ => wind_cost(&WindTaskParams::new(u)).unwrap(),
            };
            let costs: Vec<f64> = (0..cf.n_actions())
                .map(|a| mean(members.iter().map(|&y| direct_cost(task, theta, c, u, a, y))))
                .collect();
            let mut best = 0;
            for a in 1..costs.len() {
                if costs[a] < costs[best] - 1e-12 * costs[best].abs().max(1.0) {
                    best = a;
                }
            }
            if bayes_action(&members, &cf).unwrap().0 == best {
                agree += 1;
            }
        }
        all &= agree == n;
        details.push(format!("{task} {agree}/{n}"));
    }
    check(all, details.join(", "))
}

// ---------------------------------------------------------------- 3

fn wind_run() -> SyntheticRun {
    let dgp = SyntheticDgp::wind(grid10(), 31).with_start(parse_timestamp("2021-01-01").unwrap());
    generate(&dgp, 60, &[24, 120]).unwrap()
}

/// Jittered empirical CDF at promise `p`.
fn jittered_cdf(power: &[f64], p: f64) -> f64 {
    mean(power.iter().map(|&y| ((p - y) / 0.1).clamp(0.0, 1.0)))
}

fn newsvendor_property(run: &SyntheticRun) -> Check {
    let ens = run.latent.forecast(&ForecasterSpec::new("ideal".parse().unwrap(), 50)).unwrap();
    let view = align(&ens, &run.observations, &RegionMask::all(run.latent.grid())).unwrap();
    let params = WindTransformParams::default();
    let mut all = true;
    let mut details = Vec::new();
    for u in [2.0, 4.0] {
        let cf = wind_cost(&WindTaskParams::new(u)).unwrap();
        let (mut delivering, mut agree, mut ties) = (0, 0, 0);
        for case in view.iter() {
            let power: Vec<f64> = case
                .members
                .iter()
                .map(|&v| wind_speed_to_power(v, &params).unwrap())
                .collect();
            let (action, _) = bayes_action(&power, &cf).unwrap();
            if action == TURBINE_OFF {
                continue;
            }
            let cdf: Vec<f64> = (1..=10).map(|id| jittered_cdf(&power, id as f64 / 10.0)).collect();
            if cdf.iter().any(|&f| (f - 1.0 / u).abs() < 1e-9) {
                ties += 1;
                continue;
            }
            delivering += 1;
            let rule = (1..=10).rev().find(|&id| cdf[id - 1] < 1.0 / u).unwrap_or(1);
            if rule == action {
                agree += 1;
            }
        }
        let rate = agree as f64 / delivering.max(1) as f64;
        all &= delivering > 100 && rate >= 0.99;
        details.push(format!(
            "u={u}: {agree}/{delivering} ({:.2}%), {ties} ties skipped",
            100.0 * rate
        ));
    }
    check(all, details.join("; "))
}

// ---------------------------------------------------------------- 4

struct GapStats {
    signed: Vec<f64>,
    /// 3σ Monte-Carlo bound on the gap of means from the oracle variances.
    bound: f64,
}

impl GapStats {
    fn gap_of_means(&self) -> f64 {
        mean(self.signed.iter().copied()).abs()
    }
}

fn gap_stats(records: &[DecisionRecord], latent: &LatentField, cf: &decical::CostFunction, m: usize) -> GapStats {
    let mut var_sum = 0.0;
    for r in records {
        let law = latent
            .params_for(&r.init_time, r.lead_hours, r.lat, r.lon)
            .unwrap()
            .shifted(latent.task_offset());
        var_sum += oracle_cost_variance(&law, cf, r.action).unwrap();
    }
    let n = records.len() as f64;
    GapStats {
        signed: records.iter().map(|r| r.expected_cost - r.observed_cost).collect(),
        // observed cost variance plus M-member Monte-Carlo variance
        bound: 3.0 * (var_sum * (1.0 + 1.0 / m as f64)).sqrt() / n,
    }
}

/// One-sided Welch z for |mean a| > |mean b|.
fn welch_z(a: &[f64], b: &[f64]) -> f64 {
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    (ma.abs() - mb.abs()) / (va / a.len() as f64 + vb / b.len() as f64).sqrt()
}

fn ideal_decision_calibration(run: &SyntheticRun) -> Check {
    let task = Task::Frost(FrostTaskParams { theta: 0.0, cost_ratio: 0.5 });
    let cf = task.cost_function().unwrap();
    let ideal = gap_stats(&records_for(run, "ideal", 50, &task), &run.latent, &cf, 50);
    let z_crit = Normal::standard().inverse_cdf(0.99);
    let mut ok = ideal.signed.len() == 10_000 && ideal.gap_of_means() < ideal.bound;
    let mut detail = format!(
        "N={} ideal |mean(ĉ−c)|={:.4} < 3σ={:.4}",
        ideal.signed.len(),
        ideal.gap_of_means(),
        ideal.bound
    );
    for f in ["biased:2", "dispersed:0.5"] {
        let s = gap_stats(&records_for(run, f, 50, &task), &run.latent, &cf, 50);
        let z = welch_z(&s.signed, &ideal.signed);
        ok &= z > z_crit;
        detail += &format!("; {f} {:.4} (z={z:.1} > {z_crit:.2})", s.gap_of_means());
    }
    check(ok, detail)
}

// ---------------------------------------------------------------- 5

fn constant_cost_action(run: &SyntheticRun) -> Check {
    let mut off = 0;
    let mut ok = true;
    for u in [2.0, 4.0] {
        let task = Task::Wind { task: WindTaskParams::new(u), transform: WindTransformParams::default() };
        for f in ["ideal", "dispersed:0.5", "biased:2"] {
            for r in records_for(run, f, 50, &task).iter().filter(|r| r.action == TURBINE_OFF) {
                off += 1;
                ok &= r.cost_gap == 0.0;
            }
        }
    }
    check(ok && off > 0, format!("{off} turbine-off records, all with cost_gap == 0"))
}

// ---------------------------------------------------------------- 6

fn crps_oracle() -> Check {
    let (mu, sigma, m) = (1.5, 2.0, 10_000);
    let n = Normal::new(mu, sigma).unwrap();
    let phi0 = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    let exact = sigma * (2.0 * phi0 - 1.0 / std::f64::consts::PI.sqrt());
    // A single random ensemble carries ~1% sampling noise at this M, so check
    // the quantile ensemble and the mean over independent random ensembles.
    let quantiles: Vec<f64> = (0..m).map(|i| n.inverse_cdf((i as f64 + 0.5) / m as f64)).collect();
    let fair_q = crps_ensemble(&quantiles, mu, CrpsEstimator::Fair).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let fair_r = mean((0..50).map(|_| {
        let members: Vec<f64> = (0..m).map(|_| n.inverse_cdf(rng.random_range(1e-12..1.0))).collect();
        crps_ensemble(&members, mu, CrpsEstimator::Fair).unwrap()
    }));
    let (rel_q, rel_r) = ((fair_q / exact - 1.0).abs(), (fair_r / exact - 1.0).abs());
    let nrg = crps_ensemble(&[0.0, 1.0], 0.5, CrpsEstimator::Nrg).unwrap();
    let fair2 = crps_ensemble(&[0.0, 1.0], 0.5, CrpsEstimator::Fair).unwrap();
    check(
        rel_q < 0.01 && rel_r < 0.01 && nrg == 0.25 && fair2 == 0.0,
        format!(
            "exact {exact:.5}: quantile members {fair_q:.5} ({:.2}%), 50 random ensembles {fair_r:.5} ({:.2}%); {{0,1}}@0.5 nrg={nrg} fair={fair2}",
            100.0 * rel_q,
            100.0 * rel_r
        ),
    )
}

// ---------------------------------------------------------------- 7

fn pit_ssr_direction(run: &SyntheticRun) -> Check {
    let cfg = DiagnosticsConfig { pit_bins: 20, seed: 7, ..Default::default() };
    let diag = |f: &str| {
        let ens = run.latent.forecast(&ForecasterSpec::new(f.parse().unwrap(), 50)).unwrap();
        let view = align(&ens, &run.observations, &RegionMask::all(run.latent.grid())).unwrap();
        summarize(&view, &cfg).unwrap().leads.remove(0)
    };
    let ideal = diag("ideal");
    let p = ideal.pit.uniformity_p_value();
    let mut ok = p > 0.01 && (0.95..=1.05).contains(&ideal.ssr);

    let disp = diag("dispersed:0.5");
    let counts = disp.pit.counts();
    let total = disp.pit.total() as f64;
    let ends = (counts[0] + counts[counts.len() - 1]) as f64;
    let q = 2.0 / counts.len() as f64;
    let z = (ends - total * q) / (total * q * (1.0 - q)).sqrt();
    let z_crit = Normal::standard().inverse_cdf(0.99);
    ok &= (0.45..=0.55).contains(&disp.ssr) && z > z_crit;
    check(
        ok,
        format!(
            "ideal SSR={:.3} χ² p={p:.3}; dispersed SSR={:.3}, end bins {ends}/{total} (z={z:.1})",
            ideal.ssr, disp.ssr
        ),
    )
}

// ---------------------------------------------------------------- 8

fn task_dependence() -> Check {
    let run = temperature_run(8, 365, &[24]);
    let frost = Task::Frost(FrostTaskParams { theta: 0.0, cost_ratio: 0.5 });
    let heat = Task::Heat(HeatTaskParams { theta: 20.0, cost_ratio: 0.5 });
    let degradation = |task: &Task| {
        let gap = |f| mean(records_for(&run, f, 50, task).iter().map(|r| r.cost_gap));
        let (ideal, tail) = (gap("ideal"), gap("shifted-tail:2"));
        (tail - ideal) / ideal
    };
    let (df, dh) = (degradation(&frost), degradation(&heat));
    check(
        df > dh,
        format!(
            "cold-tail forecaster: frost gap +{:.1}% vs heat gap +{:.1}%",
            100.0 * df,
            100.0 * dh
        ),
    )
}

// ---------------------------------------------------------------- 9

fn pipeline_determinism() -> Check {
    let dir = tempfile::tempdir().unwrap();
    let synth: SynthConfig = toml::from_str(
        "variable = \"temperature_2m\"\n\
         lat_start = 54.0\nlat_end = 48.0\nlon_start = 0.0\nlon_end = 6.0\nresolution_deg = 1.5\n\
         n_days = 20\nlead_hours = [24, 120]\nmembers = 20\n\
         forecasters = [\"dispersed:0.7\"]\nseed = 9\n",
    )
    .unwrap();
    synth_to_dir(&synth, &dir.path().join("data")).unwrap();
    let config = |threads: usize, out: &str| {
        let mut c = RunConfig::from_toml_str(
            "ensemble = \"data/ensemble_dispersed_0_7.csv\"\n\
             observations = \"data/observations.csv\"\n\
             task = \"frost\"\ntheta = [-1.0, 1.0]\ncost_ratio = [0.2, 0.6]\n\
             write_records = true\nseed = 4\n",
            dir.path(),
        )
        .unwrap();
        c.threads = threads;
        c.out = out.into();
        c
    };
    run_evaluate(&config(1, "t1")).unwrap();
    run_evaluate(&config(4, "t4")).unwrap();
    let names = |p: &Path| {
        let mut v: Vec<_> = fs::read_dir(p).unwrap().map(|e| e.unwrap().file_name()).collect();
        v.sort();
        v
    };
    let (a, b) = (dir.path().join("t1"), dir.path().join("t4"));
    let files = names(&a);
    let mut ok = files == names(&b);
    let mut payload = 0;
    for f in &files {
        let (x, y) = (fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap());
        if f == "metadata.json" {
            let strip = |bytes: &[u8]| {
                let mut v: serde_json::Value = serde_json::from_slice(bytes).unwrap();
                v.as_object_mut().unwrap().remove("generated_at");
                v
            };
            ok &= strip(&x) == strip(&y);
        } else {
            payload += 1;
            ok &= x == y;
        }
    }
    check(ok, format!("{payload} payload files byte-identical with 1 and 4 threads"))
}

// ---------------------------------------------------------------- 10

fn transform_chain() -> Check {
    let p = WindTransformParams::default();
    let tol = 1e-12;
    let hub = wind_speed_to_hub(10.0, &p).unwrap();
    let at8 = hub_speed_to_power(8.0, &p).unwrap();
    let ok = close(hub, 10.0 * 12f64.powf(0.1), tol)
        && hub_speed_to_power(2.999, &p).unwrap() == 0.0
        && hub_speed_to_power(3.0, &p).unwrap() == 0.0
        && close(hub_speed_to_power(13.0, &p).unwrap(), 1.0, tol)
        && hub_speed_to_power(20.0, &p).unwrap() == 1.0
        && hub_speed_to_power(23.0, &p).unwrap() == 0.0
        && hub_speed_to_power(30.0, &p).unwrap() == 0.0
        && close(at8, 485.0 / 2170.0, tol)
        && close(wind_speed_to_power(8.0 / 12f64.powf(0.1), &p).unwrap(), 485.0 / 2170.0, tol);
    check(ok, format!("hub(10)={hub:.6}, power(8)={at8:.12} = 485/2170"))
}

fn main() -> ExitCode {
    let temperature = temperature_run(4, 100, &[24]);
    let wind = wind_run();
    let criteria: Vec<Criterion> = vec![
        ("cost-function exactness", Box::new(cost_function_exactness)),
        ("Bayes rule vs brute-force argmin", Box::new(bayes_oracle_equivalence)),
        ("newsvendor quantile rule", Box::new(|| newsvendor_property(&wind))),
        ("ideal-forecaster decision calibration", Box::new(|| ideal_decision_calibration(&temperature))),
        ("constant-cost action has zero gap", Box::new(|| constant_cost_action(&wind))),
        ("CRPS oracle", Box::new(crps_oracle)),
        ("PIT/SSR direction", Box::new(|| pit_ssr_direction(&temperature))),
        ("task dependence", Box::new(task_dependence)),
        ("pipeline determinism", Box::new(pipeline_determinism)),
        ("transform chain", Box::new(transform_chain)),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let c = f();
        if !c.pass {
            failed += 1;
        }
        println!(
            "[{}] {:>2}. {name}: {} ({:.2}s)",
            if c.pass { "PASS" } else { "FAIL" },
            i + 1,
            c.detail,
            t.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {}/{} passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
