//! Mode dispatch and artifact layout.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use lpl_core::branching::{
    check_lp_criterion, check_spine_identity, check_ui_criterion, hat_a, sample_martingale, sample_spines,
    simulate_population, validate_branching, verify_many_to_one, BranchingChars, DEFAULT_MAX_PARTICLES,
};
use lpl_core::exponents::{critical_moment, kappa_prime, kappa_real, laplace_exponent_x, LevyTriplet};
use lpl_core::io::fmt_f64;
use lpl_core::measures::validate_standing_assumptions;
use lpl_core::mc::{median, Summary};
use lpl_core::perpetuity::{
    check_as_finiteness, check_moment_finiteness, hill_tail_index, moment_from_batch, sample_perpetuity,
    IterationRule, LevyPairs,
};
use lpl_core::rng::{derive_key, SeedRecord};
use lpl_core::sampler::{PathSampler, SamplerConfig};

use crate::config::{IterSpec, Mode, Model, Params, RunConfig};
use crate::error::CliError;
use crate::report::{criterion, num, to_bytes, SCHEMA_VERSION};

/// Report plus side files, before anything touches the disk.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub report: Value,
    /// `(relative path, contents)`, in a fixed order.
    pub files: Vec<(String, Vec<u8>)>,
}

impl RunOutput {
    pub fn report_bytes(&self) -> Vec<u8> {
        to_bytes(&self.report)
    }
}

/// Fills in a missing seed with a fresh random draw so the echoed config
/// reproduces the run.
pub fn resolve_seed(config: &mut RunConfig) -> u64 {
    *config.seed.get_or_insert_with(rand::random::<u64>)
}

fn need<T: Copy>(v: Option<T>, field: &str) -> Result<T, CliError> {
    v.ok_or_else(|| CliError::config(format!("params.{field}"), "required for this mode"))
}

fn levy(config: &RunConfig) -> Result<LevyTriplet, CliError> {
    match &config.model {
        Model::Levy(spec) => spec.build(),
        Model::Branching(_) => Err(CliError::config(
            "model.type",
            format!("mode {} needs a levy model", config.mode.as_str()),
        )),
    }
}

fn branching(config: &RunConfig) -> Result<BranchingChars, CliError> {
    match &config.model {
        Model::Branching(spec) => spec.build(),
        Model::Levy(_) => Err(CliError::config(
            "model.type",
            format!("mode {} needs a branching model", config.mode.as_str()),
        )),
    }
}

fn positive(v: f64, field: &str) -> Result<f64, CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(CliError::config(format!("params.{field}"), format!("must be finite and > 0, got {v}")))
    }
}

fn sampler_config(p: &Params) -> SamplerConfig {
    let d = SamplerConfig::default();
    SamplerConfig {
        eps: p.eps.unwrap_or(d.eps),
        eps_z: p.eps_z.or(p.eps).unwrap_or(d.eps_z),
        ..d
    }
}

fn iteration_rule(p: &Params) -> IterationRule {
    match p.n_iter.unwrap_or(IterSpec::Adaptive) {
        IterSpec::Fixed(n) => IterationRule::Fixed(n),
        IterSpec::Adaptive => IterationRule::Adaptive {
            n_max: p.n_max.unwrap_or(1000),
            tol: p.tol.unwrap_or(1e-9),
        },
    }
}

fn rule_json(rule: IterationRule) -> Value {
    match rule {
        IterationRule::Fixed(n) => json!({"kind": "fixed", "n": n}),
        IterationRule::Adaptive { n_max, tol } => json!({"kind": "adaptive", "n_max": n_max, "tol": num(tol)}),
    }
}

/// Runs `config` (whose seed must be set) entirely in memory.
pub fn run(config: &RunConfig) -> Result<RunOutput, CliError> {
    let seed = config
        .seed
        .ok_or_else(|| CliError::config("seed", "must be resolved before running"))?;
    let mut files = Vec::new();
    let results = match config.mode {
        Mode::Validate => validate(config)?,
        Mode::CriteriaPerpetuity => criteria_perpetuity(config)?,
        Mode::CriteriaBranching => criteria_branching(config)?,
        Mode::SimulatePerpetuity => simulate_perpetuity(config, seed, &mut files)?,
        Mode::EstimateMoment => estimate_moment(config, seed, &mut files)?,
        Mode::SimulateBranching => simulate_branching(config, seed, &mut files)?,
        Mode::VerifyMartingale => verify_martingale(config, seed, &mut files)?,
        Mode::Spine => spine(config, seed, &mut files)?,
    };
    let mut echo = serde_json::to_value(config).expect("config serialises");
    if let Value::Object(map) = &mut echo {
        // Where the files go is not part of what was computed.
        map.remove("output_dir");
    }
    let mut artifacts: Vec<String> = vec!["report.json".into(), "timing.json".into()];
    artifacts.extend(files.iter().map(|(name, _)| name.clone()));
    let report = json!({
        "schema_version": SCHEMA_VERSION,
        "mode": config.mode.as_str(),
        "config": echo,
        "results": results,
        "artifacts": artifacts,
    });
    Ok(RunOutput { report, files })
}

/// Writes `report.json`, `timing.json` and the side files under `dir`.
pub fn emit_report(output: &RunOutput, dir: &Path, wall_clock_seconds: f64) -> Result<Vec<PathBuf>, CliError> {
    let io = |p: &Path, e: std::io::Error| CliError::Io(format!("{}: {e}", p.display()));
    fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let mut written = Vec::new();
    let mut write = |name: &str, bytes: &[u8]| -> Result<(), CliError> {
        let path = dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| io(parent, e))?;
        }
        fs::write(&path, bytes).map_err(|e| io(&path, e))?;
        written.push(path);
        Ok(())
    };
    write("report.json", &output.report_bytes())?;
    write("timing.json", &to_bytes(&json!({"wall_clock_seconds": num(wall_clock_seconds)})))?;
    for (name, bytes) in &output.files {
        write(name, bytes)?;
    }
    Ok(written)
}

fn validate(config: &RunConfig) -> Result<Value, CliError> {
    let report = match &config.model {
        Model::Levy(spec) => match &spec.coupled {
            Some(_) => {
                let t = spec.build()?;
                validate_standing_assumptions(t.lambda1(), t.lambda2())
            }
            None => {
                let l1 = spec.lambda1.build("model.lambda1")?;
                let l2 = spec.lambda2.build("model.lambda2")?;
                validate_standing_assumptions(&l1, &l2)
            }
        },
        Model::Branching(spec) => validate_branching(&spec.build()?),
    };
    Ok(json!({"validation": criterion(&report)}))
}

fn criteria_perpetuity(config: &RunConfig) -> Result<Value, CliError> {
    let t = levy(config)?;
    let ps = config.params.p.clone().unwrap_or_default();
    let mut moments = Vec::new();
    for (i, &p) in ps.iter().enumerate() {
        let r = check_moment_finiteness(&t, p).map_err(|e| CliError::from_core(&format!("params.p[{i}]"), e))?;
        let psi = laplace_exponent_x(&t, p);
        moments.push(json!({"p": num(p), "laplace_exponent": num(psi.value), "report": criterion(&r)}));
    }
    let p_max = positive(config.params.p_max.unwrap_or(20.0), "p_max")?;
    let critical = match critical_moment(&t, p_max) {
        Ok(Some(p)) => json!({"value": num(p), "note": null}),
        Ok(None) => json!({"value": null, "note": format!("ψ < 0 on all of (0, {p_max}]")}),
        Err(e) => json!({"value": null, "note": e.to_string()}),
    };
    Ok(json!({
        "as_finiteness": criterion(&check_as_finiteness(&t)),
        "moments": moments,
        "critical_moment": critical,
    }))
}

fn criteria_branching(config: &RunConfig) -> Result<Value, CliError> {
    let c = branching(config)?;
    let ps = config.params.p.clone().unwrap_or_else(|| vec![2.0]);
    let mut lp = Vec::new();
    for (i, &p) in ps.iter().enumerate() {
        let r = check_lp_criterion(&c, p).map_err(|e| CliError::from_core(&format!("params.p[{i}]"), e))?;
        lp.push(json!({"p": num(p), "report": criterion(&r)}));
    }
    Ok(json!({
        "validation": criterion(&validate_branching(&c)),
        "uniform_integrability": criterion(&check_ui_criterion(&c)),
        "lp": lp,
        "kappa_theta": num(kappa_real(&c, c.theta)),
        "kappa_prime_theta": num(kappa_prime(&c, c.theta)),
        "hat_a": num(hat_a(&c)),
    }))
}

fn simulate_perpetuity(config: &RunConfig, seed: u64, files: &mut Vec<(String, Vec<u8>)>) -> Result<Value, CliError> {
    let t = levy(config)?;
    let p = &config.params;
    let n = need(p.n_samples, "n_samples")?;
    let cfg = sampler_config(p);
    let source = LevyPairs::new(&t, &cfg).map_err(|e| CliError::from_core("params.eps", e))?;
    let rule = iteration_rule(p);
    let key = derive_key(seed, "perpetuity-samples");
    let batch = sample_perpetuity(&source, n, rule, key).map_err(|e| CliError::from_core("params", e))?;

    let mut csv = String::from("index,value,n_iterations,converged\n");
    for s in &batch.samples {
        writeln!(csv, "{},{},{},{}", s.seed.stream, fmt_f64(s.value), s.n_iterations, u8::from(s.converged)).unwrap();
    }
    files.push(("samples.csv".into(), csv.into_bytes()));

    let values = batch.values();
    let summary = Summary::from_slice(&values);
    let k = p.hill_k.unwrap_or((values.len() / 100).max(10));
    let hill = match hill_tail_index(&values, k) {
        Ok(h) => json!({"k": k, "value": num(h), "note": null}),
        Err(e) => json!({"k": k, "value": null, "note": e.to_string()}),
    };

    let n_paths = p.n_paths.unwrap_or(0);
    if n_paths > 0 {
        let horizon = positive(p.t.unwrap_or(1.0), "T")?;
        let sampler = PathSampler::new(&t, &cfg).map_err(|e| CliError::from_core("params.eps", e))?;
        let path_key = derive_key(seed, "paths");
        for i in 0..n_paths {
            let rec = SeedRecord::new(path_key, i as u64);
            let path = sampler
                .sample_path(horizon, rec, &mut rec.rng())
                .map_err(|e| CliError::from_core("params.T", e))?;
            let mut out = Vec::new();
            path.write_csv(&mut out).expect("in-memory CSV");
            files.push((format!("paths/path_{i:04}.csv"), out));
        }
    }

    Ok(json!({
        "n_samples": batch.samples.len(),
        "n_overflowed": batch.n_overflowed,
        "iteration": rule_json(rule),
        "mean": num(summary.mean),
        "std_error": num(summary.std_error()),
        "median": num(median(&values)),
        "mean_iterations": num(batch.samples.iter().map(|s| s.n_iterations as f64).sum::<f64>() / batch.samples.len().max(1) as f64),
        "hill": hill,
        "truncation": {"eps": num(cfg.eps), "eps_z": num(cfg.eps_z), "z_bias_bound": num(source.sampler().z_bias_bound())},
        "seed_key": key,
    }))
}

fn estimate_moment(config: &RunConfig, seed: u64, files: &mut Vec<(String, Vec<u8>)>) -> Result<Value, CliError> {
    let t = levy(config)?;
    let p = &config.params;
    let ps = p
        .p
        .clone()
        .filter(|v| !v.is_empty())
        .ok_or_else(|| CliError::config("params.p", "required for this mode"))?;
    let n = need(p.n_samples, "n_samples")?;
    if n < 100 {
        return Err(CliError::config("params.n_samples", format!("must be >= 100, got {n}")));
    }
    let cfg = sampler_config(p);
    let source = LevyPairs::new(&t, &cfg).map_err(|e| CliError::from_core("params.eps", e))?;
    let rule = iteration_rule(p);
    let key = derive_key(seed, "perpetuity-samples");
    let batch = sample_perpetuity(&source, n, rule, key).map_err(|e| CliError::from_core("params", e))?;
    let n_iter_label = match rule {
        IterationRule::Fixed(n) => n.to_string(),
        IterationRule::Adaptive { .. } => "adaptive".into(),
    };
    let mut csv = String::from("p,n_samples,n_iter,estimate,std_error,stable_flag\n");
    let mut rows = Vec::new();
    for (i, &q) in ps.iter().enumerate() {
        let path = format!("params.p[{i}]");
        let est = moment_from_batch(&batch, q).map_err(|e| CliError::from_core(&path, e))?;
        let verdict = check_moment_finiteness(&t, q).map_err(|e| CliError::from_core(&path, e))?;
        writeln!(
            csv,
            "{},{},{},{},{},{}",
            fmt_f64(q),
            est.n_samples,
            n_iter_label,
            fmt_f64(est.estimate),
            fmt_f64(est.std_error),
            u8::from(est.stable)
        )
        .unwrap();
        rows.push(json!({
            "p": num(q),
            "estimate": num(est.estimate),
            "std_error": num(est.std_error),
            "batch_means": est.batch_means.iter().map(|&m| num(m)).collect::<Vec<_>>(),
            "stable": est.stable,
            "mean_iterations": num(est.mean_iterations),
            "criterion": criterion(&verdict),
        }));
    }
    files.push(("moments.csv".into(), csv.into_bytes()));
    Ok(json!({
        "n_samples": batch.samples.len(),
        "n_overflowed": batch.n_overflowed,
        "iteration": rule_json(rule),
        "moments": rows,
        "truncation": {"eps": num(cfg.eps), "eps_z": num(cfg.eps_z), "z_bias_bound": num(source.sampler().z_bias_bound())},
        "seed_key": key,
    }))
}

fn simulate_branching(config: &RunConfig, seed: u64, files: &mut Vec<(String, Vec<u8>)>) -> Result<Value, CliError> {
    let c = branching(config)?;
    let p = &config.params;
    let horizon = positive(need(p.t, "T")?, "T")?;
    let cap = p.max_particles.unwrap_or(DEFAULT_MAX_PARTICLES);
    let rec = SeedRecord::new(derive_key(seed, "population"), 0);
    let tree = simulate_population(&c, horizon, cap, rec).map_err(|e| CliError::from_core("params", e))?;
    let mut csv = Vec::new();
    tree.write_csv(horizon, &mut csv).map_err(|e| CliError::Io(e.to_string()))?;
    files.push(("population.csv".into(), csv));
    let w = lpl_core::branching::biggins_w(&tree, horizon).map_err(|e| CliError::from_core("params.T", e))?;
    let many_to_one = match p.n_samples {
        Some(n) if n > 0 => {
            let z = p.z.unwrap_or(c.theta);
            let key = derive_key(seed, "many-to-one");
            let r = verify_many_to_one(&c, z, horizon, n, cap, key).map_err(|e| CliError::from_core("params.z", e))?;
            json!({
                "z": num(z),
                "estimate": num(r.estimate),
                "std_error": num(r.std_error),
                "rhs": num(r.rhs),
                "z_score": num(r.z_score),
                "n_used": r.n_used,
                "n_truncated": r.n_truncated,
                "seed_key": key,
            })
        }
        _ => Value::Null,
    };
    Ok(json!({
        "horizon": num(horizon),
        "population_size": tree.size_at(horizon).map_err(|e| CliError::from_core("params.T", e))?,
        "particles_created": tree.particles.len(),
        "truncated": tree.truncated,
        "max_particles": cap,
        "biggins_w": num(w),
        "biggins_w_is_lower_bound": tree.truncated,
        "many_to_one": many_to_one,
        "seed_key": rec.key,
    }))
}

fn observation_times(p: &Params) -> Result<Vec<f64>, CliError> {
    let mut times = match (&p.times, p.t) {
        (Some(ts), _) if !ts.is_empty() => ts.clone(),
        (_, Some(t)) => vec![t],
        _ => return Err(CliError::config("params.times", "give observation times or T")),
    };
    for (i, &t) in times.iter().enumerate() {
        if !(t.is_finite() && t >= 0.0) {
            return Err(CliError::config(format!("params.times[{i}]"), format!("must be finite and >= 0, got {t}")));
        }
    }
    times.sort_by(f64::total_cmp);
    times.dedup();
    Ok(times)
}

fn verify_martingale(config: &RunConfig, seed: u64, files: &mut Vec<(String, Vec<u8>)>) -> Result<Value, CliError> {
    let c = branching(config)?;
    let p = &config.params;
    let times = observation_times(p)?;
    let n = need(p.n_samples, "n_samples")?;
    let cap = p.max_particles.unwrap_or(DEFAULT_MAX_PARTICLES);
    let key = derive_key(seed, "martingale");
    let batch = sample_martingale(&c, &times, n, cap, key).map_err(|e| CliError::from_core("params", e))?;
    let summaries = batch.summaries();
    let medians = batch.medians();
    let mut csv = String::from("t,W_t,std_error,median,n_used\n");
    let mut rows = Vec::new();
    for ((t, s), m) in times.iter().zip(&summaries).zip(&medians) {
        writeln!(csv, "{},{},{},{},{}", fmt_f64(*t), fmt_f64(s.mean), fmt_f64(s.std_error()), fmt_f64(*m), s.n).unwrap();
        rows.push(json!({
            "t": num(*t),
            "mean": num(s.mean),
            "std_error": num(s.std_error()),
            "z_score_vs_one": num(lpl_core::mc::z_score(s.mean, 1.0, s.std_error())),
            "median": num(*m),
            "n_used": s.n,
        }));
    }
    files.push(("martingale_trace.csv".into(), csv.into_bytes()));
    Ok(json!({
        "trace": rows,
        "n_trees": n,
        "n_truncated": batch.n_truncated(),
        "max_particles": cap,
        "uniform_integrability": criterion(&check_ui_criterion(&c)),
        "seed_key": key,
    }))
}

fn spine(config: &RunConfig, seed: u64, files: &mut Vec<(String, Vec<u8>)>) -> Result<Value, CliError> {
    let c = branching(config)?;
    let p = &config.params;
    let horizon = need(p.t, "T")?;
    if !(horizon.is_finite() && horizon >= 0.0) {
        return Err(CliError::config("params.T", format!("must be finite and >= 0, got {horizon}")));
    }
    let n = need(p.n_samples, "n_samples")?;
    let cap = p.max_particles.unwrap_or(DEFAULT_MAX_PARTICLES);
    let key = derive_key(seed, "spine-identity");
    let check = check_spine_identity(&c, horizon, n, cap, key).map_err(|e| CliError::from_core("params", e))?;
    let spines = sample_spines(&c, horizon, n, derive_key(key, "spine")).map_err(|e| CliError::from_core("params.T", e))?;
    let mut csv = String::from("index,n_events,spine_end,s_end,w_star\n");
    for r in &spines {
        writeln!(
            csv,
            "{},{},{},{},{}",
            r.seed.stream,
            r.events.len(),
            fmt_f64(r.spine_end),
            fmt_f64(r.s_end),
            fmt_f64(r.w_star())
        )
        .unwrap();
    }
    files.push(("samples.csv".into(), csv.into_bytes()));
    let triplet = lpl_core::branching::spine_measures(&c).map_err(|e| CliError::from_core("model", e))?;
    Ok(json!({
        "horizon": num(horizon),
        "spine_mean_w_star": num(check.spine_mean),
        "spine_std_error": num(check.spine_std_error),
        "population_mean_w_squared": num(check.population_mean),
        "population_std_error": num(check.population_std_error),
        "z_score": num(check.z_score),
        "n_truncated": check.n_truncated,
        "hat_a": num(hat_a(&c)),
        "spine_triplet": {
            "v2": num(triplet.v2()),
            "b": num(triplet.b()),
            "joint_atoms": triplet.coupling().unwrap_or(&[]).iter()
                .map(|a| json!([num(a.x), num(a.y), num(a.mass)])).collect::<Vec<_>>(),
        },
        "max_particles": cap,
        "seed_key": key,
    }))
}
