//! The batch pipelines behind each subcommand. Every command reads one
//! config, writes its artifacts under the output directory, and reports
//! whether the run is certified (the sufficient conditions hold) or merely
//! completed.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::json;

use releg_core::engine::{measured_inputs, relegate, Hamiltonian};
use releg_core::estimates::{
    check_conditions, decay_constants, generating_bounds, local_stability_time,
    nonresonant_certificate, remainder_bound, EstimateInputs,
};
use releg_core::norms::weighted_norm;
use releg_core::resonance::{alpha_r, diophantine_check, AlphaReport};
use releg_core::textio::{load_series, save_series};
use releg_core::verify::{
    drift_distances, evaluate_real, integrate_orbit, sample_points, FlowSpec, Observables,
    RealDomain,
};

use crate::config::RunConfig;

/// Lattice scan ceiling for the small-divisor surveys.
const SCAN_BUDGET: u64 = 50_000_000;

/// How a completed command relates to the certified conditions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    /// Artifacts written and the sufficient conditions hold.
    Certified,
    /// Artifacts written, but the run is outside the certified regime.
    Uncertified,
}

pub fn exit_code(outcome: Outcome) -> u8 {
    match outcome {
        Outcome::Certified => 0,
        Outcome::Uncertified => 2,
    }
}

fn timestamp() -> String {
    match SystemTime::now().duration_since(UNIX_EPOCH) {
        Ok(d) => d.as_secs().to_string(),
        Err(_) => "0".into(),
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).context("serialising JSON artifact")?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn prepare_out(out: &Path) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))
}

/// Everything the commands derive from a parsed config.
struct Problem {
    ham: Hamiltonian,
    module: releg_core::resonance::ResonanceModule,
    domain: releg_core::norms::DomainParams,
    params: releg_core::engine::EngineParams,
    alpha: AlphaReport,
}

fn setup(cfg: &RunConfig) -> Result<Problem> {
    let ham = cfg.hamiltonian()?;
    let module = cfg.module()?;
    let domain = cfg.domain_params()?;
    let params = cfg.engine_params();
    let alpha = alpha_r(&ham.freq, &module, params.k_split * params.order, SCAN_BUDGET)?;
    Ok(Problem {
        ham,
        module,
        domain,
        params,
        alpha,
    })
}

fn estimate_inputs(p: &Problem) -> Result<EstimateInputs> {
    Ok(measured_inputs(&p.ham, &p.params, &p.domain, p.alpha.value)?)
}

#[derive(Serialize, Deserialize)]
pub struct ManifestFiles {
    pub z0: String,
    pub z: Vec<String>,
    pub x: Vec<String>,
}

/// Index of a relegation run: where the series files live, whether the run
/// was certified, and the engine diagnostics.
#[derive(Serialize, Deserialize)]
pub struct Manifest {
    pub tool_version: String,
    pub timestamp: String,
    pub config: RunConfig,
    pub certified: bool,
    pub files: ManifestFiles,
    pub diagnostics: serde_json::Value,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("cannot read manifest {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("invalid manifest {}", path.display()))
    }
}

pub fn cmd_relegate(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    prepare_out(out)?;
    let p = setup(cfg)?;
    let manifest_path = out.join(&cfg.output.manifest);

    let z0_name = "Z_0.txt".to_string();
    let mut z0 = p.ham.h0_series();
    let f0_scaled = p.ham.f0.scale_re(&p.ham.mu);
    z0.add_assign(&f0_scaled)?;

    if p.ham.h1.is_zero() || p.ham.epsilon == 0.0 {
        save_series(&z0, out.join(&z0_name))?;
        let manifest = Manifest {
            tool_version: env!("CARGO_PKG_VERSION").into(),
            timestamp: timestamp(),
            config: cfg.clone(),
            certified: true,
            files: ManifestFiles {
                z0: z0_name,
                z: Vec::new(),
                x: Vec::new(),
            },
            diagnostics: json!({
                "note": "perturbation is empty; normal form is the unperturbed part",
                "alpha": p.alpha,
            }),
        };
        write_json(&manifest_path, &manifest)?;
        return Ok(Outcome::Certified);
    }

    let nf = relegate(&p.ham, &p.params)?;
    let inputs = estimate_inputs(&p)?;
    let conditions = check_conditions(&inputs)?;
    let bounds = generating_bounds(&inputs)?;

    save_series(&z0, out.join(&z0_name))?;
    let mut z_names = Vec::new();
    let mut x_names = Vec::new();
    for (i, series) in nf.z_terms.iter().enumerate() {
        let name = format!("Z_{}.txt", i + 1);
        save_series(series, out.join(&name))?;
        z_names.push(name);
    }
    for (i, series) in nf.x_full.iter().enumerate() {
        let name = format!("X_{}.txt", i + 1);
        save_series(series, out.join(&name))?;
        x_names.push(name);
    }

    let inner = p.domain.restrict(p.params.d)?;
    let psi_norms: Vec<f64> = nf.psi.iter().map(|s| weighted_norm(s, &inner)).collect();
    let x_norms: Vec<f64> = nf.x_full.iter().map(|s| weighted_norm(s, &inner)).collect();

    let certified = conditions.all_ok();
    let manifest = Manifest {
        tool_version: env!("CARGO_PKG_VERSION").into(),
        timestamp: timestamp(),
        config: cfg.clone(),
        certified,
        files: ManifestFiles {
            z0: z0_name,
            z: z_names,
            x: x_names,
        },
        diagnostics: json!({
            "alpha": p.alpha,
            "inputs": inputs,
            "conditions": conditions,
            "bounds": bounds,
            "chain_residuals": nf.chain_residuals,
            "psi_norms_restricted": psi_norms,
            "x_norms_restricted": x_norms,
            "psi_tags": nf.psi_tags,
            "x_tags": nf.x_tags,
            "tags_within_caps": nf.tags_within_caps,
            "term_count": nf.term_count,
            "warnings": nf.warnings,
        }),
    };
    write_json(&manifest_path, &manifest)?;
    Ok(if certified {
        Outcome::Certified
    } else {
        Outcome::Uncertified
    })
}

/// Per-order comparison of measured norms against the a-priori bounds.
#[derive(Serialize)]
struct DominationReport {
    psi_norms: Vec<f64>,
    x_norms: Vec<f64>,
    psi_bounds: Vec<f64>,
    x_bounds: Vec<f64>,
    dominated: bool,
}

#[derive(Serialize)]
struct EngineSummary {
    chain_residuals: Vec<f64>,
    tags_within_caps: bool,
    term_count: usize,
    warnings: Vec<String>,
    domination: DominationReport,
}

#[derive(Serialize)]
struct Checks {
    conditions_ok: bool,
    bounds_valid: bool,
    remainder_certified: bool,
    domination: Option<bool>,
    exponential_valid: Option<bool>,
}

#[derive(Serialize)]
struct Certificate<'a> {
    tool_version: &'static str,
    timestamp: String,
    mode: &'static str,
    config: &'a RunConfig,
    alpha: &'a AlphaReport,
    diophantine: Option<releg_core::resonance::DiophantineReport>,
    inputs: &'a EstimateInputs,
    decay: releg_core::estimates::DecayConstants,
    conditions: releg_core::estimates::ConditionReport,
    bounds: releg_core::estimates::GeneratingBounds,
    remainder: releg_core::estimates::RemainderReport,
    stability: releg_core::estimates::LocalStability,
    exponential: Option<releg_core::estimates::StabilityCertificate>,
    engine: Option<EngineSummary>,
    checks: Checks,
}

pub fn cmd_estimate(cfg: &RunConfig, out: &Path, a_posteriori: bool) -> Result<Outcome> {
    prepare_out(out)?;
    let p = setup(cfg)?;
    let inputs = estimate_inputs(&p)?;

    let decay = decay_constants(&inputs);
    let conditions = check_conditions(&inputs)?;
    let bounds = generating_bounds(&inputs)?;
    let remainder = remainder_bound(&inputs)?;
    let stability = local_stability_time(&inputs)?;

    let exponential = match cfg.algorithm.certificate.as_deref() {
        Some("nonresonant") => {
            if !p.module.is_trivial() {
                bail!(
                    "a nonresonant certificate was requested, but the frequency \
                     vector carries a rank-{} resonance module",
                    p.module.rank()
                );
            }
            Some(nonresonant_certificate(
                &inputs,
                &p.module,
                cfg.problem.gamma,
                cfg.problem.tau,
            )?)
        }
        _ => None,
    };

    let diophantine = if cfg.problem.gamma > 0.0 {
        Some(diophantine_check(
            &p.ham.freq,
            &p.module,
            p.params.k_split * p.params.order,
            SCAN_BUDGET,
        )?)
    } else {
        None
    };

    let engine = if a_posteriori {
        let nf = relegate(&p.ham, &p.params)?;
        let inner = p.domain.restrict(p.params.d)?;
        let psi_norms: Vec<f64> = nf.psi.iter().map(|s| weighted_norm(s, &inner)).collect();
        let x_norms: Vec<f64> = nf.x_full.iter().map(|s| weighted_norm(s, &inner)).collect();
        let dominated = bounds.valid
            && psi_norms
                .iter()
                .zip(&bounds.psi_bounds)
                .all(|(m, b)| m <= b)
            && x_norms.iter().zip(&bounds.x_bounds).all(|(m, b)| m <= b);
        Some(EngineSummary {
            chain_residuals: nf.chain_residuals.clone(),
            tags_within_caps: nf.tags_within_caps,
            term_count: nf.term_count,
            warnings: nf.warnings.clone(),
            domination: DominationReport {
                psi_norms,
                x_norms,
                psi_bounds: bounds.psi_bounds.clone(),
                x_bounds: bounds.x_bounds.clone(),
                dominated,
            },
        })
    } else {
        None
    };

    let checks = Checks {
        conditions_ok: conditions.all_ok(),
        bounds_valid: bounds.valid,
        remainder_certified: remainder.certified,
        domination: engine.as_ref().map(|e| e.domination.dominated),
        exponential_valid: exponential.as_ref().map(|c| c.valid),
    };
    let certified = checks.conditions_ok
        && checks.bounds_valid
        && checks.domination.unwrap_or(true)
        && checks.exponential_valid.unwrap_or(true);

    let certificate = Certificate {
        tool_version: env!("CARGO_PKG_VERSION"),
        timestamp: timestamp(),
        mode: if a_posteriori { "a-posteriori" } else { "a-priori" },
        config: cfg,
        alpha: &p.alpha,
        diophantine,
        inputs: &inputs,
        decay,
        conditions,
        bounds,
        remainder,
        stability,
        exponential,
        engine,
        checks,
    };
    write_json(&out.join(&cfg.output.certificate), &certificate)?;
    Ok(if certified {
        Outcome::Certified
    } else {
        Outcome::Uncertified
    })
}

/// Residual-decay and rate-bound verification against a completed run.
pub struct VerifyOptions {
    pub manifest: PathBuf,
    pub seed: u64,
    pub dt_halving: bool,
}

#[derive(Serialize)]
struct VerifySummary {
    tool_version: &'static str,
    timestamp: String,
    certified_inputs: bool,
    /// Max pointwise back-transform residual per order `1..=r`.
    residual_by_order: Vec<f64>,
    residual_monotone: bool,
    remainder_bound: f64,
    residual_within_bound: bool,
    orbits: usize,
    orbit_exits: usize,
    rate_bound: f64,
    deformation_allowance: f64,
    max_observable_excursion: f64,
    rate_bound_pass: bool,
    max_energy_error: f64,
    energy_error_small: bool,
    dt_halving_ratio: Option<f64>,
    passed: bool,
}

pub fn cmd_verify(cfg: &RunConfig, out: &Path, opts: &VerifyOptions) -> Result<Outcome> {
    prepare_out(out)?;
    let manifest = Manifest::load(&opts.manifest)?;
    let p = setup(cfg)?;
    let inputs = estimate_inputs(&p)?;
    let conditions = check_conditions(&inputs)?;
    let remainder = remainder_bound(&inputs)?;
    let stability = local_stability_time(&inputs)?;

    let manifest_dir = opts
        .manifest
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    let mut gens = Vec::with_capacity(manifest.files.x.len());
    for name in &manifest.files.x {
        gens.push(load_series(manifest_dir.join(name))?);
    }

    let dims = p.ham.dims;
    let points = sample_points(
        &p.domain,
        cfg.verify.fraction,
        dims,
        cfg.verify.points,
        opts.seed,
    );

    // Back-transform residual, order by order. The residual is assembled in
    // coefficient space first; evaluating two near-equal sums separately
    // would drown the signal in rounding noise.
    let mut residual_by_order = Vec::new();
    for order in 1..=p.params.order {
        let mut params = p.params.clone();
        params.order = order;
        let nf = relegate(&p.ham, &params)?;
        let residual = nf.transform_residual(&p.ham, params.tail_buffer)?;
        let mut worst = 0.0_f64;
        for pt in &points {
            worst = worst.max(evaluate_real(&residual, pt)?.abs());
        }
        residual_by_order.push(worst);
    }
    let residual_monotone = residual_by_order.windows(2).all(|w| w[1] <= w[0]);
    let residual_within_bound = *residual_by_order.last().expect("order >= 1")
        <= remainder.bound + 1e-12 * (1.0 + remainder.bound);

    // Orbit drift against the certified rate. The observable is the
    // transformed slow form carried by the generator files.
    let lambda = cfg.lambda();
    let transform = releg_core::engine::LieTransform::new(gens);
    let obs = Observables::transformed(&lambda, &transform, p.params.order, dims)?;
    // The certified window caps the horizon only when the certificate is
    // actually in force.
    let t_span = if conditions.all_ok() && stability.t_star.is_finite() {
        cfg.verify.t_span.min(stability.t_star)
    } else {
        cfg.verify.t_span
    };
    let allowance = p.domain.rho / 8.0;
    let mut spec = FlowSpec::new(t_span, cfg.verify.dt);
    spec.domain = Some(RealDomain::from_params(&p.domain, 1.0));

    let mut max_excursion = 0.0_f64;
    let mut max_energy = 0.0_f64;
    let mut exits = 0usize;
    let mut rate_ok = true;
    let mut first_record = None;
    let total = p.ham.total();
    for pt in &points {
        let rec = integrate_orbit(&total, Some(&obs), pt, &spec)?;
        if rec.exit_time.is_some() {
            exits += 1;
        }
        max_energy = max_energy.max(rec.energy_error);
        let phi0 = rec.phi_path.first().copied().unwrap_or(0.0);
        for (t, phi) in rec.times.iter().zip(&rec.phi_path) {
            let excursion = (phi - phi0).abs();
            max_excursion = max_excursion.max(excursion);
            if excursion > stability.drift_rate * t + allowance {
                rate_ok = false;
            }
        }
        if first_record.is_none() {
            first_record = Some(rec);
        }
    }

    // CSV of the first orbit: time, actions, both observables, fast drift.
    if let Some(rec) = &first_record {
        let dists = drift_distances(rec, &p.module)?;
        let mut csv = fs::File::create(out.join(&cfg.output.drift_csv))?;
        let p_heads: Vec<String> = (1..=dims.n1).map(|j| format!("p{j}")).collect();
        writeln!(csv, "t,{},phi0,phi,dist", p_heads.join(","))?;
        for (i, t) in rec.times.iter().enumerate() {
            let p_cols: Vec<String> = rec.p_path[i].iter().map(|v| format!("{v}")).collect();
            writeln!(
                csv,
                "{},{},{},{},{}",
                t,
                p_cols.join(","),
                rec.phi0_path[i],
                rec.phi_path[i],
                dists[i]
            )?;
        }
    }

    let dt_halving_ratio = if opts.dt_halving {
        let pt = points.first().expect("points >= 1");
        let coarse = integrate_orbit(&total, None, pt, &spec)?;
        let mut fine_spec = spec;
        fine_spec.dt = cfg.verify.dt / 2.0;
        let fine = integrate_orbit(&total, None, pt, &fine_spec)?;
        Some(coarse.energy_error / fine.energy_error.max(f64::MIN_POSITIVE))
    } else {
        None
    };

    // The energy error must sit far below the drift signal being bounded.
    let drift_scale = stability.drift_rate * t_span + allowance;
    let energy_error_small = max_energy <= drift_scale / 100.0;

    let passed = conditions.all_ok()
        && residual_monotone
        && residual_within_bound
        && rate_ok
        && energy_error_small;
    let summary = VerifySummary {
        tool_version: env!("CARGO_PKG_VERSION"),
        timestamp: timestamp(),
        certified_inputs: conditions.all_ok(),
        residual_by_order,
        residual_monotone,
        remainder_bound: remainder.bound,
        residual_within_bound,
        orbits: points.len(),
        orbit_exits: exits,
        rate_bound: stability.drift_rate,
        deformation_allowance: allowance,
        max_observable_excursion: max_excursion,
        rate_bound_pass: rate_ok,
        max_energy_error: max_energy,
        energy_error_small,
        dt_halving_ratio,
        passed,
    };
    write_json(&out.join(&cfg.output.summary), &summary)?;
    Ok(if passed {
        Outcome::Certified
    } else {
        Outcome::Uncertified
    })
}

pub fn cmd_split(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    prepare_out(out)?;
    let p = setup(cfg)?;
    let inputs = estimate_inputs(&p)?;
    let decay = decay_constants(&inputs);
    let perturbation = p.ham.h1.scale_re(&p.ham.epsilon);
    let shells = perturbation.fourier_split(p.params.k_split)?;

    let mut names = Vec::new();
    let mut norms = Vec::new();
    let mut caps = Vec::new();
    for (i, shell) in shells.iter().enumerate() {
        let name = format!("h_{}.txt", i + 1);
        save_series(shell, out.join(&name))?;
        norms.push(weighted_norm(shell, &p.domain));
        caps.push(decay.zeta.powi(i as i32) * decay.cap_f);
        names.push(name);
    }
    let within = norms.iter().zip(&caps).all(|(n, c)| *n <= c * (1.0 + 1e-12));
    let report = json!({
        "tool_version": env!("CARGO_PKG_VERSION"),
        "timestamp": timestamp(),
        "k_split": p.params.k_split,
        "shells": names,
        "norms": norms,
        "decay_caps": caps,
        "zeta": decay.zeta,
        "cap_f": decay.cap_f,
        "within_decay_caps": within,
    });
    write_json(&out.join(&cfg.output.summary), &report)?;
    Ok(if within {
        Outcome::Certified
    } else {
        Outcome::Uncertified
    })
}

pub fn cmd_norm(cfg: &RunConfig) -> Result<Outcome> {
    let p = setup(cfg)?;
    let doubled = releg_core::norms::DomainParams::new(
        p.domain.rho,
        2.0 * p.domain.sigma,
        p.domain.r_cart,
    )?;
    let report = json!({
        "xi": p.domain.xi(),
        "alpha": p.alpha,
        "norms": {
            "h0": weighted_norm(&p.ham.h0_series(), &p.domain),
            "f0": weighted_norm(&p.ham.f0, &p.domain),
            "h1": weighted_norm(&p.ham.h1, &p.domain),
            "h1_doubled_sigma": weighted_norm(&p.ham.h1, &doubled),
            "total": weighted_norm(&p.ham.total(), &p.domain),
        },
    });
    println!(
        "{}",
        serde_json::to_string_pretty(&report).context("serialising norm report")?
    );
    Ok(Outcome::Certified)
}

/// Shared config loader so every subcommand reports missing files the same
/// way.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    if !path.exists() {
        return Err(anyhow!("config file {} does not exist", path.display()));
    }
    RunConfig::load(path)
}
