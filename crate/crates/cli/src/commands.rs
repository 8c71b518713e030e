use std::path::PathBuf;

use hawkes_renewal::estimators::{lln_estimate, LimitEstimates};
use hawkes_renewal::rates::{
    alpha0, deviation_bounds, empirical_log_mgf, oracle_cancel, oracle_delayed, oracle_linear,
    rate_curve, theta0, DeviationBounds, LogMgfSurface, RateCurve, Theta0,
};
use hawkes_renewal::renewal::{window_length, Provenance};
use hawkes_renewal::{
    decompose, sample_windows, simulate_coupled, EventStream, Kernel, SimConfig, WindowSample,
};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::config::{Case, ExperimentConfig, Member, Source};
use crate::output::{self, EventsHeader, Manifest, OutDir, Schemas, WindowsMeta};
use crate::{CliError, Verdict};

pub(crate) fn pool(cfg: &ExperimentConfig) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.parallelism)
        .build()
        .map_err(|e| CliError::Config(format!("parallelism {}: {e}", cfg.parallelism)))
}

fn member_kernel(member: Member, kernel: &Kernel, lambda: f64) -> Result<Kernel, CliError> {
    Ok(match member {
        Member::H => kernel.clone(),
        Member::HPlus => kernel.positive_part(),
        Member::G => Kernel::canceling(lambda, kernel.support())?,
    })
}

fn member_name(member: Member) -> &'static str {
    match member {
        Member::H => "h",
        Member::HPlus => "hplus",
        Member::G => "g",
    }
}

fn manifest(
    cfg: &ExperimentConfig,
    command: &'static str,
    out: &OutDir,
) -> Result<Manifest, CliError> {
    let kernel = cfg.kernel()?;
    Ok(Manifest {
        toolkit: "hawkes-renewal",
        version: env!("CARGO_PKG_VERSION"),
        command,
        lambda: cfg.lambda()?,
        kernel: cfg.kernel.clone(),
        kernel_hash: output::kernel_hash(&kernel),
        seed: cfg.seed,
        replicas: (0..cfg.replicas).collect(),
        coupling_group: Vec::new(),
        event_counts: Vec::new(),
        schemas: Schemas::default(),
        files: out.files(),
        config: cfg.clone(),
        generated_at: output::now(),
    })
}

/// One CSV per replica (per member when coupled) plus `manifest.json`.
pub fn simulate(cfg: &ExperimentConfig) -> Result<Verdict, CliError> {
    let lambda = cfg.lambda()?;
    let kernel = cfg.kernel()?;
    let members = if cfg.simulate.coupling.is_empty() {
        vec![Member::H]
    } else {
        cfg.simulate.coupling.clone()
    };
    let kernels = members
        .iter()
        .map(|&m| member_kernel(m, &kernel, lambda))
        .collect::<Result<Vec<_>, _>>()?;

    let runs: Vec<Vec<EventStream>> = pool(cfg)?.install(|| {
        (0..cfg.replicas)
            .into_par_iter()
            .map(|r| {
                let mut sim = SimConfig::new(lambda, cfg.horizon)
                    .seed(cfg.seed)
                    .replica(r);
                if let Some(cap) = cfg.simulate.max_events {
                    sim = sim.max_events(cap);
                }
                simulate_coupled(&kernels, &sim)
            })
            .collect::<Result<_, _>>()
    })?;

    let mut out = OutDir::create(&cfg.output)?;
    let coupled = members.len() > 1;
    for (r, streams) in runs.iter().enumerate() {
        for ((member, k), stream) in members.iter().zip(&kernels).zip(streams) {
            let header = EventsHeader {
                lambda,
                kernel_hash: output::kernel_hash(k),
                seed: cfg.seed,
                replica: r as u64,
                horizon: cfg.horizon,
                // Windows of every coupled member are cut with L(h).
                support: window_length(&kernel, lambda),
            };
            let name = if coupled {
                format!("events-r{r}-{}.csv", member_name(*member))
            } else {
                format!("events-r{r}.csv")
            };
            out.write(&name, &output::events_csv(&header, stream))?;
        }
    }
    let mut m = manifest(cfg, "simulate", &out)?;
    if coupled {
        m.coupling_group = members
            .iter()
            .map(|&x| member_name(x).to_string())
            .collect();
    }
    m.event_counts = runs
        .iter()
        .map(|s| s.iter().map(EventStream::len).collect())
        .collect();
    out.write_json("manifest.json", &m)?;
    crate::emit(&format!(
        "simulated {} replica(s); event counts {:?}; output in {}",
        cfg.replicas,
        m.event_counts,
        cfg.output.display()
    ));
    Ok(Verdict::Pass)
}

/// Windows from event files, or from fresh simulations when none are given.
pub(crate) fn gather_sample(
    cfg: &ExperimentConfig,
    events: &[PathBuf],
) -> Result<WindowSample, CliError> {
    let lambda = cfg.lambda()?;
    let kernel = cfg.kernel()?;
    let mut pooled: Option<WindowSample> = None;
    let mut push = |s: WindowSample| match pooled.as_mut() {
        Some(p) => p.merge(s),
        None => pooled = Some(s),
    };
    if !events.is_empty() {
        for path in events {
            let (header, stream) = output::read_events(path)?;
            let mut s = decompose(&stream, header.support)?;
            s.provenance = Provenance {
                lambda: Some(header.lambda),
                kernel: None,
                seed: Some(header.seed),
                replicas: vec![header.replica],
            };
            push(s);
        }
    } else if let Some(n) = cfg.windows.count {
        push(sample_windows(&kernel, lambda, n, cfg.seed)?);
    } else {
        let support = window_length(&kernel, lambda);
        let samples: Vec<WindowSample> = pool(cfg)?.install(|| {
            (0..cfg.replicas)
                .into_par_iter()
                .map(|r| {
                    let sim = SimConfig::new(lambda, cfg.horizon)
                        .seed(cfg.seed)
                        .replica(r);
                    let mut s = decompose(&hawkes_renewal::simulate(&kernel, &sim)?, support)?;
                    s.provenance = Provenance {
                        lambda: Some(lambda),
                        kernel: Some(kernel.segments().to_vec()),
                        seed: Some(cfg.seed),
                        replicas: vec![r],
                    };
                    Ok::<_, hawkes_renewal::Error>(s)
                })
                .collect::<Result<_, _>>()
        })?;
        samples.into_iter().for_each(&mut push);
    }
    Ok(pooled.expect("at least one replica or file"))
}

/// `windows.csv` and `windows.json`.
pub fn decompose_cmd(cfg: &ExperimentConfig, events: &[PathBuf]) -> Result<Verdict, CliError> {
    let sample = gather_sample(cfg, events)?;
    let mut out = OutDir::create(&cfg.output)?;
    out.write("windows.csv", &output::windows_csv(&sample))?;
    out.write_json("windows.json", &WindowsMeta::new(&sample))?;
    let m = manifest(cfg, "decompose", &out)?;
    out.write_json("manifest.json", &m)?;
    crate::emit(&format!(
        "{} window(s), {} event(s) in the discarded tail",
        sample.len(),
        sample.discarded_tail_count()
    ));
    Ok(Verdict::Pass)
}

#[derive(Debug, Serialize)]
struct EstimateReport {
    estimates: LimitEstimates,
    discarded_tail_count: usize,
    horizon: f64,
    /// Closed-form `(m, σ²)` when the kernel has one.
    reference: Option<Reference>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub(crate) struct Reference {
    pub m: f64,
    pub sigma2: f64,
}

pub(crate) fn reference(case: Case, lambda: f64) -> Option<Reference> {
    match case {
        Case::Poisson => Some(Reference {
            m: lambda,
            sigma2: lambda,
        }),
        Case::Canceling { a } => oracle_cancel(lambda, a).ok().map(|o| Reference {
            m: o.m,
            sigma2: o.sigma2,
        }),
        Case::Delayed { r, a } => oracle_delayed(lambda, r, a).ok().map(|o| Reference {
            m: o.m,
            sigma2: o.sigma2,
        }),
        Case::Linear { h_l1 } => oracle_linear(lambda, h_l1).ok().map(|o| Reference {
            m: o.mu,
            sigma2: o.sigma2,
        }),
        Case::General => None,
    }
}

pub fn estimate(cfg: &ExperimentConfig, events: &[PathBuf]) -> Result<Verdict, CliError> {
    let sample = gather_sample(cfg, events)?;
    if sample.len() < 2 {
        return Err(CliError::Failed(format!(
            "{} completed window(s) within horizon {}: at least 2 are needed \
             (the horizon is too short for windows to close)",
            sample.len(),
            sample.horizon()
        )));
    }
    let report = EstimateReport {
        estimates: lln_estimate(&sample)?,
        discarded_tail_count: sample.discarded_tail_count(),
        horizon: sample.horizon(),
        reference: reference(cfg.case()?, cfg.lambda()?),
    };
    let mut out = OutDir::create(&cfg.output)?;
    out.write_json("estimate.json", &report)?;
    let m = manifest(cfg, "estimate", &out)?;
    out.write_json("manifest.json", &m)?;
    crate::emit(&serde_json::to_string_pretty(&report).expect("plain data"));
    Ok(Verdict::Pass)
}

fn default_source(case: Case) -> Source {
    match case {
        Case::Poisson | Case::Canceling { .. } | Case::Linear { .. } => Source::Oracle,
        Case::Delayed { .. } => Source::Analytic,
        Case::General => Source::Empirical,
    }
}

fn analytic_surface(case: Case, lambda: f64) -> Result<LogMgfSurface, CliError> {
    Ok(match case {
        Case::Poisson => LogMgfSurface::canceling(lambda, 0.0)?,
        Case::Canceling { a } => LogMgfSurface::canceling(lambda, a)?,
        Case::Delayed { r, a } => LogMgfSurface::delayed(lambda, r, a)?,
        _ => {
            return Err(CliError::Config(
                "an analytic surface exists only for h ≡ 0 and the canceling and delayed kernels"
                    .into(),
            ))
        }
    })
}

/// Closed-form `J`, if the case has one.
fn closed_form_rate(case: Case, lambda: f64) -> Result<Box<dyn Fn(f64) -> f64 + Sync>, CliError> {
    Ok(match case {
        Case::Poisson => {
            let o = oracle_cancel(lambda, 0.0)?;
            Box::new(move |z| o.rate(z))
        }
        Case::Canceling { a } => {
            let o = oracle_cancel(lambda, a)?;
            Box::new(move |z| o.rate(z))
        }
        Case::Linear { h_l1 } => {
            let o = oracle_linear(lambda, h_l1)?;
            Box::new(move |z| o.rate(z))
        }
        _ => {
            return Err(CliError::Config(
                "no closed-form rate function for this kernel; use source = analytic or empirical"
                    .into(),
            ))
        }
    })
}

fn empirical_surface(cfg: &ExperimentConfig, windows: usize) -> Result<LogMgfSurface, CliError> {
    let sample = sample_windows(&cfg.kernel()?, cfg.lambda()?, windows, cfg.seed)?;
    Ok(empirical_log_mgf(&sample)?)
}

pub fn rate_curve_for(cfg: &ExperimentConfig, source: Source) -> Result<RateCurve, CliError> {
    let lambda = cfg.lambda()?;
    let case = cfg.case()?;
    let grid = cfg.rate.grid.points();
    Ok(match source {
        Source::Oracle => RateCurve::closed_form(&grid, closed_form_rate(case, lambda)?),
        Source::Analytic => rate_curve(&analytic_surface(case, lambda)?, &grid)?,
        Source::Empirical => rate_curve(&empirical_surface(cfg, cfg.rate.windows)?, &grid)?,
    })
}

pub fn rate(cfg: &ExperimentConfig) -> Result<Verdict, CliError> {
    let source = cfg.rate.source.unwrap_or(default_source(cfg.case()?));
    let curve = rate_curve_for(cfg, source)?;
    let mut out = OutDir::create(&cfg.output)?;
    out.write("rate.csv", &output::rate_csv(&curve))?;
    let m = manifest(cfg, "rate", &out)?;
    out.write_json("manifest.json", &m)?;
    crate::emit(output::rate_csv(&curve).trim_end());
    Ok(Verdict::Pass)
}

pub fn oracle(cfg: &ExperimentConfig) -> Result<Verdict, CliError> {
    let lambda = cfg.lambda()?;
    let kernel = cfg.kernel()?;
    let case = cfg.case()?;
    let record = match case {
        Case::Poisson => serde_json::to_value(oracle_cancel(lambda, 0.0)?),
        Case::Canceling { a } => serde_json::to_value(oracle_cancel(lambda, a)?),
        Case::Delayed { r, a } => serde_json::to_value(oracle_delayed(lambda, r, a)?),
        Case::Linear { h_l1 } => serde_json::to_value(oracle_linear(lambda, h_l1)?),
        Case::General => Ok(serde_json::Value::Null),
    }
    .expect("plain data");
    let t0: Theta0 = theta0(&kernel, lambda);
    let report = json!({
        "lambda": lambda,
        "kernel": cfg.kernel,
        "case": case,
        "alpha0": alpha0(&kernel, lambda),
        // JSON has no infinity; null stands for +∞.
        "theta0": t0,
        "theta0_infinite": t0.value.is_infinite(),
        "oracle": record,
    });
    let mut out = OutDir::create(&cfg.output)?;
    out.write_json("oracle.json", &report)?;
    crate::emit(&serde_json::to_string_pretty(&report).expect("plain data"));
    Ok(Verdict::Pass)
}

#[derive(Debug, Serialize)]
struct DeviationsReport {
    a: f64,
    kappa: f64,
    kappa_prime: f64,
    m: f64,
    theta0: f64,
    source: Source,
    bounds: DeviationBounds,
}

pub fn deviations(cfg: &ExperimentConfig) -> Result<Verdict, CliError> {
    let lambda = cfg.lambda()?;
    let kernel = cfg.kernel()?;
    let case = cfg.case()?;
    let d = &cfg.deviations;
    let a =
        d.a.ok_or_else(|| CliError::Config("deviations.a is required".into()))?;
    let source = d.source.unwrap_or(default_source(case));
    let t0 = theta0(&kernel, lambda).value;
    let (m, bounds) = match source {
        Source::Oracle => {
            let m = reference(case, lambda)
                .ok_or_else(|| CliError::Config("no closed-form limit for this kernel".into()))?
                .m;
            let rate = closed_form_rate(case, lambda)?;
            (
                m,
                deviation_bounds(&|z: f64| rate(z), m, a, t0, d.kappa, d.kappa_prime)?,
            )
        }
        Source::Analytic | Source::Empirical => {
            let surface = if source == Source::Analytic {
                analytic_surface(case, lambda)?
            } else {
                empirical_surface(cfg, d.windows)?
            };
            let m = surface.limit_rate();
            (
                m,
                deviation_bounds(&surface, m, a, t0, d.kappa, d.kappa_prime)?,
            )
        }
    };
    let report = DeviationsReport {
        a,
        kappa: d.kappa,
        kappa_prime: d.kappa_prime,
        m,
        theta0: t0,
        source,
        bounds,
    };
    let mut out = OutDir::create(&cfg.output)?;
    out.write_json("deviations.json", &report)?;
    crate::emit(&serde_json::to_string_pretty(&report).expect("plain data"));
    Ok(Verdict::Pass)
}
