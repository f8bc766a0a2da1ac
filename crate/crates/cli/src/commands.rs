//! The four subcommands. Each returns its records; writing is left to the
//! caller.

use std::fs;

use islands_core::formulas::{
    inhomogeneous_bounds, isolated_island_slope, limit_asymptotics, mean_anchored_count,
    mean_clone_count, mixing_bound, nu_vanishing, phi, r_one_point, r_two_point, tau_bound,
    third_moment, HomogeneousEvaluator, HomogeneousParams,
};
use islands_core::mc::{
    clt_test, count_dispersion_test, envelope_test, estimate_ocean, fkg_quadrature_check, fkg_test,
    left_end_equivalence_test, sandwich_check, wiener_covariance_test, CountKind, TestReport,
    Verdict,
};
use islands_core::sampler::{
    pad_width, sample_realization, write_anchors_csv, write_clones_csv, write_islands_csv,
    DEFAULT_PAD_EPS,
};
use islands_core::{LengthLaw, ModelSpec, RngStream};

use crate::config::{IntensityConfig, LengthsConfig, RunConfig};
use crate::records::{describe_law, ModelColumns, Record};
use crate::CliError;

pub const EXACT_QUANTITIES: &[&str] = &[
    "mean_clone_count",
    "mean_anchored_count",
    "r_one_point",
    "rho",
    "r_two_point",
    "variance_constants",
    "variance_exact",
    "tau_bound",
    "phi",
    "asymptotics",
    "mixing_bound",
    "inhomogeneous_bounds",
    "third_moment",
];

pub const SUITES: &[&str] = &[
    "fkg",
    "sandwich",
    "clt",
    "wiener",
    "dispersion",
    "left_end",
    "envelope",
];

pub const SCAN_QUANTITIES: &[&str] = &[
    "rho",
    "ocean_deficit",
    "nu",
    "lambda",
    "nu_over_kappa",
    "nu_vanishing",
    "isolated_island_slope",
    "mean_anchored_count",
    "variance_exact",
];

/// Homogeneous view of a model, with the anchor-free case split off since it
/// has no parameter set.
enum Homogeneous {
    Params(HomogeneousParams),
    NoAnchors,
}

fn homogeneous(spec: &ModelSpec, what: &str) -> Result<Homogeneous, CliError> {
    let Some((k, a, law)) = spec.homogeneous_params() else {
        return Err(CliError::Config(format!(
            "{what} needs constant rates and a single length law"
        )));
    };
    if a == 0.0 {
        return Ok(Homogeneous::NoAnchors);
    }
    Ok(Homogeneous::Params(HomogeneousParams::new(
        k,
        a,
        law.clone(),
    )?))
}

fn needs_anchors(h: Homogeneous, what: &str) -> Result<HomogeneousParams, CliError> {
    match h {
        Homogeneous::Params(p) => Ok(p),
        Homogeneous::NoAnchors => Err(CliError::Config(format!(
            "{what} needs a positive anchor rate"
        ))),
    }
}

fn model_columns(cfg: &RunConfig) -> ModelColumns {
    let rate = |c: &IntensityConfig| match c {
        IntensityConfig::Constant { rate } => Some(*rate),
        IntensityConfig::Piecewise { .. } => None,
    };
    ModelColumns {
        kappa: rate(&cfg.model.clones),
        alpha: rate(&cfg.model.anchors),
        lengths: match &cfg.model.lengths {
            LengthsConfig::Fixed(law) => describe_law(law),
            LengthsConfig::ByPosition(_) => "by_position".into(),
        },
    }
}

fn windows(cfg: &RunConfig) -> Vec<f64> {
    if cfg.run.windows.is_empty() {
        vec![cfg.run.window]
    } else {
        cfg.run.windows.clone()
    }
}

pub fn exact(cfg: &RunConfig) -> Result<Vec<Record>, CliError> {
    let spec = cfg.model_spec()?;
    let q = &cfg.quad;
    let run = &cfg.run;
    let requested: Vec<&str> = if run.quantities.is_empty() {
        if spec.is_homogeneous() {
            vec![
                "rho",
                "mean_clone_count",
                "mean_anchored_count",
                "variance_constants",
            ]
        } else {
            vec!["mean_clone_count", "mean_anchored_count", "r_one_point"]
        }
    } else {
        run.quantities.iter().map(String::as_str).collect()
    };
    let mut out = Vec::new();
    // Built on first use and shared by the variance quantities.
    let mut evaluator: Option<HomogeneousEvaluator> = None;
    let mut eval = |p: &HomogeneousParams| -> Result<HomogeneousEvaluator, CliError> {
        if evaluator.is_none() {
            evaluator = Some(HomogeneousEvaluator::new(p, q)?);
        }
        Ok(evaluator.clone().expect("just built"))
    };
    for &name in &requested {
        match name {
            "mean_clone_count" | "mean_anchored_count" | "r_one_point" => {
                for &z in &run.points {
                    let v = match name {
                        "mean_clone_count" => mean_clone_count(&spec, z, q)?,
                        "mean_anchored_count" => mean_anchored_count(&spec, z, q)?,
                        _ => r_one_point(&spec, z, q)?,
                    };
                    out.push(Record::new(name, v).x(z));
                }
            }
            "rho" => {
                let v = match homogeneous(&spec, name)? {
                    Homogeneous::NoAnchors => 1.0,
                    Homogeneous::Params(p) => eval(&p)?.rho(),
                };
                out.push(Record::new(name, v));
            }
            "r_two_point" => {
                for &[z, z2] in &run.pairs {
                    let tp = r_two_point(&spec, z, z2, q)?;
                    out.push(Record::new(name, tp.total).x(z).y(z2));
                    for (part, v) in [
                        ("r0", tp.r0),
                        ("r1", tp.r1),
                        ("r2", tp.r2),
                        ("r3", tp.r3),
                        ("shared", tp.shared),
                    ] {
                        out.push(Record::new(format!("r_two_point.{part}"), v).x(z).y(z2));
                    }
                }
            }
            "variance_constants" => match homogeneous(&spec, name)? {
                Homogeneous::NoAnchors => {
                    out.push(Record::new("nu", 0.0).stderr(0.0));
                    out.push(Record::new("lambda", 0.0).stderr(0.0));
                }
                Homogeneous::Params(p) => {
                    let vc = eval(&p)?.variance_constants()?;
                    out.push(Record::new("nu", vc.nu).stderr(vc.nu_error));
                    out.push(Record::new("lambda", vc.lambda).stderr(vc.lambda_error));
                    for (part, v) in [
                        ("nu0", vc.nu0),
                        ("nu1", vc.nu1),
                        ("nu3", vc.nu3),
                        ("nu_shared", vc.nu_shared),
                        ("lambda0", vc.lambda0),
                        ("lambda1", vc.lambda1),
                        ("lambda3", vc.lambda3),
                        ("lambda_shared", vc.lambda_shared),
                    ] {
                        out.push(Record::new(part, v));
                    }
                }
            },
            "variance_exact" => {
                let h = homogeneous(&spec, name)?;
                for g in windows(cfg) {
                    let (v, se) = match &h {
                        Homogeneous::NoAnchors => (0.0, 0.0),
                        Homogeneous::Params(p) => {
                            let e = eval(p)?.variance_exact(g)?;
                            (e.value, e.error)
                        }
                    };
                    out.push(Record::new(name, v).window(g).stderr(se));
                }
            }
            "tau_bound" => {
                let p = needs_anchors(homogeneous(&spec, name)?, name)?;
                for g in windows(cfg) {
                    out.push(Record::new(name, tau_bound(p.alpha, g)?).window(g));
                }
            }
            "phi" => {
                for &x in &run.phi_args {
                    out.push(Record::new(name, phi(x)?).x(x));
                }
            }
            "asymptotics" => {
                let p = needs_anchors(homogeneous(&spec, name)?, name)?;
                let a = limit_asymptotics(&p, q)?;
                for (part, v) in [
                    ("nu_small_l3", a.nu_small_l3),
                    ("ocean_deficit_small_kappa", a.ocean_deficit_small_kappa),
                    ("ocean_deficit_small_l", a.ocean_deficit_small_l),
                    ("mean_anchored_count", a.mean_anchored_count),
                    ("nu_isolated_islands", a.nu_isolated_islands),
                ] {
                    out.push(Record::new(format!("asymptotics.{part}"), v));
                }
                out.push(Record::new(
                    "asymptotics.nu_vanishing",
                    nu_vanishing(&p, q)?,
                ));
            }
            "mixing_bound" => {
                let p = needs_anchors(homogeneous(&spec, name)?, name)?;
                for &n in &run.distances {
                    let m = mixing_bound(&p, n)?;
                    out.push(Record::new(name, m.bound).n(n));
                    out.push(Record::new("mixing_bound.one_minus_j", m.one_minus_j).n(n));
                    out.push(Record::new("mixing_bound.tail_integral", m.tail_integral_bound).n(n));
                }
            }
            "inhomogeneous_bounds" => {
                let b = inhomogeneous_bounds(&cfg.ranges()?, q)?;
                for (part, v) in [
                    ("rho_minus", b.rho_minus),
                    ("rho_plus", b.rho_plus),
                    ("nu_minus", b.nu_minus),
                    ("nu_plus", b.nu_plus),
                ] {
                    out.push(Record::new(format!("inhomogeneous_bounds.{part}"), v));
                }
            }
            "third_moment" => {
                let h = homogeneous(&spec, name)?;
                for g in windows(cfg) {
                    let (v, se) = match &h {
                        Homogeneous::NoAnchors => (g * g * g, 0.0),
                        Homogeneous::Params(p) => {
                            let m = third_moment(p, g, &cfg.qmc)?;
                            if !m.converged {
                                eprintln!("warning: third_moment at G={g} did not reach the requested accuracy");
                            }
                            (m.value, m.stderr)
                        }
                    };
                    out.push(Record::new(name, v).window(g).stderr(se));
                }
            }
            other => return Err(CliError::Config(format!("unknown quantity {other:?}"))),
        }
    }
    let cols = model_columns(cfg);
    Ok(out.into_iter().map(|r| r.model(&cols)).collect())
}

pub fn simulate(cfg: &RunConfig) -> Result<Vec<Record>, CliError> {
    let spec = cfg.model_spec()?;
    let run = &cfg.run;
    let s = estimate_ocean(&spec, run.window, run.reps, run.seed)?;
    if let Some(dir) = &run.dump {
        fs::create_dir_all(dir).map_err(CliError::io)?;
        let pad = pad_width(&spec, DEFAULT_PAD_EPS)?;
        let real = sample_realization(&spec, run.window, pad, &RngStream::new(run.seed, 0))?;
        let file = |name: &str| fs::File::create(dir.join(name)).map_err(CliError::io);
        write_clones_csv(&real.clones, file("clones.csv")?)?;
        write_anchors_csv(&real.anchors, file("anchors.csv")?)?;
        write_islands_csv(&real.islands, file("islands.csv")?)?;
    }
    let g = run.window;
    let n = run.reps as f64;
    let cols = model_columns(cfg);
    Ok([
        Record::new("ocean_mean", s.mean).stderr(s.mean_se),
        Record::new("ocean_fraction", s.mean / g).stderr(s.mean_se / g),
        Record::new("ocean_variance", s.variance).stderr(s.variance_se),
        Record::new("ocean_third_central_moment", s.third_central_moment)
            .stderr(s.third_central_moment_se),
    ]
    .into_iter()
    .map(|r| r.window(g).n(n).model(&cols))
    .collect())
}

fn degenerate(name: &str, cfg: &RunConfig) -> TestReport {
    TestReport {
        name: name.into(),
        statistic: 0.0,
        p_value: None,
        z_score: None,
        pass: true,
        verdict: Verdict::Degenerate,
        seed: cfg.run.seed,
        reps: cfg.run.reps,
        details: Default::default(),
    }
}

/// Default quadrature grid for the positive-association check.
fn fkg_grid(cfg: &RunConfig) -> Vec<f64> {
    if cfg.run.points.len() >= 2 {
        cfg.run.points.clone()
    } else {
        (0..10).map(|i| 0.3 * i as f64).collect()
    }
}

pub fn verify(cfg: &RunConfig) -> Result<Vec<TestReport>, CliError> {
    let spec = cfg.model_spec()?;
    let q = &cfg.quad;
    let run = &cfg.run;
    let suites: Vec<&str> = if run.tests.is_empty() {
        SUITES
            .iter()
            .copied()
            .filter(|s| spec.is_homogeneous() || !matches!(*s, "sandwich" | "clt" | "wiener"))
            .collect()
    } else {
        run.tests.iter().map(String::as_str).collect()
    };
    let mut out = Vec::new();
    for suite in suites {
        match suite {
            "fkg" => {
                for &[z, z2] in &run.pairs {
                    out.push(fkg_test(&spec, z, z2, run.reps, run.seed)?);
                }
                out.push(fkg_quadrature_check(&spec, &fkg_grid(cfg), 1e-8, q)?);
            }
            "sandwich" => match homogeneous(&spec, suite)? {
                Homogeneous::NoAnchors => out.push(degenerate("variance_sandwich", cfg)),
                Homogeneous::Params(p) => {
                    let ws = if run.windows.is_empty() {
                        (1..=20).map(f64::from).collect()
                    } else {
                        run.windows.clone()
                    };
                    out.push(sandwich_check(&p, &ws, q)?);
                }
            },
            "clt" => out.push(clt_test(&spec, run.window, run.reps, run.seed, q)?),
            "wiener" => out.push(wiener_covariance_test(
                &spec, run.window, &run.grid, run.reps, run.seed, q,
            )?),
            "dispersion" => {
                let x = run.points.first().copied().unwrap_or(0.0);
                for kind in [CountKind::Clones, CountKind::Anchored] {
                    out.push(count_dispersion_test(
                        &spec, x, kind, run.reps, run.seed, q,
                    )?);
                }
            }
            "left_end" => {
                let boxes = (run.boxes[0], run.boxes[1]);
                out.push(left_end_equivalence_test(
                    &spec, 0.0, run.window, boxes, run.reps, run.seed, q,
                )?);
            }
            "envelope" => {
                if spec.anchors().is_zero() || spec.clones().is_zero() {
                    out.push(degenerate("envelope", cfg));
                } else {
                    out.push(envelope_test(
                        &spec,
                        &cfg.ranges()?,
                        run.window,
                        run.reps,
                        run.seed,
                        q,
                    )?);
                }
            }
            other => return Err(CliError::Config(format!("unknown test suite {other:?}"))),
        }
    }
    Ok(out)
}

fn scale_law(law: &LengthLaw, s: f64) -> Result<LengthLaw, CliError> {
    let scaled = match law {
        LengthLaw::Deterministic { value } => LengthLaw::deterministic(value * s),
        LengthLaw::Exponential { mean } => LengthLaw::exponential(mean * s),
        LengthLaw::Uniform { low, high } => LengthLaw::uniform(low * s, high * s),
        LengthLaw::Atoms {
            values,
            probabilities,
        } => LengthLaw::atoms(
            values.iter().map(|v| v * s).collect(),
            probabilities.clone(),
        ),
    };
    Ok(scaled?)
}

pub fn scan(cfg: &RunConfig) -> Result<Vec<Record>, CliError> {
    let spec = cfg.model_spec()?;
    let Some((k0, a0, law0)) = spec.homogeneous_params() else {
        return Err(CliError::Config(
            "scan needs a homogeneous base model".into(),
        ));
    };
    let section = cfg.scan.clone().unwrap_or_default();
    let axis = |v: &Option<Vec<f64>>, base: f64| v.clone().unwrap_or_else(|| vec![base]);
    let kappas = axis(&section.kappa, k0);
    let alphas = axis(&section.alpha, a0);
    let scales = axis(&section.length_scale, 1.0);
    let q = &cfg.quad;
    let g = cfg.run.window;
    let mut out = Vec::new();
    for &k in &kappas {
        for &a in &alphas {
            for &s in &scales {
                let law = scale_law(law0, s)?;
                let p = HomogeneousParams::new(k, a, law.clone())?;
                let needs_ev = section.quantities.iter().any(|n| {
                    matches!(
                        n.as_str(),
                        "rho"
                            | "ocean_deficit"
                            | "nu"
                            | "lambda"
                            | "nu_over_kappa"
                            | "variance_exact"
                    )
                });
                let ev = if needs_ev {
                    Some(HomogeneousEvaluator::new(&p, q)?)
                } else {
                    None
                };
                let needs_vc = section
                    .quantities
                    .iter()
                    .any(|n| matches!(n.as_str(), "nu" | "lambda" | "nu_over_kappa"));
                let vc = match (&ev, needs_vc) {
                    (Some(ev), true) => Some(ev.variance_constants()?),
                    _ => None,
                };
                let cols = ModelColumns {
                    kappa: Some(k),
                    alpha: Some(a),
                    lengths: describe_law(&law),
                };
                for name in &section.quantities {
                    let ev = || ev.as_ref().expect("evaluator built for this quantity");
                    let vc = || vc.as_ref().expect("constants built for this quantity");
                    let rec = match name.as_str() {
                        "rho" => Record::new(name.as_str(), ev().rho()),
                        "ocean_deficit" => Record::new(name.as_str(), 1.0 - ev().rho()),
                        "nu" => Record::new(name.as_str(), vc().nu).stderr(vc().nu_error),
                        "lambda" => {
                            Record::new(name.as_str(), vc().lambda).stderr(vc().lambda_error)
                        }
                        "nu_over_kappa" => {
                            let v = if k > 0.0 {
                                vc().nu / k
                            } else {
                                // The slope at kappa = 0.
                                isolated_island_slope(
                                    &HomogeneousParams::new(1.0, a, law.clone())?,
                                    q,
                                )?
                            };
                            Record::new(name.as_str(), v)
                        }
                        "nu_vanishing" => Record::new(name.as_str(), nu_vanishing(&p, q)?),
                        "isolated_island_slope" => {
                            Record::new(name.as_str(), isolated_island_slope(&p, q)?)
                        }
                        "mean_anchored_count" => Record::new(
                            name.as_str(),
                            mean_anchored_count(
                                &ModelSpec::homogeneous(k, a, law.clone())?,
                                0.0,
                                q,
                            )?,
                        ),
                        "variance_exact" => {
                            let e = ev().variance_exact(g)?;
                            Record::new(name.as_str(), e.value)
                                .window(g)
                                .stderr(e.error)
                        }
                        other => {
                            return Err(CliError::Config(format!(
                                "unknown scan quantity {other:?}"
                            )))
                        }
                    };
                    out.push(rec.model(&cols));
                }
            }
        }
    }
    Ok(out)
}
