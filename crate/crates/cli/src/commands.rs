use std::path::{Path, PathBuf};

use qcausal::demo::{render_table, signature_table};
use qcausal::fitting::{
    assemble_map, best_point, fit as run_fit, sweep_csv, sweep_p, FitConfig, Observations,
    Optimizer, SweepRow,
};
use qcausal::passive::{
    causal_verdict, classify_extremal, ellipsoid_from_conditional, entanglement_coherence_witness,
    recover_promise_mixture, ObservedConditionalOperator,
};
use qcausal::scenario::{exact_probabilities, sample_counts, substream_seed};
use qcausal::serial::OperatorJson;
use qcausal::tomography::{
    correlators_from_counts, correlators_from_distribution, reconstruct_causal_map,
};
use qcausal::{choi_fidelity, CausalMap, Scheme};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::data::{
    load_map, parse_grid, resolve, scenario_map, write_text, write_with_manifest, Data, ExactFile,
    Stats,
};
use crate::failure::{library, Failure, Kind};
use crate::manifest::Manifest;
use crate::{
    ClassifyArgs, CmdResult, DemoArgs, FitArgs, FitOptions, Promise, ReconstructArgs, SchemeArg,
    SimulateArgs, SweepArgs,
};

/// Tolerance for the constituents of an assembled fit; the law of total
/// probability is only enforced by the penalty.
const ASSEMBLY_TOL: f64 = 1e-3;

/// `dir/stem.suffix` next to `out`.
fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    out.with_file_name(format!("{stem}.{suffix}"))
}

fn file_name(p: &Path) -> String {
    p.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn reference_fidelity(reference: Option<&PathBuf>, map: &CausalMap) -> CmdResult<Option<f64>> {
    reference
        .map(|p| {
            let r = load_map(p)?;
            choi_fidelity(map, &r).map_err(library)
        })
        .transpose()
}

fn source_of(data: &Data) -> Value {
    match data.scenario {
        Some((kind, param)) => json!({ "scenario": kind, "param": param }),
        None => Value::Null,
    }
}

fn error_code(e: &qcausal::Error) -> &'static str {
    use qcausal::Error as E;
    match e {
        E::PromiseViolation(_) => "promise_violation",
        E::NoExplanation { .. } => "no_explanation",
        E::SignallingRegime { .. } => "signalling_regime",
        E::WrongScheme { .. } => "wrong_scheme",
        _ => "invalid_input",
    }
}

pub fn simulate(a: &SimulateArgs) -> CmdResult {
    let map = scenario_map(a.scenario, a.param)?;
    if a.n == 0 {
        return Err(Failure::msg(Kind::Usage, "N must be positive"));
    }
    let scheme: Scheme = a.scheme.into();
    let dist = exact_probabilities(&map, scheme).map_err(library)?;
    let manifest = Manifest::new("simulate", a, a.seed);
    if a.exact {
        write_with_manifest(&a.out, &manifest, ExactFile::from_distribution(&dist, a.n))?;
    } else {
        let table = sample_counts(&dist, a.n, a.seed).map_err(library)?;
        write_with_manifest(&a.out, &manifest, table.to_json_value())?;
    }
    if let Some(p) = &a.map_out {
        write_with_manifest(p, &manifest, json!({ "map": OperatorJson::from(&map) }))?;
    }
    println!(
        "{} {} table, N = {}, written to {}",
        if a.exact { "exact" } else { "sampled" },
        scheme,
        a.n,
        a.out.display()
    );
    Ok(())
}

pub fn reconstruct(a: &ReconstructArgs) -> CmdResult {
    let data = resolve(&a.input)?;
    if data.scheme() == Scheme::Passive {
        return Err(Failure::msg(
            Kind::Validation,
            "passive observation data does not allow a tomographic reconstruction in general; \
             use `classify` or `fit` instead",
        ));
    }
    let c = match &data.stats {
        Stats::Counts(t) => correlators_from_counts(t),
        Stats::Exact { dist, .. } => correlators_from_distribution(dist),
    }
    .map_err(library)?;
    let (map, report) = reconstruct_causal_map(&c);
    let fidelity = reference_fidelity(a.reference.as_ref(), &map)?;
    let manifest = Manifest::new("reconstruct", a, a.seed);
    let csv = sibling(&a.out, "correlators.csv");
    write_text(&csv, &c.to_csv())?;
    write_with_manifest(
        &a.out,
        &manifest,
        json!({
            "scheme": data.scheme(),
            "N": data.shots(),
            "exact": data.is_exact(),
            "source": source_of(&data),
            "map": OperatorJson::from(&map),
            "validity": report,
            "choi_fidelity": fidelity,
            "correlators_csv": file_name(&csv),
        }),
    )?;
    match fidelity {
        Some(f) => println!(
            "reconstructed map written to {}, Choi fidelity {f:.6}",
            a.out.display()
        ),
        None => println!("reconstructed map written to {}", a.out.display()),
    }
    Ok(())
}

pub fn classify(a: &ClassifyArgs) -> CmdResult {
    let data = resolve(&a.input)?;
    if data.scheme() != Scheme::Passive {
        return Err(Failure::msg(
            Kind::Validation,
            "classify needs passive observation data",
        ));
    }
    let x = match &data.stats {
        Stats::Counts(t) => ObservedConditionalOperator::from_counts(t),
        Stats::Exact { dist, .. } => ObservedConditionalOperator::from_distribution(dist),
    }
    .map_err(library)?;
    let verdict = causal_verdict(&x);
    let e = ellipsoid_from_conditional(&x);
    let classification = match (
        verdict.common_cause_explanation,
        verdict.direct_cause_explanation,
    ) {
        (true, true) => "indistinguishable",
        (true, false) => "common-cause",
        (false, true) => "direct-cause",
        (false, false) => "neither",
    };
    let mut body = json!({
        "scheme": "passive",
        "N": data.shots(),
        "exact": data.is_exact(),
        "source": source_of(&data),
        "promise": a.promise,
        "classification": classification,
        "verdict": verdict,
        "ellipsoid": e,
    });
    let mut failure = None;
    let mut diagnose = |body: &mut Value, err: qcausal::Error| {
        body["diagnostics"] = json!({ "error": error_code(&err), "message": err.to_string() });
        failure = Some(Failure::new(Kind::Validation, err));
    };
    match a.promise {
        Promise::None => {}
        Promise::Pure => {
            body["extremal"] = json!(classify_extremal(&e));
            match entanglement_coherence_witness(&x) {
                Ok(w) => body["witness"] = json!(w),
                Err(err) => diagnose(&mut body, err),
            }
        }
        Promise::Mixture => match recover_promise_mixture(&e) {
            Ok(fit) => {
                body["promise_fit"] = json!(fit);
                body["promise_residual"] = json!(fit.residual());
                body["alternate"] = json!(fit.alternate());
            }
            Err(err) => diagnose(&mut body, err),
        },
    }
    let manifest = Manifest::new("classify", a, a.seed);
    write_with_manifest(&a.out, &manifest, &body)?;
    write_with_manifest(
        &sibling(&a.out, "ellipsoid.json"),
        &manifest,
        json!({ "ellipsoid": e }),
    )?;
    println!(
        "{classification}: C = ({:+.3}, {:+.3}, {:+.3}), product {:+.3}",
        verdict.correlations[0],
        verdict.correlations[1],
        verdict.correlations[2],
        verdict.signature_product
    );
    match failure {
        Some(f) => Err(f),
        None => Ok(()),
    }
}

fn fit_config(o: &FitOptions, p_target: f64, seed: u64) -> CmdResult<FitConfig> {
    if !(0.0..=1.0).contains(&p_target) {
        return Err(Failure::msg(
            Kind::Usage,
            format!("p_target must lie in [0, 1], got {p_target}"),
        ));
    }
    if !(o.lambda > 0.0 && o.lambda.is_finite()) {
        return Err(Failure::msg(Kind::Usage, "--lambda must be positive"));
    }
    Ok(FitConfig {
        p_target,
        lambda: o.lambda,
        max_iterations: o.max_iterations,
        tolerance: o.tolerance,
        seed,
        restarts: o.restarts,
        optimizer: if o.nelder_mead {
            Optimizer::NelderMead
        } else {
            Optimizer::LevenbergMarquardt
        },
    })
}

fn observations(stats: &Stats) -> CmdResult<Observations> {
    match stats {
        Stats::Counts(t) => Ok(Observations::from_counts(t)),
        Stats::Exact { dist, n } => Observations::exact(dist, *n as f64).map_err(library),
    }
}

pub fn fit(a: &FitArgs) -> CmdResult {
    let data = resolve(&a.input)?;
    let config = fit_config(&a.options, a.p_target, a.seed)?;
    let result = run_fit(&observations(&data.stats)?, &config).map_err(library)?;
    let mut body = result.to_json_value();
    body["N"] = json!(data.shots());
    body["exact"] = json!(data.is_exact());
    body["source"] = source_of(&data);
    body["chi2_per_cell"] = json!(result.chi2_per_cell());
    match assemble_map(&result, ASSEMBLY_TOL) {
        Ok(map) => {
            body["assembled_map"] = json!(OperatorJson::from(&map));
            body["choi_fidelity"] = json!(reference_fidelity(a.reference.as_ref(), &map)?);
        }
        Err(e) => body["assembly_error"] = json!(e.to_string()),
    }
    let manifest = Manifest::new("fit", a, a.seed);
    write_with_manifest(&a.out, &manifest, &body)?;
    println!(
        "chi2 = {:.6e} ({:.3e} per cell), p = {:.6}, converged = {}",
        result.chi2,
        result.chi2_per_cell(),
        result.p_reported,
        result.converged
    );
    if !result.converged {
        return Err(Failure::msg(
            Kind::NotConverged,
            format!(
                "fit did not converge within {} iterations (result written)",
                config.max_iterations
            ),
        ));
    }
    Ok(())
}

fn scheme_slot(s: Scheme) -> u64 {
    match s {
        Scheme::Interventionist => 0,
        Scheme::Passive => 1,
    }
}

pub fn sweep(a: &SweepArgs) -> CmdResult {
    let schemes: Vec<Scheme> = if a.scheme.is_empty() {
        vec![Scheme::Interventionist, Scheme::Passive]
    } else {
        a.scheme.iter().map(|&s: &SchemeArg| s.into()).collect()
    };
    let p_exp = parse_grid(&a.p_exp)?;
    let p_fit = parse_grid(&a.p_fit)?;
    if a.n == 0 || a.seeds == 0 {
        return Err(Failure::msg(Kind::Usage, "N and --seeds must be positive"));
    }
    let base = fit_config(&a.options, 0.5, a.seed)?;
    let reps = if a.exact { 1 } else { a.seeds };
    let mut tasks = Vec::new();
    for &scheme in &schemes {
        for (i, &p) in p_exp.iter().enumerate() {
            for j in 0..reps {
                let slot = (scheme_slot(scheme) * p_exp.len() as u64 + i as u64) * reps + j;
                tasks.push((scheme, p, substream_seed(a.seed, slot)));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.workers.unwrap_or(0))
        .build()
        .map_err(|e| Failure::new(Kind::Usage, e))?;
    let results: Vec<Vec<SweepRow>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(scheme, p, seed)| -> CmdResult<Vec<SweepRow>> {
                let dist =
                    exact_probabilities(&scenario_map(a.scenario, p)?, scheme).map_err(library)?;
                let obs = if a.exact {
                    Observations::exact(&dist, a.n as f64).map_err(library)?
                } else {
                    Observations::from_counts(&sample_counts(&dist, a.n, seed).map_err(library)?)
                };
                let config = FitConfig {
                    seed,
                    ..base.clone()
                };
                let points = sweep_p(&obs, &p_fit, &config).map_err(library)?;
                Ok(points
                    .into_iter()
                    .map(|pt| SweepRow {
                        p_exp: p,
                        p_fit: pt.p_fit,
                        chi2: pt.chi2,
                        seed,
                        n: a.n,
                        scheme,
                    })
                    .collect())
            })
            .collect::<CmdResult<_>>()
    })?;
    let step = p_fit
        .windows(2)
        .map(|w| (w[1] - w[0]).abs())
        .fold(f64::INFINITY, f64::min);
    let mut per_scheme = serde_json::Map::new();
    let mut all_sq = 0.0;
    let mut all_count = 0.0;
    for &scheme in &schemes {
        let mut argmins = Vec::new();
        let mut sq = 0.0;
        let mut within = 0usize;
        for (rows, &(s, p, seed)) in results.iter().zip(&tasks) {
            if s != scheme {
                continue;
            }
            let points: Vec<_> = rows
                .iter()
                .map(|r| qcausal::fitting::SweepPoint {
                    p_fit: r.p_fit,
                    chi2: r.chi2,
                    seed: r.seed,
                    converged: true,
                })
                .collect();
            let best = best_point(&points).expect("non-empty grid").p_fit;
            sq += (best - p).powi(2);
            if (best - p).abs() <= step + 1e-9 {
                within += 1;
            }
            argmins.push(json!({ "p_exp": p, "seed": seed, "argmin": best }));
        }
        let count = argmins.len() as f64;
        let rms = (sq / count).sqrt();
        all_sq += sq;
        all_count += count;
        println!("{scheme}: rms |argmin - p_exp| = {rms:.4} over {count} data sets");
        per_scheme.insert(
            scheme.name().into(),
            json!({
                "rms": rms,
                "within_one_step": within as f64 / count,
                "argmins": argmins,
            }),
        );
    }
    let rows: Vec<SweepRow> = results.into_iter().flatten().collect();
    write_text(&a.out, &sweep_csv(&rows))?;
    let manifest = Manifest::new("sweep", a, a.seed);
    write_with_manifest(
        &sibling(&a.out, "summary.json"),
        &manifest,
        json!({
            "csv": file_name(&a.out),
            "schemes": per_scheme,
            "rms": (all_sq / all_count).sqrt(),
        }),
    )?;
    Ok(())
}

pub fn demo(a: &DemoArgs) -> CmdResult {
    let rows = signature_table().map_err(library)?;
    print!("{}", render_table(&rows));
    if let Some(out) = &a.out {
        write_with_manifest(out, &Manifest::new("demo", a, 0), json!({ "rows": rows }))?;
    }
    Ok(())
}
