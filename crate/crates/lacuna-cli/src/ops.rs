//! Command implementations: file plumbing around the library calls.
//!
//! Every command that owns an output directory writes a `manifest.json`
//! recording the resolved configuration, the crate version, and a SHA-256
//! digest of each input file, so a result can always be traced back to its
//! inputs. Nothing here consults clocks or ambient state; identical
//! invocations write identical bytes.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use lacuna::amplify::{
    columnwise_amplify, greedy_partition, naive_baseline, optimal_partition, AmplificationPlan,
    AmplifyMode, BaselineReport, MarginalQuery,
};
use lacuna::dp::{
    misgan_curve, rdp_to_dp, sgm_rdp, sigma_for_budget, MisganAccountingParams, RdpCurve, SgmForm,
    SgmParams,
};
use lacuna::grid::{grid_csv, run_grid, GridMechanism, GridSpec};
use lacuna::jsonio::to_json_precise;
use lacuna::metrics::{f1_breakdown, kway_distance_with, DistanceKind, TargetScore};
use lacuna::{Error, Result};
use lacuna::missing::{estimate_phi, inject_mar_sr, MissingSpec, PhiEstimate};
use lacuna::synth::{run_pipeline_full, Method, SynthConfig};
use lacuna::tabular::{load_csv, save_csv, save_mask, Dataset, Schema};

use crate::{
    AmplifyArgs, BenchArgs, ConvertArgs, EvaluateArgs, InjectArgs, MisganArgs, SgmArgs,
    SigmaSearchArgs, SynthesizeArgs,
};

// ---------------------------------------------------------------- plumbing

fn require_file(path: &Path, what: &str) -> Result<()> {
    if !path.is_file() {
        return Err(Error::invalid(format!(
            "{what} file {} does not exist",
            path.display()
        )));
    }
    Ok(())
}

fn load_schema(path: &Path) -> Result<Schema> {
    require_file(path, "schema")?;
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Schema(format!("{}: {e}", path.display())))
}

fn load_dataset(path: &Path, schema: &Schema, token: &str, what: &str) -> Result<Dataset> {
    require_file(path, what)?;
    load_csv(path, schema, token)
}

fn load_json<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> Result<T> {
    require_file(path, what)?;
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))
}

fn prepare_output(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    std::fs::write(dir.join(name), to_json_precise(value)?)?;
    Ok(())
}

#[derive(Serialize)]
struct InputDigest {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a, C: Serialize> {
    command: &'a str,
    version: &'a str,
    config: &'a C,
    inputs: BTreeMap<&'a str, InputDigest>,
    #[serde(skip_serializing_if = "Option::is_none")]
    result: Option<serde_json::Value>,
}

fn sha256_hex(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().fold(String::new(), |mut s, b| {
        s.push_str(&format!("{b:02x}"));
        s
    }))
}

fn write_manifest<C: Serialize>(
    dir: &Path,
    command: &str,
    config: &C,
    inputs: &[(&str, &Path)],
    result: Option<serde_json::Value>,
) -> Result<()> {
    let mut digests = BTreeMap::new();
    for (name, path) in inputs {
        digests.insert(
            *name,
            InputDigest {
                path: path.display().to_string(),
                sha256: sha256_hex(path)?,
            },
        );
    }
    write_json(
        dir,
        "manifest.json",
        &Manifest {
            command,
            version: env!("CARGO_PKG_VERSION"),
            config,
            inputs: digests,
            result,
        },
    )
}

fn mean_std(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

// ------------------------------------------------------------------ inject

pub fn inject(a: &InjectArgs) -> Result<()> {
    let schema = load_schema(&a.schema)?;
    let d = load_dataset(&a.input, &schema, &a.missing_token, "input")?;
    let rate = || {
        a.rate.ok_or_else(|| {
            Error::invalid(format!("--mechanism {} needs --rate", a.mechanism))
        })
    };

    let mut result = None;
    let masked = match (a.mechanism.as_str(), a.mar_sr_target) {
        ("mar", Some(target)) => {
            let (masked, achieved) = inject_mar_sr(&d, rate()?, a.seed, target)?;
            result = Some(serde_json::json!({ "achieved_rate": achieved }));
            masked
        }
        (_, Some(_)) => {
            return Err(Error::invalid("--mar-sr-target requires --mechanism mar"));
        }
        ("mcar", None) => {
            let phi = a.phi.clone().ok_or_else(|| {
                Error::invalid("--mechanism mcar needs --phi (per-column probabilities)")
            })?;
            lacuna::missing::inject(&d, &MissingSpec::mcar(phi, a.seed)?)?
        }
        ("mcar-global", None) => {
            lacuna::missing::inject(&d, &MissingSpec::mcar_global(rate()?, a.seed)?)?
        }
        ("mar", None) => lacuna::missing::inject(&d, &MissingSpec::mar(rate()?, a.seed)?)?,
        ("mnar", None) => lacuna::missing::inject(&d, &MissingSpec::mnar(rate()?, a.seed)?)?,
        (other, None) => {
            return Err(Error::invalid(format!(
                "unknown mechanism {other:?}; expected mcar, mcar-global, mar, or mnar"
            )));
        }
    };

    prepare_output(&a.output)?;
    save_csv(&masked, a.output.join("masked.csv"), &a.missing_token)?;
    save_mask(&masked, a.output.join("mask.csv"))?;
    write_manifest(
        &a.output,
        "inject",
        a,
        &[("input", &a.input), ("schema", &a.schema)],
        result,
    )
}

// -------------------------------------------------------------- synthesize

/// Budget ledger as written next to synthetic output: the configured budget,
/// realized totals, and every labeled charge.
#[derive(Serialize)]
struct LedgerFile<'a> {
    #[serde(with = "lacuna::jsonio::eps")]
    epsilon: f64,
    delta: f64,
    #[serde(with = "lacuna::jsonio::eps")]
    spent_epsilon: f64,
    spent_delta: f64,
    entries: &'a [lacuna::dp::LedgerEntry],
}

pub fn synthesize(a: &SynthesizeArgs) -> Result<()> {
    let schema = load_schema(&a.schema)?;
    let d = load_dataset(&a.input, &schema, &a.missing_token, "input")?;
    let method: Method = a.method.parse()?;
    let mut cfg = SynthConfig::new(method, a.epsilon, a.delta, a.seed);
    cfg.degree = a.degree;
    cfg.structure_fraction = a.structure_fraction;
    cfg.rows = a.rows;

    let (synth, ledger, artifact) = run_pipeline_full(&d, &cfg)?;

    prepare_output(&a.output)?;
    save_csv(&synth, a.output.join("synthetic.csv"), &a.missing_token)?;
    write_json(
        &a.output,
        "ledger.json",
        &LedgerFile {
            epsilon: ledger.epsilon,
            delta: ledger.delta,
            spent_epsilon: ledger.spent_epsilon(),
            spent_delta: ledger.spent_delta(),
            entries: ledger.entries(),
        },
    )?;
    if a.emit_model {
        write_json(&a.output, "model.json", &artifact)?;
    }
    write_manifest(
        &a.output,
        "synthesize",
        a,
        &[("input", &a.input), ("schema", &a.schema)],
        None,
    )
}

// ----------------------------------------------------------------- amplify

#[derive(Serialize)]
struct PlanFile<'a> {
    search: &'a str,
    /// Amplified over requested epsilon.
    multiplier: f64,
    plan: &'a AmplificationPlan,
    baseline: &'a BaselineReport,
}

#[derive(Serialize)]
struct ColumnwisePlanFile {
    search: &'static str,
    requested_epsilon: f64,
    amplified_epsilon: f64,
    multiplier: f64,
}

fn mode_name(mode: AmplifyMode) -> &'static str {
    match mode {
        AmplifyMode::Linear => "linear",
        AmplifyMode::Exact => "exact",
    }
}

pub fn amplify(a: &AmplifyArgs) -> Result<()> {
    let queries: Vec<MarginalQuery> = load_json(&a.queries, "queries")?;
    let phi: PhiEstimate = match (&a.phi_file, &a.from_mask) {
        (Some(f), None) => load_json(f, "phi")?,
        (None, Some(csv)) => {
            let schema_path = a.schema.as_ref().ok_or_else(|| {
                Error::invalid("--from-mask needs --schema to read the CSV")
            })?;
            let schema = load_schema(schema_path)?;
            estimate_phi(&load_dataset(csv, &schema, &a.missing_token, "mask source")?)?
        }
        (Some(_), Some(_)) => {
            return Err(Error::invalid("--phi-file and --from-mask are exclusive"));
        }
        (None, None) => {
            return Err(Error::invalid("provide --phi-file or --from-mask"));
        }
    };

    let modes: Vec<AmplifyMode> = match a.mode.as_str() {
        "linear" => vec![AmplifyMode::Linear],
        "exact" => vec![AmplifyMode::Exact],
        "both" => vec![AmplifyMode::Linear, AmplifyMode::Exact],
        other => {
            return Err(Error::invalid(format!(
                "unknown mode {other:?}; expected linear, exact, or both"
            )));
        }
    };

    prepare_output(&a.output)?;
    match a.search.as_str() {
        "columnwise" => {
            // one singleton query per attribute; unlisted attributes spend 0
            let mut per_attr = vec![0.0f64; phi.k()];
            let mut seen = vec![false; phi.k()];
            for q in &queries {
                let [attr] = q.attrs[..] else {
                    return Err(Error::invalid(
                        "columnwise pricing expects singleton queries, one per attribute",
                    ));
                };
                if attr >= phi.k() {
                    return Err(Error::invalid(format!(
                        "query attribute {attr} out of range for {} phi entries",
                        phi.k()
                    )));
                }
                if std::mem::replace(&mut seen[attr], true) {
                    return Err(Error::invalid(format!("attribute {attr} listed twice")));
                }
                per_attr[attr] = q.epsilon;
            }
            let amplified = columnwise_amplify(&phi, &per_attr)?;
            let requested: f64 = per_attr.iter().sum();
            write_json(
                &a.output,
                "plan-columnwise.json",
                &ColumnwisePlanFile {
                    search: "columnwise",
                    requested_epsilon: requested,
                    amplified_epsilon: amplified,
                    multiplier: amplified / requested,
                },
            )?;
        }
        search @ ("exact" | "greedy") => {
            for mode in modes {
                let plan = match search {
                    "exact" => optimal_partition(&queries, &phi, mode)?,
                    _ => greedy_partition(&queries, &phi, mode)?,
                };
                let baseline = naive_baseline(&queries, &phi, mode)?;
                write_json(
                    &a.output,
                    &format!("plan-{}.json", mode_name(mode)),
                    &PlanFile {
                        search,
                        multiplier: plan.amplified_epsilon / plan.requested_epsilon,
                        plan: &plan,
                        baseline: &baseline,
                    },
                )?;
            }
        }
        other => {
            return Err(Error::invalid(format!(
                "unknown search {other:?}; expected exact, greedy, or columnwise"
            )));
        }
    }

    let mut inputs: Vec<(&str, &Path)> = vec![("queries", a.queries.as_path())];
    if let Some(f) = &a.phi_file {
        inputs.push(("phi_file", f.as_path()));
    }
    if let Some(f) = &a.from_mask {
        inputs.push(("from_mask", f.as_path()));
    }
    if let Some(f) = &a.schema {
        inputs.push(("schema", f.as_path()));
    }
    write_manifest(&a.output, "amplify", a, &inputs, None)
}

// ---------------------------------------------------------------- evaluate

#[derive(Serialize)]
struct TargetStats {
    target: usize,
    name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    logistic_mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    logistic_std: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tree_mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tree_std: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    note: Option<String>,
}

#[derive(Serialize)]
struct F1Section {
    mean: f64,
    std: f64,
    per_target: Vec<TargetStats>,
}

#[derive(Serialize)]
struct EvalReport {
    distance: String,
    kway: BTreeMap<usize, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    f1: Option<F1Section>,
    seed: u64,
    repetitions: usize,
}

fn parse_targets(spec: &str, k: usize) -> Result<Vec<usize>> {
    if spec == "all" {
        return Ok((0..k).collect());
    }
    spec.split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| Error::invalid(format!("'{t}' is not a target index")))
        })
        .collect()
}

fn aggregate_f1(reps: &[(f64, Vec<TargetScore>)]) -> F1Section {
    let grands: Vec<f64> = reps.iter().map(|(g, _)| *g).collect();
    let (mean, std) = mean_std(&grands);
    let n_targets = reps[0].1.len();
    let mut per_target = Vec::with_capacity(n_targets);
    for i in 0..n_targets {
        let first = &reps[0].1[i];
        let collect = |pick: fn(&TargetScore) -> Option<f64>| -> Vec<f64> {
            reps.iter().filter_map(|(_, s)| pick(&s[i])).collect()
        };
        let logistic = collect(|s| s.logistic);
        let tree = collect(|s| s.tree);
        let stat = |vals: &[f64]| -> (Option<f64>, Option<f64>) {
            if vals.is_empty() {
                (None, None)
            } else {
                let (m, s) = mean_std(vals);
                (Some(m), Some(s))
            }
        };
        let (logistic_mean, logistic_std) = stat(&logistic);
        let (tree_mean, tree_std) = stat(&tree);
        per_target.push(TargetStats {
            target: first.target,
            name: first.name.clone(),
            logistic_mean,
            logistic_std,
            tree_mean,
            tree_std,
            note: reps.iter().find_map(|(_, s)| s[i].note.clone()),
        });
    }
    F1Section {
        mean,
        std,
        per_target,
    }
}

pub fn evaluate(a: &EvaluateArgs) -> Result<()> {
    if a.reps == 0 {
        return Err(Error::invalid("--reps must be at least 1"));
    }
    let kind: DistanceKind = a.distance.parse()?;
    let schema = load_schema(&a.schema)?;
    let real = load_dataset(&a.real, &schema, &a.missing_token, "real")?;
    let synth = load_dataset(&a.synthetic, &schema, &a.missing_token, "synthetic")?;

    let mut kway = BTreeMap::new();
    for &k in &a.kway {
        kway.insert(k, kway_distance_with(&real, &synth, k, kind)?);
    }

    let f1 = if a.f1 {
        let targets = parse_targets(&a.targets, schema.k())?;
        let mut reps = Vec::with_capacity(a.reps);
        for r in 0..a.reps {
            reps.push(f1_breakdown(&real, &synth, &targets, a.seed + r as u64)?);
        }
        Some(aggregate_f1(&reps))
    } else {
        None
    };

    let report = EvalReport {
        distance: kind.to_string(),
        kway,
        f1,
        seed: a.seed,
        repetitions: a.reps,
    };
    prepare_output(&a.output)?;
    write_json(&a.output, "report.json", &report)?;

    let mut csv = String::from("metric,key,value\n");
    for (k, v) in &report.kway {
        csv.push_str(&format!("kway,{k},{v}\n"));
    }
    if let Some(f1) = &report.f1 {
        csv.push_str(&format!("f1_mean,grand,{}\n", f1.mean));
        csv.push_str(&format!("f1_std,grand,{}\n", f1.std));
        for t in &f1.per_target {
            for (metric, value) in [
                ("f1_logistic_mean", t.logistic_mean),
                ("f1_logistic_std", t.logistic_std),
                ("f1_tree_mean", t.tree_mean),
                ("f1_tree_std", t.tree_std),
            ] {
                if let Some(v) = value {
                    csv.push_str(&format!("{metric},{},{v}\n", t.name));
                }
            }
        }
    }
    std::fs::write(a.output.join("report.csv"), csv)?;

    write_manifest(
        &a.output,
        "evaluate",
        a,
        &[
            ("real", &a.real),
            ("synthetic", &a.synthetic),
            ("schema", &a.schema),
        ],
        None,
    )
}

// -------------------------------------------------------------- accountant

fn orders_to(alpha_max: u32) -> Result<Vec<u32>> {
    if alpha_max < 2 {
        return Err(Error::invalid("--alpha-max must be at least 2"));
    }
    Ok((2..=alpha_max).collect())
}

fn parse_form(s: &str) -> Result<SgmForm> {
    match s {
        "moment" => Ok(SgmForm::Moment),
        "log-moment" | "log_moment" => Ok(SgmForm::LogMoment),
        other => Err(Error::invalid(format!(
            "unknown form {other:?}; expected moment or log-moment"
        ))),
    }
}

/// Print a report to stdout and, when an output directory was given, also
/// write report.json plus a manifest there.
fn emit_report<C: Serialize, R: Serialize>(
    command: &str,
    config: &C,
    output: Option<&PathBuf>,
    inputs: &[(&str, &Path)],
    report: &R,
) -> Result<()> {
    let json = to_json_precise(report)?;
    print!("{json}");
    if let Some(dir) = output {
        prepare_output(dir)?;
        write_json(dir, "report.json", report)?;
        write_manifest(dir, command, config, inputs, None)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct SgmReport {
    sigma: f64,
    rate: f64,
    sensitivity: f64,
    form: String,
    orders: Vec<u32>,
    values: Vec<f64>,
}

pub fn accountant_sgm(a: &SgmArgs) -> Result<()> {
    let form = parse_form(&a.form)?;
    let params = SgmParams::new(a.sigma, a.rate, a.sensitivity)?;
    let orders = orders_to(a.alpha_max)?;
    let values = orders
        .iter()
        .map(|&alpha| sgm_rdp(&params, alpha, form))
        .collect::<Result<Vec<f64>>>()?;
    emit_report(
        "accountant-sgm",
        a,
        a.output.as_ref(),
        &[],
        &SgmReport {
            sigma: a.sigma,
            rate: a.rate,
            sensitivity: a.sensitivity,
            form: a.form.clone(),
            orders,
            values,
        },
    )
}

#[derive(Serialize)]
struct MisganReport {
    steps: u64,
    generator_interval: u64,
    batch: u64,
    data_size: u64,
    sigma: f64,
    delta: f64,
    release_count: u64,
    orders: Vec<u32>,
    values: Vec<f64>,
    epsilon: f64,
}

pub fn accountant_misgan(a: &MisganArgs) -> Result<()> {
    let params =
        MisganAccountingParams::new(a.steps, a.generator_interval, a.batch, a.data_size, a.sigma)?;
    let orders = orders_to(a.alpha_max)?;
    let curve = misgan_curve(&params, &orders, SgmForm::LogMoment)?;
    let epsilon = rdp_to_dp(&curve, a.delta)?;
    emit_report(
        "accountant-misgan",
        a,
        a.output.as_ref(),
        &[],
        &MisganReport {
            steps: a.steps,
            generator_interval: a.generator_interval,
            batch: a.batch,
            data_size: a.data_size,
            sigma: a.sigma,
            delta: a.delta,
            release_count: params.release_count(),
            orders: curve.orders().to_vec(),
            values: curve.values().to_vec(),
            epsilon,
        },
    )
}

/// Curve files carry "orders" and "values" arrays; any other keys (e.g. in a
/// report produced by sgm or misgan) are ignored.
#[derive(Deserialize)]
struct CurveFile {
    orders: Vec<u32>,
    values: Vec<f64>,
}

#[derive(Serialize)]
struct ConvertReport {
    delta: f64,
    epsilon: f64,
}

pub fn accountant_convert(a: &ConvertArgs) -> Result<()> {
    let curve_file: CurveFile = load_json(&a.curve_file, "curve")?;
    let curve = RdpCurve::new(curve_file.orders, curve_file.values)?;
    let epsilon = rdp_to_dp(&curve, a.delta)?;
    emit_report(
        "accountant-convert",
        a,
        a.output.as_ref(),
        &[("curve_file", a.curve_file.as_path())],
        &ConvertReport {
            delta: a.delta,
            epsilon,
        },
    )
}

#[derive(Serialize)]
struct SigmaSearchReport {
    target_epsilon: f64,
    delta: f64,
    sigma: f64,
    achieved_epsilon: f64,
}

pub fn accountant_sigma_search(a: &SigmaSearchArgs) -> Result<()> {
    let orders = orders_to(a.alpha_max)?;
    // the sigma field is a placeholder; the search overrides it
    let params =
        MisganAccountingParams::new(a.steps, a.generator_interval, a.batch, a.data_size, 1.0)?;
    let sigma = sigma_for_budget(a.target_epsilon, a.delta, &params, &orders)?;
    let tuned =
        MisganAccountingParams::new(a.steps, a.generator_interval, a.batch, a.data_size, sigma)?;
    let achieved = rdp_to_dp(&misgan_curve(&tuned, &orders, SgmForm::LogMoment)?, a.delta)?;
    emit_report(
        "accountant-sigma-search",
        a,
        a.output.as_ref(),
        &[],
        &SigmaSearchReport {
            target_epsilon: a.target_epsilon,
            delta: a.delta,
            sigma,
            achieved_epsilon: achieved,
        },
    )
}

// ------------------------------------------------------------------- bench

pub fn bench(a: &BenchArgs) -> Result<()> {
    let schema = load_schema(&a.schema)?;
    let d = load_dataset(&a.input, &schema, &a.missing_token, "input")?;
    let methods = a
        .methods
        .iter()
        .map(|m| m.parse::<Method>())
        .collect::<Result<Vec<Method>>>()?;
    let mechanisms = a
        .mechanisms
        .iter()
        .map(|m| m.parse::<GridMechanism>())
        .collect::<Result<Vec<GridMechanism>>>()?;
    let spec = GridSpec {
        methods,
        mechanisms,
        rates: a.rates.clone(),
        epsilons: a.epsilons.clone(),
        delta: a.delta,
        ks: a.ks.clone(),
        f1_targets: a.f1_targets.clone().unwrap_or_default(),
        repetitions: a.reps,
        seed: a.seed,
    };
    let rows = run_grid(&d, &spec)?;
    prepare_output(&a.output)?;
    std::fs::write(a.output.join("bench.csv"), grid_csv(&rows))?;
    write_manifest(
        &a.output,
        "bench",
        a,
        &[("input", &a.input), ("schema", &a.schema)],
        None,
    )
}
