use std::io::Write;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};
use slipway_core::dataset::{Dataset, RawInputs};
use slipway_core::eval::{ablation_table, randomized_search, roc_csv, run_benchmark, stream_rng, BenchmarkConfig};
use slipway_core::explain::{global_importance, shap_values, ExplanationExport};
use slipway_core::features::is_weather_feature;
use slipway_core::friction::{braking_action_of_prediction, estimate_mu_b, SLIPPERY_MU};
use slipway_core::gbt::LossKind;
use slipway_core::service::{scale_probability, ModelBundle, TrainOptions};
use slipway_core::synthgen::generate;
use slipway_core::time::format_timestamp;
use slipway_core::{Error, Result};

use crate::config::Config;
use crate::{Cli, Command};

pub fn dispatch(cli: Cli) -> Result<()> {
    let config = Config::load(cli.common.config.as_deref())?.with_seed(cli.common.seed);
    match cli.command {
        Command::Simulate { out } => simulate(&config, &out),
        Command::Ingest { data, out } => ingest(&config, &data, out.as_deref()),
        Command::Featurize { data, out, met_only } => featurize(&config, &data, &out, met_only),
        Command::Train { data, out, met_only, threshold } => train(&config, &data, &out, met_only, threshold),
        Command::Evaluate { data, met_only, out } => evaluate(&config, &data, met_only, out.as_deref()),
        Command::Predict { model, data, threshold, out } => predict(&model, &data, threshold, out.as_deref()),
        Command::Explain { model, data, landings, limit, regression, out } => {
            explain(&model, &data, &landings, limit, regression, out.as_deref())
        }
        Command::Serve { model, data, roc, addr } => {
            let addr = addr.unwrap_or_else(|| config.serve.addr.clone());
            crate::server::serve_blocking(&model, &data, roc.as_deref(), &config, &addr)
        }
    }
}

fn read_input(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::invalid(format!("cannot read {}: {e}", path.display())))
}

/// Writes to `out`, or to stdout when no path is given.
fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, bytes)?,
        None => std::io::stdout().lock().write_all(bytes)?,
    }
    Ok(())
}

fn to_json(v: &impl Serialize) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(v)?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn read_dataset(path: &Path) -> Result<(Dataset, String)> {
    let bytes = read_input(path)?;
    let hash = hex::encode(Sha256::digest(&bytes));
    let data = Dataset::read_csv(bytes.as_slice()).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?;
    if data.is_empty() {
        return Err(Error::invalid(format!("{}: no landings", path.display())));
    }
    Ok((data, hash))
}

fn simulate(config: &Config, out: &Path) -> Result<()> {
    let data = generate(&config.simulate)?;
    data.write_dir(out)?;
    let limited = data.truth.iter().filter(|t| t.friction_limited).count();
    eprintln!(
        "wrote {} landings on {} runways to {} ({} friction limited, {:.2}% slippery, law base {:.4})",
        data.landings.len(),
        data.weather.len(),
        out.display(),
        limited,
        100.0 * data.positive_rate,
        data.law_base
    );
    Ok(())
}

fn ingest(config: &Config, dir: &Path, out: Option<&Path>) -> Result<()> {
    let raw = RawInputs::read_dir(dir)?;
    let opts = &config.assembly;
    opts.aero.validate()?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["landing_id", "runway", "touchdown_time", "mu_b", "friction_limited", "slippery"])?;
    let mut skipped = 0;
    for l in &raw.landings {
        match estimate_mu_b(l, &opts.aero, opts.aggregation) {
            Ok(f) => w.write_record([
                l.landing_id.clone(),
                l.runway.clone(),
                format_timestamp(&l.touchdown_time),
                slipway_core::features::io::fmt_f64(f.mu_b),
                f.friction_limited.to_string(),
                f.slippery.to_string(),
            ])?,
            Err(e) if e.is_input_error() => {
                skipped += 1;
                eprintln!("skipped {}: {e}", l.landing_id);
            }
            Err(e) => return Err(e),
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    emit(out, &bytes)?;
    let reports: usize = raw.snowtams.values().map(|h| h.reports().len()).sum();
    eprintln!(
        "{} runways, {} weather minutes, {} reports, {} landings ({} skipped)",
        raw.weather.len(),
        raw.weather.values().map(|s| s.len()).sum::<usize>(),
        reports,
        raw.landings.len(),
        skipped
    );
    Ok(())
}

fn featurize(config: &Config, dir: &Path, out: &Path, met_only: bool) -> Result<()> {
    let raw = RawInputs::read_dir(dir)?;
    let mut data = raw.assemble(&config.assembly)?;
    if met_only {
        for r in &mut data.rows {
            for (i, v) in r.features.values.iter_mut().enumerate() {
                if !is_weather_feature(i) {
                    *v = f64::NAN;
                }
            }
        }
    }
    let mut bytes = Vec::new();
    data.write_csv(&mut bytes)?;
    std::fs::write(out, bytes)?;
    for s in &data.skipped {
        eprintln!("skipped {}: {}", s.landing_id, s.reason);
    }
    eprintln!("wrote {} rows to {}", data.len(), out.display());
    Ok(())
}

/// Runway names in feature order, checked against the runway column.
fn runways_of(data: &Dataset) -> Result<Vec<String>> {
    let mut names: Vec<String> = data.rows.iter().map(|r| r.runway.clone()).collect();
    names.sort();
    names.dedup();
    let col = slipway_core::features::feature_index("runway").expect("schema has a runway column");
    for r in &data.rows {
        let expected = names.iter().position(|n| *n == r.runway).unwrap_or(0) as f64;
        if r.features.values[col] != expected {
            return Err(Error::invalid(format!(
                "landing {}: runway feature {} does not match runway {} (every runway needs landings)",
                r.landing_id, r.features.values[col], r.runway
            )));
        }
    }
    Ok(names)
}

fn train(config: &Config, path: &Path, out: &Path, met_only: bool, threshold: Option<f64>) -> Result<()> {
    let (data, hash) = read_dataset(path)?;
    let runways = runways_of(&data)?;
    let t = &config.train;
    let x = data.matrix(met_only)?;
    let labels = data.labels();
    let y: Vec<f64> = labels.iter().map(|&l| f64::from(u8::from(l))).collect();
    let cls = randomized_search(&x, &y, &labels, LossKind::Logistic, &t.classifier, &t.search, &mut stream_rng(t.search.seed, 0))?;

    let limited = data.limited_rows();
    let mu: Vec<f64> = limited.iter().map(|&i| data.rows[i].mu_b).collect();
    let strata: Vec<bool> = mu.iter().map(|&m| m <= SLIPPERY_MU).collect();
    let reg = randomized_search(
        &x.select_rows(&limited),
        &mu,
        &strata,
        LossKind::SquaredError,
        &t.regressor,
        &t.search,
        &mut stream_rng(t.search.seed, 1),
    )?;
    let opts = TrainOptions {
        classifier: cls.candidates[cls.chosen].clone(),
        regressor: reg.candidates[reg.chosen].clone(),
        met_only,
        seed: t.search.seed,
        background_rows: t.background_rows,
        expected_positive_rate: threshold.or(t.expected_positive_rate),
    };
    let bundle = ModelBundle::train(&data, runways, hash, &opts)?;
    bundle.save(out)?;
    eprintln!(
        "classifier: {} trees, inner AUC {:.4}; regressor: {} trees, inner MAE {:.4}; threshold {:.4}; wrote {}",
        bundle.classifier.trees.len(),
        cls.scores[cls.chosen],
        bundle.regressor.trees.len(),
        -reg.scores[reg.chosen],
        bundle.expected_positive_rate,
        out.display()
    );
    Ok(())
}

fn evaluate(config: &Config, path: &Path, met_only: bool, out: Option<&Path>) -> Result<()> {
    let (data, _) = read_dataset(path)?;
    let full_cfg = BenchmarkConfig { met_only: false, ..config.evaluate.clone() };
    let full = run_benchmark(&data, &full_cfg)?;
    print!("{}", full.render());
    let met = if met_only {
        let met = run_benchmark(&data, &BenchmarkConfig { met_only: true, ..full_cfg })?;
        print!("\n{}", ablation_table(&full, &met)?.render());
        Some(met)
    } else {
        None
    };
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.json"), to_json(&full)?)?;
        std::fs::write(dir.join("roc.csv"), roc_csv(&full.roc))?;
        if let Some(met) = &met {
            std::fs::write(dir.join("report_met_only.json"), to_json(met)?)?;
            std::fs::write(dir.join("ablation.txt"), ablation_table(&full, met)?.render())?;
        }
    }
    Ok(())
}

fn load_bundle(path: &Path) -> Result<ModelBundle> {
    let text = String::from_utf8(read_input(path)?).map_err(|_| Error::invalid(format!("{} is not UTF-8", path.display())))?;
    ModelBundle::from_json(&text).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))
}

fn predict(model: &Path, path: &Path, threshold: Option<f64>, out: Option<&Path>) -> Result<()> {
    let bundle = load_bundle(model)?;
    let (data, _) = read_dataset(path)?;
    let t = threshold.unwrap_or(bundle.expected_positive_rate);
    let x = data.matrix(bundle.manifest.met_only)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["landing_id", "runway", "touchdown_time", "probability", "scaled_pct", "is_slippery", "predicted_mu", "braking_action"])?;
    for (i, r) in data.rows.iter().enumerate() {
        let p = bundle.classifier.predict_proba(x.row(i))?;
        let scaled = scale_probability(p, t)?;
        let mu = bundle.regressor.predict_margin(x.row(i));
        w.write_record([
            r.landing_id.clone(),
            r.runway.clone(),
            format_timestamp(&r.touchdown_time),
            p.to_string(),
            format!("{scaled:.2}"),
            (scaled >= 50.0).to_string(),
            mu.to_string(),
            braking_action_of_prediction(mu).level().to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    emit(out, &bytes)
}

#[derive(Serialize)]
struct ExplainedLanding {
    landing_id: String,
    #[serde(flatten)]
    explanation: ExplanationExport,
}

#[derive(Serialize)]
struct ExplainOutput {
    model: &'static str,
    /// Features by mean |phi| over the explained landings.
    global_order: Vec<String>,
    landings: Vec<ExplainedLanding>,
}

fn explain(model: &Path, path: &Path, ids: &[String], limit: usize, regression: bool, out: Option<&Path>) -> Result<()> {
    let bundle = load_bundle(model)?;
    let (data, _) = read_dataset(path)?;
    let rows: Vec<usize> = if ids.is_empty() {
        (0..data.len().min(limit)).collect()
    } else {
        ids.iter()
            .map(|id| {
                data.rows
                    .iter()
                    .position(|r| r.landing_id == *id)
                    .ok_or_else(|| Error::NotFound(format!("landing `{id}` is not in {}", path.display())))
            })
            .collect::<Result<_>>()?
    };
    if rows.is_empty() {
        return Err(Error::invalid("nothing to explain"));
    }
    let (name, ensemble, background) = if regression {
        ("regressor", &bundle.regressor, &bundle.regressor_background)
    } else {
        ("classifier", &bundle.classifier, &bundle.classifier_background)
    };
    let x = data.matrix(bundle.manifest.met_only)?;
    let explanations = rows.iter().map(|&i| shap_values(ensemble, x.row(i), background)).collect::<Result<Vec<_>>>()?;
    let global = global_importance(&explanations)?;
    let output = ExplainOutput {
        model: name,
        global_order: global.order.into_iter().take(20).collect(),
        landings: rows
            .iter()
            .zip(&explanations)
            .map(|(&i, e)| ExplainedLanding { landing_id: data.rows[i].landing_id.clone(), explanation: e.export() })
            .collect(),
    };
    emit(out, &to_json(&output)?)
}
