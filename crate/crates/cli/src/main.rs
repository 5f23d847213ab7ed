mod args;

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use serde_json::{json, Value};

use args::{Cli, Command, CompareArgs, DataArgs, FitArgs, ImportanceArgs, MapArgs, ModelArgs, PredictArgs, PredictModeArg, SplitArgs, SynthArgs};
use cwr_core::data::{generate_synthetic, load_csv, load_query_csv, split, write_csv, ObservationTable, Regime, Schema, SyntheticConfig};
use cwr_core::eval::{
    build_grid_export, fit_model, r_squared, rank_factors, resolve_covariates, rmse, run_batch, run_comparison, BatchManifest,
    ComparisonConfig, FactorSelection, FittedModel, LatticeSpec, ModelKind,
};
use cwr_core::local::{PredictMode, RateScoring, DEFAULT_NEIGHBORS};
use cwr_core::tree::{select_factors, BoostParams};
use cwr_core::wls::{fit_ols, DesignMatrix};
use cwr_core::{Error, Result};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if !e.use_stderr() {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let err = json!({"error": {"kind": "usage", "message": e.to_string().trim_end()}});
            eprintln!("{err}");
            return ExitCode::from(2);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let err = json!({"error": {"kind": e.kind(), "message": e.to_string()}});
            eprintln!("{err}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Synth(a) => synth(a),
        Command::Importance(a) => importance(a),
        Command::Fit(a) => fit(a),
        Command::Predict(a) => predict(a),
        Command::Compare(a) => compare(a),
        Command::Map(a) => map(a),
    }
}

fn print_json(value: &Value) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(std::fs::write(path, text)?)
}

fn create(path: &Path) -> Result<File> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(File::create(path)?)
}

/// Name the file in I/O errors.
fn with_path<T>(path: &Path, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Io(io) => Error::Io(std::io::Error::new(io.kind(), format!("{}: {io}", path.display()))),
        other => other,
    })
}

fn load_data(d: &DataArgs) -> Result<ObservationTable> {
    let schema = with_path(&d.schema, Schema::load(&d.schema))?;
    let (table, report) = with_path(&d.data, load_csv(&d.data, &schema))?;
    for r in &report.rejected {
        eprintln!("{}", json!({"warning": {"kind": "rejected-row", "row": r.row, "reason": r.reason}}));
    }
    Ok(table)
}

fn parse_keyword_number(value: &str, keyword: &str, what: &str) -> Result<Option<f64>> {
    if value.eq_ignore_ascii_case(keyword) {
        return Ok(None);
    }
    value
        .parse::<f64>()
        .map(Some)
        .map_err(|_| Error::Parameter(format!("{what} must be a number or `{keyword}`, got `{value}`")))
}

/// Start from the config file, if any, and apply the flags that were given.
fn comparison_config(m: &ModelArgs, s: &SplitArgs) -> Result<ComparisonConfig> {
    let base = match &m.config {
        Some(path) => serde_json::from_str(&std::fs::read_to_string(path)?)?,
        None => ComparisonConfig::default(),
    };
    apply_flags(base, m, s)
}

fn apply_flags(mut cfg: ComparisonConfig, m: &ModelArgs, s: &SplitArgs) -> Result<ComparisonConfig> {
    if let Some(seed) = s.seed {
        cfg.seed = seed;
    }
    if let Some(f) = s.train_frac {
        cfg.train_fraction = f;
    }
    if let Some(r) = &m.rate {
        cfg.model.rate = parse_keyword_number(r, "search", "--r")?;
    }
    if let Some(h) = &m.bandwidth {
        cfg.model.bandwidth = parse_keyword_number(h, "cv", "--bandwidth")?;
    }
    match (m.predict_mode, m.knn) {
        (Some(PredictModeArg::LocalFit), _) => cfg.model.predict_mode = PredictMode::LocalFit,
        (Some(PredictModeArg::KnnCoef), k) => {
            cfg.model.predict_mode = PredictMode::KnnCoef {
                k: k.unwrap_or(DEFAULT_NEIGHBORS),
            }
        }
        (None, Some(k)) => cfg.model.predict_mode = PredictMode::KnnCoef { k },
        (None, None) => {}
    }
    if m.strict_paper_scoring {
        cfg.model.scoring = RateScoring::InSample;
    }
    if let Some(c) = &m.covariates {
        cfg.covariates = Some(c.clone());
    }
    if let Some(a) = &m.attributes {
        cfg.model.attribute_columns = Some(a.clone());
    }
    if let Some(k) = m.select_factors {
        cfg.factor_selection = Some(FactorSelection {
            top_k: k,
            ..cfg.factor_selection.unwrap_or_default()
        });
    }
    if let Some(stages) = m.stages {
        cfg.model.boost.stages = stages;
    }
    if m.boost_without_coordinates {
        cfg.model.boost_coordinates = false;
    }
    Ok(cfg)
}

fn synth(a: SynthArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(path) => SyntheticConfig::from_json(&std::fs::read_to_string(path)?)?,
        None => {
            let regime: Regime = a
                .regime
                .as_deref()
                .ok_or_else(|| Error::Parameter("--regime or --config is required".into()))?
                .parse()?;
            SyntheticConfig::new(regime, 400, 0.0, 0)
        }
    };
    if let Some(r) = &a.regime {
        cfg.regime = r.parse()?;
    }
    if let Some(n) = a.n {
        cfg.n = n;
    }
    if let Some(s) = a.sigma {
        cfg.sigma = s;
    }
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    let data = generate_synthetic(&cfg)?;
    let schema_path = a.schema_out.clone().unwrap_or_else(|| a.out.with_extension("schema.json"));
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    write_csv(&data.table, &data.schema, &a.out)?;
    write_text(&schema_path, &data.schema.to_json()?)?;
    if let Some(path) = &a.truth_out {
        let mut wtr = csv::Writer::from_writer(create(path)?);
        wtr.write_record(["id", "intercept", "floor_area", "house_age", "signal", "cluster"])?;
        for i in 0..data.table.len() {
            let b = data.truth[i].as_slice();
            let cluster = data.cluster[i].map(|c| c.to_string()).unwrap_or_default();
            wtr.write_record([
                data.table.ids[i].clone(),
                b[0].to_string(),
                b[1].to_string(),
                b[2].to_string(),
                data.signal[i].to_string(),
                cluster,
            ])?;
        }
        wtr.flush()?;
    }
    // Share of price variance a global plane in floor area and age explains.
    let names = vec!["floor_area".to_string(), "house_age".to_string()];
    let t = data.table.select_covariates(&names)?;
    let x = DesignMatrix::from_covariate_rows(&t.covariate_rows())?;
    let fitted = cwr_core::wls::predict(&x, &fit_ols(&x, &t.response)?)?;
    print_json(&json!({
        "records": data.table.len(),
        "regime": cfg.regime,
        "seed": cfg.seed,
        "sigma": cfg.sigma,
        "data": a.out,
        "schema": schema_path,
        "ols_r_squared": r_squared(&t.response, &fitted)?,
    }))
}

fn importance(a: ImportanceArgs) -> Result<()> {
    let table = load_data(&a.data)?;
    let mut sel = FactorSelection {
        top_k: a.top_k,
        candidates: a.candidates.clone(),
        boost: BoostParams::default(),
    };
    if let Some(s) = a.stages {
        sel.boost.stages = s;
    }
    let report = rank_factors(&table, &sel)?;
    if let Some(path) = &a.out {
        report.write_csv(create(path)?)?;
    }
    let selected = select_factors(&report, a.top_k)?;
    print_json(&json!({"importance": report, "selected": selected}))
}

fn parse_model(name: &str) -> Result<ModelKind> {
    name.parse()
}

fn fit(a: FitArgs) -> Result<()> {
    let kind = parse_model(&a.model)?;
    let table = load_data(&a.data)?;
    let cfg = comparison_config(&a.model_args, &a.split)?;
    let (covariates, _) = resolve_covariates(&table, &cfg)?;
    let (train, test) = split(&table, &cfg.split_spec())?;
    let model = fit_model(kind, &train, &covariates, &cfg.model)?;
    write_text(&a.out, &model.to_json()?)?;
    print_json(&json!({
        "model": kind,
        "covariates": covariates,
        "rate": model.rate(),
        "bandwidth": model.bandwidth(),
        "train_records": train.len(),
        "test_records": test.len(),
        "train_rmse": rmse(&train.response, &model.predict(&train)?)?,
        "test_rmse": rmse(&test.response, &model.predict(&test)?)?,
        "out": a.out,
    }))
}

fn predict(a: PredictArgs) -> Result<()> {
    let model = with_path(&a.model_file, FittedModel::load(&a.model_file))?;
    let schema = with_path(&a.data.schema, Schema::load(&a.data.schema))?;
    let (table, _, has_response) = with_path(&a.data.data, load_query_csv(&a.data.data, &schema))?;
    let predicted = model.predict(&table)?;
    let sink: Box<dyn Write> = match &a.out {
        Some(p) => Box::new(create(p)?),
        None => Box::new(std::io::stdout()),
    };
    let mut wtr = csv::Writer::from_writer(sink);
    if has_response {
        wtr.write_record(["id", "u", "v", "actual", "predicted", "residual"])?;
    } else {
        wtr.write_record(["id", "u", "v", "predicted"])?;
    }
    for i in 0..table.len() {
        let c = table.coords[i];
        let mut rec = vec![table.ids[i].clone(), c.u.to_string(), c.v.to_string()];
        if has_response {
            rec.push(table.response[i].to_string());
        }
        rec.push(predicted[i].to_string());
        if has_response {
            rec.push((table.response[i] - predicted[i]).to_string());
        }
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

fn compare(a: CompareArgs) -> Result<()> {
    let manifest = match &a.manifest {
        Some(p) => Some(with_path(p, BatchManifest::load(p))?),
        None => None,
    };
    // Precedence: case overrides, then flags, then manifest defaults, then
    // the config file.
    let mut cfg = comparison_config(&a.model_args, &a.split)?;
    if let Some(Value::Object(defaults)) = manifest.as_ref().and_then(|m| m.defaults.as_ref()) {
        let mut base = serde_json::to_value(match &a.model_args.config {
            Some(path) => serde_json::from_str(&std::fs::read_to_string(path)?)?,
            None => ComparisonConfig::default(),
        })?;
        if let Value::Object(b) = &mut base {
            b.extend(defaults.clone());
        }
        cfg = apply_flags(serde_json::from_value(base)?, &a.model_args, &a.split)?;
    }
    if let Some(models) = &a.model {
        cfg.models = models.iter().map(|m| parse_model(m)).collect::<Result<_>>()?;
    }
    cfg.record_timings |= a.timings;

    if let (Some(manifest), Some(path)) = (manifest, &a.manifest) {
        let manifest = BatchManifest {
            defaults: Some(serde_json::to_value(&cfg)?),
            ..manifest
        };
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
        let report = run_batch(&manifest, base_dir)?;
        if let Some(path) = &a.summary_csv {
            report.write_summary_csv(create(path)?)?;
        }
        return emit(&a.out, &report.to_json()?);
    }

    let data = DataArgs {
        data: a.data.clone().ok_or_else(|| Error::Parameter("--data or --manifest is required".into()))?,
        schema: a.schema.clone().ok_or_else(|| Error::Parameter("--schema is required with --data".into()))?,
    };
    let table = load_data(&data)?;
    let report = run_comparison(&table, &cfg)?;
    if let Some(dir) = &a.residuals_dir {
        std::fs::create_dir_all(dir)?;
        for m in report.models.iter().filter(|m| m.is_ok()) {
            let path = dir.join(format!("residuals_{}.csv", m.model));
            report.write_residual_csv(m.model, File::create(path)?)?;
        }
    }
    emit(&a.out, &report.to_json()?)
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(p) => write_text(p, text),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn parse_grid(text: &str) -> Result<LatticeSpec> {
    let bad = || Error::Parameter(format!("--grid must look like 50x40, got `{text}`"));
    let (a, b) = text.split_once(['x', 'X']).ok_or_else(bad)?;
    Ok(LatticeSpec {
        nu: a.trim().parse().map_err(|_| bad())?,
        nv: b.trim().parse().map_err(|_| bad())?,
    })
}

fn map(a: MapArgs) -> Result<()> {
    let table = load_data(&a.data)?;
    let cfg = comparison_config(&a.model_args, &a.split)?;
    let (train, test) = split(&table, &cfg.split_spec())?;
    let model = match (&a.model_file, &a.model) {
        (Some(path), _) => with_path(path, FittedModel::load(path))?,
        (None, Some(name)) => {
            let (covariates, _) = resolve_covariates(&table, &cfg)?;
            fit_model(parse_model(name)?, &train, &covariates, &cfg.model)?
        }
        (None, None) => return Err(Error::Parameter("--model or --model-file is required".into())),
    };
    let query = match &a.query {
        None => None,
        Some(pairs) => {
            let mut values = Vec::new();
            for name in model.covariates() {
                let pair = pairs
                    .iter()
                    .find_map(|p| p.split_once('=').filter(|(k, _)| k.trim() == name))
                    .ok_or_else(|| Error::Parameter(format!("--query lacks a value for `{name}`")))?;
                values.push(
                    pair.1
                        .trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Parameter(format!("bad --query value for `{name}`")))?,
                );
            }
            Some(values)
        }
    };
    let export = build_grid_export(&model, &train, &test, parse_grid(&a.grid)?, query)?;
    let (grid, residuals) = export.write_files(&a.out, "")?;
    print_json(&json!({
        "model": model.kind(),
        "covariates": export.covariate_names,
        "grid_rows": export.grid.len(),
        "residual_rows": export.residuals.len(),
        "grid": grid,
        "residuals": residuals,
    }))
}
