use cwr_core::data::{generate_synthetic, load_csv, split, write_csv, Regime, Schema, SplitSpec, SyntheticConfig};
use cwr_core::eval::{
    build_grid_export, fit_model, run_batch, run_comparison, BatchCase, BatchManifest, ComparisonConfig, LatticeSpec,
    ModelConfig, ModelKind,
};

fn two_covariates() -> Vec<String> {
    vec!["floor_area".into(), "house_age".into()]
}

fn comparison(seed: u64) -> ComparisonConfig {
    ComparisonConfig {
        seed,
        covariates: Some(two_covariates()),
        models: vec![ModelKind::Ols, ModelKind::Gwr, ModelKind::Cwr],
        ..ComparisonConfig::default()
    }
}

#[test]
fn geo_regime_local_models_beat_ols_and_tie() {
    let data = generate_synthetic(&SyntheticConfig::new(Regime::Geo, 250, 100.0, 11)).unwrap();
    let r = run_comparison(&data.table, &comparison(11)).unwrap();
    let ols = r.test_rmse(ModelKind::Ols).unwrap();
    let gwr = r.test_rmse(ModelKind::Gwr).unwrap();
    let cwr = r.test_rmse(ModelKind::Cwr).unwrap();
    assert!(gwr < ols && cwr < ols, "ols {ols} gwr {gwr} cwr {cwr}");
    assert!(r.outcome(ModelKind::Cwr).unwrap().rate.unwrap() >= 0.9);
}

#[test]
fn attr_regime_cwr_beats_gwr() {
    let data = generate_synthetic(&SyntheticConfig::new(Regime::Attr, 250, 450.0, 5)).unwrap();
    let r = run_comparison(&data.table, &comparison(5)).unwrap();
    assert!(r.test_rmse(ModelKind::Cwr).unwrap() < r.test_rmse(ModelKind::Gwr).unwrap());
    assert!(r.outcome(ModelKind::Cwr).unwrap().rate.unwrap() < 1.0);
}

#[test]
fn comparison_reports_are_byte_identical() {
    let data = generate_synthetic(&SyntheticConfig::new(Regime::Mixed, 120, 100.0, 2)).unwrap();
    let mut cfg = comparison(2);
    cfg.models = ModelKind::ALL.to_vec();
    let a = run_comparison(&data.table, &cfg).unwrap().to_json().unwrap();
    let b = run_comparison(&data.table, &cfg).unwrap().to_json().unwrap();
    assert_eq!(a, b);
}

#[test]
fn noiseless_geo_grid_tracks_the_generator() {
    let cfg = SyntheticConfig::new(Regime::Geo, 400, 0.0, 21);
    let data = generate_synthetic(&cfg).unwrap();
    let table = data.table.select_covariates(&two_covariates()).unwrap();
    let (train, test) = split(&table, &SplitSpec { train_fraction: 0.8, seed: 21 }).unwrap();
    let model = fit_model(ModelKind::Gwr, &train, &two_covariates(), &ModelConfig::default()).unwrap();
    let export = build_grid_export(&model, &train, &test, LatticeSpec { nu: 25, nv: 25 }, None).unwrap();
    assert_eq!(export.grid.len(), 625);
    let mut rel: Vec<f64> = export
        .grid
        .iter()
        .map(|row| {
            let beta = cfg.surface_coefficients(cwr_core::distance::Coordinate::new(row.u, row.v));
            let truth = beta.predict_covariates(&row.covariates);
            ((row.predicted - truth) / truth).abs()
        })
        .collect();
    // Individual lattice points can miss by more: neighbour coefficients are
    // applied at covariate values far from the neighbours' own.
    let rms = (rel.iter().map(|e| e * e).sum::<f64>() / rel.len() as f64).sqrt();
    rel.sort_by(f64::total_cmp);
    let median = rel[rel.len() / 2];
    assert!(rms <= 0.05 && median <= 0.05, "rms {rms}, median {median}");
}

#[test]
fn residual_csv_round_trips_exactly() {
    let data = generate_synthetic(&SyntheticConfig::new(Regime::Attr, 100, 300.0, 4)).unwrap();
    let (train, test) = split(&data.table, &SplitSpec::default()).unwrap();
    let model = fit_model(ModelKind::Ols, &train, &two_covariates(), &ModelConfig::default()).unwrap();
    let export = build_grid_export(&model, &train, &test, LatticeSpec { nu: 2, nv: 2 }, None).unwrap();
    assert_eq!(export.grid.len(), 4);
    assert_eq!(export.residuals.len(), test.len());
    let mut buf = Vec::new();
    export.write_residual_csv(&mut buf).unwrap();
    let mut rdr = csv::Reader::from_reader(buf.as_slice());
    let mut rows = 0;
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let num = |k: usize| rec[k].parse::<f64>().unwrap();
        assert_eq!(num(3) - num(4), num(5));
        rows += 1;
    }
    assert_eq!(rows, test.len());
}

#[test]
fn batch_manifest_over_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut cases = Vec::new();
    for (k, regime) in [Regime::Geo, Regime::Attr].into_iter().enumerate() {
        let data = generate_synthetic(&SyntheticConfig::new(regime, 80, 50.0, k as u64)).unwrap();
        let name = format!("case{k}");
        write_csv(&data.table, &data.schema, dir.path().join(format!("{name}.csv"))).unwrap();
        std::fs::write(dir.path().join("schema.json"), data.schema.to_json().unwrap()).unwrap();
        cases.push(BatchCase {
            name: name.clone(),
            data: format!("{name}.csv").into(),
            schema: "schema.json".into(),
            config: None,
        });
    }
    let manifest = BatchManifest {
        defaults: Some(serde_json::json!({
            "covariates": ["floor_area", "house_age"],
            "rate": 0.5,
            "bandwidth": 0.2,
            "boost": {"stages": 10, "shrinkage": 0.1, "max_depth": 3, "min_leaf": 5},
        })),
        cases,
    };
    let report = run_batch(&manifest, dir.path()).unwrap();
    assert_eq!(report.summary.len(), 2);
    for row in &report.summary {
        assert!(row.error.is_none(), "{row:?}");
        assert_eq!(row.records, Some(80));
        assert_eq!(row.cwr_rate, Some(0.5));
        let expected = (row.gwr.unwrap() - row.cwr.unwrap()) / row.gwr.unwrap() * 100.0;
        assert_eq!(row.cwr_vs_gwr.unwrap(), expected);
    }
    let mut csv_out = Vec::new();
    report.write_summary_csv(&mut csv_out).unwrap();
    assert_eq!(String::from_utf8(csv_out).unwrap().lines().count(), 3);
}

#[test]
fn written_dataset_loads_back_for_comparison() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate_synthetic(&SyntheticConfig::new(Regime::Mixed, 60, 80.0, 8)).unwrap();
    let path = dir.path().join("d.csv");
    write_csv(&data.table, &data.schema, &path).unwrap();
    let schema = Schema::from_json(&data.schema.to_json().unwrap()).unwrap();
    let (table, report) = load_csv(&path, &schema).unwrap();
    assert_eq!(report.accepted, 60);
    assert_eq!(table, data.table);
}
