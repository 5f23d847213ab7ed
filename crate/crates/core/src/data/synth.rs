//! Seeded synthetic housing data with known coefficient structure.
//!
//! * `geo`: coefficients vary smoothly over space, attributes are uniform
//!   and independent of location.
//! * `attr`: records belong to attribute clusters (building types) with their
//!   own coefficients, placed uniformly at random so clusters interleave in
//!   space.
//! * `mixed`: cluster-distributed attributes with coefficients
//!   `mix * geo + (1 - mix) * cluster`.
//!
//! Every table also carries distances to randomly placed points of interest
//! and a land-use category; neither enters the price.

use std::f64::consts::PI;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::schema::Schema;
use super::table::{dummy_encode, CategoricalColumn, ColumnKind, Covariate, ObservationTable};
use crate::distance::Coordinate;
use crate::error::{Error, Result};
use crate::wls::Coefficients;

pub const FLOOR_AREA: &str = "floor_area";
pub const HOUSE_AGE: &str = "house_age";
pub const LAND_USE: &str = "land_use";

const POI_NAMES: [&str; 11] = [
    "museum",
    "library",
    "hotel",
    "convenience_store",
    "train_station",
    "school",
    "gas_station",
    "temple",
    "police_station",
    "restaurant",
    "parking_lot",
];
const LAND_USES: [&str; 3] = ["commercial", "mixed", "residential"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Geo,
    Attr,
    Mixed,
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "geo" => Ok(Regime::Geo),
            "attr" => Ok(Regime::Attr),
            "mixed" => Ok(Regime::Mixed),
            other => Err(Error::UnknownRegime(other.to_owned())),
        }
    }
}

/// `base + amplitude * sin(2 pi (wave_u * s_u + wave_v * s_v) + phase)`, where
/// `s` is the coordinate rescaled to the unit square.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Surface {
    pub base: f64,
    pub amplitude: f64,
    pub wave_u: f64,
    pub wave_v: f64,
    pub phase: f64,
}

impl Surface {
    pub fn at(&self, su: f64, sv: f64) -> f64 {
        self.base + self.amplitude * (2.0 * PI * (self.wave_u * su + self.wave_v * sv) + self.phase).sin()
    }
}

/// Coefficient surfaces for intercept, floor area and house age.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceParams {
    pub intercept: Surface,
    pub floor_area: Surface,
    pub house_age: Surface,
}

impl Default for SurfaceParams {
    fn default() -> Self {
        Self {
            intercept: Surface {
                base: 800.0,
                amplitude: 300.0,
                wave_u: 0.5,
                wave_v: 0.5,
                phase: 0.0,
            },
            floor_area: Surface {
                base: 12.0,
                amplitude: 4.0,
                wave_u: 0.0,
                wave_v: 0.75,
                phase: 0.3,
            },
            house_age: Surface {
                base: -8.0,
                amplitude: 4.0,
                wave_u: 0.75,
                wave_v: 0.0,
                phase: 1.0,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterParams {
    pub name: String,
    /// Relative frequency; normalized over all clusters.
    pub share: f64,
    pub area_mean: f64,
    pub area_sd: f64,
    pub age_mean: f64,
    pub age_sd: f64,
    /// Intercept, floor-area slope, house-age slope.
    pub coefficients: [f64; 3],
}

/// Four building types. Age lowers the price level of compact units but
/// raises it for large ones, an interaction a single global plane in floor
/// area and age cannot follow.
pub fn default_clusters() -> Vec<ClusterParams> {
    let cluster = |name: &str, share, area: (f64, f64), age: (f64, f64), coefficients| ClusterParams {
        name: name.into(),
        share,
        area_mean: area.0,
        area_sd: area.1,
        age_mean: age.0,
        age_sd: age.1,
        coefficients,
    };
    vec![
        cluster("new-compact", 0.3, (60.0, 10.0), (5.0, 3.0), [400.0, 22.0, -10.0]),
        cluster("old-compact", 0.25, (60.0, 10.0), (35.0, 5.0), [200.0, 12.0, -6.0]),
        cluster("new-large", 0.25, (150.0, 20.0), (8.0, 4.0), [300.0, 14.0, -10.0]),
        cluster("old-large", 0.2, (150.0, 20.0), (30.0, 5.0), [1000.0, 18.0, -12.0]),
    ]
}

fn default_extent() -> f64 {
    10_000.0
}
fn default_mix() -> f64 {
    0.5
}
fn default_poi_count() -> usize {
    10
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub regime: Regime,
    pub n: usize,
    /// Standard deviation of the additive price noise (10k NTD).
    pub sigma: f64,
    pub seed: u64,
    /// Side of the square study area in meters.
    #[serde(default = "default_extent")]
    pub extent: f64,
    #[serde(default)]
    pub surface: SurfaceParams,
    #[serde(default = "default_clusters")]
    pub clusters: Vec<ClusterParams>,
    /// Weight of the geographic component in the `mixed` regime.
    #[serde(default = "default_mix")]
    pub mix: f64,
    #[serde(default = "default_poi_count")]
    pub poi_count: usize,
    #[serde(default = "default_true")]
    pub land_use: bool,
}

impl SyntheticConfig {
    pub fn new(regime: Regime, n: usize, sigma: f64, seed: u64) -> Self {
        Self {
            regime,
            n,
            sigma,
            seed,
            extent: default_extent(),
            surface: SurfaceParams::default(),
            clusters: default_clusters(),
            mix: default_mix(),
            poi_count: default_poi_count(),
            land_use: true,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Geographic coefficient surfaces at a coordinate.
    pub fn surface_coefficients(&self, c: Coordinate) -> Coefficients {
        let (su, sv) = (c.u / self.extent, c.v / self.extent);
        Coefficients(vec![
            self.surface.intercept.at(su, sv),
            self.surface.floor_area.at(su, sv),
            self.surface.house_age.at(su, sv),
        ])
    }

    fn validate(&self) -> Result<()> {
        if self.n < 20 {
            return Err(Error::Parameter(format!("synthetic n must be >= 20, got {}", self.n)));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::Parameter("sigma must be finite and >= 0".into()));
        }
        if !(self.extent > 0.0 && self.extent.is_finite()) {
            return Err(Error::Parameter("extent must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.mix) {
            return Err(Error::Parameter("mix must lie in [0, 1]".into()));
        }
        if self.regime != Regime::Geo
            && (self.clusters.is_empty() || self.clusters.iter().any(|c| !(c.share > 0.0)))
        {
            return Err(Error::Parameter("clusters need positive shares".into()));
        }
        Ok(())
    }
}

/// Generated table plus the generator's ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub table: ObservationTable,
    pub schema: Schema,
    /// True coefficients (intercept, floor area, house age) per record.
    pub truth: Vec<Coefficients>,
    /// Noiseless price per record.
    pub signal: Vec<f64>,
    /// Cluster index per record (`None` in the `geo` regime).
    pub cluster: Vec<Option<usize>>,
}

pub fn poi_names(count: usize) -> Vec<String> {
    (0..count)
        .map(|k| match POI_NAMES.get(k) {
            Some(name) => format!("dist_{name}"),
            None => format!("dist_poi_{k}"),
        })
        .collect()
}

pub fn generate_synthetic(config: &SyntheticConfig) -> Result<SyntheticData> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let extent = config.extent;
    let noise = Normal::new(0.0, config.sigma).map_err(|e| Error::Parameter(e.to_string()))?;
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");

    let pois: Vec<Coordinate> = (0..config.poi_count)
        .map(|_| Coordinate::new(rng.random::<f64>() * extent, rng.random::<f64>() * extent))
        .collect();
    let total_share: f64 = config.clusters.iter().map(|c| c.share).sum();

    let n = config.n;
    let mut coords = Vec::with_capacity(n);
    let mut area = Vec::with_capacity(n);
    let mut age = Vec::with_capacity(n);
    let mut land_use = Vec::with_capacity(n);
    let mut truth = Vec::with_capacity(n);
    let mut signal = Vec::with_capacity(n);
    let mut cluster = Vec::with_capacity(n);
    let mut response = Vec::with_capacity(n);

    for _ in 0..n {
        let c = Coordinate::new(rng.random::<f64>() * extent, rng.random::<f64>() * extent);
        let (a, g, k) = match config.regime {
            Regime::Geo => (
                40.0 + 160.0 * rng.random::<f64>(),
                45.0 * rng.random::<f64>(),
                None,
            ),
            Regime::Attr | Regime::Mixed => {
                let pick = rng.random::<f64>() * total_share;
                let mut acc = 0.0;
                let mut k = config.clusters.len() - 1;
                for (idx, cl) in config.clusters.iter().enumerate() {
                    acc += cl.share;
                    if pick < acc {
                        k = idx;
                        break;
                    }
                }
                let cl = &config.clusters[k];
                let a = cl.area_mean + cl.area_sd * std_normal.sample(&mut rng);
                let g = cl.age_mean + cl.age_sd * std_normal.sample(&mut rng);
                (a.max(15.0), g.max(0.0), Some(k))
            }
        };
        let lu = LAND_USES[rng.random_range(0..LAND_USES.len())];
        let beta = match (config.regime, k) {
            (Regime::Geo, _) => config.surface_coefficients(c),
            (Regime::Attr, Some(k)) => Coefficients(config.clusters[k].coefficients.to_vec()),
            (Regime::Mixed, Some(k)) => {
                let geo = config.surface_coefficients(c);
                let cl = config.clusters[k].coefficients;
                Coefficients(
                    geo.0
                        .iter()
                        .zip(cl)
                        .map(|(gb, cb)| config.mix * gb + (1.0 - config.mix) * cb)
                        .collect(),
                )
            }
            _ => unreachable!("cluster regimes always draw a cluster"),
        };
        let clean = beta.predict_covariates(&[a, g]);
        let eps = if config.sigma > 0.0 {
            noise.sample(&mut rng)
        } else {
            0.0
        };
        coords.push(c);
        area.push(a);
        age.push(g);
        land_use.push(lu.to_owned());
        truth.push(beta);
        signal.push(clean);
        response.push(clean + eps);
        cluster.push(k);
    }

    let mut covariates = vec![
        Covariate {
            name: FLOOR_AREA.into(),
            kind: ColumnKind::Continuous,
            values: area,
        },
        Covariate {
            name: HOUSE_AGE.into(),
            kind: ColumnKind::Continuous,
            values: age,
        },
    ];
    for (name, poi) in poi_names(config.poi_count).into_iter().zip(&pois) {
        covariates.push(Covariate {
            name,
            kind: ColumnKind::Continuous,
            values: coords.iter().map(|c| c.distance(poi)).collect(),
        });
    }
    let continuous: Vec<String> = covariates.iter().map(|c| c.name.clone()).collect();
    let mut categorical = Vec::new();
    if config.land_use {
        let col = CategoricalColumn {
            name: LAND_USE.into(),
            values: land_use,
        };
        covariates.extend(dummy_encode(&col));
        categorical.push(col);
    }
    let cat_names: Vec<String> = categorical.iter().map(|c| c.name.clone()).collect();

    let table = ObservationTable {
        ids: (0..n).map(|i| format!("s{i:05}")).collect(),
        coords,
        response,
        covariates,
        categorical,
    };
    table.validate()?;
    Ok(SyntheticData {
        table,
        schema: Schema::synthetic(&continuous, &cat_names),
        truth,
        signal,
        cluster,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::csvio::write_csv_to;

    #[test]
    fn noiseless_geo_matches_truth() {
        let cfg = SyntheticConfig::new(Regime::Geo, 50, 0.0, 1);
        let data = generate_synthetic(&cfg).unwrap();
        let t = &data.table;
        for i in 0..t.len() {
            let x = t.values_of(&[FLOOR_AREA.into(), HOUSE_AGE.into()], i).unwrap();
            assert_eq!(t.response[i], data.truth[i].predict_covariates(&x));
            assert_eq!(data.truth[i], cfg.surface_coefficients(t.coords[i]));
        }
    }

    #[test]
    fn same_seed_byte_identical() {
        let cfg = SyntheticConfig::new(Regime::Mixed, 60, 25.0, 9);
        let a = generate_synthetic(&cfg).unwrap();
        let b = generate_synthetic(&cfg).unwrap();
        let (mut wa, mut wb) = (Vec::new(), Vec::new());
        write_csv_to(&a.table, &a.schema, &mut wa).unwrap();
        write_csv_to(&b.table, &b.schema, &mut wb).unwrap();
        assert_eq!(wa, wb);
        let c = generate_synthetic(&SyntheticConfig { seed: 10, ..cfg }).unwrap();
        assert_ne!(a.table, c.table);
    }

    #[test]
    fn unknown_regime() {
        assert_eq!("spatial".parse::<Regime>().unwrap_err().kind(), "unknown-regime");
        assert_eq!("ATTR".parse::<Regime>().unwrap(), Regime::Attr);
    }

    #[test]
    fn small_n_rejected() {
        assert!(generate_synthetic(&SyntheticConfig::new(Regime::Geo, 19, 1.0, 0)).is_err());
    }

    #[test]
    fn layout() {
        let data = generate_synthetic(&SyntheticConfig::new(Regime::Attr, 40, 10.0, 2)).unwrap();
        let names = data.table.covariate_names();
        assert_eq!(names[0], FLOOR_AREA);
        assert_eq!(names[1], HOUSE_AGE);
        assert_eq!(names[2], "dist_museum");
        assert_eq!(data.table.continuous_names().len(), 12);
        assert!(names.iter().any(|n| n.starts_with("land_use=")));
        assert!(data.cluster.iter().all(Option::is_some));
    }

    #[test]
    fn config_json_defaults() {
        let cfg = SyntheticConfig::from_json(r#"{"regime":"attr","n":100,"sigma":5,"seed":3}"#).unwrap();
        assert_eq!(cfg, SyntheticConfig::new(Regime::Attr, 100, 5.0, 3));
    }
}
