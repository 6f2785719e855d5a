//! Exogenous processes and rolling forecasts for the storage benchmark.
//!
//! Demand and grid availability are deterministic seasonal curves. Prices are
//! a clamped sinusoid plus Gaussian noise, and each forecast origin sees the
//! realized path through fresh `N(0, sigma_f)` noise. Renewable output is a
//! base profile plus a sign-persistent error: the sign of the deviation keeps
//! its value with probability `rho_cross` each period, so the realized series
//! spends geometric runs above and below its profile. Renewable forecasts use
//! an independent error process of the same kind for every origin, scaled by
//! `sigma_f`.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Horizon;

/// `floor(max(0, 100 - 50 sin(5 pi t / T)))`.
pub fn demand(t: usize, horizon_t: usize) -> f64 {
    let arg = 5.0 * PI * t as f64 / horizon_t.max(1) as f64;
    (100.0 - 50.0 * arg.sin()).max(0.0).floor()
}

/// `min(max(90 - 50 sin(5 pi t / 2T), G_min), G_max)`.
pub fn grid_available(t: usize, horizon_t: usize, g_min: f64, g_max: f64) -> f64 {
    let arg = 5.0 * PI * t as f64 / (2.0 * horizon_t.max(1) as f64);
    (90.0 - 50.0 * arg.sin()).max(g_min).min(g_max)
}

/// Forecasts `f_{t,t'}` for `t <= t' <= min(T, t + H)`, stored by origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastMatrix {
    rows: Vec<Vec<f64>>,
}

impl ForecastMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        Self { rows }
    }

    /// Forecast made at `origin` for period `target`.
    pub fn get(&self, origin: usize, target: usize) -> f64 {
        self.rows[origin][target - origin]
    }

    /// All forecasts made at `origin`, starting with the target `origin` itself.
    pub fn origin(&self, origin: usize) -> &[f64] {
        &self.rows[origin]
    }

    pub fn origins(&self) -> usize {
        self.rows.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceModel {
    pub p_min: f64,
    pub p_max: f64,
    pub mu_p: f64,
    pub sigma_p: f64,
    pub sigma_f: f64,
}

impl PriceModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.p_min < self.p_max) {
            return Err(Error::InvalidParameters(format!("p_min {} must be below p_max {}", self.p_min, self.p_max)));
        }
        if !(self.sigma_p >= 0.0 && self.sigma_f >= 0.0 && self.mu_p.is_finite()) {
            return Err(Error::InvalidParameters("price noise parameters must be finite and nonnegative".into()));
        }
        Ok(())
    }

    pub fn clamp(&self, p: f64) -> f64 {
        p.max(self.p_min).min(self.p_max)
    }

    /// Noise-free seasonal price level at `t`.
    pub fn seasonal(&self, t: usize, horizon_t: usize) -> f64 {
        let arg = 5.0 * PI * t as f64 / (2.0 * horizon_t.max(1) as f64);
        (self.p_max + self.p_min) / 2.0 - (self.p_max - self.p_min) * arg.sin()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenewableModel {
    /// Deterministic mean output for `t = 0..=T`.
    pub base_profile: Vec<f64>,
    /// Probability that the error keeps its sign from one period to the next.
    pub rho_cross: f64,
    /// Scale of realized deviations from the base profile.
    pub sigma_e: f64,
    /// Forecast-quality multiplier on forecast errors.
    pub sigma_f: f64,
    /// Forecast errors at lead `tau` are scaled by `tau^lead_exponent`.
    /// Zero (the default) keeps the error scale flat across leads.
    #[serde(default)]
    pub lead_exponent: f64,
}

impl RenewableModel {
    /// `max(0, level + amplitude sin(2 pi t / T))` for `t = 0..=T`.
    pub fn sinusoidal_profile(level: f64, amplitude: f64, horizon_t: usize) -> Vec<f64> {
        (0..=horizon_t)
            .map(|t| (level + amplitude * (2.0 * PI * t as f64 / horizon_t.max(1) as f64).sin()).max(0.0))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho_cross > 0.0 && self.rho_cross < 1.0) {
            return Err(Error::InvalidParameters(format!("rho_cross must lie in (0, 1), got {}", self.rho_cross)));
        }
        if !(self.sigma_e >= 0.0 && self.sigma_f >= 0.0 && self.lead_exponent >= 0.0) {
            return Err(Error::InvalidParameters("renewable scales must be nonnegative".into()));
        }
        if self.base_profile.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameters("base profile must be finite".into()));
        }
        Ok(())
    }

    pub fn lead_scale(&self, lead: usize) -> f64 {
        (lead as f64).powf(self.lead_exponent)
    }
}

/// Sign-persistent error process: `s_k |z_k|` with `z_k ~ N(0, 1)` and the
/// sign `s_k` flipping with probability `1 - rho` per step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossingProcess {
    pub rho: f64,
}

impl CrossingProcess {
    pub fn sample(&self, len: usize, rng: &mut impl Rng) -> Vec<f64> {
        let mut out = Vec::with_capacity(len);
        let mut sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        for k in 0..len {
            if k > 0 && rng.random::<f64>() >= self.rho {
                sign = -sign;
            }
            let z: f64 = StandardNormal.sample(rng);
            out.push(sign * z.abs());
        }
        out
    }
}

/// Realized prices and their rolling forecasts.
pub fn generate_prices(m: &PriceModel, horizon: Horizon, rng: &mut impl Rng) -> (Vec<f64>, ForecastMatrix) {
    let t_end = horizon.t;
    let p: Vec<f64> = (0..=t_end)
        .map(|t| {
            let eps: f64 = StandardNormal.sample(rng);
            m.clamp(m.seasonal(t, t_end) + m.mu_p + m.sigma_p * eps)
        })
        .collect();
    let rows = (0..=t_end)
        .map(|origin| {
            let last = (origin + horizon.h).min(t_end);
            let mut row = Vec::with_capacity(last - origin + 1);
            row.push(p[origin]);
            for target in origin + 1..=last {
                let z: f64 = StandardNormal.sample(rng);
                row.push(m.clamp(p[target] + m.sigma_f * z));
            }
            row
        })
        .collect();
    (p, ForecastMatrix::from_rows(rows))
}

/// Realized renewable output and its rolling forecasts.
pub fn generate_renewables(m: &RenewableModel, horizon: Horizon, rng: &mut impl Rng) -> (Vec<f64>, ForecastMatrix) {
    let t_end = horizon.t;
    let crossing = CrossingProcess { rho: m.rho_cross };
    let deviation = crossing.sample(t_end + 1, rng);
    let e: Vec<f64> = (0..=t_end).map(|t| (m.base_profile[t] + m.sigma_e * deviation[t]).max(0.0)).collect();
    let rows = (0..=t_end)
        .map(|origin| {
            let last = (origin + horizon.h).min(t_end);
            let eta = crossing.sample(last - origin, rng);
            let mut row = Vec::with_capacity(last - origin + 1);
            row.push(e[origin]);
            for (k, target) in (origin + 1..=last).enumerate() {
                let err = m.sigma_f * m.lead_scale(k + 1) * eta[k];
                row.push((e[target] - err).max(0.0));
            }
            row
        })
        .collect();
    (e, ForecastMatrix::from_rows(rows))
}

/// SplitMix64 finalizer. Derived seeds are `mix(seed ^ mix(tag))`.
pub fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for stream `tag` of `seed`.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    mix(seed ^ mix(tag))
}

const PRICE_STREAM: u64 = 1;
const RENEWABLE_STREAM: u64 = 2;

/// Everything needed to draw sample paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioModel {
    pub horizon: Horizon,
    pub price: PriceModel,
    pub renewable: RenewableModel,
    pub g_min: f64,
    pub g_max: f64,
}

impl ScenarioModel {
    pub fn validate(&self) -> Result<()> {
        self.price.validate()?;
        self.renewable.validate()?;
        if self.renewable.base_profile.len() != self.horizon.t + 1 {
            return Err(Error::InvalidParameters(format!(
                "base profile has {} entries, expected {}",
                self.renewable.base_profile.len(),
                self.horizon.t + 1
            )));
        }
        if !(self.g_min >= 0.0 && self.g_min <= self.g_max) {
            return Err(Error::InvalidParameters(format!("need 0 <= g_min <= g_max, got {} and {}", self.g_min, self.g_max)));
        }
        Ok(())
    }

    /// Same model with both forecast qualities set to `sigma_f`.
    pub fn with_sigma_f(&self, sigma_f: f64) -> Self {
        let mut out = self.clone();
        out.price.sigma_f = sigma_f;
        out.renewable.sigma_f = sigma_f;
        out
    }

    /// Draws the sample path for `seed`. Price and renewable draws come from
    /// separate streams, and the number of draws never depends on `sigma_f`,
    /// so paths with a common seed share their underlying noise.
    pub fn sample(&self, seed: u64) -> SamplePath {
        let mut price_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, PRICE_STREAM));
        let mut renewable_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, RENEWABLE_STREAM));
        let (p, f_p) = generate_prices(&self.price, self.horizon, &mut price_rng);
        let (e, f_e) = generate_renewables(&self.renewable, self.horizon, &mut renewable_rng);
        let t_end = self.horizon.t;
        SamplePath {
            horizon: self.horizon,
            e,
            p,
            d: (0..=t_end).map(|t| demand(t, t_end)).collect(),
            g: (0..=t_end).map(|t| grid_available(t, t_end, self.g_min, self.g_max)).collect(),
            f_e,
            f_p,
            seed,
        }
    }
}

/// One realization of the exogenous processes plus its rolling forecasts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePath {
    pub horizon: Horizon,
    pub e: Vec<f64>,
    pub p: Vec<f64>,
    pub d: Vec<f64>,
    pub g: Vec<f64>,
    pub f_e: ForecastMatrix,
    pub f_p: ForecastMatrix,
    pub seed: u64,
}

impl SamplePath {
    pub fn check_covers(&self, horizon: Horizon) -> Result<()> {
        let n = horizon.t + 1;
        let series_ok = [&self.e, &self.p, &self.d, &self.g].iter().all(|s| s.len() >= n);
        let forecasts_ok = self.f_e.origins() >= n
            && self.f_p.origins() >= n
            && (0..n).all(|t| {
                let need = horizon.lookahead_at(t) + 1;
                self.f_e.origin(t).len() >= need && self.f_p.origin(t).len() >= need
            });
        if series_ok && forecasts_ok {
            Ok(())
        } else {
            Err(Error::InvalidParameters(format!(
                "sample path does not cover T={} with H={}",
                horizon.t, horizon.h
            )))
        }
    }

    /// Demand forecast; demand is deterministic so forecasts are exact.
    pub fn forecast_demand(&self, _origin: usize, target: usize) -> f64 {
        self.d[target]
    }

    pub fn forecast_grid(&self, _origin: usize, target: usize) -> f64 {
        self.g[target]
    }

    /// Writes `series.csv`, `forecast_e.csv`, `forecast_p.csv` and `meta.json` into `dir`.
    pub fn write_bundle(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut w = csv::Writer::from_path(dir.join("series.csv"))?;
        w.write_record(["t", "E", "P", "D", "G"])?;
        for t in 0..self.e.len() {
            w.write_record(&[
                t.to_string(),
                fmt_f64(self.e[t]),
                fmt_f64(self.p[t]),
                fmt_f64(self.d[t]),
                fmt_f64(self.g[t]),
            ])?;
        }
        w.flush()?;
        for (name, m) in [("forecast_e.csv", &self.f_e), ("forecast_p.csv", &self.f_p)] {
            let mut w = csv::Writer::from_path(dir.join(name))?;
            w.write_record(["origin", "target", "value"])?;
            for origin in 0..m.origins() {
                for (k, v) in m.origin(origin).iter().enumerate() {
                    w.write_record(&[origin.to_string(), (origin + k).to_string(), fmt_f64(*v)])?;
                }
            }
            w.flush()?;
        }
        let meta = serde_json::json!({ "seed": self.seed, "T": self.horizon.t, "H": self.horizon.h });
        fs::write(dir.join("meta.json"), serde_json::to_string_pretty(&meta)?)?;
        Ok(())
    }

    pub fn read_bundle(dir: &Path) -> Result<Self> {
        let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("meta.json"))?)?;
        let field = |k: &str| {
            meta[k].as_u64().ok_or_else(|| Error::Config(format!("meta.json is missing integer field {k}")))
        };
        let horizon = Horizon::new(field("T")? as usize, field("H")? as usize)?;
        let seed = field("seed")?;
        let mut e = Vec::new();
        let mut p = Vec::new();
        let mut d = Vec::new();
        let mut g = Vec::new();
        let mut r = csv::Reader::from_path(dir.join("series.csv"))?;
        for rec in r.records() {
            let rec = rec?;
            let v = |i: usize| parse_f64(&rec[i]);
            e.push(v(1)?);
            p.push(v(2)?);
            d.push(v(3)?);
            g.push(v(4)?);
        }
        let read_matrix = |name: &str| -> Result<ForecastMatrix> {
            let mut rows: Vec<Vec<f64>> = Vec::new();
            let mut r = csv::Reader::from_path(dir.join(name))?;
            for rec in r.records() {
                let rec = rec?;
                let origin: usize = rec[0].parse().map_err(|_| Error::Config(format!("bad origin in {name}")))?;
                if rows.len() <= origin {
                    rows.resize(origin + 1, Vec::new());
                }
                rows[origin].push(parse_f64(&rec[2])?);
            }
            Ok(ForecastMatrix::from_rows(rows))
        };
        let path = SamplePath {
            horizon,
            e,
            p,
            d,
            g,
            f_e: read_matrix("forecast_e.csv")?,
            f_p: read_matrix("forecast_p.csv")?,
            seed,
        };
        path.check_covers(horizon)?;
        Ok(path)
    }
}

/// Shortest decimal that round-trips exactly.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim().parse().map_err(|_| Error::Config(format!("not a number: {s:?}")))
}
