//! Driving-time estimates between two points.
//!
//! Two backends: a routing-service client speaking a small JSON-over-HTTP
//! contract, and a great-circle fallback at a fixed urban speed. Routing
//! results are memoized for the lifetime of the estimator.

use std::collections::HashMap;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::GeoPoint;

/// Mean Earth radius in kilometres.
pub const EARTH_RADIUS_KM: f64 = 6371.0088;

pub const DEFAULT_SPEED_KMH: f64 = 30.0;

/// Environment variable consulted for the routing token when the config names none.
pub const DEFAULT_TOKEN_ENV: &str = "JUDGE_BENCH_ROUTING_TOKEN";

#[derive(Debug, Error)]
pub enum TravelError {
    #[error("routing service unavailable: {0}")]
    RoutingUnavailable(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutingConfig {
    pub endpoint: String,
    /// Opaque routing profile, passed through as-is.
    #[serde(default = "default_profile")]
    pub profile: String,
    #[serde(default = "default_token_env")]
    pub token_env: String,
    #[serde(default = "default_timeout_s")]
    pub timeout_s: f64,
    #[serde(default)]
    pub fallback_on_error: bool,
    #[serde(default = "default_speed")]
    pub fallback_speed_kmh: f64,
}

fn default_profile() -> String {
    "driving".into()
}
fn default_token_env() -> String {
    DEFAULT_TOKEN_ENV.into()
}
fn default_timeout_s() -> f64 {
    10.0
}
fn default_speed() -> f64 {
    DEFAULT_SPEED_KMH
}

impl RoutingConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            profile: default_profile(),
            token_env: default_token_env(),
            timeout_s: default_timeout_s(),
            fallback_on_error: false,
            fallback_speed_kmh: DEFAULT_SPEED_KMH,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "backend", rename_all = "snake_case")]
pub enum TravelBackend {
    RoutingApi(RoutingConfig),
    Haversine {
        #[serde(default = "default_speed")]
        speed_kmh: f64,
    },
}

impl Default for TravelBackend {
    fn default() -> Self {
        TravelBackend::Haversine { speed_kmh: DEFAULT_SPEED_KMH }
    }
}

pub struct TravelTimeEstimator {
    backend: TravelBackend,
    client: Option<reqwest::blocking::Client>,
    cache: Mutex<HashMap<String, f64>>,
}

impl std::fmt::Debug for TravelTimeEstimator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TravelTimeEstimator").field("backend", &self.backend).finish()
    }
}

impl Default for TravelTimeEstimator {
    fn default() -> Self {
        Self::haversine(DEFAULT_SPEED_KMH)
    }
}

impl TravelTimeEstimator {
    pub fn new(backend: TravelBackend) -> Self {
        let client = match &backend {
            TravelBackend::RoutingApi(cfg) => reqwest::blocking::Client::builder()
                .timeout(Duration::from_secs_f64(cfg.timeout_s))
                .build()
                .ok(),
            TravelBackend::Haversine { .. } => None,
        };
        Self { backend, client, cache: Mutex::new(HashMap::new()) }
    }

    pub fn haversine(speed_kmh: f64) -> Self {
        Self::new(TravelBackend::Haversine { speed_kmh })
    }

    pub fn backend(&self) -> &TravelBackend {
        &self.backend
    }

    /// Estimated driving time in minutes.
    pub fn estimate(&self, a: &GeoPoint, b: &GeoPoint) -> Result<f64, TravelError> {
        match &self.backend {
            TravelBackend::Haversine { speed_kmh } => Ok(haversine_minutes(a, b, *speed_kmh)),
            TravelBackend::RoutingApi(cfg) => {
                let key = format!("{:.6},{:.6};{:.6},{:.6}", a.lat, a.lon, b.lat, b.lon);
                if let Some(&minutes) = self.cache.lock().unwrap().get(&key) {
                    return Ok(minutes);
                }
                match self.query(cfg, a, b) {
                    Ok(minutes) => {
                        self.cache.lock().unwrap().insert(key, minutes);
                        Ok(minutes)
                    }
                    Err(err) if cfg.fallback_on_error => {
                        log::warn!("{err}; falling back to great-circle estimate");
                        Ok(haversine_minutes(a, b, cfg.fallback_speed_kmh))
                    }
                    Err(err) => Err(err),
                }
            }
        }
    }

    fn query(&self, cfg: &RoutingConfig, a: &GeoPoint, b: &GeoPoint) -> Result<f64, TravelError> {
        let client = self
            .client
            .as_ref()
            .ok_or_else(|| TravelError::RoutingUnavailable("http client unavailable".into()))?;
        let mut request = client.get(&cfg.endpoint).query(&[
            ("origin", format!("{},{}", a.lat, a.lon)),
            ("destination", format!("{},{}", b.lat, b.lon)),
            ("profile", cfg.profile.clone()),
        ]);
        if let Ok(token) = std::env::var(&cfg.token_env) {
            request = request.bearer_auth(token);
        }
        let response = request.send().map_err(|e| TravelError::RoutingUnavailable(e.to_string()))?;
        let status = response.status();
        if !status.is_success() {
            return Err(TravelError::RoutingUnavailable(format!("HTTP {status}")));
        }
        let body: serde_json::Value =
            response.json().map_err(|e| TravelError::RoutingUnavailable(e.to_string()))?;
        let seconds = duration_seconds(&body)
            .ok_or_else(|| TravelError::RoutingUnavailable("response carries no duration".into()))?;
        Ok(seconds / 60.0)
    }
}

/// Accepts `{"duration": s}` or `{"routes": [{"duration": s}, ...]}`.
fn duration_seconds(body: &serde_json::Value) -> Option<f64> {
    let seconds = body
        .get("duration")
        .and_then(|d| d.as_f64())
        .or_else(|| body.get("routes")?.get(0)?.get("duration")?.as_f64())?;
    (seconds.is_finite() && seconds >= 0.0).then_some(seconds)
}

/// Great-circle distance in kilometres.
pub fn haversine_km(a: &GeoPoint, b: &GeoPoint) -> f64 {
    let (lat1, lat2) = (a.lat.to_radians(), b.lat.to_radians());
    let dlat = (b.lat - a.lat).to_radians();
    let dlon = (b.lon - a.lon).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    // clamp guards asin against h drifting past 1 for antipodal points
    2.0 * EARTH_RADIUS_KM * h.clamp(0.0, 1.0).sqrt().asin()
}

pub fn haversine_minutes(a: &GeoPoint, b: &GeoPoint, speed_kmh: f64) -> f64 {
    haversine_km(a, b) / speed_kmh * 60.0
}

/// Point reached by travelling `distance_km` from `origin` on `bearing_deg`.
pub fn destination_point(origin: &GeoPoint, bearing_deg: f64, distance_km: f64) -> (f64, f64) {
    let delta = distance_km / EARTH_RADIUS_KM;
    let theta = bearing_deg.to_radians();
    let lat1 = origin.lat.to_radians();
    let lon1 = origin.lon.to_radians();
    let lat2 = (lat1.sin() * delta.cos() + lat1.cos() * delta.sin() * theta.cos()).asin();
    let lon2 = lon1
        + (theta.sin() * delta.sin() * lat1.cos()).atan2(delta.cos() - lat1.sin() * lat2.sin());
    let lon2 = (lon2.to_degrees() + 540.0) % 360.0 - 180.0;
    (lat2.to_degrees(), lon2)
}
