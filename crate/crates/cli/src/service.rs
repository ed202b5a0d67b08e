//! HTTP rating service.
//!
//! The pair queue comes from the records file: one pair per synthetic
//! image (its closest training image under the queue measure), ordered by
//! ascending distance ratio. Ratings live in an append-only JSON Lines log
//! that is replayed on start; every accepted rating is synced to disk
//! before the 201 goes out.

use std::collections::HashMap;
use std::future::Future;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use relict_core::engine::{read_records_jsonl, MeasureKind};
use relict_core::evaluation::{append_rating, pair_id, read_ratings_log, RatingRecord};
use relict_core::io::{load_volume, Corpus};
use relict_core::Volume3D;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::slice::{default_window, encode_png, extract_slice, Plane};

#[derive(Debug, Clone, PartialEq)]
pub struct ServiceConfig {
    pub records: PathBuf,
    pub training: PathBuf,
    pub synthetic: PathBuf,
    pub ratings_log: PathBuf,
    /// The two rater ids accepted; `None` registers the first two seen.
    pub raters: Option<Vec<String>>,
    pub queue_measure: MeasureKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatedBy {
    pub rater_id: String,
    pub round: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairQueueEntry {
    pub pair_id: String,
    pub synthetic_id: String,
    pub training_id: String,
    /// 1-based, contiguous.
    pub queue_rank: usize,
    pub rated_by: Vec<RatedBy>,
    /// Both round-1 ratings are in and disagree.
    pub round_2_required: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RaterCount {
    pub rater_id: String,
    pub round: u32,
    pub rated: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    pub total_pairs: usize,
    pub round_2_pairs: usize,
    pub raters: Vec<String>,
    pub counts: Vec<RaterCount>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeMeta {
    pub id: String,
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub intensity_range: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct RatingRequest {
    pub pair_id: String,
    pub rater_id: String,
    pub score: u8,
    pub round: u32,
}

#[derive(Debug, Clone)]
struct QueueItem {
    pair_id: String,
    synthetic_id: String,
    training_id: String,
}

struct Ledger {
    path: PathBuf,
    ratings: Vec<RatingRecord>,
    raters: Vec<String>,
}

impl Ledger {
    fn score(&self, pair: &str, rater: &str, round: u32) -> Option<u8> {
        self.ratings
            .iter()
            .find(|r| r.pair_id == pair && r.rater_id == rater && r.round == round)
            .map(|r| r.score)
    }

    fn round_2_required(&self, pair: &str) -> bool {
        let [a, b] = self.raters.as_slice() else {
            return false;
        };
        match (self.score(pair, a, 1), self.score(pair, b, 1)) {
            (Some(x), Some(y)) => (x >= 3) != (y >= 3),
            _ => false,
        }
    }
}

/// Error returned to HTTP clients as `{"error": message}`.
#[derive(Debug)]
pub struct ApiError(pub StatusCode, pub String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(serde_json::json!({ "error": self.1 }))).into_response()
    }
}

fn bad_request(msg: impl Into<String>) -> ApiError {
    ApiError(StatusCode::BAD_REQUEST, msg.into())
}

fn not_found(msg: impl Into<String>) -> ApiError {
    ApiError(StatusCode::NOT_FOUND, msg.into())
}

pub struct Service {
    queue: Vec<QueueItem>,
    by_pair: HashMap<String, usize>,
    volumes: HashMap<String, PathBuf>,
    cache: Mutex<HashMap<String, Arc<Volume3D>>>,
    ledger: Mutex<Ledger>,
    fixed_raters: bool,
}

fn input_error(message: String) -> CliError {
    CliError {
        exit_code: CliError::INPUT,
        kind: "input".into(),
        message,
    }
}

fn register(raters: &mut Vec<String>, id: &str, fixed: bool) -> Result<(), String> {
    if raters.iter().any(|r| r == id) {
        return Ok(());
    }
    if fixed || raters.len() >= 2 {
        return Err(format!(
            "rater '{id}' is not registered; raters are {}",
            raters.join(", ")
        ));
    }
    raters.push(id.to_string());
    Ok(())
}

impl Service {
    pub fn open(cfg: &ServiceConfig) -> CliResult<Self> {
        let records = read_records_jsonl(&cfg.records)?;
        let mut picked: Vec<_> = records.iter().filter(|r| r.measure == cfg.queue_measure).collect();
        if picked.is_empty() {
            return Err(input_error(format!(
                "{} has no {} records to build the rating queue from",
                cfg.records.display(),
                cfg.queue_measure
            )));
        }
        picked.sort_by(|a, b| {
            a.score()
                .total_cmp(&b.score())
                .then_with(|| a.synthetic_id.cmp(&b.synthetic_id))
        });
        let queue: Vec<QueueItem> = picked
            .iter()
            .map(|r| QueueItem {
                pair_id: pair_id(&r.synthetic_id, &r.closest_training_id),
                synthetic_id: r.synthetic_id.clone(),
                training_id: r.closest_training_id.clone(),
            })
            .collect();
        let mut by_pair = HashMap::new();
        for (i, q) in queue.iter().enumerate() {
            if by_pair.insert(q.pair_id.clone(), i).is_some() {
                return Err(input_error(format!("{} appears twice in the queue", q.pair_id)));
            }
        }

        let mut volumes = HashMap::new();
        for manifest in [&cfg.training, &cfg.synthetic] {
            for e in Corpus::from_manifest(manifest)?.entries {
                if volumes.insert(e.id.clone(), e.volume).is_some() {
                    return Err(input_error(format!(
                        "image id '{}' occurs in both corpora",
                        e.id
                    )));
                }
            }
        }

        let fixed_raters = cfg.raters.is_some();
        let mut raters = cfg.raters.clone().unwrap_or_default();
        if fixed_raters {
            raters.dedup();
            if raters.len() != 2 || raters.iter().any(String::is_empty) {
                return Err(CliError::config("exactly two distinct rater ids are required"));
            }
        }
        let ratings = if cfg.ratings_log.exists() {
            read_ratings_log(&cfg.ratings_log)?
        } else {
            Vec::new()
        };
        for r in &ratings {
            register(&mut raters, &r.rater_id, fixed_raters)
                .map_err(|m| input_error(format!("{}: {m}", cfg.ratings_log.display())))?;
        }
        Ok(Self {
            queue,
            by_pair,
            volumes,
            cache: Mutex::new(HashMap::new()),
            ledger: Mutex::new(Ledger {
                path: cfg.ratings_log.clone(),
                ratings,
                raters,
            }),
            fixed_raters,
        })
    }

    pub fn pairs(&self) -> Vec<PairQueueEntry> {
        let ledger = self.ledger.lock().expect("ledger lock");
        self.queue
            .iter()
            .enumerate()
            .map(|(i, q)| PairQueueEntry {
                pair_id: q.pair_id.clone(),
                synthetic_id: q.synthetic_id.clone(),
                training_id: q.training_id.clone(),
                queue_rank: i + 1,
                rated_by: ledger
                    .ratings
                    .iter()
                    .filter(|r| r.pair_id == q.pair_id)
                    .map(|r| RatedBy {
                        rater_id: r.rater_id.clone(),
                        round: r.round,
                    })
                    .collect(),
                round_2_required: ledger.round_2_required(&q.pair_id),
            })
            .collect()
    }

    pub fn progress(&self) -> Progress {
        let ledger = self.ledger.lock().expect("ledger lock");
        let known = |r: &RatingRecord| self.by_pair.contains_key(&r.pair_id);
        let mut counts = Vec::new();
        for rater in &ledger.raters {
            for round in [1, 2] {
                counts.push(RaterCount {
                    rater_id: rater.clone(),
                    round,
                    rated: ledger
                        .ratings
                        .iter()
                        .filter(|r| known(r) && &r.rater_id == rater && r.round == round)
                        .count(),
                });
            }
        }
        Progress {
            total_pairs: self.queue.len(),
            round_2_pairs: self.queue.iter().filter(|q| ledger.round_2_required(&q.pair_id)).count(),
            raters: ledger.raters.clone(),
            counts,
        }
    }

    /// Validate a rating and append it durably.
    pub fn rate(&self, req: RatingRequest) -> Result<RatingRecord, ApiError> {
        if !self.by_pair.contains_key(&req.pair_id) {
            return Err(bad_request(format!("unknown pair '{}'", req.pair_id)));
        }
        if !(1..=2).contains(&req.round) {
            return Err(bad_request(format!("round must be 1 or 2, got {}", req.round)));
        }
        let record = RatingRecord {
            pair_id: req.pair_id,
            rater_id: req.rater_id,
            score: req.score,
            round: req.round,
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
        };
        record.validate().map_err(|e| bad_request(e.to_string()))?;

        let mut ledger = self.ledger.lock().expect("ledger lock");
        let mut raters = ledger.raters.clone();
        register(&mut raters, &record.rater_id, self.fixed_raters).map_err(bad_request)?;
        if ledger
            .score(&record.pair_id, &record.rater_id, record.round)
            .is_some()
        {
            return Err(ApiError(
                StatusCode::CONFLICT,
                format!(
                    "{} already rated {} in round {}",
                    record.rater_id, record.pair_id, record.round
                ),
            ));
        }
        if record.round == 2 {
            // round 2 needs both raters' round-1 scores, so an unregistered
            // rater can never pass this check
            if !ledger.round_2_required(&record.pair_id) {
                return Err(bad_request(format!(
                    "{} has no round-1 disagreement to re-evaluate",
                    record.pair_id
                )));
            }
        }
        append_rating(&ledger.path, &record)
            .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
        ledger.raters = raters;
        ledger.ratings.push(record.clone());
        Ok(record)
    }

    pub fn volume(&self, id: &str) -> Result<Arc<Volume3D>, ApiError> {
        if let Some(v) = self.cache.lock().expect("cache lock").get(id) {
            return Ok(v.clone());
        }
        let path = self
            .volumes
            .get(id)
            .ok_or_else(|| not_found(format!("unknown volume '{id}'")))?;
        let v = Arc::new(
            load_volume(path).map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?,
        );
        self.cache
            .lock()
            .expect("cache lock")
            .insert(id.to_string(), v.clone());
        Ok(v)
    }

    pub fn ratings_log(&self) -> PathBuf {
        self.ledger.lock().expect("ledger lock").path.clone()
    }
}

#[derive(Debug, Deserialize)]
pub struct SliceQuery {
    plane: Option<String>,
    index: Option<usize>,
    lo: Option<f64>,
    hi: Option<f64>,
}

async fn get_pairs(State(svc): State<Arc<Service>>) -> Json<Vec<PairQueueEntry>> {
    Json(svc.pairs())
}

async fn get_progress(State(svc): State<Arc<Service>>) -> Json<Progress> {
    Json(svc.progress())
}

async fn get_meta(
    State(svc): State<Arc<Service>>,
    UrlPath(id): UrlPath<String>,
) -> Result<Json<VolumeMeta>, ApiError> {
    let v = svc.volume(&id)?;
    let (lo, hi) = v.intensity_range();
    Ok(Json(VolumeMeta {
        id,
        dims: v.dims(),
        spacing: v.spacing(),
        intensity_range: [lo, hi],
    }))
}

async fn get_slice(
    State(svc): State<Arc<Service>>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<SliceQuery>,
) -> Result<Response, ApiError> {
    let plane: Plane = q.plane.as_deref().unwrap_or("axial").parse().map_err(bad_request)?;
    let index = q.index.ok_or_else(|| bad_request("index is required"))?;
    let v = svc.volume(&id)?;
    let (dlo, dhi) = default_window(&v);
    let (lo, hi) = (q.lo.unwrap_or(dlo), q.hi.unwrap_or(dhi));
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(bad_request(format!("window needs lo < hi, got ({lo}, {hi})")));
    }
    let pixels = extract_slice(&v, plane, index, lo, hi).ok_or_else(|| {
        not_found(format!(
            "{plane:?} index {index} outside 0..{} for '{id}'",
            plane.extent(v.dims())
        ))
    })?;
    let (w, h) = plane.shape(v.dims());
    Ok(([(header::CONTENT_TYPE, "image/png")], encode_png(w, h, &pixels)).into_response())
}

async fn post_rating(
    State(svc): State<Arc<Service>>,
    body: Result<Json<RatingRequest>, JsonRejection>,
) -> Result<(StatusCode, Json<RatingRecord>), ApiError> {
    let Json(req) = body.map_err(|e| bad_request(e.body_text()))?;
    let svc = svc.clone();
    let record = tokio::task::spawn_blocking(move || svc.rate(req))
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    Ok((StatusCode::CREATED, Json(record)))
}

pub fn router(svc: Arc<Service>) -> Router {
    Router::new()
        .route("/api/pairs", get(get_pairs))
        .route("/api/progress", get(get_progress))
        .route("/api/volumes/{id}/meta", get(get_meta))
        .route("/api/volumes/{id}/slice", get(get_slice))
        .route("/api/ratings", post(post_rating))
        .with_state(svc)
}

/// Serve on an already bound listener until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    svc: Arc<Service>,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(svc))
        .with_graceful_shutdown(shutdown)
        .await
}

/// Whether `path`'s parent directory exists, so appends can succeed.
pub fn log_dir_exists(path: &Path) -> bool {
    path.parent().is_none_or(|p| p.as_os_str().is_empty() || p.is_dir())
}
