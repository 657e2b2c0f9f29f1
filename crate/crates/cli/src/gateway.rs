//! JSON-over-HTTP gateway to a live engine.
//!
//! | route | body | reply |
//! |---|---|---|
//! | `POST /query` | `{"session": "s", "terms": ["a", "b"]}` | [`QueryResponse`] |
//! | `POST /click` | `{"session": "s", "token": 3, "object": 17}` | [`ClickResponse`] |
//! | `GET /metrics` | | [`MetricsResponse`] |
//! | `POST /deconstruct` | `{"object": 17}` or `{"object": 17, "term": "a"}` | [`DeconstructResponse`] |
//! | `GET /snapshot` | | snapshot text, version in `x-state-version` |
//! | `POST /snapshot` | | [`SaveResponse`] |
//!
//! A click with `"object": null` reports that nothing in the list was
//! relevant and penalizes the whole presentation. Every JSON reply carries
//! the state `version`, which grows by one with each mutation. Errors are
//! `{"error": "...", "version": n}`.

use std::collections::{HashMap, HashSet};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, MutexGuard};

use axum::extract::rejection::JsonRejection;
use axum::extract::State as AxumState;
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use evoindex::engine::{apply_feedback, select_action, EngineConfig, EngineError, Feedback, Query};
use evoindex::index::{IndexParams, IndexStore, ObjectId, Scope, TermId};
use evoindex::policy::{compose_mq, MqList, Provenance};
use evoindex::sim::GroundTruth;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dictionary::TermDictionary;

const TOP_PER_TERM: usize = 3;

#[derive(Debug, Clone)]
pub struct GatewayOptions {
    pub engine: EngineConfig,
    pub seed: u64,
    /// Where `POST /snapshot` writes; the dictionary goes beside it.
    pub snapshot: Option<PathBuf>,
}

impl Default for GatewayOptions {
    fn default() -> Self {
        Self {
            engine: EngineConfig::default(),
            seed: 0,
            snapshot: None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum GatewayError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Index(#[from] evoindex::index::IndexError),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Invalid(String),
}

/// The dictionary file stored next to a snapshot.
pub fn dictionary_path(snapshot: &Path) -> PathBuf {
    let mut name = snapshot.as_os_str().to_owned();
    name.push(".terms.json");
    PathBuf::from(name)
}

/// One applied mutation, enough to replay the store.
#[derive(Debug, Clone, PartialEq)]
pub enum LogEntry {
    Feedback {
        terms: Vec<TermId>,
        presented: Vec<ObjectId>,
        clicked: Option<ObjectId>,
    },
    Deconstruct(Scope),
}

/// Re-applies a mutation log to a copy of `initial`.
pub fn replay(initial: &IndexStore, log: &[LogEntry], cfg: &EngineConfig) -> Result<IndexStore, EngineError> {
    let mut store = initial.clone();
    for entry in log {
        match entry {
            LogEntry::Feedback { terms, presented, clicked } => {
                let query = Query::new(terms.clone())?;
                let list = compose_mq(presented, &[])?;
                let fb = clicked.map_or_else(Feedback::none, |o| Feedback::clicks(vec![o]));
                apply_feedback(&mut store, &query, &list, &fb, cfg)?;
            }
            LogEntry::Deconstruct(scope) => {
                store.deconstruct(*scope);
            }
        }
    }
    Ok(store)
}

#[derive(Debug)]
struct Presentation {
    token: u64,
    query: Query,
    list: MqList,
    clicked: HashSet<ObjectId>,
    closed: bool,
}

#[derive(Debug)]
struct State {
    store: IndexStore,
    initial: IndexStore,
    config: EngineConfig,
    rng: ChaCha8Rng,
    dictionary: TermDictionary,
    truth: Option<GroundTruth>,
    truth_size: usize,
    seen: Vec<TermId>,
    sessions: HashMap<String, Presentation>,
    next_token: u64,
    version: u64,
    log: Vec<LogEntry>,
    snapshot: Option<PathBuf>,
}

pub struct Gateway {
    state: Mutex<State>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRequest {
    #[serde(default = "default_session")]
    pub session: String,
    pub terms: Vec<String>,
}

fn default_session() -> String {
    "default".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultEntry {
    pub rank: usize,
    pub object: u32,
    /// `exploit` or `explore`.
    pub provenance: String,
    /// Cumulative RIV over the query terms.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResponse {
    pub version: u64,
    pub session: String,
    pub token: u64,
    pub terms: Vec<String>,
    pub new_terms: Vec<String>,
    pub results: Vec<ResultEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClickRequest {
    #[serde(default = "default_session")]
    pub session: String,
    pub token: u64,
    pub object: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRef {
    pub term: String,
    pub term_id: u32,
    pub object: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClickResponse {
    pub version: u64,
    /// Net change of the store's total RIV.
    pub total: f64,
    pub links: usize,
    pub promoted: Vec<PairRef>,
    pub demoted: Vec<PairRef>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopObject {
    pub object: u32,
    pub riv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermTop {
    pub term: String,
    pub objects: Vec<TopObject>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsResponse {
    pub version: u64,
    pub objects: usize,
    pub tuples: usize,
    pub generator_size: usize,
    pub pool_size: usize,
    pub total_riv: f64,
    /// Share of ground-truth pairs explored; absent without a truth graph.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    /// Strongest objects of every term queried so far.
    pub top: Vec<TermTop>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeconstructRequest {
    pub object: u32,
    pub term: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeconstructResponse {
    pub version: u64,
    pub removed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaveResponse {
    pub version: u64,
    pub snapshot: String,
    pub dictionary: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub version: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
    pub version: u64,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            error: self.message,
            version: self.version,
        };
        (self.status, Json(body)).into_response()
    }
}

fn provenance_name(p: Provenance) -> &'static str {
    match p {
        Provenance::Exploit => "exploit",
        Provenance::Explore => "explore",
    }
}

impl Gateway {
    pub fn new(
        store: IndexStore,
        dictionary: TermDictionary,
        truth: Option<GroundTruth>,
        options: GatewayOptions,
    ) -> Result<Self, GatewayError> {
        options.engine.validate()?;
        let truth_size = truth.as_ref().map_or(0, GroundTruth::len);
        Ok(Self {
            state: Mutex::new(State {
                initial: store.clone(),
                store,
                config: options.engine,
                rng: ChaCha8Rng::seed_from_u64(options.seed),
                dictionary,
                truth,
                truth_size,
                seen: Vec::new(),
                sessions: HashMap::new(),
                next_token: 1,
                version: 0,
                log: Vec::new(),
                snapshot: options.snapshot,
            }),
        })
    }

    /// `n` objects, each minimally indexed under its own label `o<j>`.
    pub fn with_objects(n: u32, options: GatewayOptions) -> Result<Self, GatewayError> {
        if n == 0 {
            return Err(GatewayError::Invalid("need at least one object".into()));
        }
        let mut store = IndexStore::new(IndexParams::default())?;
        let mut dictionary = TermDictionary::new();
        for j in 0..n {
            let (term, _) = dictionary.intern(&format!("o{j}"));
            store.init_minimal_index(ObjectId(j), &[term])?;
        }
        Self::new(store, dictionary, None, options)
    }

    /// Objects minimally indexed on their truth terms, named `t<id>`.
    pub fn with_truth(truth: GroundTruth, options: GatewayOptions) -> Result<Self, GatewayError> {
        if truth.is_empty() {
            return Err(GatewayError::Invalid("truth graph is empty".into()));
        }
        let mut store = IndexStore::new(IndexParams::default())?;
        let mut dictionary = TermDictionary::new();
        for t in truth.terms() {
            dictionary.bind(&format!("t{}", t.0), t);
        }
        for o in truth.objects().collect::<Vec<_>>() {
            store.init_minimal_index(o, truth.terms_of(o))?;
        }
        Self::new(store, dictionary, Some(truth), options)
    }

    /// Restores a store and its dictionary written by `POST /snapshot`.
    pub fn from_snapshot(
        path: &Path,
        truth: Option<GroundTruth>,
        options: GatewayOptions,
    ) -> Result<Self, GatewayError> {
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| GatewayError::Io { path, source }
        };
        let file = std::fs::File::open(path).map_err(io(path))?;
        let store = IndexStore::read_snapshot(std::io::BufReader::new(file))?;
        let dict_path = dictionary_path(path);
        let dictionary = if dict_path.exists() {
            TermDictionary::load(&dict_path).map_err(io(&dict_path))?
        } else {
            TermDictionary::new()
        };
        Self::new(store, dictionary, truth, options)
    }

    fn lock(&self) -> MutexGuard<'_, State> {
        self.state.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn version(&self) -> u64 {
        self.lock().version
    }

    pub fn log(&self) -> Vec<LogEntry> {
        self.lock().log.clone()
    }

    pub fn store(&self) -> IndexStore {
        self.lock().store.clone()
    }

    pub fn initial_store(&self) -> IndexStore {
        self.lock().initial.clone()
    }

    pub fn engine_config(&self) -> EngineConfig {
        self.lock().config.clone()
    }

    pub fn query(&self, req: QueryRequest) -> Result<QueryResponse, ApiError> {
        let mut st = self.lock();
        let version = st.version;
        let err = |status, message: String| ApiError { status, message, version };

        let mut names: Vec<String> = Vec::new();
        for t in &req.terms {
            let n = TermDictionary::normalize(t);
            if n.is_empty() {
                return Err(err(StatusCode::BAD_REQUEST, "terms must not be blank".into()));
            }
            if !names.contains(&n) {
                names.push(n);
            }
        }
        if names.is_empty() {
            return Err(err(StatusCode::BAD_REQUEST, "a query needs at least one term".into()));
        }
        if req.session.is_empty() {
            return Err(err(StatusCode::BAD_REQUEST, "session must not be empty".into()));
        }

        let st = &mut *st;
        // allocate ids only once the list can be built
        let ids: Vec<(TermId, bool)> = {
            let mut probe = st.dictionary.clone();
            names.iter().map(|n| probe.intern(n)).collect()
        };
        let query = Query::new(ids.iter().map(|(t, _)| *t).collect())
            .map_err(|e| err(StatusCode::BAD_REQUEST, e.to_string()))?;
        let list = select_action(&st.store, &query, &st.config, &mut st.rng)
            .map_err(|e| err(StatusCode::SERVICE_UNAVAILABLE, e.to_string()))?;

        let mut new_terms = Vec::new();
        for (name, (id, _)) in names.iter().zip(&ids) {
            if st.dictionary.intern(name).1 {
                new_terms.push(name.clone());
            }
            if !st.seen.contains(id) {
                st.seen.push(*id);
            }
        }
        let results = list
            .entries()
            .iter()
            .map(|e| ResultEntry {
                rank: e.rank,
                object: e.object.0,
                provenance: provenance_name(e.provenance).into(),
                score: st.store.cumulative_riv(query.terms(), e.object).unwrap_or(0.0),
            })
            .collect();
        let token = st.next_token;
        st.next_token += 1;
        st.sessions.insert(
            req.session.clone(),
            Presentation {
                token,
                query,
                list,
                clicked: HashSet::new(),
                closed: false,
            },
        );
        st.version += 1;
        Ok(QueryResponse {
            version: st.version,
            session: req.session,
            token,
            terms: names,
            new_terms,
            results,
        })
    }

    pub fn click(&self, req: ClickRequest) -> Result<ClickResponse, ApiError> {
        let mut guard = self.lock();
        let st = &mut *guard;
        let version = st.version;
        let err = |status, message: String| ApiError { status, message, version };

        let Some(p) = st.sessions.get_mut(&req.session) else {
            return Err(err(StatusCode::NOT_FOUND, format!("unknown session {:?}", req.session)));
        };
        if p.token != req.token {
            return Err(err(
                StatusCode::CONFLICT,
                format!("token {} is stale; the latest is {}", req.token, p.token),
            ));
        }
        if p.closed {
            return Err(err(StatusCode::CONFLICT, "this presentation was already judged irrelevant".into()));
        }
        let feedback = match req.object {
            None => {
                if !p.clicked.is_empty() {
                    return Err(err(StatusCode::CONFLICT, "objects in this presentation were already clicked".into()));
                }
                Feedback::none()
            }
            Some(raw) => {
                let o = ObjectId(raw);
                if !p.list.contains(o) {
                    return Err(err(StatusCode::BAD_REQUEST, format!("object {raw} was not presented")));
                }
                if p.clicked.contains(&o) {
                    return Err(err(StatusCode::CONFLICT, format!("object {raw} was already clicked")));
                }
                if !st.store.contains_object(o) {
                    return Err(err(StatusCode::CONFLICT, format!("object {raw} was deconstructed")));
                }
                Feedback::clicks(vec![o])
            }
        };

        let reward = apply_feedback(&mut st.store, &p.query, &p.list, &feedback, &st.config)
            .map_err(|e| err(StatusCode::BAD_REQUEST, e.to_string()))?;
        match req.object {
            Some(raw) => {
                p.clicked.insert(ObjectId(raw));
            }
            None => p.closed = true,
        }
        st.log.push(LogEntry::Feedback {
            terms: p.query.terms().to_vec(),
            presented: p.list.objects().collect(),
            clicked: req.object.map(ObjectId),
        });
        st.version += 1;
        let pair = |(t, o): &(TermId, ObjectId)| PairRef {
            term: st.dictionary.name_of(*t).unwrap_or_default().to_string(),
            term_id: t.0,
            object: o.0,
        };
        Ok(ClickResponse {
            version: st.version,
            total: reward.total,
            links: reward.deltas.len(),
            promoted: reward.promoted.iter().map(pair).collect(),
            demoted: reward.demoted.iter().map(pair).collect(),
        })
    }

    pub fn metrics(&self) -> MetricsResponse {
        let st = self.lock();
        let p = st.truth.as_ref().filter(|_| st.truth_size > 0).map(|truth| {
            let explored = truth.len() - st.store.count_unexplored(truth);
            explored as f64 / st.truth_size as f64
        });
        let top = st
            .seen
            .iter()
            .map(|t| {
                let mut objects: Vec<TopObject> = st
                    .store
                    .postings(*t)
                    .map(|(o, riv)| TopObject { object: o.0, riv })
                    .collect();
                objects.sort_by(|a, b| b.riv.total_cmp(&a.riv).then(a.object.cmp(&b.object)));
                objects.truncate(TOP_PER_TERM);
                TermTop {
                    term: st.dictionary.name_of(*t).unwrap_or_default().to_string(),
                    objects,
                }
            })
            .collect();
        MetricsResponse {
            version: st.version,
            objects: st.store.object_count(),
            tuples: st.store.len(),
            generator_size: st.store.generator_size(),
            pool_size: st.store.pool_size(),
            total_riv: st.store.total_riv(),
            p,
            top,
        }
    }

    pub fn deconstruct(&self, req: DeconstructRequest) -> Result<DeconstructResponse, ApiError> {
        let mut guard = self.lock();
        let st = &mut *guard;
        let object = ObjectId(req.object);
        let scope = match &req.term {
            None => Scope::Object(object),
            Some(name) => match st.dictionary.get(name) {
                Some(t) => Scope::Pair(t, object),
                None => {
                    return Err(ApiError {
                        status: StatusCode::NOT_FOUND,
                        message: format!("unknown term {name:?}"),
                        version: st.version,
                    })
                }
            },
        };
        let removed = st.store.deconstruct(scope);
        if let (Scope::Object(o), Some(truth)) = (scope, st.truth.as_mut()) {
            truth.retire_object(o);
        }
        st.log.push(LogEntry::Deconstruct(scope));
        st.version += 1;
        Ok(DeconstructResponse {
            version: st.version,
            removed,
        })
    }

    pub fn snapshot_text(&self) -> (u64, String) {
        let st = self.lock();
        (st.version, st.store.to_snapshot_string())
    }

    pub fn save_snapshot(&self) -> Result<SaveResponse, ApiError> {
        let st = self.lock();
        let fail = |status, message: String| ApiError {
            status,
            message,
            version: st.version,
        };
        let Some(path) = st.snapshot.clone() else {
            return Err(fail(StatusCode::CONFLICT, "no snapshot path configured".into()));
        };
        let dict = dictionary_path(&path);
        std::fs::write(&path, st.store.to_snapshot_string())
            .map_err(|e| fail(StatusCode::INTERNAL_SERVER_ERROR, format!("{}: {e}", path.display())))?;
        st.dictionary
            .save(&dict)
            .map_err(|e| fail(StatusCode::INTERNAL_SERVER_ERROR, format!("{}: {e}", dict.display())))?;
        Ok(SaveResponse {
            version: st.version,
            snapshot: path.display().to_string(),
            dictionary: dict.display().to_string(),
        })
    }
}

fn bad_body(gw: &Gateway, rejection: JsonRejection) -> Response {
    ApiError {
        status: StatusCode::BAD_REQUEST,
        message: rejection.body_text(),
        version: gw.version(),
    }
    .into_response()
}

fn reply<T: Serialize>(result: Result<T, ApiError>) -> Response {
    match result {
        Ok(body) => Json(body).into_response(),
        Err(e) => e.into_response(),
    }
}

async fn query_handler(
    AxumState(gw): AxumState<Arc<Gateway>>,
    body: Result<Json<QueryRequest>, JsonRejection>,
) -> Response {
    match body {
        Ok(Json(req)) => reply(gw.query(req)),
        Err(r) => bad_body(&gw, r),
    }
}

async fn click_handler(
    AxumState(gw): AxumState<Arc<Gateway>>,
    body: Result<Json<ClickRequest>, JsonRejection>,
) -> Response {
    match body {
        Ok(Json(req)) => reply(gw.click(req)),
        Err(r) => bad_body(&gw, r),
    }
}

async fn deconstruct_handler(
    AxumState(gw): AxumState<Arc<Gateway>>,
    body: Result<Json<DeconstructRequest>, JsonRejection>,
) -> Response {
    match body {
        Ok(Json(req)) => reply(gw.deconstruct(req)),
        Err(r) => bad_body(&gw, r),
    }
}

async fn metrics_handler(AxumState(gw): AxumState<Arc<Gateway>>) -> Response {
    Json(gw.metrics()).into_response()
}

async fn snapshot_handler(AxumState(gw): AxumState<Arc<Gateway>>) -> Response {
    let (version, text) = gw.snapshot_text();
    let mut resp = text.into_response();
    resp.headers_mut()
        .insert(header::CONTENT_TYPE, HeaderValue::from_static("text/plain; charset=utf-8"));
    resp.headers_mut()
        .insert("x-state-version", HeaderValue::from(version));
    resp
}

async fn save_handler(AxumState(gw): AxumState<Arc<Gateway>>) -> Response {
    reply(gw.save_snapshot())
}

pub fn router(gateway: Arc<Gateway>) -> Router {
    Router::new()
        .route("/query", post(query_handler))
        .route("/click", post(click_handler))
        .route("/metrics", get(metrics_handler))
        .route("/deconstruct", post(deconstruct_handler))
        .route("/snapshot", get(snapshot_handler).post(save_handler))
        .with_state(gateway)
}

/// Serves until interrupted.
pub async fn serve(gateway: Arc<Gateway>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(gateway))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
