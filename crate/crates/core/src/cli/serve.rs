//! JSON service over one loaded network.
//!
//! `GET /model` describes the graph, `POST /predict` conditions the target on
//! evidence and `POST /whatif` repeats that for alternative assignments
//! layered over a base evidence set. Every posterior is conditional: an
//! alternative is entered as evidence, not as an intervention.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::bn::{BnError, CausalBayesianNetwork};
use crate::bootstrap::ConfidenceMatrix;

pub const KIND: &str = "conditional";

/// Immutable state shared by all requests.
#[derive(Debug, Clone)]
pub struct ServeState {
    network: CausalBayesianNetwork,
    target: usize,
    confidence: Option<ConfidenceMatrix>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: u16,
    pub body: Value,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        ApiError {
            status: 400,
            body: json!({ "error": "invalid-request", "message": message.into() }),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictRequest {
    #[serde(default)]
    pub evidence: BTreeMap<String, String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WhatIfRequest {
    #[serde(default)]
    pub evidence: BTreeMap<String, String>,
    pub interventions: Vec<BTreeMap<String, String>>,
}

impl ServeState {
    pub fn new(
        network: CausalBayesianNetwork,
        target: &str,
        confidence: Option<ConfidenceMatrix>,
    ) -> Result<Self, BnError> {
        let target = network.index_of(target)?;
        if let Some(c) = &confidence {
            if c.nodes() != network.dag().nodes() {
                return Err(BnError::SchemaMismatch(
                    "confidence matrix nodes differ from the model's".into(),
                ));
            }
        }
        Ok(ServeState {
            network,
            target,
            confidence,
        })
    }

    pub fn network(&self) -> &CausalBayesianNetwork {
        &self.network
    }

    fn target_name(&self) -> &str {
        self.network.variables()[self.target].name()
    }

    /// Body of `GET /model`. Edge strength is the bootstrap confidence when a
    /// matrix was loaded, otherwise null.
    pub fn model(&self) -> Value {
        let dag = self.network.dag();
        let nodes: Vec<Value> = self
            .network
            .variables()
            .iter()
            .map(|v| json!({ "name": v.name(), "states": v.states() }))
            .collect();
        let edges: Vec<Value> = dag
            .edges()
            .into_iter()
            .map(|(a, b)| {
                let strength = self.confidence.as_ref().map(|c| c.get(a, b));
                json!({ "source": dag.name(a), "target": dag.name(b), "strength": strength })
            })
            .collect();
        let mut body = json!({
            "kind": KIND,
            "target": self.target_name(),
            "nodes": nodes,
            "edges": edges,
        });
        if let Some(c) = &self.confidence {
            let mut strengths = Vec::new();
            for a in 0..c.len() {
                for b in 0..c.len() {
                    if c.count(a, b) > 0 {
                        strengths.push(json!({
                            "source": c.nodes()[a],
                            "target": c.nodes()[b],
                            "strength": c.get(a, b),
                        }));
                    }
                }
            }
            body["strengths"] = Value::Array(strengths);
            body["bootstraps"] = json!(c.graphs());
        }
        body
    }

    fn check_evidence(&self, evidence: &BTreeMap<String, String>) -> Result<(), ApiError> {
        for (name, state) in evidence {
            let i = self
                .network
                .index_of(name)
                .map_err(|_| ApiError::bad_request(format!("unknown variable `{name}`")))?;
            if i == self.target {
                return Err(ApiError::bad_request(format!(
                    "`{name}` is the prediction target and cannot be evidence"
                )));
            }
            let v = &self.network.variables()[i];
            if v.state_index(state).is_none() {
                return Err(ApiError::bad_request(format!(
                    "variable `{name}` has no state `{state}`; states are {}",
                    v.states().join(", ")
                )));
            }
        }
        Ok(())
    }

    fn posterior(&self, evidence: &BTreeMap<String, String>, scenario: &str) -> Result<Vec<f64>, ApiError> {
        self.check_evidence(evidence)?;
        match self.network.posterior_named(evidence, self.target_name()) {
            Ok(p) => Ok(p),
            Err(BnError::ZeroProbabilityEvidence) => Err(self.zero_probability(evidence, scenario)),
            Err(e) => Err(ApiError::bad_request(e.to_string())),
        }
    }

    /// 422 body naming the first evidence item (in name order) that makes the
    /// accumulated evidence impossible.
    fn zero_probability(&self, evidence: &BTreeMap<String, String>, scenario: &str) -> ApiError {
        let mut partial = BTreeMap::new();
        let mut culprit = None;
        for (name, state) in evidence {
            partial.insert(name.clone(), state.clone());
            let p = self
                .network
                .evidence_from_names(&partial)
                .and_then(|e| self.network.evidence_probability(&e));
            if matches!(p, Ok(x) if x == 0.0) {
                culprit = Some((name.clone(), state.clone()));
                break;
            }
        }
        let (name, state) = culprit.unwrap_or_default();
        let prior: Vec<String> = partial
            .iter()
            .filter(|(n, _)| **n != name)
            .map(|(n, s)| format!("{n}={s}"))
            .collect();
        let explanation = if prior.is_empty() {
            format!("`{name}={state}` has probability zero under the model")
        } else {
            format!(
                "`{name}={state}` has probability zero under the model given {}",
                prior.join(", ")
            )
        };
        ApiError {
            status: 422,
            body: json!({
                "error": "zero-probability-evidence",
                "scenario": scenario,
                "conflict": { "variable": name, "state": state },
                "message": explanation,
            }),
        }
    }

    /// Body of `POST /predict`.
    pub fn predict(&self, req: &PredictRequest) -> Result<Value, ApiError> {
        let posterior = self.posterior(&req.evidence, "evidence")?;
        Ok(json!({
            "kind": KIND,
            "target": self.target_name(),
            "states": self.network.variables()[self.target].states(),
            "evidence": req.evidence,
            "posterior": posterior,
        }))
    }

    /// Body of `POST /whatif`. Each alternative overrides the base evidence
    /// on the variables it names; deltas are alternative minus base.
    pub fn whatif(&self, req: &WhatIfRequest) -> Result<Value, ApiError> {
        if req.interventions.is_empty() {
            return Err(ApiError::bad_request("at least one alternative assignment is required"));
        }
        let base = self.posterior(&req.evidence, "base")?;
        let mut alternatives = Vec::with_capacity(req.interventions.len());
        for (i, assignment) in req.interventions.iter().enumerate() {
            let mut merged = req.evidence.clone();
            merged.extend(assignment.iter().map(|(k, v)| (k.clone(), v.clone())));
            let p = self.posterior(&merged, &format!("alternative {i}"))?;
            let delta: Vec<f64> = p.iter().zip(&base).map(|(a, b)| a - b).collect();
            alternatives.push(json!({
                "assignment": assignment,
                "evidence": merged,
                "posterior": p,
                "delta": delta,
            }));
        }
        Ok(json!({
            "kind": KIND,
            "note": "alternatives are entered as evidence; these are conditional, not interventional, estimates",
            "target": self.target_name(),
            "states": self.network.variables()[self.target].states(),
            "evidence": req.evidence,
            "base": base,
            "alternatives": alternatives,
        }))
    }
}

fn parse_body<T: for<'de> Deserialize<'de>>(body: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("malformed request body: {e}")))
}

fn respond(result: Result<Value, ApiError>) -> Response {
    match result {
        Ok(v) => (StatusCode::OK, Json(v)).into_response(),
        Err(e) => {
            let status = StatusCode::from_u16(e.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
            (status, Json(e.body)).into_response()
        }
    }
}

async fn get_model(State(s): State<Arc<ServeState>>) -> Response {
    respond(Ok(s.model()))
}

async fn post_predict(State(s): State<Arc<ServeState>>, body: Bytes) -> Response {
    respond(parse_body::<PredictRequest>(&body).and_then(|r| s.predict(&r)))
}

async fn post_whatif(State(s): State<Arc<ServeState>>, body: Bytes) -> Response {
    respond(parse_body::<WhatIfRequest>(&body).and_then(|r| s.whatif(&r)))
}

pub fn router(state: ServeState) -> Router {
    Router::new()
        .route("/model", get(get_model))
        .route("/predict", post(post_predict))
        .route("/whatif", post(post_whatif))
        .with_state(Arc::new(state))
}

/// Binds `addr`, prints `listening on http://<addr>` to stdout and serves
/// until interrupted.
pub fn run(state: ServeState, addr: SocketAddr) -> std::io::Result<()> {
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        println!("listening on http://{}", listener.local_addr()?);
        use std::io::Write;
        std::io::stdout().flush()?;
        axum::serve(listener, router(state))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
    })
}
