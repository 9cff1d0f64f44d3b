#![allow(dead_code)]

use std::path::Path;
use std::process::{Child, Command, Stdio};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use axum::http::StatusCode;
use axum::routing::post;
use axum::{Json, Router};
use paramscope::registry::{REMOTE_PROVIDER_ID, TOY_PROVIDER_ID};
use paramscope::{router, AppState, Provider, ProviderRegistry};
use paramscope_core::ngram::{NGramModel, Tokenizer, DEFAULT_CORPUS, DEFAULT_ORDER};
use paramscope_core::remote::{RemoteClient, RemoteProviderConfig};
use paramscope_core::store::{InteractionRecord, JsonlStore, SessionStore, StoreError};
use serde_json::{json, Value};
use uuid::Uuid;

pub fn toy_registry() -> ProviderRegistry {
    let model = NGramModel::train(DEFAULT_CORPUS, DEFAULT_ORDER, Tokenizer::Char).unwrap();
    ProviderRegistry::new(TOY_PROVIDER_ID, Provider::Local(Arc::new(model)))
}

pub fn with_remote(registry: ProviderRegistry, base_url: &str) -> ProviderRegistry {
    let config = RemoteProviderConfig::new(base_url, None, "stub-model", Duration::from_secs(5)).unwrap();
    registry.with(REMOTE_PROVIDER_ID, Provider::Remote(RemoteClient::new(config).unwrap()))
}

pub async fn serve_router(app: Router) -> String {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    format!("http://{addr}")
}

pub async fn spawn_app(store: Arc<dyn SessionStore>, registry: ProviderRegistry) -> String {
    serve_router(router(AppState::new(store, registry), None)).await
}

/// Service backed by a fresh JSONL store in `dir`, with the toy provider and,
/// if given, a remote provider.
pub async fn spawn_toy_service(dir: &Path, remote: Option<&str>) -> String {
    let store = Arc::new(JsonlStore::open(dir.join("log.jsonl")).unwrap());
    let mut registry = toy_registry();
    if let Some(url) = remote {
        registry = with_remote(registry, url);
    }
    spawn_app(store, registry).await
}

/// A remote completion endpoint that records request bodies and answers
/// every request with a fixed status and body.
pub struct StubRemote {
    pub base_url: String,
    pub bodies: Arc<Mutex<Vec<Value>>>,
}

pub async fn spawn_stub_remote(status: StatusCode, response: Value) -> StubRemote {
    let bodies = Arc::new(Mutex::new(Vec::new()));
    let seen = bodies.clone();
    let app = Router::new().route(
        "/v1/completions",
        post(move |Json(body): Json<Value>| {
            let seen = seen.clone();
            let response = response.clone();
            async move {
                seen.lock().unwrap().push(body);
                (status, Json(response))
            }
        }),
    );
    let base = serve_router(app).await;
    StubRemote {
        base_url: format!("{base}/v1"),
        bodies,
    }
}

/// A store whose disk is always full.
pub struct FullStore;

impl SessionStore for FullStore {
    fn append(&self, _: InteractionRecord) -> Result<Uuid, StoreError> {
        Err(StoreError::StorageFull)
    }
    fn get(&self, id: Uuid) -> Result<Option<InteractionRecord>, StoreError> {
        let _ = id;
        Ok(None)
    }
    fn set_rating(&self, id: Uuid, _: i64) -> Result<InteractionRecord, StoreError> {
        Err(StoreError::NotFound(id))
    }
    fn query_by_prompt(&self, _: &str) -> Result<Vec<InteractionRecord>, StoreError> {
        Ok(vec![])
    }
    fn list_all(&self, _: usize, _: usize) -> Result<Vec<InteractionRecord>, StoreError> {
        Ok(vec![])
    }
    fn len(&self) -> Result<usize, StoreError> {
        Ok(0)
    }
}

pub fn generate_body(prompt: &str, top_p: f64, alpha: f64, beta: f64, seed: Option<u64>) -> Value {
    let mut body = json!({
        "prompt": prompt,
        "top_p": top_p,
        "frequency_penalty": alpha,
        "presence_penalty": beta,
        "max_tokens": 24,
    });
    if let Some(seed) = seed {
        body["seed"] = json!(seed);
    }
    body
}

pub struct Client {
    pub base: String,
    http: reqwest::Client,
}

impl Client {
    pub fn new(base: impl Into<String>) -> Self {
        Self {
            base: base.into(),
            http: reqwest::Client::new(),
        }
    }

    pub async fn post(&self, path: &str, body: &Value) -> (u16, Value) {
        let resp = self
            .http
            .post(format!("{}{path}", self.base))
            .json(body)
            .send()
            .await
            .unwrap();
        let status = resp.status().as_u16();
        (status, resp.json().await.unwrap_or(Value::Null))
    }

    pub async fn get(&self, path: &str) -> (u16, Value) {
        let resp = self.http.get(format!("{}{path}", self.base)).send().await.unwrap();
        let status = resp.status().as_u16();
        (status, resp.json().await.unwrap_or(Value::Null))
    }

    pub async fn generate(&self, body: &Value) -> Value {
        let (status, resp) = self.post("/api/generate", body).await;
        assert_eq!(status, 200, "{resp}");
        resp["record"].clone()
    }
}

/// `paramscope serve` running as a child process.
pub struct ServerProcess {
    child: Child,
    pub base: String,
}

impl ServerProcess {
    pub async fn start(db_path: &Path) -> Self {
        let port = {
            let l = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
            l.local_addr().unwrap().port()
        };
        let child = Command::new(env!("CARGO_BIN_EXE_paramscope"))
            .args(["serve", "--port", &port.to_string(), "--db-path"])
            .arg(db_path)
            .env("RUST_LOG", "warn")
            .stdout(Stdio::null())
            .stderr(Stdio::null())
            .spawn()
            .expect("spawn paramscope");
        let base = format!("http://127.0.0.1:{port}");
        let client = reqwest::Client::new();
        let deadline = Instant::now() + Duration::from_secs(20);
        loop {
            if let Ok(r) = client.get(format!("{base}/api/hyperparameters")).send().await {
                if r.status().is_success() {
                    break;
                }
            }
            assert!(Instant::now() < deadline, "server did not become ready");
            tokio::time::sleep(Duration::from_millis(50)).await;
        }
        Self { child, base }
    }

    pub fn stop(mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

impl Drop for ServerProcess {
    fn drop(&mut self) {
        let _ = self.child.kill();
    }
}
