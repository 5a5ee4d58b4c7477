//! Chat-completion transport over HTTP and a canned-reply fixture server.

use std::time::Duration;

use gridplan_core::advisor::{completion_text, AdvisorError, ChatMessage, ChatRequest, ChatTransport};

pub const API_KEY_VAR: &str = "LLM_API_KEY";
pub const API_BASE_VAR: &str = "LLM_API_BASE";
pub const DEFAULT_API_BASE: &str = "https://api.openai.com/v1";

/// Blocking client for an OpenAI-compatible `/chat/completions` endpoint.
#[derive(Clone)]
pub struct HttpTransport {
    agent: ureq::Agent,
    endpoint: String,
    api_key: Option<String>,
    model: String,
}

impl std::fmt::Debug for HttpTransport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        // never print the key
        f.debug_struct("HttpTransport").field("endpoint", &self.endpoint).field("model", &self.model).finish()
    }
}

impl HttpTransport {
    pub fn new(base_url: &str, api_key: Option<String>, model: impl Into<String>, timeout: Duration) -> Self {
        Self {
            agent: ureq::AgentBuilder::new().timeout(timeout).build(),
            endpoint: format!("{}/chat/completions", base_url.trim_end_matches('/')),
            api_key,
            model: model.into(),
        }
    }

    /// Credential from `LLM_API_KEY`, base URL from `LLM_API_BASE`.
    pub fn from_env(model: impl Into<String>, timeout: Duration) -> Result<Self, AdvisorError> {
        let key = std::env::var(API_KEY_VAR)
            .ok()
            .filter(|k| !k.trim().is_empty())
            .ok_or_else(|| AdvisorError::Transport(format!("{API_KEY_VAR} is not set")))?;
        let base = std::env::var(API_BASE_VAR).unwrap_or_else(|_| DEFAULT_API_BASE.to_string());
        Ok(Self::new(&base, Some(key), model, timeout))
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }
}

impl ChatTransport for HttpTransport {
    fn complete(&mut self, messages: &[ChatMessage]) -> Result<String, AdvisorError> {
        let body = ChatRequest { model: self.model.clone(), messages: messages.to_vec(), temperature: 0.0 };
        let body = serde_json::to_string(&body).map_err(|e| AdvisorError::Transport(e.to_string()))?;
        let mut req = self.agent.post(&self.endpoint).set("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            req = req.set("Authorization", &format!("Bearer {key}"));
        }
        match req.send_string(&body) {
            Ok(resp) => {
                let text = resp.into_string().map_err(|e| AdvisorError::Transport(e.to_string()))?;
                completion_text(&text)
            }
            Err(ureq::Error::Status(code, _)) => Err(AdvisorError::Http(code)),
            Err(ureq::Error::Transport(t)) => {
                let timed_out =
                    matches!(t.kind(), ureq::ErrorKind::Io) && t.to_string().to_ascii_lowercase().contains("timed out");
                if timed_out {
                    Err(AdvisorError::Timeout)
                } else {
                    Err(AdvisorError::Transport(t.to_string()))
                }
            }
        }
    }
}

/// Minimal stand-in for a chat endpoint, for offline tests and demos.
pub mod fixture {
    use std::net::SocketAddr;
    use std::sync::{Arc, Mutex};
    use std::time::Duration;

    use axum::extract::State;
    use axum::http::StatusCode;
    use axum::routing::post;
    use axum::{Json, Router};
    use serde_json::{json, Value};

    #[derive(Debug, Clone)]
    pub struct FixtureReply {
        pub status: u16,
        pub content: String,
        /// Artificial latency before answering.
        pub delay: Duration,
    }

    impl FixtureReply {
        pub fn ok(content: impl Into<String>) -> Self {
            Self { status: 200, content: content.into(), delay: Duration::ZERO }
        }

        pub fn status(status: u16) -> Self {
            Self { status, content: String::new(), delay: Duration::ZERO }
        }
    }

    #[derive(Clone)]
    struct FixtureState {
        reply: FixtureReply,
        seen: Arc<Mutex<Vec<Value>>>,
    }

    /// A running fixture. Requests received so far are kept in `requests`.
    pub struct FixtureServer {
        pub addr: SocketAddr,
        pub requests: Arc<Mutex<Vec<Value>>>,
        shutdown: Option<tokio::sync::oneshot::Sender<()>>,
        thread: Option<std::thread::JoinHandle<()>>,
    }

    impl FixtureServer {
        pub fn base_url(&self) -> String {
            format!("http://{}", self.addr)
        }
    }

    impl Drop for FixtureServer {
        fn drop(&mut self) {
            if let Some(tx) = self.shutdown.take() {
                let _ = tx.send(());
            }
            if let Some(t) = self.thread.take() {
                let _ = t.join();
            }
        }
    }

    async fn complete(State(st): State<FixtureState>, Json(body): Json<Value>) -> (StatusCode, Json<Value>) {
        st.seen.lock().expect("fixture lock").push(body);
        if !st.reply.delay.is_zero() {
            tokio::time::sleep(st.reply.delay).await;
        }
        let status = StatusCode::from_u16(st.reply.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        if !status.is_success() {
            return (status, Json(json!({"error": {"message": "fixture error"}})));
        }
        let body = json!({
            "id": "fixture",
            "object": "chat.completion",
            "choices": [{"index": 0, "message": {"role": "assistant", "content": st.reply.content}, "finish_reason": "stop"}]
        });
        (status, Json(body))
    }

    /// Serve `POST /chat/completions` on an ephemeral local port from a
    /// background thread.
    pub fn spawn(reply: FixtureReply) -> std::io::Result<FixtureServer> {
        let listener = std::net::TcpListener::bind("127.0.0.1:0")?;
        listener.set_nonblocking(true)?;
        let addr = listener.local_addr()?;
        let requests = Arc::new(Mutex::new(Vec::new()));
        let state = FixtureState { reply, seen: requests.clone() };
        let (tx, rx) = tokio::sync::oneshot::channel::<()>();
        let thread = std::thread::spawn(move || {
            let rt = tokio::runtime::Builder::new_current_thread().enable_all().build().expect("fixture runtime");
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::from_std(listener).expect("fixture listener");
                let app = Router::new().route("/chat/completions", post(complete)).with_state(state);
                // hard stop: idle keep-alive clients must not hold shutdown up
                tokio::select! {
                    _ = axum::serve(listener, app) => {}
                    _ = rx => {}
                }
            });
            rt.shutdown_timeout(Duration::from_secs(1));
        });
        Ok(FixtureServer { addr, requests, shutdown: Some(tx), thread: Some(thread) })
    }
}
