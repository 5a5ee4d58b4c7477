//! Blocking HTTP helpers for talking to a spawned service.

use std::io::{BufRead, BufReader};
use std::time::Duration;

use gridplan_core::orchestrator::SessionEvent;
use serde_json::Value;

pub fn call(method: &str, url: &str, body: Option<Value>) -> (u16, Value) {
    let req = ureq::request(method, url).timeout(Duration::from_secs(30));
    let res = match body {
        Some(b) => req.set("Content-Type", "application/json").send_string(&b.to_string()),
        None => req.call(),
    };
    let (status, resp) = match res {
        Ok(r) => (r.status(), r),
        Err(ureq::Error::Status(code, r)) => (code, r),
        Err(e) => panic!("transport error: {e}"),
    };
    let text = resp.into_string().unwrap_or_default();
    (status, serde_json::from_str(&text).unwrap_or(Value::Null))
}

pub fn post_raw(url: &str, content_type: &str, body: &str) -> u16 {
    match ureq::post(url).set("Content-Type", content_type).send_string(body) {
        Ok(r) => r.status(),
        Err(ureq::Error::Status(code, _)) => code,
        Err(e) => panic!("transport error: {e}"),
    }
}

/// An open event stream.
pub struct EventStream {
    reader: Box<dyn BufRead + Send>,
}

impl EventStream {
    pub fn open(url: &str, last_event_id: Option<u64>) -> Self {
        let agent = ureq::AgentBuilder::new()
            .timeout_read(Duration::from_secs(10))
            .timeout_connect(Duration::from_secs(5))
            .build();
        let mut req = agent.get(url);
        if let Some(id) = last_event_id {
            req = req.set("Last-Event-ID", &id.to_string());
        }
        let resp = req.call().expect("stream opens");
        assert!(resp.content_type().starts_with("text/event-stream"));
        Self { reader: Box::new(BufReader::new(resp.into_reader())) }
    }

    /// Next event, or `None` once the server closes the stream.
    pub fn next_event(&mut self) -> Option<SessionEvent> {
        let mut data = String::new();
        let mut id: Option<u64> = None;
        loop {
            let mut line = String::new();
            if self.reader.read_line(&mut line).ok()? == 0 {
                return None;
            }
            let line = line.trim_end_matches(['\r', '\n']);
            if line.is_empty() {
                if data.is_empty() {
                    continue;
                }
                let ev: SessionEvent = serde_json::from_str(&data).expect("event json");
                assert_eq!(id, Some(ev.seq), "sse id matches seq");
                return Some(ev);
            }
            if let Some(rest) = line.strip_prefix("data:") {
                data.push_str(rest.trim_start());
            } else if let Some(rest) = line.strip_prefix("id:") {
                id = rest.trim().parse().ok();
            }
        }
    }

    pub fn take(&mut self, n: usize) -> Vec<SessionEvent> {
        (0..n).map(|_| self.next_event().expect("stream ended early")).collect()
    }
}
