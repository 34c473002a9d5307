//! Chat-completion client: system and user messages in, text out.

use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use crate::model::{ModelClient, ModelError, ModelRequest, RemoteConfig};

pub struct RemoteClient {
    cfg: RemoteConfig,
    http: reqwest::blocking::Client,
}

#[derive(Deserialize)]
struct Reply {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ReplyMessage,
}

#[derive(Deserialize)]
struct ReplyMessage {
    content: String,
}

impl RemoteClient {
    pub fn new(cfg: RemoteConfig) -> Self {
        let http = reqwest::blocking::Client::builder()
            .timeout(cfg.timeout)
            .build()
            .expect("http client builds");
        RemoteClient { cfg, http }
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.cfg
    }

    fn attempt(&self, req: &ModelRequest) -> Result<String, Attempt> {
        let body = json!({
            "model": self.cfg.model,
            "temperature": 0,
            "messages": [
                {"role": "system", "content": req.system},
                {"role": "user", "content": req.user},
            ],
        });
        let mut call = self.http.post(&self.cfg.endpoint).json(&body);
        if let Some(key) = &self.cfg.key {
            call = call.bearer_auth(key);
        }
        let resp = call.send().map_err(|e| Attempt::Retry(e.to_string()))?;
        let status = resp.status();
        if status.is_server_error() || status.as_u16() == 429 {
            return Err(Attempt::Retry(format!("endpoint returned {status}")));
        }
        if !status.is_success() {
            return Err(Attempt::Fatal(format!("endpoint returned {status}")));
        }
        let reply: Reply = resp.json().map_err(|e| Attempt::Fatal(format!("bad reply: {e}")))?;
        reply
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| Attempt::Fatal("reply has no choices".into()))
    }
}

enum Attempt {
    Retry(String),
    Fatal(String),
}

const BACKOFF: Duration = Duration::from_millis(200);

impl ModelClient for RemoteClient {
    fn complete(&self, req: &ModelRequest) -> Result<String, ModelError> {
        let mut last = String::new();
        for n in 0..=self.cfg.retries {
            if n > 0 {
                std::thread::sleep(BACKOFF * n);
            }
            match self.attempt(req) {
                Ok(text) => return Ok(text),
                Err(Attempt::Fatal(m)) => return Err(ModelError::unavailable(m)),
                Err(Attempt::Retry(m)) => last = m,
            }
        }
        Err(ModelError::unavailable(format!(
            "{} attempts failed, last: {last}",
            self.cfg.retries + 1
        )))
    }

    fn backend_name(&self) -> &'static str {
        "remote"
    }
}
