//! Annotation providers: the deterministic rule oracle and an adapter for a
//! remote chat-completion endpoint.

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::PathBuf;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::docmodel::{Document, LabelSpace};
use crate::error::{Error, Result};

use super::inquiries::{key_value_lines, rule_inquiries};
use super::tags::rule_tags;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Capabilities {
    pub tags: bool,
    pub inquiries: bool,
}

pub trait AnnotationProvider: Sync {
    fn name(&self) -> &str;

    fn capabilities(&self) -> Capabilities;

    /// One synthetic label per token.
    fn tag_tokens(&self, doc: &Document, space: &LabelSpace) -> Result<Vec<usize>>;

    /// Proposed `(key, answer)` pairs, at most `max_pairs`.
    fn propose_inquiries(&self, doc: &Document, max_pairs: usize) -> Result<Vec<(String, String)>>;

    /// Upper bound on documents processed at once.
    fn max_concurrency(&self) -> usize {
        1
    }
}

/// Deterministic, offline annotator.
#[derive(Debug, Clone, Copy, Default)]
pub struct RuleOracle;

impl AnnotationProvider for RuleOracle {
    fn name(&self) -> &str {
        "rule"
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            tags: true,
            inquiries: true,
        }
    }

    fn tag_tokens(&self, doc: &Document, space: &LabelSpace) -> Result<Vec<usize>> {
        Ok(rule_tags(doc, space))
    }

    fn propose_inquiries(&self, doc: &Document, max_pairs: usize) -> Result<Vec<(String, String)>> {
        Ok(rule_inquiries(doc, max_pairs))
    }
}

pub const URL_ENV: &str = "DAVID_LLM_URL";
pub const KEY_ENV: &str = "DAVID_LLM_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteConfig {
    /// Full chat-completion endpoint URL.
    pub url: String,
    pub api_key: Option<String>,
    pub model: String,
    pub concurrency: usize,
    pub max_retries: usize,
    pub backoff_ms: u64,
    pub timeout_secs: u64,
    pub audit_path: Option<PathBuf>,
}

impl RemoteConfig {
    pub fn from_env() -> Result<Self> {
        let url = std::env::var(URL_ENV)
            .map_err(|_| Error::InvalidConfig(format!("{URL_ENV} is not set")))?;
        Ok(RemoteConfig {
            url,
            api_key: std::env::var(KEY_ENV).ok(),
            model: "default".into(),
            concurrency: 4,
            max_retries: 3,
            backoff_ms: 200,
            timeout_secs: 60,
            audit_path: None,
        })
    }
}

/// Asks a chat-completion endpoint for the value of every key found on the
/// page and parses `Value: ...` replies. Requests and responses are
/// appended to the audit file as JSON lines.
pub struct RemoteProvider {
    cfg: RemoteConfig,
    client: reqwest::blocking::Client,
    audit: Option<Mutex<File>>,
}

pub fn prompt(context: &str, key: &str) -> String {
    format!(
        "Context: {context}\nAbove is the context of the target form document, please extract the {key}\n, the output format strictly follow: Value: xxx"
    )
}

/// Text after `Value:` on the first line that has it.
pub fn parse_value(reply: &str) -> Option<String> {
    reply.lines().find_map(|l| {
        let idx = l.find("Value:")?;
        let v = l[idx + "Value:".len()..].trim();
        (!v.is_empty()).then(|| v.to_string())
    })
}

impl RemoteProvider {
    pub fn new(cfg: RemoteConfig) -> Result<Self> {
        if cfg.concurrency == 0 {
            return Err(Error::InvalidConfig(
                "concurrency must be at least 1".into(),
            ));
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(cfg.timeout_secs))
            .build()
            .map_err(|e| Error::InvalidConfig(format!("http client: {e}")))?;
        let audit = match &cfg.audit_path {
            Some(p) => Some(Mutex::new(
                OpenOptions::new().create(true).append(true).open(p)?,
            )),
            None => None,
        };
        Ok(RemoteProvider { cfg, client, audit })
    }

    fn log(&self, entry: serde_json::Value) {
        if let Some(f) = &self.audit {
            let mut f = f.lock().expect("audit lock");
            if let Err(e) = writeln!(f, "{entry}") {
                log::warn!("audit log write failed: {e}");
            }
        }
    }

    fn ask(&self, doc: &Document, key: &str) -> Result<String> {
        let body = json!({
            "model": self.cfg.model,
            "temperature": 0,
            "messages": [{"role": "user", "content": prompt(&doc.context_text(), key)}],
        });
        let mut last_err = String::new();
        for attempt in 0..=self.cfg.max_retries {
            if attempt > 0 {
                std::thread::sleep(Duration::from_millis(self.cfg.backoff_ms << (attempt - 1)));
            }
            let mut req = self.client.post(&self.cfg.url).json(&body);
            if let Some(k) = &self.cfg.api_key {
                req = req.bearer_auth(k);
            }
            let outcome = req.send().map_err(|e| e.to_string()).and_then(|resp| {
                let status = resp.status();
                let text = resp.text().map_err(|e| e.to_string())?;
                if status.is_success() {
                    Ok(text)
                } else {
                    Err(format!("status {status}: {text}"))
                }
            });
            match outcome {
                Ok(text) => {
                    self.log(json!({"doc": doc.id, "key": key, "attempt": attempt, "request": body, "response": text}));
                    let parsed: serde_json::Value =
                        serde_json::from_str(&text).map_err(|e| Error::Provider {
                            doc: doc.id.clone(),
                            reason: format!("unparseable response: {e}"),
                        })?;
                    let content = parsed["choices"][0]["message"]["content"]
                        .as_str()
                        .ok_or_else(|| Error::Provider {
                            doc: doc.id.clone(),
                            reason: "response has no message content".into(),
                        })?;
                    return Ok(content.to_string());
                }
                Err(e) => {
                    self.log(json!({"doc": doc.id, "key": key, "attempt": attempt, "request": body, "error": e}));
                    last_err = e;
                }
            }
        }
        Err(Error::Provider {
            doc: doc.id.clone(),
            reason: format!(
                "gave up after {} attempts: {last_err}",
                self.cfg.max_retries + 1
            ),
        })
    }
}

impl AnnotationProvider for RemoteProvider {
    fn name(&self) -> &str {
        "remote"
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            tags: false,
            inquiries: true,
        }
    }

    fn tag_tokens(&self, doc: &Document, _space: &LabelSpace) -> Result<Vec<usize>> {
        Err(Error::Provider {
            doc: doc.id.clone(),
            reason: "remote provider does not tag tokens".into(),
        })
    }

    fn propose_inquiries(&self, doc: &Document, max_pairs: usize) -> Result<Vec<(String, String)>> {
        let mut out = Vec::new();
        for (key, _) in key_value_lines(doc).into_iter().take(max_pairs) {
            let reply = self.ask(doc, &key)?;
            if let Some(v) = parse_value(&reply) {
                out.push((key, v));
            }
        }
        Ok(out)
    }

    fn max_concurrency(&self) -> usize {
        self.cfg.concurrency
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn value_parsing() {
        assert_eq!(
            parse_value("Value: ACME Pty Ltd").as_deref(),
            Some("ACME Pty Ltd")
        );
        assert_eq!(
            parse_value("Sure.\nValue:  12.50 ").as_deref(),
            Some("12.50")
        );
        assert_eq!(parse_value("no idea"), None);
        assert_eq!(parse_value("Value:"), None);
    }

    #[test]
    fn prompt_shape() {
        let p = prompt("Holder Name: ACME", "Holder Name");
        assert!(p.starts_with("Context: Holder Name: ACME\n"));
        assert!(p.ends_with("Value: xxx"));
    }
}
