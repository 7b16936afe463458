//! Line-delimited JSON protocol spoken with external metric adapters over
//! their standard input and output.
//!
//! ```text
//! engine  → {"type":"hello","protocol":1}
//! adapter → {"type":"ready","name":"<metric>","protocol":1}
//! engine  → {"type":"score","id":"<id>","source":"...","summary":"..."}
//! adapter → {"type":"result","id":"<id>","value":0.5}
//!         | {"type":"error","id":"<id>","message":"..."}
//! engine  → {"type":"bye"}
//! ```

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const PROTOCOL_VERSION: u32 = 1;
pub const TIMEOUT_ENV: &str = "FACTGAUGE_ADAPTER_TIMEOUT_MS";
pub const DEFAULT_TIMEOUT_MS: u64 = 60_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Message {
    Hello {
        protocol: u32,
    },
    Ready {
        name: String,
        protocol: u32,
    },
    Score {
        id: String,
        source: String,
        summary: String,
    },
    Result {
        id: String,
        value: f64,
    },
    Error {
        id: String,
        message: String,
    },
    Bye,
}

impl Message {
    /// Compact single-line JSON.
    pub fn encode(&self) -> String {
        serde_json::to_string(self).expect("protocol messages always serialize")
    }
}

/// A decoded line. Result lines whose value is not a finite number
/// (`NaN`, `Infinity`, `null`) decode to `NonFinite`.
#[derive(Debug, Clone, PartialEq)]
pub enum Incoming {
    Message(Message),
    NonFinite { id: String },
}

pub fn decode(line: &str) -> Result<Incoming, String> {
    if let Ok(msg) = serde_json::from_str::<Message>(line) {
        return match msg {
            Message::Result { id, value } if !value.is_finite() => Ok(Incoming::NonFinite { id }),
            m => Ok(Incoming::Message(m)),
        };
    }
    // bare NaN / Infinity are not JSON; give them a second chance
    let patched = line
        .replace("-Infinity", "null")
        .replace("Infinity", "null")
        .replace("NaN", "null");
    let value: serde_json::Value =
        serde_json::from_str(&patched).map_err(|e| format!("not a protocol message: {e}"))?;
    match (
        value.get("type").and_then(|t| t.as_str()),
        value.get("id").and_then(|i| i.as_str()),
        value.get("value"),
    ) {
        (Some("result"), Some(id), Some(serde_json::Value::Null)) => {
            Ok(Incoming::NonFinite { id: id.to_string() })
        }
        _ => Err(format!("not a protocol message: {line}")),
    }
}

#[derive(Debug, Error)]
pub enum AdapterError {
    #[error("cannot launch adapter {command:?}: {message}")]
    Launch { command: String, message: String },
    #[error("adapter {command:?} speaks protocol {found}, expected {expected}")]
    VersionMismatch {
        command: String,
        expected: u32,
        found: u32,
    },
    #[error("adapter {command:?} handshake failed: {message}")]
    Handshake { command: String, message: String },
    #[error("adapter {command:?} did not answer request {id:?} within {timeout_ms} ms")]
    Timeout {
        command: String,
        id: String,
        timeout_ms: u128,
    },
    #[error("adapter {command:?} closed its output")]
    Closed { command: String },
    #[error("adapter {command:?}: {message}")]
    Io { command: String, message: String },
}

/// Timeout from `FACTGAUGE_ADAPTER_TIMEOUT_MS`, defaulting to 60 s.
pub fn timeout_from_env() -> Result<Duration, String> {
    match std::env::var(TIMEOUT_ENV) {
        Ok(v) => v
            .trim()
            .parse::<u64>()
            .ok()
            .filter(|&ms| ms > 0)
            .map(Duration::from_millis)
            .ok_or_else(|| format!("{TIMEOUT_ENV} must be a positive integer, got {v:?}")),
        Err(_) => Ok(Duration::from_millis(DEFAULT_TIMEOUT_MS)),
    }
}

/// One running adapter process.
pub struct AdapterClient {
    command: String,
    name: String,
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<std::io::Result<String>>,
    timeout: Duration,
}

impl AdapterClient {
    /// Launches `command` (program followed by arguments) and performs the
    /// handshake.
    pub fn spawn(command: &[String], timeout: Duration) -> Result<Self, AdapterError> {
        let display = command.join(" ");
        let (program, args) = command.split_first().ok_or_else(|| AdapterError::Launch {
            command: display.clone(),
            message: "empty command".into(),
        })?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| AdapterError::Launch {
                command: display.clone(),
                message: e.to_string(),
            })?;
        let stdout = child.stdout.take().expect("stdout is piped");
        let stdin = child.stdin.take();
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let stop = line.is_err();
                if tx.send(line).is_err() || stop {
                    break;
                }
            }
        });
        let mut client = Self {
            command: display,
            name: String::new(),
            child,
            stdin,
            lines: rx,
            timeout,
        };
        client.handshake()?;
        Ok(client)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    fn handshake(&mut self) -> Result<(), AdapterError> {
        self.send(&Message::Hello {
            protocol: PROTOCOL_VERSION,
        })?;
        let line = self.recv("hello")?;
        match decode(&line) {
            Ok(Incoming::Message(Message::Ready { name, protocol })) => {
                if protocol != PROTOCOL_VERSION {
                    return Err(AdapterError::VersionMismatch {
                        command: self.command.clone(),
                        expected: PROTOCOL_VERSION,
                        found: protocol,
                    });
                }
                self.name = name;
                Ok(())
            }
            other => Err(AdapterError::Handshake {
                command: self.command.clone(),
                message: format!("expected ready, got {other:?}"),
            }),
        }
    }

    fn send(&mut self, msg: &Message) -> Result<(), AdapterError> {
        let io_err = |e: std::io::Error| AdapterError::Io {
            command: self.command.clone(),
            message: e.to_string(),
        };
        let stdin = self.stdin.as_mut().ok_or_else(|| AdapterError::Closed {
            command: self.command.clone(),
        })?;
        writeln!(stdin, "{}", msg.encode()).map_err(io_err)?;
        stdin.flush().map_err(io_err)
    }

    fn recv(&mut self, id: &str) -> Result<String, AdapterError> {
        match self.lines.recv_timeout(self.timeout) {
            Ok(Ok(line)) => Ok(line),
            Ok(Err(e)) => Err(AdapterError::Io {
                command: self.command.clone(),
                message: e.to_string(),
            }),
            Err(RecvTimeoutError::Timeout) => {
                let _ = self.child.kill();
                Err(AdapterError::Timeout {
                    command: self.command.clone(),
                    id: id.to_string(),
                    timeout_ms: self.timeout.as_millis(),
                })
            }
            Err(RecvTimeoutError::Disconnected) => Err(AdapterError::Closed {
                command: self.command.clone(),
            }),
        }
    }

    /// Scores one pair. The outer error is a session failure; the inner one
    /// is a per-request failure (adapter error, non-finite value, malformed or
    /// mismatched reply) after which the session stays usable.
    pub fn score(
        &mut self,
        id: &str,
        source: &str,
        summary: &str,
    ) -> Result<Result<f64, String>, AdapterError> {
        self.send(&Message::Score {
            id: id.to_string(),
            source: source.to_string(),
            summary: summary.to_string(),
        })?;
        let line = self.recv(id)?;
        Ok(match decode(&line) {
            Ok(Incoming::Message(Message::Result { id: rid, value })) if rid == id => Ok(value),
            Ok(Incoming::Message(Message::Error { id: rid, message })) if rid == id => Err(message),
            Ok(Incoming::NonFinite { id: rid }) if rid == id => {
                Err("adapter returned a non-finite value".to_string())
            }
            Ok(other) => Err(format!("unexpected reply {other:?}")),
            Err(e) => Err(format!("malformed reply: {e}")),
        })
    }

    /// Sends `bye` and waits for the process to exit.
    pub fn close(mut self) {
        let _ = self.send(&Message::Bye);
        self.stdin = None;
        for _ in 0..50 {
            if let Ok(Some(_)) = self.child.try_wait() {
                return;
            }
            thread::sleep(Duration::from_millis(10));
        }
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

impl Drop for AdapterClient {
    fn drop(&mut self) {
        if let Ok(None) = self.child.try_wait() {
            let _ = self.child.kill();
            let _ = self.child.wait();
        }
    }
}
