//! Dependency-free lexical adapter for exercising the adapter protocol.
//!
//! Usage: factgauge-echo-adapter [--mode unigram-recall|token-count]
//!                               [--name NAME] [--protocol N]
//!
//! Summaries containing these markers trigger faults:
//! `<<nan>>` replies with a NaN value, `<<error>>` with an error message,
//! `<<garbage>>` with a line that is not JSON, `<<hang>>` never replies.

use std::collections::HashMap;
use std::io::{self, BufRead, Write};
use std::process::ExitCode;

use factgauge::metrics::protocol::{Message, PROTOCOL_VERSION};

#[derive(Clone, Copy)]
enum Mode {
    UnigramRecall,
    TokenCount,
}

fn tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for c in text.chars().flat_map(char::to_lowercase) {
        if c.is_alphanumeric() {
            cur.push(c);
        } else if !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

// Clipped unigram matches over the number of source tokens.
fn unigram_recall(source: &str, summary: &str) -> f64 {
    let src = tokens(source);
    if src.is_empty() {
        return 0.0;
    }
    let mut available: HashMap<&str, usize> = HashMap::new();
    for t in &src {
        *available.entry(t).or_default() += 1;
    }
    let mut hits = 0usize;
    for t in tokens(summary) {
        if let Some(n) = available.get_mut(t.as_str()) {
            if *n > 0 {
                *n -= 1;
                hits += 1;
            }
        }
    }
    hits as f64 / src.len() as f64
}

fn main() -> ExitCode {
    let mut mode = Mode::UnigramRecall;
    let mut name = String::from("echo");
    let mut protocol = PROTOCOL_VERSION;
    let mut args = std::env::args().skip(1);
    while let Some(a) = args.next() {
        let value = args.next();
        match (a.as_str(), value.as_deref()) {
            ("--mode", Some("unigram-recall")) => mode = Mode::UnigramRecall,
            ("--mode", Some("token-count")) => mode = Mode::TokenCount,
            ("--name", Some(v)) => name = v.to_string(),
            ("--protocol", Some(v)) if v.parse::<u32>().is_ok() => protocol = v.parse().unwrap(),
            _ => {
                eprintln!("usage: factgauge-echo-adapter [--mode unigram-recall|token-count] [--name NAME] [--protocol N]");
                return ExitCode::from(2);
            }
        }
    }

    let stdin = io::stdin();
    let mut out = io::stdout().lock();
    for line in stdin.lock().lines() {
        let Ok(line) = line else { break };
        if line.trim().is_empty() {
            continue;
        }
        let reply = match serde_json::from_str::<Message>(&line) {
            Ok(Message::Hello { .. }) => Message::Ready {
                name: name.clone(),
                protocol,
            }
            .encode(),
            Ok(Message::Bye) => break,
            Ok(Message::Score {
                id,
                source,
                summary,
            }) => {
                if summary.contains("<<hang>>") {
                    loop {
                        std::thread::park();
                    }
                }
                if summary.contains("<<garbage>>") {
                    "this is not a protocol message".to_string()
                } else if summary.contains("<<nan>>") {
                    format!(
                        r#"{{"type":"result","id":{},"value":NaN}}"#,
                        serde_json::json!(id)
                    )
                } else if summary.contains("<<error>>") {
                    Message::Error {
                        id,
                        message: "requested failure".into(),
                    }
                    .encode()
                } else {
                    let value = match mode {
                        Mode::UnigramRecall => unigram_recall(&source, &summary),
                        Mode::TokenCount => tokens(&summary).len() as f64,
                    };
                    Message::Result { id, value }.encode()
                }
            }
            Ok(other) => Message::Error {
                id: String::new(),
                message: format!("unexpected message {other:?}"),
            }
            .encode(),
            Err(e) => Message::Error {
                id: String::new(),
                message: format!("malformed request: {e}"),
            }
            .encode(),
        };
        if writeln!(out, "{reply}").and_then(|_| out.flush()).is_err() {
            break;
        }
    }
    ExitCode::SUCCESS
}
