//! Planner wire format: newline-delimited canonical JSON.
//!
//! A frame is one JSON object with lexicographically sorted keys and no
//! insignificant whitespace, followed by a single LF.
//!
//! ```text
//! {"fact":{"dependent_count":0,"exception_count":0,"kind":"CF4","prior_failures_of_subject":0,"subject":"Query Service->Reputation Service"},"request_id":1,"type":"plan_request","version":1}
//! {"outcome":{"plan":{"fired_rule":"reconnect-on-cf4","strategy":"AS3","subject":"Query Service->Reputation Service"}},"request_id":1,"type":"plan_response","version":1}
//! ```

use std::io::{self, BufRead};

use serde::Serialize;
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::rules::{Fact, Plan};

pub const PROTOCOL_VERSION: u64 = 1;
pub const DEFAULT_PORT: u16 = 7464;

/// Error code sent back for frames that cannot be decoded.
pub const ERR_MALFORMED: &str = "malformed";
/// Error code for well-formed frames the receiver does not accept.
pub const ERR_UNEXPECTED: &str = "unexpected_message";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProtocolError {
    #[error("malformed frame: {0}")]
    MalformedFrame(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanRequest {
    pub request_id: u64,
    pub fact: Fact,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Plan(Plan),
    NoMatch,
    Error { code: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanResponse {
    pub request_id: u64,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Message {
    Request(PlanRequest),
    Response(PlanResponse),
}

/// Serializes any value as compact JSON with sorted object keys.
pub fn canonical_json<T: Serialize>(value: &T) -> String {
    // serde_json's Value map is a BTreeMap, so going through Value sorts keys.
    let v = serde_json::to_value(value).expect("serializable value");
    serde_json::to_string(&v).expect("Value always serializes")
}

fn outcome_value(outcome: &Outcome) -> Value {
    match outcome {
        Outcome::Plan(p) => json!({ "plan": p }),
        Outcome::NoMatch => json!({ "no_match": true }),
        Outcome::Error { code, message } => json!({ "error": { "code": code, "message": message } }),
    }
}

pub fn encode(message: &Message) -> Vec<u8> {
    let v = match message {
        Message::Request(r) => json!({
            "fact": r.fact,
            "request_id": r.request_id,
            "type": "plan_request",
            "version": PROTOCOL_VERSION,
        }),
        Message::Response(r) => json!({
            "outcome": outcome_value(&r.outcome),
            "request_id": r.request_id,
            "type": "plan_response",
            "version": PROTOCOL_VERSION,
        }),
    };
    let mut out = canonical_json(&v).into_bytes();
    out.push(b'\n');
    out
}

fn malformed(detail: impl Into<String>) -> ProtocolError {
    ProtocolError::MalformedFrame(detail.into())
}

fn take<'a>(obj: &'a Map<String, Value>, key: &str) -> Result<&'a Value, ProtocolError> {
    obj.get(key).ok_or_else(|| malformed(format!("missing field `{key}`")))
}

fn expect_keys(obj: &Map<String, Value>, keys: &[&str], what: &str) -> Result<(), ProtocolError> {
    match obj.keys().find(|k| !keys.contains(&k.as_str())) {
        Some(k) => Err(malformed(format!("unexpected field `{k}` in {what}"))),
        None => Ok(()),
    }
}

fn as_str<'a>(v: &'a Value, what: &str) -> Result<&'a str, ProtocolError> {
    v.as_str()
        .ok_or_else(|| malformed(format!("`{what}` must be a string")))
}

fn decode_outcome(v: &Value) -> Result<Outcome, ProtocolError> {
    let obj = v.as_object().ok_or_else(|| malformed("`outcome` must be an object"))?;
    if obj.len() != 1 {
        return Err(malformed("`outcome` must have exactly one key"));
    }
    let (key, body) = obj.iter().next().unwrap();
    match key.as_str() {
        "plan" => {
            let plan: Plan = serde_json::from_value(body.clone()).map_err(|e| malformed(format!("bad plan: {e}")))?;
            Ok(Outcome::Plan(plan))
        }
        "no_match" if body == &Value::Bool(true) => Ok(Outcome::NoMatch),
        "error" => {
            let e = body.as_object().ok_or_else(|| malformed("`error` must be an object"))?;
            expect_keys(e, &["code", "message"], "error")?;
            Ok(Outcome::Error {
                code: as_str(take(e, "code")?, "code")?.to_string(),
                message: as_str(take(e, "message")?, "message")?.to_string(),
            })
        }
        other => Err(malformed(format!("unknown outcome `{other}`"))),
    }
}

/// Decodes one frame. The trailing LF is optional.
pub fn decode(bytes: &[u8]) -> Result<Message, ProtocolError> {
    let bytes = bytes.strip_suffix(b"\n").unwrap_or(bytes);
    let text = std::str::from_utf8(bytes).map_err(|e| malformed(format!("invalid UTF-8: {e}")))?;
    let v: Value = serde_json::from_str(text).map_err(|e| malformed(format!("invalid JSON: {e}")))?;
    let obj = v.as_object().ok_or_else(|| malformed("frame must be a JSON object"))?;

    match take(obj, "version")?.as_u64() {
        Some(PROTOCOL_VERSION) => {}
        _ => return Err(malformed("unsupported protocol version")),
    }
    let request_id = take(obj, "request_id")?
        .as_u64()
        .ok_or_else(|| malformed("`request_id` must be a non-negative integer"))?;

    match as_str(take(obj, "type")?, "type")? {
        "plan_request" => {
            expect_keys(obj, &["fact", "request_id", "type", "version"], "plan_request")?;
            let fact: Fact =
                serde_json::from_value(take(obj, "fact")?.clone()).map_err(|e| malformed(format!("bad fact: {e}")))?;
            Ok(Message::Request(PlanRequest { request_id, fact }))
        }
        "plan_response" => {
            expect_keys(obj, &["outcome", "request_id", "type", "version"], "plan_response")?;
            Ok(Message::Response(PlanResponse {
                request_id,
                outcome: decode_outcome(take(obj, "outcome")?)?,
            }))
        }
        other => Err(malformed(format!("unknown message type `{other}`"))),
    }
}

/// Best-effort `request_id` of a frame that failed to decode, so the error
/// reply can still be correlated.
pub fn salvage_request_id(bytes: &[u8]) -> u64 {
    serde_json::from_slice::<Value>(bytes.strip_suffix(b"\n").unwrap_or(bytes))
        .ok()
        .and_then(|v| v.get("request_id").and_then(Value::as_u64))
        .unwrap_or(0)
}

/// Reads one LF-terminated frame. `Ok(None)` on clean end of stream; a
/// final unterminated line is still returned.
pub fn read_frame(reader: &mut impl BufRead) -> io::Result<Option<Vec<u8>>> {
    let mut buf = Vec::new();
    let n = reader.read_until(b'\n', &mut buf)?;
    if n == 0 {
        return Ok(None);
    }
    Ok(Some(buf))
}
