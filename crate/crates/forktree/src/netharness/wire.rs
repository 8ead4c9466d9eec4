//! The line-delimited request/response protocol: newline-terminated
//! canonical JSON, one request line to exactly one response line.
//!
//! Requests: `{"type":"HEIGHT"}`, `{"index":N,"type":"GET_BLOCK"}`,
//! `{"target":"<hex>","type":"FIND"}`.
//! Responses: `{"height":N,"type":"HEIGHT"}`, `{"block":{…},"type":"BLOCK"}`,
//! `{"hash":"<hex>","index":N,"payload":"<hex>","type":"FOUND"}`,
//! `{"type":"ABSENT"}`, `{"code":"<code>","message":"…","type":"ERR"}`.

use std::fmt;
use std::str::FromStr;

use serde_json::{Map, Value};
use thiserror::Error;

use crate::chain::ChainInstance;
use crate::codec::BlockDoc;
use crate::hashcore::{Block, Digest};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Request {
    Height,
    GetBlock { index: u64 },
    Find { target: Vec<u8> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Response {
    Height {
        height: u64,
    },
    Block {
        block: Block,
    },
    Found {
        index: u64,
        payload: Vec<u8>,
        hash: Digest,
    },
    Absent,
    Err {
        code: ErrCode,
        message: String,
    },
}

/// Closed set of protocol error codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrCode {
    BadRequest,
    UnknownBlock,
    Internal,
}

impl fmt::Display for ErrCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ErrCode::BadRequest => "bad-request",
            ErrCode::UnknownBlock => "unknown-block",
            ErrCode::Internal => "internal",
        })
    }
}

impl FromStr for ErrCode {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bad-request" => Ok(ErrCode::BadRequest),
            "unknown-block" => Ok(ErrCode::UnknownBlock),
            "internal" => Ok(ErrCode::Internal),
            _ => Err(()),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WireParseError {
    #[error("not a json object")]
    NotAnObject,
    #[error("invalid json: {0}")]
    Json(String),
    #[error("missing or non-string \"type\" field")]
    MissingType,
    #[error("unknown message type {0:?}")]
    UnknownType(String),
    #[error("field {0:?} is missing or has the wrong type")]
    BadField(&'static str),
    #[error("unexpected field {0:?}")]
    UnexpectedField(String),
    #[error("field {0:?} is not lowercase hex")]
    BadHex(&'static str),
}

fn parse_object(line: &str) -> Result<Map<String, Value>, WireParseError> {
    let value: Value =
        serde_json::from_str(line).map_err(|e| WireParseError::Json(e.to_string()))?;
    match value {
        Value::Object(map) => Ok(map),
        _ => Err(WireParseError::NotAnObject),
    }
}

fn expect_fields(obj: &Map<String, Value>, allowed: &[&str]) -> Result<(), WireParseError> {
    for key in obj.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(WireParseError::UnexpectedField(key.clone()));
        }
    }
    Ok(())
}

fn u64_field(obj: &Map<String, Value>, name: &'static str) -> Result<u64, WireParseError> {
    obj.get(name)
        .and_then(Value::as_u64)
        .ok_or(WireParseError::BadField(name))
}

fn str_field<'a>(
    obj: &'a Map<String, Value>,
    name: &'static str,
) -> Result<&'a str, WireParseError> {
    obj.get(name)
        .and_then(Value::as_str)
        .ok_or(WireParseError::BadField(name))
}

fn hex_field(obj: &Map<String, Value>, name: &'static str) -> Result<Vec<u8>, WireParseError> {
    let s = str_field(obj, name)?;
    if s.bytes().any(|b| b.is_ascii_uppercase()) {
        return Err(WireParseError::BadHex(name));
    }
    hex::decode(s).map_err(|_| WireParseError::BadHex(name))
}

impl Request {
    pub fn parse_line(line: &str) -> Result<Self, WireParseError> {
        let obj = parse_object(line)?;
        let msg_type = obj
            .get("type")
            .and_then(Value::as_str)
            .ok_or(WireParseError::MissingType)?;
        match msg_type {
            "HEIGHT" => {
                expect_fields(&obj, &["type"])?;
                Ok(Request::Height)
            }
            "GET_BLOCK" => {
                expect_fields(&obj, &["index", "type"])?;
                Ok(Request::GetBlock {
                    index: u64_field(&obj, "index")?,
                })
            }
            "FIND" => {
                expect_fields(&obj, &["target", "type"])?;
                Ok(Request::Find {
                    target: hex_field(&obj, "target")?,
                })
            }
            other => Err(WireParseError::UnknownType(other.to_string())),
        }
    }

    /// Canonical JSON without the trailing newline.
    pub fn encode(&self) -> String {
        let value = match self {
            Request::Height => serde_json::json!({ "type": "HEIGHT" }),
            Request::GetBlock { index } => {
                serde_json::json!({ "index": index, "type": "GET_BLOCK" })
            }
            Request::Find { target } => {
                serde_json::json!({ "target": hex::encode(target), "type": "FIND" })
            }
        };
        value.to_string()
    }
}

impl Response {
    pub fn parse_line(line: &str) -> Result<Self, WireParseError> {
        let obj = parse_object(line)?;
        let msg_type = obj
            .get("type")
            .and_then(Value::as_str)
            .ok_or(WireParseError::MissingType)?;
        match msg_type {
            "HEIGHT" => {
                expect_fields(&obj, &["height", "type"])?;
                Ok(Response::Height {
                    height: u64_field(&obj, "height")?,
                })
            }
            "BLOCK" => {
                expect_fields(&obj, &["block", "type"])?;
                let doc = obj.get("block").ok_or(WireParseError::BadField("block"))?;
                let doc: BlockDoc = serde_json::from_value(doc.clone())
                    .map_err(|_| WireParseError::BadField("block"))?;
                Ok(Response::Block { block: doc.into() })
            }
            "FOUND" => {
                expect_fields(&obj, &["hash", "index", "payload", "type"])?;
                let hash = Digest::from_hex(str_field(&obj, "hash")?)
                    .map_err(|_| WireParseError::BadHex("hash"))?;
                Ok(Response::Found {
                    index: u64_field(&obj, "index")?,
                    payload: hex_field(&obj, "payload")?,
                    hash,
                })
            }
            "ABSENT" => {
                expect_fields(&obj, &["type"])?;
                Ok(Response::Absent)
            }
            "ERR" => {
                expect_fields(&obj, &["code", "message", "type"])?;
                let code = str_field(&obj, "code")?
                    .parse()
                    .map_err(|_| WireParseError::BadField("code"))?;
                Ok(Response::Err {
                    code,
                    message: str_field(&obj, "message")?.to_string(),
                })
            }
            other => Err(WireParseError::UnknownType(other.to_string())),
        }
    }

    /// Canonical JSON without the trailing newline.
    pub fn encode(&self) -> String {
        let value = match self {
            Response::Height { height } => {
                serde_json::json!({ "height": height, "type": "HEIGHT" })
            }
            Response::Block { block } => {
                let doc = serde_json::to_value(BlockDoc::from(block))
                    .expect("block docs serialize infallibly");
                serde_json::json!({ "block": doc, "type": "BLOCK" })
            }
            Response::Found {
                index,
                payload,
                hash,
            } => serde_json::json!({
                "hash": hash.to_hex(),
                "index": index,
                "payload": hex::encode(payload),
                "type": "FOUND",
            }),
            Response::Absent => serde_json::json!({ "type": "ABSENT" }),
            Response::Err { code, message } => serde_json::json!({
                "code": code.to_string(),
                "message": message,
                "type": "ERR",
            }),
        };
        value.to_string()
    }
}

/// Answers one request line against a chain, read-only. Malformed input
/// never panics; it yields `ERR(bad-request)`.
pub fn respond(chain: &ChainInstance, line: &str) -> Response {
    match Request::parse_line(line) {
        Err(err) => Response::Err {
            code: ErrCode::BadRequest,
            message: err.to_string(),
        },
        Ok(Request::Height) => Response::Height {
            height: chain.height(),
        },
        Ok(Request::GetBlock { index }) => match usize::try_from(index)
            .ok()
            .and_then(|i| chain.blocks().get(i))
        {
            Some(block) => Response::Block {
                block: block.clone(),
            },
            None => Response::Err {
                code: ErrCode::UnknownBlock,
                message: format!("block {index} is out of range"),
            },
        },
        Ok(Request::Find { target }) => match chain.find_payload(&target) {
            Some((index, block)) => Response::Found {
                index,
                payload: block.payload().to_vec(),
                hash: block.hash,
            },
            None => Response::Absent,
        },
    }
}
