//! JSON wire types shared by the HTTP service, the scenario runner and the
//! tick loop.

use std::collections::BTreeMap;

use serde::de::{self, Deserializer};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::kinematics::DriveCommand;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{0}")]
pub struct MalformedCommand(pub String);

/// A command from an operator or script.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandMessage {
    Drive(DriveCommand),
    TripReset,
    ActuatorSet { channel: i64, value: i64 },
    Subscribe,
}

impl CommandMessage {
    pub fn kind(&self) -> &'static str {
        match self {
            CommandMessage::Drive(_) => "Drive",
            CommandMessage::TripReset => "TripReset",
            CommandMessage::ActuatorSet { .. } => "ActuatorSet",
            CommandMessage::Subscribe => "Subscribe",
        }
    }

    /// Drive and actuator commands need the driver token.
    pub fn needs_driver(&self) -> bool {
        matches!(self, CommandMessage::Drive(_) | CommandMessage::ActuatorSet { .. })
    }

    pub fn parse(body: &[u8]) -> Result<Self, MalformedCommand> {
        let value: Value = serde_json::from_slice(body).map_err(|e| MalformedCommand(format!("invalid JSON: {e}")))?;
        Self::from_value(&value)
    }

    /// Strict decoding: exactly the fields of the message kind must be present.
    pub fn from_value(value: &Value) -> Result<Self, MalformedCommand> {
        let bad = |m: String| Err(MalformedCommand(m));
        let Some(obj) = value.as_object() else {
            return bad("command must be a JSON object".into());
        };
        let kind = match obj.get("kind") {
            Some(Value::String(k)) => k.as_str(),
            Some(_) => return bad("\"kind\" must be a string".into()),
            None => return bad("missing \"kind\"".into()),
        };
        let allowed: &[&str] = match kind {
            "Drive" => &["kind", "drive"],
            "TripReset" | "Subscribe" => &["kind"],
            "ActuatorSet" => &["kind", "channel", "value"],
            other => return bad(format!("unknown kind {other:?}")),
        };
        if let Some(extra) = obj.keys().find(|k| !allowed.contains(&k.as_str())) {
            return bad(format!("unexpected field {extra:?} for {kind}"));
        }
        match kind {
            "Drive" => {
                let drive = match obj.get("drive") {
                    Some(Value::String(s)) => s.parse::<DriveCommand>().map_err(MalformedCommand)?,
                    Some(_) => return bad("\"drive\" must be a string".into()),
                    None => return bad("Drive requires \"drive\"".into()),
                };
                Ok(CommandMessage::Drive(drive))
            }
            "TripReset" => Ok(CommandMessage::TripReset),
            "Subscribe" => Ok(CommandMessage::Subscribe),
            _ => {
                let int = |name: &str| match obj.get(name) {
                    Some(v) => v.as_i64().ok_or_else(|| MalformedCommand(format!("\"{name}\" must be an integer"))),
                    None => Err(MalformedCommand(format!("ActuatorSet requires \"{name}\""))),
                };
                Ok(CommandMessage::ActuatorSet { channel: int("channel")?, value: int("value")? })
            }
        }
    }

    pub fn to_value(&self) -> Value {
        match self {
            CommandMessage::Drive(d) => json!({"kind": "Drive", "drive": d.as_str()}),
            CommandMessage::TripReset => json!({"kind": "TripReset"}),
            CommandMessage::ActuatorSet { channel, value } => {
                json!({"kind": "ActuatorSet", "channel": channel, "value": value})
            }
            CommandMessage::Subscribe => json!({"kind": "Subscribe"}),
        }
    }
}

impl Serialize for CommandMessage {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_value().serialize(s)
    }
}

impl<'de> Deserialize<'de> for CommandMessage {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = Value::deserialize(d)?;
        CommandMessage::from_value(&v).map_err(de::Error::custom)
    }
}

/// Reply body of `POST /api/command` and the driver endpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Reply {
    Applied { ok: bool, applied_tick: u64 },
    Token { ok: bool, token: String },
    Error { ok: bool, error: String },
    Released { ok: bool },
}

impl Reply {
    pub fn applied(tick: u64) -> Self {
        Reply::Applied { ok: true, applied_tick: tick }
    }

    pub fn error(msg: impl Into<String>) -> Self {
        Reply::Error { ok: false, error: msg.into() }
    }
}

/// A consistent snapshot of one simulation tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelemetryFrame {
    pub tick: u64,
    pub t_ms: u64,
    pub bearing_deg: f64,
    pub bearing_byte: u8,
    pub pose_est: (f64, f64),
    pub footprints: Vec<(f64, f64)>,
    pub total_distance_m: f64,
    pub net_displacement_m: f64,
    pub sensors: BTreeMap<String, f64>,
    pub drive_state: DriveCommand,
}

impl TelemetryFrame {
    pub fn to_json_line(&self) -> String {
        let mut s = serde_json::to_string(self).expect("frame serializes");
        s.push('\n');
        s
    }
}
