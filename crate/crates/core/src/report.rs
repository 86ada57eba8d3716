//! Machine-readable reports.
//!
//! Reports are single-line JSON documents. Every real number is written with
//! 17 significant digits so that it parses back to the identical `f64`.

use std::io;

use serde::{Deserialize, Serialize};
use serde_json::ser::Formatter;

use crate::error::{Error, Result};
use crate::game::{AllianceReport, CoalitionValue};
use crate::instance::{Coalition, Instance, Objective};
use crate::oracles::ScheduleOutcome;
use crate::stability::StabilityReport;

pub const TOOL: &str = "alliance";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceDigest {
    pub organizations: usize,
    pub ids: Vec<String>,
    pub objective: Objective,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

impl From<&Instance> for InstanceDigest {
    fn from(inst: &Instance) -> Self {
        InstanceDigest {
            organizations: inst.org_count(),
            ids: inst.organizations.iter().map(|o| o.id.clone()).collect(),
            objective: inst.objective,
            alpha: inst.alpha,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Parameters {
    pub tol: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eq_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    pub no_migration: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueTable {
    pub coalition: Coalition,
    pub ids: Vec<String>,
    #[serde(flatten)]
    pub value: CoalitionValue,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchedulePayload {
    pub coalition: Coalition,
    pub ids: Vec<String>,
    pub outcome: ScheduleOutcome,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "data", rename_all = "snake_case")]
pub enum Payload {
    Alliance(AllianceReport),
    Value(ValueTable),
    Schedule(SchedulePayload),
    Stability(StabilityReport),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub instance: InstanceDigest,
    pub parameters: Parameters,
    pub payload: Payload,
}

impl Report {
    pub fn new(command: &str, inst: &Instance, parameters: Parameters, payload: Payload) -> Self {
        Report {
            tool: TOOL.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            instance: inst.into(),
            parameters,
            payload,
        }
    }

    pub fn to_json(&self) -> String {
        to_json(self)
    }

    pub fn from_json(text: &str) -> Result<Report> {
        serde_json::from_str(text).map_err(|e| Error::Syntax {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }
}

/// Compact JSON with reals in `d.dddddddddddddddde±x` form.
struct SignificantDigits;

impl Formatter for SignificantDigits {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            write!(writer, "{value:.16e}")
        } else {
            writer.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SignificantDigits);
    value
        .serialize(&mut ser)
        .expect("report values serialize to JSON");
    String::from_utf8(buf).expect("serde_json writes UTF-8")
}
