//! Line-delimited JSON telemetry. Every record carries `t` (ms of
//! simulated time) and `type`; the first record is a `header` stating the
//! schema version.

use serde::Serialize;
use serde_json::{Map, Value};

use crate::simkernel::SimTime;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub t: SimTime,
    pub kind: String,
    pub fields: Map<String, Value>,
}

impl Record {
    pub fn get(&self, key: &str) -> Option<&Value> {
        self.fields.get(key)
    }

    pub fn str(&self, key: &str) -> Option<&str> {
        self.get(key).and_then(Value::as_str)
    }

    pub fn f64(&self, key: &str) -> Option<f64> {
        self.get(key).and_then(Value::as_f64)
    }

    pub fn u64(&self, key: &str) -> Option<u64> {
        self.get(key).and_then(Value::as_u64)
    }

    pub fn to_json(&self) -> String {
        let mut m = self.fields.clone();
        m.insert("t".into(), Value::from(self.t.ticks()));
        m.insert("type".into(), Value::from(self.kind.clone()));
        serde_json::to_string(&Value::Object(m)).expect("telemetry values are finite")
    }
}

#[derive(Debug, Clone, Default)]
pub struct Telemetry {
    records: Vec<Record>,
}

impl Telemetry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a record. `fields` must serialize to a JSON object.
    pub fn log(&mut self, t: SimTime, kind: &str, fields: impl Serialize) {
        let fields = match serde_json::to_value(fields).expect("serializable telemetry") {
            Value::Object(m) => m,
            Value::Null => Map::new(),
            other => panic!("telemetry fields must be an object, got {other}"),
        };
        self.records.push(Record {
            t,
            kind: kind.to_string(),
            fields,
        });
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn of_kind<'a>(&'a self, kind: &'a str) -> impl Iterator<Item = &'a Record> + 'a {
        self.records.iter().filter(move |r| r.kind == kind)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&r.to_json());
            out.push('\n');
        }
        out
    }
}
