use std::fmt::Write as _;

use concord::Matrix;
use serde_json::{json, Map, Value};

/// Verdict-bearing exit codes; errors use 2 and 3.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Success,
    Negative,
}

impl Status {
    pub fn code(self) -> u8 {
        match self {
            Self::Success => 0,
            Self::Negative => 1,
        }
    }

    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Self::Success
        } else {
            Self::Negative
        }
    }
}

/// The outcome of one command: human text and the same content as JSON.
pub struct Report {
    pub status: Status,
    text: String,
    fields: Map<String, Value>,
}

impl Report {
    pub fn new(command: &str, status: Status) -> Self {
        let mut fields = Map::new();
        fields.insert("command".into(), json!(command));
        Self { status, text: String::new(), fields }
    }

    /// Sets the verdict string shown in both forms.
    pub fn verdict(mut self, verdict: &str) -> Self {
        let _ = writeln!(self.text, "verdict: {verdict}");
        self.fields.insert("verdict".into(), json!(verdict));
        self
    }

    pub fn line(mut self, line: impl AsRef<str>) -> Self {
        self.text.push_str(line.as_ref());
        self.text.push('\n');
        self
    }

    pub fn field(mut self, key: &str, value: impl serde::Serialize) -> Self {
        self.fields.insert(key.into(), serde_json::to_value(value).expect("serializable field"));
        self
    }

    /// Adds a labelled matrix to the text and a nested array to the JSON.
    pub fn matrix(mut self, key: &str, m: &Matrix) -> Self {
        let _ = writeln!(self.text, "{key}:");
        self.text.push_str(&format_matrix(m));
        self.fields.insert(key.into(), json!(m.to_rows()));
        self
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn json(&self) -> Value {
        let mut fields = self.fields.clone();
        fields.insert("exit_code".into(), json!(self.status.code()));
        Value::Object(fields)
    }
}

pub fn format_matrix(m: &Matrix) -> String {
    let mut s = String::new();
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|v| format!("{v:>9.6}")).collect();
        let _ = writeln!(s, "  {}", row.join(" "));
    }
    s
}
