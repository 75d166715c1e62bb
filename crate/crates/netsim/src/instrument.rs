// Copyright 2026 The roq Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

use std::io::{self, Write};

use crate::{NodeId, SimTime};

/// One entry of the append-only instrumentation stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Record {
    pub t: SimTime,
    pub node: NodeId,
    pub category: String,
    pub key: String,
    pub value: String,
}

impl Record {
    pub fn new(
        t: SimTime,
        node: NodeId,
        category: impl Into<String>,
        key: impl Into<String>,
        value: impl Into<String>,
    ) -> Self {
        Record { t, node, category: category.into(), key: key.into(), value: value.into() }
    }
}

pub const CSV_HEADER: &str = "t_us,node,category,key,value";

/// Serializes records as CSV with the header `t_us,node,category,key,value`.
///
/// Fields containing commas, quotes or newlines are quoted.
pub fn write_csv<W: Write>(mut w: W, records: &[Record]) -> io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.t.as_micros(),
            r.node.0,
            escape(&r.category),
            escape(&r.key),
            escape(&r.value)
        )?;
    }
    Ok(())
}

fn escape(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
