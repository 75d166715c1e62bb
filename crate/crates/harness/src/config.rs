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

//! Experiment configuration.
//!
//! Configurations are TOML documents. Every problem found is reported, not
//! just the first one, and unknown keys are rejected.
//!
//! ```toml
//! protocol = "bgp"            # bgp | ospf
//! transport = "quic"          # tcp-like | quic  (ospf also accepts "native")
//! mode = "full-acks"          # full-acks | delegate-acks, ospf only
//! seed = 42
//! time_cap = 300              # virtual seconds
//! out = "out/bgp-triangle"    # optional, relative to the config file
//!
//! [rib]                       # bgp only: exactly one of the two keys
//! generate = 10000
//! # path = "routes.txt"
//!
//! [[node]]
//! id = 1
//! asn = 64501                 # bgp only
//! role = "r1"                 # bgp only: injector | r1 | r2 | r3
//!
//! [[link]]
//! a = 1
//! b = 2
//! delay_ms = 10.0
//! loss_rate = 0.0             # optional
//! mtu = 1500                  # optional
//! cost = 1                    # optional, ospf interface cost
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Duration;

use roq_netsim::DEFAULT_MTU;
use thiserror::Error;
use toml::{Table, Value};

/// Smallest MTU that still carries a full transport segment.
pub const MIN_MTU: usize = 1480;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    Bgp,
    Ospf,
}

/// Transport between the measured routers. For OSPF, `TcpLike` selects
/// the native datagram mode with OSPF's own reliability.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransportChoice {
    TcpLike,
    Quic,
}

impl fmt::Display for TransportChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TransportChoice::TcpLike => "tcp-like",
            TransportChoice::Quic => "quic",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Role {
    Injector,
    R1,
    R2,
    R3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeConfig {
    pub id: u32,
    pub asn: Option<u32>,
    pub role: Option<Role>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkConfig {
    pub a: u32,
    pub b: u32,
    pub delay: Duration,
    pub loss_rate: f64,
    pub mtu: usize,
    pub cost: u32,
}

impl LinkConfig {
    pub fn new(a: u32, b: u32, delay: Duration) -> Self {
        LinkConfig { a, b, delay, loss_rate: 0.0, mtu: DEFAULT_MTU, cost: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RibSource {
    File(PathBuf),
    Generate(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub protocol: Protocol,
    pub transport: TransportChoice,
    pub delegate_acks: bool,
    pub rib: Option<RibSource>,
    pub seed: u64,
    pub time_cap: Duration,
    pub out: Option<PathBuf>,
    pub nodes: Vec<NodeConfig>,
    pub links: Vec<LinkConfig>,
}

pub const TRIANGLE_ASNS: [(u32, Role, u32); 4] =
    [(4, Role::Injector, 64500), (1, Role::R1, 64501), (2, Role::R2, 64502), (3, Role::R3, 64503)];

impl ExperimentConfig {
    /// Injector (node 4) feeding R1, with R1, R2 and R3 in a triangle.
    pub fn bgp_triangle(transport: TransportChoice, routes: usize, seed: u64) -> Self {
        let d = Duration::from_millis(10);
        ExperimentConfig {
            protocol: Protocol::Bgp,
            transport,
            delegate_acks: false,
            rib: Some(RibSource::Generate(routes)),
            seed,
            time_cap: Duration::from_secs(300),
            out: None,
            nodes: TRIANGLE_ASNS
                .iter()
                .map(|&(id, role, asn)| NodeConfig { id, asn: Some(asn), role: Some(role) })
                .collect(),
            links: [(4, 1), (1, 2), (1, 3), (2, 3)].into_iter().map(|(a, b)| LinkConfig::new(a, b, d)).collect(),
        }
    }

    /// Full mesh of `n` routers with unit costs.
    pub fn ospf_mesh(n: u32, transport: TransportChoice, delegate_acks: bool, seed: u64) -> Self {
        let d = Duration::from_millis(10);
        let mut links = Vec::new();
        for a in 1..=n {
            for b in a + 1..=n {
                links.push(LinkConfig::new(a, b, d));
            }
        }
        ExperimentConfig {
            protocol: Protocol::Ospf,
            transport,
            delegate_acks,
            rib: None,
            seed,
            time_cap: Duration::from_secs(300),
            out: None,
            nodes: (1..=n).map(|id| NodeConfig { id, asn: None, role: None }).collect(),
            links,
        }
    }

    pub fn with_loss(mut self, loss_rate: f64) -> Self {
        for l in &mut self.links {
            l.loss_rate = loss_rate;
        }
        self
    }

    pub fn node_with_role(&self, role: Role) -> Option<u32> {
        self.nodes.iter().find(|n| n.role == Some(role)).map(|n| n.id)
    }

    pub fn link(&self, a: u32, b: u32) -> Option<&LinkConfig> {
        self.links.iter().find(|l| (l.a, l.b) == (a, b) || (l.a, l.b) == (b, a))
    }

    /// Semantic checks shared by parsed and programmatic configurations.
    pub fn validate(&self) -> Vec<ConfigError> {
        let mut errs = Vec::new();
        let mut bad = |field: String, reason: String| errs.push(ConfigError::InvalidValue { field, reason });
        if self.time_cap.is_zero() {
            bad("time_cap".into(), "must be positive".into());
        }
        let mut ids = BTreeSet::new();
        for (i, n) in self.nodes.iter().enumerate() {
            if !ids.insert(n.id) {
                bad(format!("node[{i}].id"), format!("duplicate node {}", n.id));
            }
        }
        let mut pairs = BTreeSet::new();
        for (i, l) in self.links.iter().enumerate() {
            for (end, id) in [("a", l.a), ("b", l.b)] {
                if !ids.contains(&id) {
                    bad(format!("link[{i}].{end}"), format!("unknown node {id}"));
                }
            }
            if l.a == l.b {
                bad(format!("link[{i}]"), "endpoints must differ".into());
            } else if !pairs.insert((l.a.min(l.b), l.a.max(l.b))) {
                bad(format!("link[{i}]"), format!("duplicate link {}-{}", l.a, l.b));
            }
            if l.delay.is_zero() {
                bad(format!("link[{i}].delay_ms"), "must be positive".into());
            }
            if !(0.0..=1.0).contains(&l.loss_rate) {
                bad(format!("link[{i}].loss_rate"), format!("{} is outside 0..1", l.loss_rate));
            }
            if l.mtu < MIN_MTU {
                bad(format!("link[{i}].mtu"), format!("{} is below {MIN_MTU}", l.mtu));
            }
            if l.cost == 0 || l.cost > u16::MAX as u32 {
                bad(format!("link[{i}].cost"), format!("{} is outside 1..65535", l.cost));
            }
        }
        match self.protocol {
            Protocol::Bgp => {
                let mut asns = BTreeSet::new();
                for (i, n) in self.nodes.iter().enumerate() {
                    match n.asn {
                        None => bad(format!("node[{i}].asn"), "required for bgp".into()),
                        Some(0) => bad(format!("node[{i}].asn"), "must be non-zero".into()),
                        Some(a) if !asns.insert(a) => bad(format!("node[{i}].asn"), format!("duplicate AS {a}")),
                        Some(_) => {}
                    }
                    if n.role.is_none() {
                        bad(format!("node[{i}].role"), "required for bgp".into());
                    }
                }
                for role in [Role::Injector, Role::R1, Role::R2, Role::R3] {
                    let count = self.nodes.iter().filter(|n| n.role == Some(role)).count();
                    if count != 1 {
                        bad("node".into(), format!("need exactly one {role:?} node, found {count}"));
                    }
                }
                if let (Some(inj), Some(r1), Some(r2), Some(r3)) = (
                    self.node_with_role(Role::Injector),
                    self.node_with_role(Role::R1),
                    self.node_with_role(Role::R2),
                    self.node_with_role(Role::R3),
                ) {
                    for (x, y) in [(inj, r1), (r1, r2), (r1, r3)] {
                        if self.link(x, y).is_none() {
                            bad("link".into(), format!("topology needs a link {x}-{y}"));
                        }
                    }
                }
                match &self.rib {
                    None => bad("rib".into(), "bgp needs a rib path or generator".into()),
                    Some(RibSource::Generate(0)) => bad("rib.generate".into(), "must be at least 1".into()),
                    Some(_) => {}
                }
                if self.delegate_acks {
                    bad("mode".into(), "delegate-acks applies to ospf only".into());
                }
            }
            Protocol::Ospf => {
                if self.nodes.len() < 2 {
                    bad("node".into(), "ospf needs at least two routers".into());
                }
                if self.rib.is_some() {
                    bad("rib".into(), "applies to bgp only".into());
                }
                if self.delegate_acks && self.transport == TransportChoice::TcpLike {
                    bad("mode".into(), "delegate-acks needs the quic transport".into());
                }
                for (i, n) in self.nodes.iter().enumerate() {
                    if n.asn.is_some() {
                        bad(format!("node[{i}].asn"), "applies to bgp only".into());
                    }
                    if n.role.is_some() {
                        bad(format!("node[{i}].role"), "applies to bgp only".into());
                    }
                }
            }
        }
        errs
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unknown field `{0}`")]
    UnknownField(String),
    #[error("invalid value for `{field}`: {reason}")]
    InvalidValue { field: String, reason: String },
    #[error("cannot read {path}: {message}")]
    Io { path: PathBuf, message: String },
}

/// Every error found in one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigErrors(pub Vec<ConfigError>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

/// Reads and validates a configuration file. Relative `out` and
/// `rib.path` values resolve against the file's directory.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, ConfigErrors> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigErrors(vec![ConfigError::Io { path: path.to_path_buf(), message: e.to_string() }]))?;
    let mut cfg = parse_config(&text)?;
    let base = path.parent().unwrap_or(Path::new("."));
    if let Some(RibSource::File(p)) = &mut cfg.rib {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    }
    if let Some(out) = &mut cfg.out {
        if out.is_relative() {
            *out = base.join(&*out);
        }
    }
    Ok(cfg)
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigErrors> {
    let mut root: Table = text.parse().map_err(|e: toml::de::Error| {
        let line = e.span().map_or(1, |s| text[..s.start.min(text.len())].matches('\n').count() + 1);
        ConfigErrors(vec![ConfigError::Parse { line, message: e.message().trim().to_string() }])
    })?;
    let mut r = Reader::default();

    let protocol = r.string(&mut root, "", "protocol", true).and_then(|s| match s.as_str() {
        "bgp" => Some(Protocol::Bgp),
        "ospf" => Some(Protocol::Ospf),
        other => r.invalid("protocol", format!("`{other}` is not bgp or ospf")),
    });
    let transport = r.string(&mut root, "", "transport", true).and_then(|s| match s.as_str() {
        "tcp-like" | "tcp" => Some(TransportChoice::TcpLike),
        "native" if protocol == Some(Protocol::Ospf) => Some(TransportChoice::TcpLike),
        "quic" => Some(TransportChoice::Quic),
        other => r.invalid("transport", format!("`{other}` is not tcp-like or quic")),
    });
    let delegate_acks = match r.string(&mut root, "", "mode", false).as_deref() {
        None | Some("full-acks") => false,
        Some("delegate-acks") => true,
        Some(other) => {
            r.invalid::<()>("mode", format!("`{other}` is not full-acks or delegate-acks"));
            false
        }
    };
    let seed = r.int(&mut root, "", "seed", false, 0, i64::MAX).map_or(0, |v| v as u64);
    let time_cap = r.float(&mut root, "", "time_cap", true).and_then(|s| {
        if s > 0.0 && s.is_finite() {
            Some(Duration::from_secs_f64(s))
        } else {
            r.invalid("time_cap", format!("{s} is not a positive number of seconds"))
        }
    });
    let out = r.string(&mut root, "", "out", false).map(PathBuf::from);

    let rib = match root.remove("rib") {
        None => None,
        Some(Value::Table(mut t)) => {
            let path = r.string(&mut t, "rib.", "path", false);
            let generate = r.int(&mut t, "rib.", "generate", false, 1, u32::MAX as i64);
            r.leftovers(t, "rib.");
            match (path, generate) {
                (Some(_), Some(_)) => r.invalid("rib", "path and generate are mutually exclusive".into()),
                (Some(p), None) => Some(RibSource::File(PathBuf::from(p))),
                (None, Some(n)) => Some(RibSource::Generate(n as usize)),
                (None, None) => r.invalid("rib", "needs path or generate".into()),
            }
        }
        Some(_) => r.invalid("rib", "must be a table".into()),
    };

    let mut nodes = Vec::new();
    for (i, mut t) in r.tables(&mut root, "node").into_iter().enumerate() {
        let p = format!("node[{i}].");
        let id = r.int(&mut t, &p, "id", true, 1, u32::MAX as i64).map(|v| v as u32);
        let asn = r.int(&mut t, &p, "asn", false, 1, u32::MAX as i64).map(|v| v as u32);
        let role = r.string(&mut t, &p, "role", false).and_then(|s| match s.as_str() {
            "injector" => Some(Role::Injector),
            "r1" => Some(Role::R1),
            "r2" => Some(Role::R2),
            "r3" => Some(Role::R3),
            other => r.invalid(&format!("{p}role"), format!("`{other}` is not injector, r1, r2 or r3")),
        });
        r.leftovers(t, &p);
        if let Some(id) = id {
            nodes.push(NodeConfig { id, asn, role });
        }
    }
    let mut links = Vec::new();
    for (i, mut t) in r.tables(&mut root, "link").into_iter().enumerate() {
        let p = format!("link[{i}].");
        let a = r.int(&mut t, &p, "a", true, 1, u32::MAX as i64).map(|v| v as u32);
        let b = r.int(&mut t, &p, "b", true, 1, u32::MAX as i64).map(|v| v as u32);
        let delay = r.float(&mut t, &p, "delay_ms", true).and_then(|ms| {
            if ms > 0.0 && ms.is_finite() {
                Some(Duration::from_secs_f64(ms / 1000.0))
            } else {
                r.invalid(&format!("{p}delay_ms"), format!("{ms} is not positive"))
            }
        });
        let loss_rate = r.float(&mut t, &p, "loss_rate", false).unwrap_or(0.0);
        let mtu = r.int(&mut t, &p, "mtu", false, 1, u16::MAX as i64).map_or(DEFAULT_MTU, |v| v as usize);
        let cost = r.int(&mut t, &p, "cost", false, 0, i64::MAX).map_or(1, |v| v.min(u32::MAX as i64) as u32);
        r.leftovers(t, &p);
        // A bad delay is already reported; keep the link so the remaining
        // checks still run on it.
        if let (Some(a), Some(b)) = (a, b) {
            links.push(LinkConfig { a, b, delay: delay.unwrap_or(Duration::from_millis(1)), loss_rate, mtu, cost });
        }
    }
    r.leftovers(root, "");

    let mut errs = r.errs;
    let Some(protocol) = protocol else {
        return Err(ConfigErrors(errs));
    };
    // Placeholders for values already reported as invalid; neither can
    // trigger a further error in validate().
    let transport = transport.unwrap_or(TransportChoice::Quic);
    let time_cap = time_cap.unwrap_or(Duration::from_secs(1));
    let cfg = ExperimentConfig { protocol, transport, delegate_acks, rib, seed, time_cap, out, nodes, links };
    errs.extend(cfg.validate());
    if errs.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigErrors(errs))
    }
}

#[derive(Default)]
struct Reader {
    errs: Vec<ConfigError>,
}

impl Reader {
    fn invalid<T>(&mut self, field: &str, reason: String) -> Option<T> {
        self.errs.push(ConfigError::InvalidValue { field: field.to_string(), reason });
        None
    }

    fn take(&mut self, t: &mut Table, prefix: &str, key: &str, required: bool) -> Option<Value> {
        let v = t.remove(key);
        if v.is_none() && required {
            self.invalid::<()>(&format!("{prefix}{key}"), "missing".into());
        }
        v
    }

    fn string(&mut self, t: &mut Table, prefix: &str, key: &str, required: bool) -> Option<String> {
        match self.take(t, prefix, key, required)? {
            Value::String(s) => Some(s),
            other => self.invalid(&format!("{prefix}{key}"), format!("expected a string, found {}", other.type_str())),
        }
    }

    fn int(&mut self, t: &mut Table, prefix: &str, key: &str, required: bool, min: i64, max: i64) -> Option<i64> {
        match self.take(t, prefix, key, required)? {
            Value::Integer(v) if (min..=max).contains(&v) => Some(v),
            Value::Integer(v) => self.invalid(&format!("{prefix}{key}"), format!("{v} is outside {min}..{max}")),
            other => {
                self.invalid(&format!("{prefix}{key}"), format!("expected an integer, found {}", other.type_str()))
            }
        }
    }

    fn float(&mut self, t: &mut Table, prefix: &str, key: &str, required: bool) -> Option<f64> {
        match self.take(t, prefix, key, required)? {
            Value::Float(v) => Some(v),
            Value::Integer(v) => Some(v as f64),
            other => self.invalid(&format!("{prefix}{key}"), format!("expected a number, found {}", other.type_str())),
        }
    }

    fn tables(&mut self, t: &mut Table, key: &str) -> Vec<Table> {
        match t.remove(key) {
            None => Vec::new(),
            Some(Value::Array(items)) => items
                .into_iter()
                .enumerate()
                .filter_map(|(i, v)| match v {
                    Value::Table(t) => Some(t),
                    _ => self.invalid(&format!("{key}[{i}]"), "expected a table".into()),
                })
                .collect(),
            Some(_) => self.invalid(key, "expected an array of tables".into()).unwrap_or_default(),
        }
    }

    fn leftovers(&mut self, t: Table, prefix: &str) {
        for k in t.keys() {
            self.errs.push(ConfigError::UnknownField(format!("{prefix}{k}")));
        }
    }
}

/// Renders a configuration back to the documented TOML layout.
pub fn render_config(cfg: &ExperimentConfig) -> String {
    let mut root = Table::new();
    root.insert(
        "protocol".into(),
        Value::String(
            match cfg.protocol {
                Protocol::Bgp => "bgp",
                Protocol::Ospf => "ospf",
            }
            .into(),
        ),
    );
    root.insert("transport".into(), Value::String(cfg.transport.to_string()));
    if cfg.protocol == Protocol::Ospf {
        let mode = if cfg.delegate_acks { "delegate-acks" } else { "full-acks" };
        root.insert("mode".into(), Value::String(mode.into()));
    }
    root.insert("seed".into(), Value::Integer(cfg.seed as i64));
    root.insert("time_cap".into(), Value::Float(cfg.time_cap.as_secs_f64()));
    if let Some(out) = &cfg.out {
        root.insert("out".into(), Value::String(out.display().to_string()));
    }
    if let Some(rib) = &cfg.rib {
        let mut t = Table::new();
        match rib {
            RibSource::File(p) => t.insert("path".into(), Value::String(p.display().to_string())),
            RibSource::Generate(n) => t.insert("generate".into(), Value::Integer(*n as i64)),
        };
        root.insert("rib".into(), Value::Table(t));
    }
    let role_name = |r: Role| match r {
        Role::Injector => "injector",
        Role::R1 => "r1",
        Role::R2 => "r2",
        Role::R3 => "r3",
    };
    let nodes = cfg
        .nodes
        .iter()
        .map(|n| {
            let mut t = Table::new();
            t.insert("id".into(), Value::Integer(n.id as i64));
            if let Some(a) = n.asn {
                t.insert("asn".into(), Value::Integer(a as i64));
            }
            if let Some(r) = n.role {
                t.insert("role".into(), Value::String(role_name(r).into()));
            }
            Value::Table(t)
        })
        .collect();
    root.insert("node".into(), Value::Array(nodes));
    let links = cfg
        .links
        .iter()
        .map(|l| {
            let fields: BTreeMap<&str, Value> = [
                ("a", Value::Integer(l.a as i64)),
                ("b", Value::Integer(l.b as i64)),
                ("delay_ms", Value::Float(l.delay.as_secs_f64() * 1000.0)),
                ("loss_rate", Value::Float(l.loss_rate)),
                ("mtu", Value::Integer(l.mtu as i64)),
                ("cost", Value::Integer(l.cost as i64)),
            ]
            .into_iter()
            .collect();
            Value::Table(fields.into_iter().map(|(k, v)| (k.to_string(), v)).collect())
        })
        .collect();
    root.insert("link".into(), Value::Array(links));
    toml::to_string(&root).expect("plain table serializes")
}
