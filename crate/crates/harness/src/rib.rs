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

//! Route tables to inject: text ingestion and seeded generation.
//!
//! The text format has one route per line, `<prefix> <as1> <as2> ...`,
//! with `#` comments and blank lines ignored.

use std::collections::HashSet;
use std::io::{self, BufRead, Write};
use std::net::{Ipv4Addr, Ipv6Addr};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use roq_bgp::{Family, Prefix};
use thiserror::Error;

pub type Route = (Prefix, Vec<u32>);

/// Share of IPv4 routes in generated tables, after the 970k:171k mix of a
/// full Internet table.
pub const V4_SHARE: f64 = 0.85;

/// AS numbers used by the experiment routers; generated paths avoid them.
pub const RESERVED_ASNS: std::ops::RangeInclusive<u32> = 64500..=64503;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LoadedRib {
    pub routes: Vec<Route>,
    pub v4: usize,
    pub v6: usize,
    /// Lines dropped because their prefix appeared earlier.
    pub duplicates: usize,
}

#[derive(Debug, Error)]
pub enum RibError {
    #[error("line {line}: bad prefix `{text}`")]
    BadPrefix { line: usize, text: String },
    #[error("line {line}: bad AS number `{text}`")]
    BadAsNumber { line: usize, text: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub fn ingest_rib(path: &Path) -> Result<LoadedRib, RibError> {
    let file = std::fs::File::open(path)?;
    parse_rib(io::BufReader::new(file))
}

pub fn parse_rib<R: BufRead>(input: R) -> Result<LoadedRib, RibError> {
    let mut out = LoadedRib::default();
    let mut seen = HashSet::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let line_no = i + 1;
        let body = line.split('#').next().unwrap_or("").trim();
        let mut fields = body.split_whitespace();
        let Some(p) = fields.next() else { continue };
        let prefix: Prefix = p.parse().map_err(|_| RibError::BadPrefix { line: line_no, text: p.to_string() })?;
        let path = fields
            .map(|a| {
                a.parse::<u32>()
                    .ok()
                    .filter(|v| *v != 0)
                    .ok_or_else(|| RibError::BadAsNumber { line: line_no, text: a.to_string() })
            })
            .collect::<Result<Vec<u32>, _>>()?;
        if !seen.insert(prefix) {
            out.duplicates += 1;
            continue;
        }
        match prefix.family() {
            Family::V4 => out.v4 += 1,
            Family::V6 => out.v6 += 1,
        }
        out.routes.push((prefix, path));
    }
    Ok(out)
}

pub fn write_rib<W: Write>(mut w: W, routes: &[Route]) -> io::Result<()> {
    for (p, path) in routes {
        write!(w, "{p}")?;
        for a in path {
            write!(w, " {a}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// `n` distinct prefixes, about 85% IPv4, each with an AS path of 1 to 5
/// hops, fully determined by `seed`.
pub fn generate_rib(n: usize, seed: u64) -> Vec<Route> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n4 = (n as f64 * V4_SHARE).round() as usize;
    let mut seen = HashSet::with_capacity(n);
    let mut routes = Vec::with_capacity(n);
    while routes.len() < n {
        let p = if routes.len() < n4 {
            let len = rng.random_range(16..=24);
            Prefix::v4(Ipv4Addr::from(rng.random_range(0x0100_0000u32..0xE000_0000)), len)
        } else {
            let len = rng.random_range(32..=48);
            Prefix::v6(Ipv6Addr::from(0x2000u128 << 112 | rng.random::<u128>() >> 4), len)
        }
        .expect("length in range");
        if !seen.insert(p) {
            continue;
        }
        let hops = rng.random_range(1..=5);
        let path = (0..hops).map(|_| random_asn(&mut rng)).collect();
        routes.push((p, path));
    }
    routes.shuffle(&mut rng);
    routes
}

fn random_asn(rng: &mut ChaCha8Rng) -> u32 {
    loop {
        let a =
            if rng.random_bool(0.1) { rng.random_range(131_072..=4_199_999_999) } else { rng.random_range(1..=65_534) };
        // 23456 stands in for wide AS numbers on the wire.
        if a != 23_456 && !RESERVED_ASNS.contains(&a) {
            return a;
        }
    }
}
