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

//! Experiment runner for routing protocols over pluggable transports.
//!
//! Loads experiment configurations, builds the simulated topology, runs
//! the BGP propagation or OSPF convergence experiment, and writes CSV
//! reports.

pub mod bgp;
pub mod config;
pub mod ospf;
pub mod report;
pub mod rib;

use thiserror::Error;

pub use bgp::{run_bgp_experiment, run_bgp_with_routes, BgpReport, MeasurementRecord};
pub use config::{
    load_config, parse_config, ConfigError, ConfigErrors, ExperimentConfig, Protocol, RibSource, Role, TransportChoice,
};
pub use ospf::{run_ospf_experiment, OspfReport, OspfVariant, Phase};
pub use report::{cdf, compare, emit_ospf_report, emit_report, percentile, summarize, Summary};
pub use rib::{generate_rib, ingest_rib, parse_rib, write_rib, LoadedRib, RibError, Route};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{0}")]
    Config(#[from] ConfigErrors),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Rib(#[from] RibError),
    #[error("session failed: {0}")]
    SessionFailed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
