//! Attribution of network destinations to the organizations behind them.
//!
//! Traffic analysis tells you a device contacted `api.example-analytics.com`;
//! it does not tell you who receives that data. This crate closes the gap.
//! Given a domain, it derives the registrable domain, discovers and analyzes
//! the privacy policy published there to extract the data-controller
//! organization, and falls back to registration-record lookups when no usable
//! policy exists. Certificate inspection is available as a comparison
//! technique. On top of attribution sit an evaluation harness for scoring
//! techniques against ground truth and an audit pipeline that rolls
//! organizations up to their parent companies and checks observed data flows
//! against policy disclosures.
//!
//! All network access goes through a record/replay gateway, so every result
//! can be reproduced byte-for-byte from a fixture archive without opening a
//! socket.

pub mod audit;
pub mod certinfo;
pub mod config;
pub mod discovery;
pub mod domain;
pub mod eval;
pub mod fetch;
pub mod html;
pub mod orgname;
pub mod policy;
pub mod replay;
pub mod resolver;
pub mod whois;

pub(crate) mod transport;
