//! Program obfuscation through encrypted selector variables.
//!
//! Each statement of a confidential program is executed alongside generated
//! misleading alternatives, and a combining statement picks the real result
//! with encrypted one-hot selector bits. The crate contains the program
//! model and lowering ([`surface`], [`lower`], [`ir`]), a mock homomorphic
//! backend ([`crypto`]), the obfuscator itself ([`obfuscate`]), a code
//! pattern miner ([`patterns`]), an attacker harness ([`attack`]) and cost
//! metrics ([`metrics`]).

pub mod attack;
pub mod crypto;
pub mod demo;
pub mod field;
pub mod interp;
pub mod ir;
pub mod lower;
pub mod metrics;
pub mod obfuscate;
pub mod patterns;
pub mod surface;
pub mod testgen;
pub mod uniformize;

pub use field::Value;
pub use ir::{Op, Program, SelectorId, Statement, Var};
