//! The six measured channel cells (two days × morning/noon/evening) as
//! bundled model files: the initial estimates and the converged estimates.

use crate::format::{model_from_json, FormatError};
use crate::model::PartitionedModel;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub name: &'static str,
    initial: &'static str,
    converged: &'static str,
    /// Error probability of the measured sequence.
    pub measured_error_probability: f64,
}

macro_rules! cell {
    ($name:literal, $pe:expr) => {
        Cell {
            name: $name,
            initial: include_str!(concat!("../fixtures/", $name, ".initial.json")),
            converged: include_str!(concat!("../fixtures/", $name, ".converged.json")),
            measured_error_probability: $pe,
        }
    };
}

pub const CELLS: [Cell; 6] = [
    cell!("day1-morning", 0.0512),
    cell!("day1-noon", 0.0330),
    cell!("day1-evening", 0.0762),
    cell!("day2-morning", 0.0487),
    cell!("day2-noon", 0.0389),
    cell!("day2-evening", 0.0678),
];

impl Cell {
    pub fn initial_model(&self) -> Result<PartitionedModel, FormatError> {
        model_from_json(self.initial)
    }

    pub fn converged_model(&self) -> Result<PartitionedModel, FormatError> {
        model_from_json(self.converged)
    }

    pub fn initial_json(&self) -> &'static str {
        self.initial
    }

    pub fn converged_json(&self) -> &'static str {
        self.converged
    }
}

pub fn cell(name: &str) -> Option<&'static Cell> {
    CELLS.iter().find(|c| c.name == name)
}
