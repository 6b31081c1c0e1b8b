//! Problem files: a JSON object of named dense matrices with explicit
//! dimensions plus an optional `options` block.
//!
//! ```json
//! {
//!   "F": { "rows": 2, "cols": 2, "data": [1, 0, 0, 0] },
//!   "options": { "horizon": 20.0, "seed": 7 }
//! }
//! ```

use std::collections::BTreeMap;

use daeobs::dae::{DaeSystem, ObservedDae};
use daeobs::linalg::{Mat, Vector};
use daeobs::lq::LqWeights;
use daeobs::observer::EstimationProblem;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl MatrixJson {
    pub fn from_mat(m: &Mat) -> Self {
        let mut data = Vec::with_capacity(m.len());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                data.push(m[(i, j)]);
            }
        }
        MatrixJson { rows: m.nrows(), cols: m.ncols(), data }
    }

    fn to_mat(&self, name: &str) -> Result<Mat, CliError> {
        if self.data.len() != self.rows * self.cols {
            return Err(CliError::Parse(format!(
                "matrix \"{name}\": rows * cols = {} x {} = {} but data has {} entries",
                self.rows,
                self.cols,
                self.rows * self.cols,
                self.data.len()
            )));
        }
        if let Some(pos) = self.data.iter().position(|x| !x.is_finite()) {
            return Err(CliError::Parse(format!("matrix \"{name}\": entry {pos} is not finite")));
        }
        Ok(Mat::from_row_slice(self.rows, self.cols, &self.data))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileOptions {
    pub rank_tol: Option<f64>,
    pub are_tol: Option<f64>,
    pub step: Option<f64>,
    pub horizon: Option<f64>,
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub runs: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ProblemFile {
    #[serde(default)]
    pub options: FileOptions,
    #[serde(flatten)]
    pub matrices: BTreeMap<String, MatrixJson>,
}

const KNOWN: [&str; 11] = ["F", "A", "H", "Q", "R", "Q0", "ell", "E", "A_hat", "B_hat", "x0"];

impl ProblemFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let file: ProblemFile = serde_json::from_str(text).map_err(|e| CliError::Parse(format!("problem file: {e}")))?;
        if let Some(unknown) = file.matrices.keys().find(|k| !KNOWN.contains(&k.as_str())) {
            return Err(CliError::Parse(format!(
                "problem file: unknown matrix \"{unknown}\" (expected one of {})",
                KNOWN.join(", ")
            )));
        }
        if let Some(opts) = [file.options.rank_tol, file.options.are_tol, file.options.step, file.options.horizon]
            .iter()
            .flatten()
            .find(|x| !x.is_finite() || **x <= 0.0)
        {
            return Err(CliError::Parse(format!("problem file: option value {opts} must be positive and finite")));
        }
        Ok(file)
    }

    pub fn has(&self, name: &str) -> bool {
        self.matrices.contains_key(name)
    }

    pub fn matrix(&self, name: &str) -> Result<Mat, CliError> {
        self.matrices.get(name).ok_or_else(|| CliError::Parse(format!("problem file: missing matrix \"{name}\"")))?.to_mat(name)
    }

    fn vector(&self, name: &str) -> Result<Vector, CliError> {
        let m = self.matrix(name)?;
        if m.ncols() != 1 {
            return Err(CliError::Parse(format!("matrix \"{name}\" must be a column (cols = 1), got {} columns", m.ncols())));
        }
        Ok(m.column(0).into_owned())
    }

    pub fn estimation(&self) -> Result<EstimationProblem, CliError> {
        let obs = ObservedDae::new(self.matrix("F")?, self.matrix("A")?, self.matrix("H")?)?;
        Ok(EstimationProblem::new(obs, self.matrix("Q0")?, self.matrix("Q")?, self.matrix("R")?, self.vector("ell")?)?)
    }

    pub fn dae(&self) -> Result<DaeSystem, CliError> {
        Ok(DaeSystem::new(self.matrix("E")?, self.matrix("A_hat")?, self.matrix("B_hat")?)?)
    }

    pub fn lq_weights(&self) -> Result<LqWeights, CliError> {
        Ok(LqWeights::new(self.matrix("Q")?, self.matrix("R")?, self.matrix("Q0")?)?)
    }

    pub fn initial_state(&self) -> Result<Option<Vector>, CliError> {
        if self.has("x0") {
            self.vector("x0").map(Some)
        } else {
            Ok(None)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_matrices_and_options() {
        let f = ProblemFile::parse(r#"{"E": {"rows": 1, "cols": 2, "data": [1, 2]}, "options": {"seed": 3}}"#).unwrap();
        assert_eq!(f.options.seed, Some(3));
        assert_eq!(f.matrix("E").unwrap(), Mat::from_row_slice(1, 2, &[1.0, 2.0]));
    }

    #[test]
    fn rejects_size_mismatch() {
        let f = ProblemFile::parse(r#"{"E": {"rows": 2, "cols": 2, "data": [1, 2]}}"#).unwrap();
        let err = f.matrix("E").unwrap_err().to_string();
        assert!(err.contains("data has 2 entries"), "{err}");
    }

    #[test]
    fn rejects_unknown_names_and_fields() {
        assert!(ProblemFile::parse(r#"{"G": {"rows": 1, "cols": 1, "data": [1]}}"#).is_err());
        assert!(ProblemFile::parse(r#"{"E": {"rows": 1, "cols": 1, "data": [1], "extra": 0}}"#).is_err());
        assert!(ProblemFile::parse(r#"{"options": {"horizon": -1}}"#).is_err());
    }

    #[test]
    fn rejects_non_numeric_entries() {
        assert!(ProblemFile::parse(r#"{"E": {"rows": 1, "cols": 1, "data": ["NaN"]}}"#).is_err());
        assert!(ProblemFile::parse(r#"{"E": {"rows": 1, "cols": 1, "data": [1e999]}}"#).is_err());
    }

    #[test]
    fn missing_matrix_is_named() {
        let f = ProblemFile::parse("{}").unwrap();
        assert!(f.matrix("Q0").unwrap_err().to_string().contains("\"Q0\""));
    }
}
