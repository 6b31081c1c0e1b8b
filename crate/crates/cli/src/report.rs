//! Machine-readable reports. Every report carries the tool version, the
//! SHA-256 of the input file, the effective options and an invariant block.

use daeobs::linalg::Mat;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::problem::MatrixJson;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub input_sha256: String,
}

impl Header {
    pub fn new(command: &str, digest: &str) -> Self {
        Header {
            tool: "daeobs".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            input_sha256: digest.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub rank_tol: f64,
    pub are_tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dimensions {
    /// State dimension of the DAE.
    pub n: usize,
    /// Inputs (control problems) or outputs (estimation problems).
    pub m: usize,
    pub r: usize,
    pub n_hat: usize,
    pub k: usize,
    pub dim_x: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexJson {
    pub re: f64,
    pub im: f64,
}

pub fn spectrum(s: &[Complex64]) -> Vec<ComplexJson> {
    s.iter().map(|z| ComplexJson { re: z.re, im: z.im }).collect()
}

/// One named invariant; `tolerance` is the bound the value is compared with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: &str, value: f64, tolerance: f64) -> Self {
        Check { name: name.into(), value, tolerance, pass: value <= tolerance }
    }

    pub fn below(name: &str, value: f64, bound: f64) -> Self {
        Check { name: name.into(), value, tolerance: bound, pass: value < bound }
    }

    pub fn above(name: &str, value: f64, bound: f64) -> Self {
        Check { name: name.into(), value, tolerance: bound, pass: value > bound }
    }
}

pub fn all_pass(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.pass)
}

pub fn mj(m: &Mat) -> MatrixJson {
    MatrixJson::from_mat(m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LtiJson {
    pub a_l: MatrixJson,
    pub b_l: MatrixJson,
    pub c_l: MatrixJson,
    pub d_l: MatrixJson,
    pub c_s: MatrixJson,
    pub d_s: MatrixJson,
    pub c_inp: MatrixJson,
    pub d_inp: MatrixJson,
    pub x_space_basis: MatrixJson,
    pub lambda: MatrixJson,
}

impl LtiJson {
    pub fn new(lti: &daeobs::associated::AssociatedLti) -> Self {
        LtiJson {
            a_l: mj(&lti.a_l),
            b_l: mj(&lti.b_l),
            c_l: mj(&lti.c_l),
            d_l: mj(&lti.d_l),
            c_s: mj(&lti.c_s),
            d_s: mj(&lti.d_s),
            c_inp: mj(&lti.c_inp),
            d_inp: mj(&lti.d_inp),
            x_space_basis: mj(lti.x_space.basis()),
            lambda: mj(&lti.lambda),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiccatiJson {
    pub p: MatrixJson,
    pub k: MatrixJson,
    pub residual: f64,
    pub closed_loop_spectrum: Vec<ComplexJson>,
}

impl RiccatiJson {
    pub fn new(rs: &daeobs::lq::RiccatiSolution) -> Self {
        RiccatiJson {
            p: mj(&rs.p),
            k: mj(&rs.k),
            residual: rs.residual,
            closed_loop_spectrum: spectrum(&rs.closed_loop_spectrum),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssociatedLtiReport {
    #[serde(flatten)]
    pub header: Header,
    pub options: Tolerances,
    pub dimensions: Dimensions,
    pub lti: LtiJson,
    pub invariants: Vec<Check>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerJson {
    pub a_c: MatrixJson,
    pub b_c: MatrixJson,
    pub c_x: MatrixJson,
    pub c_u: MatrixJson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LqReport {
    #[serde(flatten)]
    pub header: Header,
    pub options: Tolerances,
    pub dimensions: Dimensions,
    pub controller: ControllerJson,
    pub riccati: RiccatiJson,
    /// `v0^T P v0` for the problem's `x0`, when given.
    pub optimal_value: Option<f64>,
    pub invariants: Vec<Check>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObserverJson {
    pub a_o: MatrixJson,
    pub b_o: MatrixJson,
    pub c_o: MatrixJson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObserverReport {
    #[serde(flatten)]
    pub header: Header,
    pub options: Tolerances,
    pub dimensions: Dimensions,
    pub observer: ObserverJson,
    pub sigma: f64,
    pub riccati: RiccatiJson,
    pub lambda: MatrixJson,
    pub invariants: Vec<Check>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationOptions {
    pub rank_tol: f64,
    pub are_tol: f64,
    pub horizon: f64,
    pub step: f64,
    pub seed: u64,
    pub runs: usize,
    pub noisy: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunJson {
    pub index: usize,
    pub csv: String,
    pub rho: f64,
    pub initial_abs_error: f64,
    pub final_sq_error: f64,
    pub trailing_max_abs_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    #[serde(flatten)]
    pub header: Header,
    pub options: SimulationOptions,
    pub dimensions: Dimensions,
    pub sigma: f64,
    /// Guaranteed squared-error bound at the final time for `rho <= 1`.
    pub finite_horizon_bound: f64,
    pub runs: Vec<RunJson>,
    pub max_final_sq_error: f64,
    pub max_trailing_ratio: f64,
    pub invariants: Vec<Check>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceOptions {
    pub rank_tol: f64,
    pub are_tol: f64,
    pub trials: usize,
    pub seed: u64,
    pub corrupt: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialJson {
    pub index: usize,
    /// Relative residuals of the six defining identities.
    pub defects: [f64; 6],
    /// Relative residual of the transformed quadruple against the second build.
    pub similarity_residual: f64,
    /// Relative difference of the optimal value (or `sigma`) across the builds.
    pub value_difference: Option<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    #[serde(flatten)]
    pub header: Header,
    pub options: EquivalenceOptions,
    /// `dae` for an `(E, A_hat, B_hat)` file, `dual` for an estimation file.
    pub system: String,
    pub dimensions: Dimensions,
    pub tolerance: f64,
    pub max_defects: [f64; 6],
    pub max_similarity_residual: f64,
    pub max_value_difference: Option<f64>,
    pub trials: Vec<TrialJson>,
    pub invariants: Vec<Check>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reports_round_trip_losslessly() {
        let m = Mat::from_row_slice(2, 2, &[0.1, 1.0 / 3.0, -2.5e-17, std::f64::consts::PI]);
        let report = ObserverReport {
            header: Header::new("synthesize-observer", "ab"),
            options: Tolerances { rank_tol: 1e-10, are_tol: 1e-8 },
            dimensions: Dimensions { n: 2, m: 1, r: 1, n_hat: 1, k: 1, dim_x: 1 },
            observer: ObserverJson { a_o: mj(&m), b_o: mj(&m), c_o: mj(&m) },
            sigma: 0.1 + 0.2,
            riccati: RiccatiJson {
                p: mj(&m),
                k: mj(&m),
                residual: 1e-300,
                closed_loop_spectrum: vec![ComplexJson { re: -1.0 / 7.0, im: 0.3 }],
            },
            lambda: mj(&m),
            invariants: vec![Check::at_most("x", 1e-17, 1e-9)],
        };
        let text = serde_json::to_string_pretty(&report).unwrap();
        let back: ObserverReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, report);
    }
}
