//! Run configuration shared by the command-line front end and tests.
//!
//! Every field has a default; a JSON file may override any subset of them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::DEFAULT_BALL_CAP;
use crate::norms::{NormOptions, StartVector};
use crate::npa::{NpaOptions, DEFAULT_BASIS_CAP, MEMBERSHIP_TOL};
use crate::par::Execution;
use crate::quantum::{SeesawOptions, Tolerances, DEFAULT_VERTEX_CAP};
use crate::sdp::{SdpOptions, DEFAULT_MAX_DIM};

/// Environment variable naming a JSON file with a default [`RunConfig`].
pub const CONFIG_ENV: &str = "CORRKIT_CONFIG";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Json,
    Table,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "json" => Ok(OutputFormat::Json),
            "table" => Ok(OutputFormat::Table),
            other => Err(Error::Parse(format!(
                "unknown format '{other}' (expected json or table)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub format: OutputFormat,
    pub execution: Execution,
    pub tolerances: Tolerances,
    pub sdp_tol: f64,
    pub sdp_max_iter: usize,
    pub sdp_max_dim: usize,
    pub membership_tol: f64,
    pub basis_cap: usize,
    pub vertex_cap: usize,
    pub ball_cap: usize,
    pub norm_tol: f64,
    pub norm_max_iter: usize,
    pub seesaw_restarts: usize,
    pub seesaw_max_iter: usize,
    pub seesaw_tol: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let sdp = SdpOptions::default();
        let norm = NormOptions::default();
        let seesaw = SeesawOptions::default();
        RunConfig {
            seed: 0,
            format: OutputFormat::Json,
            execution: Execution::Parallel,
            tolerances: Tolerances::default(),
            sdp_tol: sdp.tol,
            sdp_max_iter: sdp.max_iter,
            sdp_max_dim: DEFAULT_MAX_DIM,
            membership_tol: MEMBERSHIP_TOL,
            basis_cap: DEFAULT_BASIS_CAP,
            vertex_cap: DEFAULT_VERTEX_CAP,
            ball_cap: DEFAULT_BALL_CAP,
            norm_tol: norm.tol,
            norm_max_iter: norm.max_iter,
            seesaw_restarts: seesaw.restarts,
            seesaw_max_iter: seesaw.max_iter,
            seesaw_tol: seesaw.tol,
        }
    }
}

impl RunConfig {
    /// Rejects nonpositive tolerances and zero caps.
    pub fn validate(&self) -> Result<()> {
        let tols = [
            ("sdp_tol", self.sdp_tol),
            ("membership_tol", self.membership_tol),
            ("norm_tol", self.norm_tol),
            ("seesaw_tol", self.seesaw_tol),
            ("tolerances.psd_tol", self.tolerances.psd_tol),
            ("tolerances.ns_tol", self.tolerances.ns_tol),
        ];
        for (name, v) in tols {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        let caps = [
            ("sdp_max_iter", self.sdp_max_iter),
            ("sdp_max_dim", self.sdp_max_dim),
            ("basis_cap", self.basis_cap),
            ("vertex_cap", self.vertex_cap),
            ("ball_cap", self.ball_cap),
            ("norm_max_iter", self.norm_max_iter),
            ("seesaw_restarts", self.seesaw_restarts),
            ("seesaw_max_iter", self.seesaw_max_iter),
        ];
        for (name, v) in caps {
            if v == 0 {
                return Err(Error::InvalidArgument(format!("{name} must be at least 1")));
            }
        }
        Ok(())
    }

    pub fn sdp_options(&self) -> SdpOptions {
        SdpOptions {
            tol: self.sdp_tol,
            max_iter: self.sdp_max_iter,
            max_dim: self.sdp_max_dim,
            ..SdpOptions::default()
        }
    }

    pub fn npa_options(&self) -> NpaOptions {
        NpaOptions {
            basis_cap: self.basis_cap,
            membership_tol: self.membership_tol,
            sdp: self.sdp_options(),
        }
    }

    pub fn seesaw_options(&self) -> SeesawOptions {
        SeesawOptions {
            restarts: self.seesaw_restarts,
            max_iter: self.seesaw_max_iter,
            tol: self.seesaw_tol,
            seed: self.seed,
            execution: self.execution,
            sdp: self.sdp_options(),
        }
    }

    pub fn norm_options(&self) -> NormOptions {
        NormOptions {
            tol: self.norm_tol,
            max_iter: self.norm_max_iter,
            start: StartVector::Identity,
            allow_non_self_adjoint: false,
            ball_cap: self.ball_cap,
            execution: self.execution,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let c = RunConfig::default();
        c.validate().unwrap();
        let back: RunConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn partial_override() {
        let c: RunConfig = serde_json::from_str(r#"{"seed": 7, "sdp_tol": 1e-8, "format": "table"}"#).unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.format, OutputFormat::Table);
        assert_eq!(c.sdp_options().tol, 1e-8);
        assert_eq!(c.seesaw_options().seed, 7);
        assert_eq!(c.basis_cap, DEFAULT_BASIS_CAP);
    }

    #[test]
    fn rejects_unknown_and_invalid() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"sed": 1}"#).is_err());
        let mut c = RunConfig {
            sdp_tol: 0.0,
            ..RunConfig::default()
        };
        assert!(c.validate().is_err());
        c = RunConfig::default();
        c.basis_cap = 0;
        assert!(c.validate().is_err());
    }
}
