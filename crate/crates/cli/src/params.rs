use std::path::Path;

use igl_core::eval::DistanceScaling;
use igl_core::learn::{IglParams, LapSmoothParams};
use igl_core::reconstruct::ReconstructionParams;
use serde::{Deserialize, Serialize};

use crate::failure::{Failure, Outcome};

/// Parameters shared by `learn`, `denoise` and `impute`. Every table is
/// optional; missing keys take their defaults.
///
/// ```toml
/// distance_scaling = "mean"   # "sum" or "mean" over snapshots
/// prior_threshold = 0.1
///
/// [igl]                       # igl and adj-smooth
/// alpha = 1.0
/// beta = 0.4
/// upsilon = 0.4               # ignored by adj-smooth
/// eps0 = 1e-5
/// k_max = 20000
/// normalize_output = true
/// output_threshold = 0.1
///
/// [lap_smooth]
/// beta1 = 0.4
///
/// [reconstruct]
/// mu = 1.0
/// tol = 1e-8
/// max_iters = 20000
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParamsFile {
    pub distance_scaling: DistanceScaling,
    pub prior_threshold: f64,
    pub igl: IglParams,
    pub lap_smooth: LapSmoothParams,
    pub reconstruct: ReconstructionParams,
}

impl Default for ParamsFile {
    fn default() -> Self {
        ParamsFile {
            distance_scaling: DistanceScaling::Mean,
            prior_threshold: 0.1,
            igl: IglParams::default(),
            lap_smooth: LapSmoothParams::default(),
            reconstruct: ReconstructionParams::default(),
        }
    }
}

impl ParamsFile {
    pub fn load(path: Option<&Path>) -> Outcome<ParamsFile> {
        let Some(path) = path else {
            return Ok(ParamsFile::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| {
            Failure::usage(format!("cannot read params file {}: {e}", path.display()))
        })?;
        toml::from_str(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
    }
}
