//! JSON problem documents.
//!
//! ```json
//! {"h": [..], "H": [[..]], "eta": [..], "p_min": [..], "p_max": [..]}
//! ```
//!
//! All quantities are linear. `"p_max": null` (or absent) selects the
//! unbounded, interference-limited mode; an absent `p_min` means the power
//! floor.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::problem::{LinkGains, NormalizedProblem, PowerBounds};
use crate::scalar::{Scalar, POWER_FLOOR_W};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemDoc {
    pub h: Vec<f64>,
    #[serde(rename = "H")]
    pub cross: Vec<Vec<f64>>,
    pub eta: Vec<f64>,
    #[serde(default)]
    pub p_min: Option<Vec<f64>>,
    #[serde(default)]
    pub p_max: Option<Vec<f64>>,
}

impl ProblemDoc {
    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Config(format!("problem document: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("problem document serializes")
    }

    pub fn from_parts<T: Scalar>(gains: &LinkGains<T>, bounds: &PowerBounds<T>) -> Self {
        let f = |v: &[T]| v.iter().map(|x| x.as_f64()).collect::<Vec<_>>();
        Self {
            h: f(gains.h()),
            cross: gains.cross().to_rows().iter().map(|r| f(r)).collect(),
            eta: f(gains.eta()),
            p_min: Some(f(&bounds.p_min)),
            p_max: bounds.p_max.as_deref().map(f),
        }
    }

    pub fn gains<T: Scalar>(&self) -> Result<LinkGains<T>> {
        let c = |v: &[f64]| v.iter().map(|&x| T::lit(x)).collect::<Vec<T>>();
        let rows: Vec<Vec<T>> = self.cross.iter().map(|r| c(r)).collect();
        let cross = Matrix::from_rows(&rows).ok_or_else(|| Error::Config("H must be a rectangular matrix".into()))?;
        LinkGains::new(c(&self.h), cross, c(&self.eta))
    }

    pub fn bounds<T: Scalar>(&self) -> PowerBounds<T> {
        let n = self.h.len();
        let c = |v: &[f64]| v.iter().map(|&x| T::lit(x)).collect::<Vec<T>>();
        PowerBounds {
            p_min: self.p_min.as_deref().map_or_else(|| vec![T::lit(POWER_FLOOR_W); n], c),
            p_max: self.p_max.as_deref().map(c),
        }
    }

    pub fn problem<T: Scalar>(&self) -> Result<NormalizedProblem<T>> {
        NormalizedProblem::normalize(&self.gains()?, self.bounds())
    }
}
