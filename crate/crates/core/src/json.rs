//! JSON descriptions of varieties and domains. Complex numbers are `[re, im]`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cone::{ConeError, ConeVariety};
use crate::domain::{Disc, DomainError, PlanarDomain};
use crate::{CMatrix, C64};

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("unknown variety shorthand '{0}' (expected \"null3\")")]
    UnknownShorthand(String),
    #[error("variety matrix has {rows} rows but n = {n}")]
    RowCount { rows: usize, n: usize },
    #[error("variety matrix row {row} has {len} entries but n = {n}")]
    RowLength { row: usize, len: usize, n: usize },
    #[error(transparent)]
    Cone(#[from] ConeError),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

/// `"null3"` or `{"n": int, "Q": [[[re, im], ...], ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VarietySpec {
    Shorthand(String),
    Explicit {
        n: usize,
        #[serde(rename = "Q")]
        q: Vec<Vec<C64>>,
    },
}

impl VarietySpec {
    pub fn build(&self) -> Result<ConeVariety, SpecError> {
        match self {
            VarietySpec::Shorthand(s) if s == "null3" => Ok(ConeVariety::null3()),
            VarietySpec::Shorthand(s) => Err(SpecError::UnknownShorthand(s.clone())),
            VarietySpec::Explicit { n, q } => {
                if q.len() != *n {
                    return Err(SpecError::RowCount { rows: q.len(), n: *n });
                }
                for (row, r) in q.iter().enumerate() {
                    if r.len() != *n {
                        return Err(SpecError::RowLength { row, len: r.len(), n: *n });
                    }
                }
                let m = CMatrix::from_fn(*n, *n, |r, c| q[r][c]);
                Ok(ConeVariety::new(m)?)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscSpec {
    pub c: C64,
    pub r: f64,
}

/// `{"outer": {"c": [re, im], "r": x}, "holes": [{"c": [...], "r": x}, ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub outer: DiscSpec,
    #[serde(default)]
    pub holes: Vec<DiscSpec>,
}

impl DomainSpec {
    pub fn build(&self) -> Result<PlanarDomain, SpecError> {
        let outer = Disc::new(self.outer.c, self.outer.r)?;
        let holes = self.holes.iter().map(|h| Disc::new(h.c, h.r)).collect::<Result<Vec<_>, _>>()?;
        Ok(PlanarDomain::new(outer, holes)?)
    }
}

impl From<&PlanarDomain> for DomainSpec {
    fn from(d: &PlanarDomain) -> Self {
        let spec = |disc: &Disc| DiscSpec { c: disc.center, r: disc.radius };
        Self { outer: spec(d.outer()), holes: d.holes().iter().map(spec).collect() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn null3_shorthand_and_explicit_agree() {
        let a: VarietySpec = serde_json::from_str("\"null3\"").unwrap();
        let b: VarietySpec = serde_json::from_str(
            r#"{"n": 3, "Q": [[[1,0],[0,0],[0,0]], [[0,0],[1,0],[0,0]], [[0,0],[0,0],[1,0]]]}"#,
        )
        .unwrap();
        assert_eq!(a.build().unwrap(), b.build().unwrap());
    }

    #[test]
    fn variety_errors() {
        let bad: VarietySpec = serde_json::from_str("\"null4\"").unwrap();
        assert!(matches!(bad.build(), Err(SpecError::UnknownShorthand(_))));
        let ragged: VarietySpec =
            serde_json::from_str(r#"{"n": 3, "Q": [[[1,0],[0,0]], [[0,0],[1,0],[0,0]], [[0,0],[0,0],[1,0]]]}"#)
                .unwrap();
        assert!(matches!(ragged.build(), Err(SpecError::RowLength { row: 0, .. })));
    }

    #[test]
    fn domain_spec_builds() {
        let d: DomainSpec =
            serde_json::from_str(r#"{"outer": {"c": [0,0], "r": 2}, "holes": [{"c": [0,0], "r": 0.5}]}"#).unwrap();
        let built = d.build().unwrap();
        assert_eq!(built, PlanarDomain::annulus(0.5, 2.0).unwrap());
        assert_eq!(DomainSpec::from(&built), d);
    }
}
