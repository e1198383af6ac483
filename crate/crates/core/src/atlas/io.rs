//! JSON interchange format for atlases.
//!
//! ```json
//! { "header": {"m": 2, "n": 200, "mu0": 0.5, "nu0": 0.0, "xi0": 0.0},
//!   "patches": [{"id": 0, "eps": 0.05, "points": [[0, 0.1, 0.2], ...]}],
//!   "transitions": [{"i": 0, "j": 3, "kind": "translation", "data": {"offset": [..]},
//!                    "domain": {"parts": [[{"center": [..], "radius": 0.3}]]}}] }
//! ```
//!
//! Each point row is `[label, x_1, ..., x_m]`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Atlas, AtlasError, Domain, Embedding, Transition, TransitionMap};
use crate::patch::Patch;
use crate::simplex::{Label, Point};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtlasHeader {
    pub m: usize,
    pub n: usize,
    pub mu0: f64,
    pub nu0: f64,
    pub xi0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchRecord {
    pub id: Label,
    pub eps: f64,
    /// Original position of the centre vertex; defaults to its current position.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<Vec<f64>>,
    pub points: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionRecord {
    pub i: Label,
    pub j: Label,
    #[serde(flatten)]
    pub map: TransitionMap,
    pub domain: Domain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtlasFile {
    pub header: AtlasHeader,
    pub patches: Vec<PatchRecord>,
    pub transitions: Vec<TransitionRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<Embedding>,
}

impl From<&Atlas> for AtlasFile {
    fn from(a: &Atlas) -> Self {
        let patches = a
            .patches
            .values()
            .map(|p| {
                let current = &p.points[&p.id];
                PatchRecord {
                    id: p.id,
                    eps: p.eps,
                    origin: (current != &p.origin).then(|| p.origin.0.clone()),
                    points: p
                        .points
                        .iter()
                        .map(|(&l, x)| std::iter::once(l as f64).chain(x.0.iter().copied()).collect())
                        .collect(),
                }
            })
            .collect();
        let transitions = a
            .transitions
            .values()
            .map(|t| TransitionRecord { i: t.i, j: t.j, map: t.map.clone(), domain: t.domain.clone() })
            .collect();
        AtlasFile {
            header: AtlasHeader { m: a.m, n: a.patches.len(), mu0: a.mu0, nu0: a.nu0, xi0: a.xi0 },
            patches,
            transitions,
            embedding: a.embedding.clone(),
        }
    }
}

impl TryFrom<AtlasFile> for Atlas {
    type Error = AtlasError;

    fn try_from(f: AtlasFile) -> Result<Self, AtlasError> {
        let m = f.header.m;
        let mut patches = BTreeMap::new();
        for rec in f.patches {
            let mut points = BTreeMap::new();
            for row in rec.points {
                if row.len() != m + 1 {
                    return Err(AtlasError::Invalid(format!("patch {}: point row of length {}", rec.id, row.len())));
                }
                let l = row[0];
                if l < 0.0 || l.fract() != 0.0 {
                    return Err(AtlasError::Invalid(format!("patch {}: bad label {l}", rec.id)));
                }
                points.insert(l as Label, Point(row[1..].to_vec()));
            }
            let Some(current) = points.get(&rec.id).cloned() else {
                return Err(AtlasError::Invalid(format!("patch {} lacks its own vertex", rec.id)));
            };
            let origin = rec.origin.map(Point).unwrap_or(current);
            patches.insert(rec.id, Patch { id: rec.id, eps: rec.eps, origin, points });
        }
        if patches.len() != f.header.n {
            return Err(AtlasError::Invalid(format!(
                "header declares {} patches, found {}",
                f.header.n,
                patches.len()
            )));
        }
        let transitions = f
            .transitions
            .into_iter()
            .map(|t| ((t.i, t.j), Transition { i: t.i, j: t.j, map: t.map, domain: t.domain }))
            .collect();
        Ok(Atlas {
            m,
            mu0: f.header.mu0,
            nu0: f.header.nu0,
            xi0: f.header.xi0,
            patches,
            transitions,
            embedding: f.embedding,
        })
    }
}

impl Atlas {
    pub fn to_json(&self) -> String {
        serde_json::to_string(&AtlasFile::from(self)).expect("atlas serialises")
    }

    pub fn from_json(s: &str) -> Result<Atlas, AtlasError> {
        let f: AtlasFile = serde_json::from_str(s).map_err(|e| AtlasError::Invalid(e.to_string()))?;
        Atlas::try_from(f)
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_json())
    }

    pub fn load(path: &Path) -> Result<Atlas, AtlasError> {
        let s = std::fs::read_to_string(path).map_err(|e| AtlasError::Invalid(format!("{}: {e}", path.display())))?;
        Atlas::from_json(&s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::patch::Ball;

    #[test]
    fn transition_record_shape() {
        let rec = TransitionRecord {
            i: 1,
            j: 2,
            map: TransitionMap::Translation { offset: vec![0.5, -0.25] },
            domain: Domain::intersection(vec![Ball::new(Point(vec![0.0, 0.0]), 1.0)]),
        };
        let v: serde_json::Value = serde_json::to_value(&rec).unwrap();
        assert_eq!(v["kind"], "translation");
        assert_eq!(v["data"]["offset"][0], 0.5);
        let back: TransitionRecord = serde_json::from_value(v).unwrap();
        assert_eq!(back, rec);
    }

    #[test]
    fn rejects_patch_without_centre() {
        let json = r#"{"header":{"m":2,"n":1,"mu0":0.5,"nu0":0,"xi0":0},
            "patches":[{"id":0,"eps":1,"points":[[1,0,0]]}],"transitions":[]}"#;
        assert!(matches!(Atlas::from_json(json), Err(AtlasError::Invalid(_))));
    }
}
