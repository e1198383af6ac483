//! JSON and OFF output of assembled complexes.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{AbstractComplex, PlMetric};
use crate::atlas::Atlas;
use crate::simplex::Label;

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("the complex is empty")]
    Empty,
    #[error("no coordinates for vertex {0}")]
    MissingCoordinates(Label),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// On-disk form: top simplices and one `[i, j, ℓ]` triple per edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexFile {
    pub m: usize,
    pub vertices: Vec<Label>,
    pub simplices: Vec<Vec<Label>>,
    pub edge_lengths: Vec<(Label, Label, f64)>,
}

impl ComplexFile {
    pub fn new(c: &AbstractComplex, metric: &PlMetric) -> Result<Self, ExportError> {
        if c.is_empty() {
            return Err(ExportError::Empty);
        }
        Ok(Self {
            m: c.m,
            vertices: c.vertices(),
            simplices: c.top().cloned().collect(),
            edge_lengths: metric.edge_lengths.iter().map(|(&(i, j), &l)| (i, j, l)).collect(),
        })
    }

    pub fn complex(&self) -> AbstractComplex {
        let mut c = AbstractComplex::from_top(self.m, self.simplices.iter().cloned());
        c.simplices.extend(self.vertices.iter().map(|&v| vec![v]));
        c
    }

    pub fn metric(&self) -> PlMetric {
        PlMetric {
            edge_lengths: self.edge_lengths.iter().map(|&(i, j, l)| ((i.min(j), i.max(j)), l)).collect(),
            ..PlMetric::default()
        }
    }
}

pub fn complex_to_json(c: &AbstractComplex, metric: &PlMetric) -> Result<String, ExportError> {
    Ok(serde_json::to_string_pretty(&ComplexFile::new(c, metric)?)?)
}

pub fn complex_from_json(s: &str) -> Result<(AbstractComplex, PlMetric), ExportError> {
    let f: ComplexFile = serde_json::from_str(s)?;
    Ok((f.complex(), f.metric()))
}

/// Per-vertex coordinates of a built-in atlas: the fundamental domain of the
/// torus or the ambient positions on the sphere.
pub fn vertex_coordinates(a: &Atlas) -> Option<BTreeMap<Label, Vec<f64>>> {
    a.labels().map(|i| Some((i, a.ambient_position(i)?))).collect()
}

/// Writes the vertices and 2-simplices of `c` as ASCII OFF, padding coordinates to three.
pub fn write_off(
    c: &AbstractComplex,
    coords: &BTreeMap<Label, Vec<f64>>,
    mut w: impl Write,
) -> Result<(), ExportError> {
    if c.is_empty() {
        return Err(ExportError::Empty);
    }
    let verts = c.vertices();
    let index: BTreeMap<Label, usize> = verts.iter().enumerate().map(|(k, &v)| (v, k)).collect();
    let faces: Vec<&Vec<Label>> = c.of_dim(2).collect();
    writeln!(w, "OFF")?;
    writeln!(w, "{} {} 0", verts.len(), faces.len())?;
    for v in &verts {
        let x = coords.get(v).ok_or(ExportError::MissingCoordinates(*v))?;
        let xyz: Vec<String> = (0..3).map(|k| x.get(k).copied().unwrap_or(0.0).to_string()).collect();
        writeln!(w, "{}", xyz.join(" "))?;
    }
    for f in faces {
        writeln!(w, "3 {} {} {}", index[&f[0]], index[&f[1]], index[&f[2]])?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> (AbstractComplex, PlMetric) {
        let c = AbstractComplex::from_top(2, vec![vec![0, 1, 2], vec![0, 2, 3]]);
        let mut m = PlMetric::default();
        for e in c.of_dim(1) {
            m.edge_lengths.insert((e[0], e[1]), 0.1 + 1.0 / 3.0 * (e[0] + e[1]) as f64);
        }
        (c, m)
    }

    #[test]
    fn json_round_trip_is_exact() {
        let (c, m) = square();
        let s = complex_to_json(&c, &m).unwrap();
        let (c2, m2) = complex_from_json(&s).unwrap();
        assert_eq!(c, c2);
        assert_eq!(m.edge_lengths, m2.edge_lengths);
        assert_eq!(complex_to_json(&c2, &m2).unwrap(), s);
    }

    #[test]
    fn empty_complex_is_an_error() {
        let c = AbstractComplex::default();
        assert!(matches!(complex_to_json(&c, &PlMetric::default()), Err(ExportError::Empty)));
        assert!(matches!(write_off(&c, &BTreeMap::new(), Vec::new()), Err(ExportError::Empty)));
    }

    #[test]
    fn off_layout() {
        let (c, _) = square();
        let coords: BTreeMap<Label, Vec<f64>> =
            [(0, vec![0.0, 0.0]), (1, vec![1.0, 0.0]), (2, vec![1.0, 1.0]), (3, vec![0.0, 1.0])].into_iter().collect();
        let mut buf = Vec::new();
        write_off(&c, &coords, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "OFF");
        assert_eq!(lines[1], "4 2 0");
        assert_eq!(lines[3], "1 0 0");
        assert_eq!(lines[6], "3 0 1 2");
        assert_eq!(lines.len(), 8);
    }

    #[test]
    fn missing_coordinates_are_reported() {
        let (c, _) = square();
        let coords: BTreeMap<Label, Vec<f64>> = [(0, vec![0.0, 0.0])].into_iter().collect();
        assert!(matches!(write_off(&c, &coords, Vec::new()), Err(ExportError::MissingCoordinates(1))));
    }
}
