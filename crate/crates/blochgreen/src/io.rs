//! JSON model and offsets files.
//!
//! Model schema:
//!
//! ```json
//! {
//!   "dimension": 2,
//!   "vertices": ["a", "b"],
//!   "edges": [
//!     {"from": "a", "to": "b", "shift": [0, 0], "weight": {"re": -1.0, "im": 0.0}},
//!     {"from": "b", "to": "a", "shift": [0, 0], "weight": -1.0}
//!   ],
//!   "potential": {"a": 7.0, "b": 1.0},
//!   "symmetric": true
//! }
//! ```
//!
//! A bare number as `weight` is accepted as a real weight. The offsets file
//! is an object mapping vertex labels to d-vectors:
//!
//! ```json
//! {"a": [0.25, 0.0], "b": [0.0, 0.0]}
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::crystal::{AdditiveFunction, CrystalModel, EdgeSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WeightSchema {
    Complex {
        re: f64,
        #[serde(default)]
        im: f64,
    },
    Real(f64),
}

impl WeightSchema {
    fn to_complex(&self) -> Complex64 {
        match *self {
            WeightSchema::Complex { re, im } => Complex64::new(re, im),
            WeightSchema::Real(re) => Complex64::new(re, 0.0),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EdgeSchema {
    pub from: String,
    pub to: String,
    pub shift: Vec<i64>,
    pub weight: WeightSchema,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelSchema {
    pub dimension: usize,
    pub vertices: Vec<String>,
    pub edges: Vec<EdgeSchema>,
    pub potential: BTreeMap<String, f64>,
    pub symmetric: bool,
}

impl ModelSchema {
    /// Validate field consistency and build the model.
    pub fn into_model(self, origin: &str) -> Result<CrystalModel> {
        let schema_err = |message: String| Error::Schema { path: origin.into(), message };
        for (i, e) in self.edges.iter().enumerate() {
            if e.shift.len() != self.dimension {
                return Err(schema_err(format!(
                    "edge {i} ({} -> {}): shift has {} entries, dimension is {}",
                    e.from,
                    e.to,
                    e.shift.len(),
                    self.dimension
                )));
            }
        }
        let mut potential = Vec::with_capacity(self.vertices.len());
        for v in &self.vertices {
            match self.potential.get(v) {
                Some(&p) => potential.push(p),
                None => return Err(schema_err(format!("potential missing for vertex {v}"))),
            }
        }
        for key in self.potential.keys() {
            if !self.vertices.contains(key) {
                return Err(schema_err(format!("potential given for unknown vertex {key}")));
            }
        }
        let edges: Vec<EdgeSpec> = self
            .edges
            .iter()
            .map(|e| EdgeSpec {
                from: e.from.clone(),
                to: e.to.clone(),
                shift: e.shift.clone(),
                weight: e.weight.to_complex(),
            })
            .collect();
        CrystalModel::new(self.dimension, self.vertices, edges, potential, self.symmetric)
    }

    /// Schema from a validated model (for writing fixture files).
    pub fn from_model(model: &CrystalModel) -> Self {
        ModelSchema {
            dimension: model.deck_rank(),
            vertices: model.vertices().to_vec(),
            edges: model
                .edges()
                .iter()
                .map(|e| EdgeSchema {
                    from: model.vertices()[e.from].clone(),
                    to: model.vertices()[e.to].clone(),
                    shift: e.shift.clone(),
                    weight: if e.weight.im == 0.0 {
                        WeightSchema::Real(e.weight.re)
                    } else {
                        WeightSchema::Complex { re: e.weight.re, im: e.weight.im }
                    },
                })
                .collect(),
            potential: model
                .vertices()
                .iter()
                .cloned()
                .zip(model.potential().iter().copied())
                .collect(),
            symmetric: model.is_symmetric(),
        }
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::Io { path: path.display().to_string(), message: e.to_string() })
}

/// Load and validate a model file.
pub fn load_model(path: impl AsRef<Path>) -> Result<CrystalModel> {
    let path = path.as_ref();
    let text = read(path)?;
    let schema: ModelSchema = serde_json::from_str(&text).map_err(|e| Error::Schema {
        path: path.display().to_string(),
        message: e.to_string(), // serde_json reports line and column
    })?;
    schema.into_model(&path.display().to_string())
}

/// Load an offsets file for a model.
pub fn load_offsets(path: impl AsRef<Path>, model: &CrystalModel) -> Result<AdditiveFunction> {
    let path = path.as_ref();
    let text = read(path)?;
    let raw: BTreeMap<String, Vec<f64>> =
        serde_json::from_str(&text).map_err(|e| Error::Schema {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
    let mut offsets = Vec::with_capacity(model.vertex_count());
    for v in model.vertices() {
        match raw.get(v) {
            Some(c) => offsets.push(c.clone()),
            None => {
                return Err(Error::Schema {
                    path: path.display().to_string(),
                    message: format!("offsets missing for vertex {v}"),
                })
            }
        }
    }
    AdditiveFunction::with_offsets(model, offsets)
}

/// Serialize a model to pretty JSON.
pub fn model_to_json(model: &CrystalModel) -> String {
    serde_json::to_string_pretty(&ModelSchema::from_model(model)).expect("schema serializes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crystal::fixtures;

    #[test]
    fn round_trip_fixtures() {
        for model in
            [fixtures::free2(), fixtures::free3(), fixtures::stripe2(), fixtures::drift2()]
        {
            let json = model_to_json(&model);
            let schema: ModelSchema = serde_json::from_str(&json).unwrap();
            let back = schema.into_model("mem").unwrap();
            assert_eq!(back.vertices(), model.vertices());
            assert_eq!(back.edges().len(), model.edges().len());
            assert_eq!(back.is_symmetric(), model.is_symmetric());
        }
    }

    #[test]
    fn bare_number_weight_coerces_to_real() {
        let text = r#"{
            "dimension": 1,
            "vertices": ["v"],
            "edges": [
                {"from": "v", "to": "v", "shift": [1], "weight": -1.0},
                {"from": "v", "to": "v", "shift": [-1], "weight": {"re": -1.0}}
            ],
            "potential": {"v": 2.0},
            "symmetric": true
        }"#;
        let schema: ModelSchema = serde_json::from_str(text).unwrap();
        let model = schema.into_model("mem").unwrap();
        assert_eq!(model.edges()[0].weight, Complex64::new(-1.0, 0.0));
        assert_eq!(model.edges()[1].weight, Complex64::new(-1.0, 0.0));
    }

    #[test]
    fn wrong_shift_length_names_edge() {
        let text = r#"{
            "dimension": 2,
            "vertices": ["v"],
            "edges": [{"from": "v", "to": "v", "shift": [1], "weight": -1.0}],
            "potential": {"v": 2.0},
            "symmetric": true
        }"#;
        let schema: ModelSchema = serde_json::from_str(text).unwrap();
        let err = schema.into_model("mem").unwrap_err();
        assert_eq!(err.code(), "SchemaError");
        assert!(format!("{err}").contains("edge 0"), "{err}");
    }

    #[test]
    fn malformed_json_reports_position() {
        let err = serde_json::from_str::<ModelSchema>("{\"dimension\": }").unwrap_err();
        assert!(err.to_string().contains("line"));
    }
}
