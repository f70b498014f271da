use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{FamilySpec, IntegerPmf, Provenance};
use crate::error::{Error, Result};
use crate::fmt::{ser_f64, ser_vec_f64};

/// On-disk representation of a pmf.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PmfDocument {
    pub offset: i64,
    #[serde(serialize_with = "ser_vec_f64")]
    pub weights: Vec<f64>,
    #[serde(default, serialize_with = "ser_f64")]
    pub tail_mass_bound: f64,
    #[serde(default)]
    pub provenance: ProvenanceDoc,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProvenanceDoc {
    Family {
        family: String,
        #[serde(serialize_with = "ser_vec_f64")]
        params: Vec<f64>,
    },
    Text(String),
}

impl Default for ProvenanceDoc {
    fn default() -> Self {
        ProvenanceDoc::Text("custom".into())
    }
}

impl IntegerPmf {
    pub fn to_document(&self) -> PmfDocument {
        let provenance = match &self.provenance {
            Provenance::Family(spec) => ProvenanceDoc::Family {
                family: spec.family().name().to_string(),
                params: spec.params().to_vec(),
            },
            Provenance::Custom => ProvenanceDoc::Text("custom".into()),
            Provenance::Derived(s) => ProvenanceDoc::Text(s.clone()),
        };
        PmfDocument {
            offset: self.offset,
            weights: self.weights.clone(),
            tail_mass_bound: self.tail_mass_bound(),
            provenance,
        }
    }

    pub fn from_document(doc: PmfDocument) -> Result<Self> {
        let provenance = match doc.provenance {
            ProvenanceDoc::Family { family, params } => {
                Provenance::Family(FamilySpec::from_name(&family, &params)?)
            }
            ProvenanceDoc::Text(s) if s == "custom" => Provenance::Custom,
            ProvenanceDoc::Text(s) => Provenance::Derived(s),
        };
        IntegerPmf::from_weights_with(doc.offset, doc.weights, doc.tail_mass_bound, provenance)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("pmf documents always serialise")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_document(serde_json::from_str(text)?)
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pmf::from_family;

    #[test]
    fn round_trip_is_exact() {
        let p = from_family("poisson", &[3.3], 1e-15).unwrap();
        let text = p.to_json();
        let q = IntegerPmf::from_json(&text).unwrap();
        assert_eq!(q.offset(), p.offset());
        assert_eq!(q.weights(), p.weights());
        assert_eq!(q.tail_mass_bound(), p.tail_mass_bound());
        assert_eq!(q.provenance(), p.provenance());
    }

    #[test]
    fn minimal_document() {
        let q = IntegerPmf::from_json(r#"{"offset": -2, "weights": [0.25, 0.5, 0.25]}"#).unwrap();
        assert_eq!(q.offset(), -2);
        assert_eq!(q.provenance(), &Provenance::Custom);
        assert!(IntegerPmf::from_json(r#"{"offset": 0, "weights": [0.25, 0.5]}"#).is_err());
        assert!(IntegerPmf::from_json("not json").is_err());
    }
}
