use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::params::{FitOptions, HmmParams};
use crate::corpus::{LabelSpace, LabelSpaceDecl};
use crate::error::{Error, Result};

pub const FORMAT_NAME: &str = "weaksup-hmm";
pub const FORMAT_VERSION: u32 = 1;

/// One labelling function of the roster a model was fitted with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RosterEntry {
    pub name: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub neighbours: Vec<String>,
}

/// Serialized form of a fitted model. Floats are written in shortest
/// round-trip form, so a reloaded model decodes bit-identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub labels: LabelSpaceDecl,
    pub lfs: Vec<RosterEntry>,
    pub options: FitOptions,
    pub params: HmmParams,
}

impl ModelFile {
    pub fn new(space: &LabelSpace, lf_names: &[String], neighborhoods: &[Vec<usize>], options: FitOptions, params: HmmParams) -> Self {
        let lfs = lf_names
            .iter()
            .enumerate()
            .map(|(j, name)| RosterEntry {
                name: name.clone(),
                neighbours: neighborhoods
                    .get(j)
                    .map(|h| h.iter().map(|&l| lf_names[l].clone()).collect())
                    .unwrap_or_default(),
            })
            .collect();
        ModelFile {
            format: FORMAT_NAME.to_string(),
            version: FORMAT_VERSION,
            labels: space.decl().clone(),
            lfs,
            options,
            params,
        }
    }

    pub fn lf_names(&self) -> Vec<String> {
        self.lfs.iter().map(|e| e.name.clone()).collect()
    }

    pub fn label_space(&self) -> Result<LabelSpace> {
        LabelSpace::new(self.labels.clone())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("model serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str, location: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Header {
            format: String,
            version: u32,
        }
        let json_err = |source| Error::Json {
            location: location.to_string(),
            source,
        };
        let header: Header = serde_json::from_str(text).map_err(json_err)?;
        if header.format != FORMAT_NAME {
            return Err(Error::InvalidParams(format!("{location}: not a model file (format `{}`)", header.format)));
        }
        if header.version != FORMAT_VERSION {
            return Err(Error::UnsupportedVersion(header.version));
        }
        let model: ModelFile = serde_json::from_str(text).map_err(json_err)?;
        let space = model.label_space()?;
        model.params.validate(&space, model.lfs.len())?;
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, &path.display().to_string())
    }
}
