//! Dataset and checkpoint files.
//!
//! A dataset is JSON Lines: the manifest on the first line, then one
//! utterance per line. Classes appear by name only.
//!
//! ```text
//! {"format":"dirprior-dataset","version":1,"classes":["A","B","C"],"dim":4}
//! {"id":"utt000000","split":"train","features":[0.1,0.7,0.2,0.0],"evaluations":[["A"],["A","B"],["C"]]}
//! ```
//!
//! A checkpoint is a single JSON document holding the network dimensions,
//! the class names, every weight and bias, and the training configuration.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::annotations::{AnnotationSet, ClassSpace, Evaluation};
use crate::error::{Error, Result};
use crate::model::{Layer, ModelDims, ModelParams, TrainConfig, TrainExample};

pub const DATASET_FORMAT: &str = "dirprior-dataset";
pub const CHECKPOINT_FORMAT: &str = "dirprior-checkpoint";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            _ => Err(Error::invalid(format!("unknown split {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub id: String,
    pub split: Split,
    pub features: Vec<f64>,
    pub annotations: AnnotationSet,
}

impl Record {
    pub fn to_example(&self) -> TrainExample {
        TrainExample {
            id: self.id.clone(),
            features: self.features.clone(),
            annotations: self.annotations.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub space: ClassSpace,
    pub dim: usize,
    pub records: Vec<Record>,
}

#[derive(Serialize, Deserialize)]
struct ManifestLine {
    format: String,
    version: u32,
    classes: Vec<String>,
    dim: usize,
}

#[derive(Serialize, Deserialize)]
struct RecordLine {
    id: String,
    split: Split,
    features: Vec<f64>,
    evaluations: Vec<Vec<String>>,
}

impl Dataset {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &Record> {
        self.records.iter().filter(move |r| r.split == split)
    }

    pub fn examples(&self, split: Split) -> Vec<TrainExample> {
        self.split(split).map(Record::to_example).collect()
    }

    /// The same dataset with every label multiset passed through vote-and-replace.
    pub fn vote_and_replace(&self) -> Result<Dataset> {
        let records = self
            .records
            .iter()
            .map(|r| {
                Ok(Record {
                    annotations: r.annotations.vote_and_replace(&self.space)?,
                    ..r.clone()
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Dataset {
            records,
            ..self.clone()
        })
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        let manifest = ManifestLine {
            format: DATASET_FORMAT.into(),
            version: FORMAT_VERSION,
            classes: self.space.names().to_vec(),
            dim: self.dim,
        };
        serde_json::to_writer(&mut w, &manifest)?;
        w.write_all(b"\n")?;
        for r in &self.records {
            let line = RecordLine {
                id: r.id.clone(),
                split: r.split,
                features: r.features.clone(),
                evaluations: r
                    .annotations
                    .evaluations()
                    .iter()
                    .map(|e| e.tags().iter().map(|&t| self.space.name(t).to_string()).collect())
                    .collect(),
            };
            serde_json::to_writer(&mut w, &line)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from(r: impl BufRead) -> Result<Dataset> {
        let mut lines = r.lines().enumerate();
        let (_, first) = lines
            .next()
            .ok_or_else(|| Error::Format("empty dataset file".into()))?;
        let manifest: ManifestLine = serde_json::from_str(&first?)?;
        if manifest.format != DATASET_FORMAT || manifest.version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported dataset format {:?} version {}",
                manifest.format, manifest.version
            )));
        }
        let space = ClassSpace::new(manifest.classes)?;
        let mut records = Vec::new();
        for (n, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let at = |msg: String| Error::Format(format!("line {}: {msg}", n + 1));
            let rec: RecordLine = serde_json::from_str(&line).map_err(|e| at(e.to_string()))?;
            if rec.features.len() != manifest.dim {
                return Err(at(format!(
                    "{} features, manifest says {}",
                    rec.features.len(),
                    manifest.dim
                )));
            }
            let mut evals = Vec::with_capacity(rec.evaluations.len());
            for tags in &rec.evaluations {
                let idx = tags
                    .iter()
                    .map(|t| space.index_of(t).ok_or_else(|| at(format!("class {t:?} is not in the manifest"))))
                    .collect::<Result<Vec<_>>>()?;
                evals.push(Evaluation::new(idx).map_err(|e| at(e.to_string()))?);
            }
            let annotations = AnnotationSet::new(evals, &space).map_err(|e| at(e.to_string()))?;
            records.push(Record {
                id: rec.id,
                split: rec.split,
                features: rec.features,
                annotations,
            });
        }
        Ok(Dataset {
            space,
            dim: manifest.dim,
            records,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_to(BufWriter::new(fs::File::create(path)?))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Dataset> {
        Self::read_from(BufReader::new(fs::File::open(path)?))
    }
}

/// A trained network with what is needed to use it again.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub classes: Vec<String>,
    pub params: ModelParams,
    pub train_config: TrainConfig,
}

#[derive(Serialize, Deserialize)]
struct LayerDoc {
    /// One row per input unit.
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointDoc {
    format: String,
    version: u32,
    classes: Vec<String>,
    dims: ModelDims,
    layers: Vec<LayerDoc>,
    train_config: TrainConfig,
}

impl Checkpoint {
    pub fn to_json(&self) -> Result<String> {
        let doc = CheckpointDoc {
            format: CHECKPOINT_FORMAT.into(),
            version: FORMAT_VERSION,
            classes: self.classes.clone(),
            dims: self.params.dims(),
            layers: self
                .params
                .layers
                .iter()
                .map(|l| LayerDoc {
                    weights: l.weights.chunks(l.outputs).map(<[f64]>::to_vec).collect(),
                    bias: l.bias.clone(),
                })
                .collect(),
            train_config: self.train_config.clone(),
        };
        let mut s = serde_json::to_string_pretty(&doc)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: CheckpointDoc = serde_json::from_str(s)?;
        if doc.format != CHECKPOINT_FORMAT || doc.version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported checkpoint format {:?} version {}",
                doc.format, doc.version
            )));
        }
        let shapes = doc.dims.layer_shapes();
        if shapes.len() != doc.layers.len() {
            return Err(Error::Format("layer count does not match dims".into()));
        }
        let mut layers = Vec::with_capacity(shapes.len());
        for (n, ((inputs, outputs), l)) in shapes.into_iter().zip(doc.layers).enumerate() {
            if l.weights.len() != inputs || l.weights.iter().any(|r| r.len() != outputs) {
                return Err(Error::Format(format!("layer {n} weights are not {inputs}x{outputs}")));
            }
            layers.push(Layer {
                inputs,
                outputs,
                weights: l.weights.concat(),
                bias: l.bias,
            });
        }
        let params = ModelParams { layers };
        params.validate()?;
        if doc.classes.len() != params.output_dim() {
            return Err(Error::Format("class list does not match the output size".into()));
        }
        Ok(Self {
            classes: doc.classes,
            params,
            train_config: doc.train_config,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}
