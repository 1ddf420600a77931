use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::triples::TrainingTriple;
use crate::PipelineError;

const SPLITS: [&str; 3] = ["train", "valid", "test"];
const META_FILE: &str = "split.json";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub valid: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self {
            train: 0.90,
            valid: 0.05,
            test: 0.05,
        }
    }
}

impl SplitFractions {
    fn validate(&self) -> Result<(), PipelineError> {
        let parts = [self.train, self.valid, self.test];
        if parts.iter().any(|f| !(0.0..=1.0).contains(f))
            || (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return Err(PipelineError::Config(format!(
                "split fractions {parts:?} must be in [0,1] and sum to 1"
            )));
        }
        Ok(())
    }

    /// (train, valid, test) sizes for `n` items. Valid and test are rounded,
    /// train takes the remainder.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        let valid = ((n as f64) * self.valid).round() as usize;
        let test = (((n as f64) * self.test).round() as usize).min(n - valid.min(n));
        let valid = valid.min(n);
        (n - valid - test, valid, test)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DatasetSplit {
    pub train: Vec<TrainingTriple>,
    pub valid: Vec<TrainingTriple>,
    pub test: Vec<TrainingTriple>,
    pub seed: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SplitMeta {
    seed: u64,
}

impl DatasetSplit {
    /// Shuffles with `seed` and cuts into train/valid/test.
    pub fn new(
        mut triples: Vec<TrainingTriple>,
        fractions: SplitFractions,
        seed: u64,
    ) -> Result<Self, PipelineError> {
        fractions.validate()?;
        let (n_train, n_valid, _) = fractions.sizes(triples.len());
        triples.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let rest = triples.split_off(n_train);
        let mut valid = rest;
        let test = valid.split_off(n_valid);
        Ok(Self {
            train: triples,
            valid,
            test,
            seed,
        })
    }

    pub fn len(&self) -> usize {
        self.train.len() + self.valid.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn parts(&self) -> [&Vec<TrainingTriple>; 3] {
        [&self.train, &self.valid, &self.test]
    }
}

pub fn write_jsonl(triples: &[TrainingTriple], path: &Path) -> Result<(), PipelineError> {
    let file = fs::File::create(path).map_err(|e| PipelineError::io(path, e))?;
    let mut out = BufWriter::new(file);
    for t in triples {
        let line = serde_json::to_string(t).expect("triples always serialize");
        writeln!(out, "{line}").map_err(|e| PipelineError::io(path, e))?;
    }
    out.flush().map_err(|e| PipelineError::io(path, e))
}

pub fn read_jsonl(path: &Path) -> Result<Vec<TrainingTriple>, PipelineError> {
    let text = fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| PipelineError::Format {
                line: i + 1,
                message: format!("{}: {e}", path.display()),
            })
        })
        .collect()
}

/// Writes `train.jsonl`, `valid.jsonl`, `test.jsonl` and `split.json` into `dir`.
pub fn persist_dataset(split: &DatasetSplit, dir: &Path) -> Result<(), PipelineError> {
    fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
    for (name, part) in SPLITS.iter().zip(split.parts()) {
        write_jsonl(part, &dir.join(format!("{name}.jsonl")))?;
    }
    let meta = dir.join(META_FILE);
    let json = serde_json::to_string(&SplitMeta { seed: split.seed }).expect("meta serializes");
    fs::write(&meta, json).map_err(|e| PipelineError::io(&meta, e))
}

pub fn load_dataset(dir: &Path) -> Result<DatasetSplit, PipelineError> {
    let meta_path = dir.join(META_FILE);
    let meta = fs::read_to_string(&meta_path).map_err(|e| PipelineError::io(&meta_path, e))?;
    let meta: SplitMeta = serde_json::from_str(&meta).map_err(|e| PipelineError::Format {
        line: e.line(),
        message: format!("{}: {e}", meta_path.display()),
    })?;
    let [train, valid, test] = SPLITS.map(|name| read_jsonl(&dir.join(format!("{name}.jsonl"))));
    Ok(DatasetSplit {
        train: train?,
        valid: valid?,
        test: test?,
        seed: meta.seed,
    })
}
