//! Model files.
//!
//! A model file starts with one JSON header line. Each class follows as a
//! JSON line `{"class":c,"entries":m}` and `m` snapshot lines
//! `feature_id<TAB>weight` in descending `|weight|`. Feature-hashing models
//! store bucket indices in place of feature ids.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{bucket_of, Algorithm, LinearModel};
use crate::countsketch::SketchGeometry;
use crate::data::DataFormat;
use crate::error::{Error, Result};
use crate::hashing::IdMap;
use crate::loss::LossKind;
use crate::topk::parse_snapshot_line;

const FORMAT: &str = "sketchsel-model";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelHeader {
    pub format: String,
    pub algo: Algorithm,
    pub loss: LossKind,
    pub learning_rate: f64,
    pub top_k: usize,
    pub classes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sketch: Option<SketchGeometry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub buckets: Option<usize>,
    pub seed: u64,
    /// Input format the model was trained on.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<DataFormat>,
}

impl ModelHeader {
    pub fn new(algo: Algorithm, loss: LossKind, learning_rate: f64, top_k: usize, classes: usize, seed: u64) -> Self {
        ModelHeader {
            format: FORMAT.into(),
            algo,
            loss,
            learning_rate,
            top_k,
            classes,
            sketch: None,
            buckets: None,
            seed,
            input: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ClassRecord {
    class: usize,
    entries: usize,
}

pub fn write_model<W: Write, M: LinearModel + ?Sized>(
    mut out: W,
    header: &ModelHeader,
    model: &M,
) -> Result<()> {
    if header.classes != model.num_classes() {
        return Err(Error::Config(format!(
            "header declares {} classes, model has {}",
            header.classes,
            model.num_classes()
        )));
    }
    serde_json::to_writer(&mut out, header)?;
    out.write_all(b"\n")?;
    for class in 0..model.num_classes() {
        let entries = model.active(class);
        serde_json::to_writer(
            &mut out,
            &ClassRecord {
                class,
                entries: entries.len(),
            },
        )?;
        out.write_all(b"\n")?;
        for (id, w) in entries {
            writeln!(out, "{id}\t{w}")?;
        }
    }
    out.flush()?;
    Ok(())
}

/// A model read back from disk; usable for prediction only.
#[derive(Debug, Clone)]
pub struct SavedModel {
    pub header: ModelHeader,
    weights: Vec<IdMap<f64>>,
}

impl SavedModel {
    pub fn entries(&self, class: usize) -> usize {
        self.weights[class].len()
    }
}

impl LinearModel for SavedModel {
    fn num_classes(&self) -> usize {
        self.header.classes
    }

    fn weight(&self, class: usize, id: u64) -> f64 {
        let key = match (self.header.algo, self.header.buckets) {
            (Algorithm::Fh, Some(b)) => bucket_of(self.header.seed, id, b) as u64,
            _ => id,
        };
        self.weights[class].get(&key).copied().unwrap_or(0.0)
    }

    fn active(&self, class: usize) -> Vec<(u64, f64)> {
        let mut out: Vec<(u64, f64)> = self.weights[class].iter().map(|(&i, &w)| (i, w)).collect();
        crate::topk::sort_by_magnitude(&mut out);
        out
    }
}

pub fn read_model<R: BufRead>(input: R) -> Result<SavedModel> {
    let mut lines = input.lines().enumerate();
    let mut next = |what: &str| -> Result<(usize, String)> {
        match lines.next() {
            Some((i, line)) => Ok((i + 1, line?)),
            None => Err(Error::Format(format!("model file ends before {what}"))),
        }
    };
    let at = |record: usize| move |e: Error| Error::Record {
        record,
        source: Box::new(e),
    };
    let (n, line) = next("header")?;
    let header: ModelHeader = serde_json::from_str(&line).map_err(|e| at(n)(e.into()))?;
    if header.format != FORMAT {
        return Err(Error::Format(format!("unexpected format tag {:?}", header.format)));
    }
    if header.algo == Algorithm::Fh && header.buckets.is_none() {
        return Err(Error::Format("feature hashing model without bucket count".into()));
    }
    let mut weights = Vec::with_capacity(header.classes);
    for class in 0..header.classes {
        let (n, line) = next("class record")?;
        let record: ClassRecord = serde_json::from_str(&line).map_err(|e| at(n)(e.into()))?;
        if record.class != class {
            return Err(at(n)(Error::Format(format!(
                "expected class {class}, found {}",
                record.class
            ))));
        }
        let mut map = IdMap::default();
        for _ in 0..record.entries {
            let (n, line) = next("snapshot line")?;
            let (id, w) = parse_snapshot_line(&line).map_err(at(n))?;
            map.insert(id, w);
        }
        weights.push(map);
    }
    Ok(SavedModel { header, weights })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::countsketch::SketchGeometry;
    use crate::data::SparseExample;
    use crate::model::{FeatureHashModel, Learner, MissionConfig, MissionModel};

    #[test]
    fn mission_round_trip() {
        let geometry = SketchGeometry::standard(3, 128);
        let mut model = MissionModel::new(MissionConfig::new(2, 3, geometry, 4)).unwrap();
        model.apply_gradient(0, &[(1, 0.5), (7, -2.0)]).unwrap();
        model.apply_gradient(1, &[(3, 0.25)]).unwrap();
        let mut header = ModelHeader::new(Algorithm::Mission, LossKind::CrossEntropy, 0.1, 3, 2, 4);
        header.sketch = Some(geometry);
        let mut buf = Vec::new();
        write_model(&mut buf, &header, &model).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        let mut lines = text.lines();
        assert!(lines.next().unwrap().starts_with('{'));
        assert_eq!(lines.next().unwrap(), r#"{"class":0,"entries":2}"#);

        let saved = read_model(buf.as_slice()).unwrap();
        assert_eq!(saved.header, header);
        let ex = SparseExample::from_pairs([(1, 1.0), (7, 1.0), (3, 2.0)], 0.0).unwrap();
        assert_eq!(saved.predict(&ex), model.predict(&ex));
    }

    #[test]
    fn feature_hash_round_trip() {
        let mut model = FeatureHashModel::new(16, 1, 2).unwrap();
        model.apply_gradient(0, &[(100, 1.5), (200, -0.5)]).unwrap();
        let mut header = ModelHeader::new(Algorithm::Fh, LossKind::Logistic, 0.5, 0, 1, 2);
        header.buckets = Some(16);
        let mut buf = Vec::new();
        write_model(&mut buf, &header, &model).unwrap();
        let saved = read_model(buf.as_slice()).unwrap();
        let ex = SparseExample::from_pairs([(100, 1.0), (200, 3.0), (5, 1.0)], 1.0).unwrap();
        assert_eq!(saved.predict(&ex), model.predict(&ex));
    }

    #[test]
    fn truncated_files_are_rejected() {
        let header = ModelHeader::new(Algorithm::Iht, LossKind::Squared, 0.5, 2, 1, 0);
        let text = format!("{}\n{{\"class\":0,\"entries\":2}}\n3\t1.0\n", serde_json::to_string(&header).unwrap());
        assert!(read_model(text.as_bytes()).is_err());
        assert!(read_model("not json\n".as_bytes()).is_err());
    }
}
