//! On-disk dataset: a JSON manifest plus one raw f32 little-endian blob per
//! item and modality, row-major.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use outfitfuse_core::dataset::{
    Dataset, Dims, EvalQuestion, FcQuestion, FitbQuestion, Item, ItemId, Outfit, Questions, Split,
    TypeVocab,
};
use outfitfuse_core::numerics::Tensor;
use serde::{Deserialize, Serialize};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub version: u32,
    pub dims: DimsEntry,
    pub types: Vec<String>,
    pub items: Vec<ItemEntry>,
    pub outfits: Vec<OutfitEntry>,
    #[serde(default)]
    pub questions: QuestionsEntry,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimsEntry {
    pub regions: usize,
    pub words: usize,
    pub region_dim: usize,
    pub word_dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ItemEntry {
    pub name: String,
    #[serde(rename = "type")]
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    /// Blob path relative to the manifest.
    pub regions: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub words: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutfitEntry {
    pub name: String,
    pub split: String,
    pub items: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuestionsEntry {
    #[serde(default)]
    pub valid: Vec<QuestionEntry>,
    #[serde(default)]
    pub test: Vec<QuestionEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum QuestionEntry {
    Fc {
        items: Vec<String>,
        compatible: bool,
    },
    Fitb {
        partial: Vec<String>,
        candidates: [String; 4],
        answer: usize,
    },
}

impl From<Dims> for DimsEntry {
    fn from(d: Dims) -> Self {
        Self {
            regions: d.regions,
            words: d.words,
            region_dim: d.region_dim,
            word_dim: d.word_dim,
        }
    }
}

impl From<DimsEntry> for Dims {
    fn from(d: DimsEntry) -> Self {
        Self {
            regions: d.regions,
            words: d.words,
            region_dim: d.region_dim,
            word_dim: d.word_dim,
        }
    }
}

/// A dataset with its evaluation questions, as read from or written to disk.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredDataset {
    pub dataset: Dataset,
    pub questions: Questions,
}

fn write_blob(path: &Path, values: &[f64]) -> Result<()> {
    let bytes: Vec<u8> = values
        .iter()
        .flat_map(|&v| (v as f32).to_le_bytes())
        .collect();
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn read_blob(path: &Path, item: &str, what: &str, shape: [usize; 2]) -> Result<Tensor> {
    let bytes = fs::read(path).with_context(|| {
        format!(
            "reading {} blob of item '{item}' from {}",
            what,
            path.display()
        )
    })?;
    let expected = shape[0] * shape[1] * 4;
    if bytes.len() != expected {
        bail!(
            "shape error in item '{item}': {what} blob has {} bytes, expected {expected} for {}x{} f32 values",
            bytes.len(),
            shape[0],
            shape[1]
        );
    }
    let data = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    Ok(Tensor::new(shape.to_vec(), data)?)
}

fn names(ds: &Dataset, ids: &[ItemId]) -> Vec<String> {
    ids.iter().map(|&id| ds.item(id).name.clone()).collect()
}

fn question_entry(ds: &Dataset, q: &EvalQuestion) -> QuestionEntry {
    match q {
        EvalQuestion::Fc(f) => QuestionEntry::Fc {
            items: names(ds, &f.items),
            compatible: f.compatible,
        },
        EvalQuestion::Fitb(f) => QuestionEntry::Fitb {
            partial: names(ds, &f.partial),
            candidates: f.candidates.map(|id| ds.item(id).name.clone()),
            answer: f.answer,
        },
    }
}

/// Writes `manifest.json` and a `blobs/` directory under `dir`; returns the
/// manifest path. Features are stored as f32.
pub fn save(dir: &Path, dataset: &Dataset, questions: &Questions) -> Result<PathBuf> {
    let blobs = dir.join("blobs");
    fs::create_dir_all(&blobs).with_context(|| format!("creating {}", blobs.display()))?;
    let mut items = Vec::with_capacity(dataset.items().len());
    for (i, item) in dataset.items().iter().enumerate() {
        let regions = PathBuf::from(format!("blobs/{i:06}.regions.f32"));
        write_blob(&dir.join(&regions), item.regions.data())?;
        let words = match &item.words {
            Some(w) => {
                let p = PathBuf::from(format!("blobs/{i:06}.words.f32"));
                write_blob(&dir.join(&p), w.data())?;
                Some(p)
            }
            None => None,
        };
        items.push(ItemEntry {
            name: item.name.clone(),
            kind: dataset.vocab().name(item.kind).to_string(),
            description: item.description.clone(),
            regions,
            words,
        });
    }
    let manifest = Manifest {
        version: MANIFEST_VERSION,
        dims: dataset.dims().into(),
        types: dataset.vocab().names().to_vec(),
        items,
        outfits: dataset
            .outfits()
            .iter()
            .map(|o| OutfitEntry {
                name: o.name.clone(),
                split: o.split.as_str().into(),
                items: names(dataset, &o.items),
            })
            .collect(),
        questions: QuestionsEntry {
            valid: questions
                .valid
                .iter()
                .map(|q| question_entry(dataset, q))
                .collect(),
            test: questions
                .test
                .iter()
                .map(|q| question_entry(dataset, q))
                .collect(),
        },
    };
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest)?;
    fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

pub fn load(path: &Path) -> Result<StoredDataset> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading manifest {}", path.display()))?;
    let manifest: Manifest = serde_json::from_str(&text)
        .with_context(|| format!("parsing manifest {}", path.display()))?;
    if manifest.version != MANIFEST_VERSION {
        bail!("unsupported manifest version {}", manifest.version);
    }
    let base = path.parent().unwrap_or(Path::new("."));
    let dims: Dims = manifest.dims.into();
    let vocab = TypeVocab::new(manifest.types.iter().cloned())?;

    let mut items = Vec::with_capacity(manifest.items.len());
    for entry in &manifest.items {
        let kind = vocab
            .id(&entry.kind)
            .ok_or_else(|| anyhow!("item '{}' has unknown type '{}'", entry.name, entry.kind))?;
        let regions = read_blob(
            &base.join(&entry.regions),
            &entry.name,
            "regions",
            [dims.regions, dims.region_dim],
        )?;
        let words = match &entry.words {
            Some(p) => Some(read_blob(
                &base.join(p),
                &entry.name,
                "words",
                [dims.words, dims.word_dim],
            )?),
            None => None,
        };
        items.push(Item {
            name: entry.name.clone(),
            kind,
            regions,
            words,
            description: entry.description.clone(),
        });
    }
    let index: BTreeMap<&str, ItemId> = manifest
        .items
        .iter()
        .enumerate()
        .map(|(i, e)| (e.name.as_str(), ItemId(i)))
        .collect();
    let resolve = |name: &str| -> Result<ItemId> {
        index
            .get(name)
            .copied()
            .ok_or_else(|| anyhow!("reference to unknown item '{name}'"))
    };
    let resolve_all =
        |names: &[String]| -> Result<Vec<ItemId>> { names.iter().map(|n| resolve(n)).collect() };

    let mut outfits = Vec::with_capacity(manifest.outfits.len());
    for o in &manifest.outfits {
        let split = Split::parse(&o.split)
            .ok_or_else(|| anyhow!("outfit '{}' has unknown split '{}'", o.name, o.split))?;
        outfits.push(Outfit {
            name: o.name.clone(),
            items: resolve_all(&o.items).with_context(|| format!("in outfit '{}'", o.name))?,
            split,
        });
    }
    let dataset = Dataset::new(vocab, dims, items, outfits)?;

    let convert = |entries: &[QuestionEntry]| -> Result<Vec<EvalQuestion>> {
        entries
            .iter()
            .map(|e| {
                let q = match e {
                    QuestionEntry::Fc { items, compatible } => EvalQuestion::Fc(FcQuestion {
                        items: resolve_all(items)?,
                        compatible: *compatible,
                    }),
                    QuestionEntry::Fitb {
                        partial,
                        candidates,
                        answer,
                    } => {
                        let c = resolve_all(candidates)?;
                        EvalQuestion::Fitb(FitbQuestion {
                            partial: resolve_all(partial)?,
                            candidates: [c[0], c[1], c[2], c[3]],
                            answer: *answer,
                        })
                    }
                };
                q.validate(&dataset)?;
                Ok(q)
            })
            .collect()
    };
    let questions = Questions {
        valid: convert(&manifest.questions.valid).context("in validation questions")?,
        test: convert(&manifest.questions.test).context("in test questions")?,
    };
    Ok(StoredDataset { dataset, questions })
}
