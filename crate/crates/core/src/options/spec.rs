use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::kmeans::{nearest, ClusterModel};
use super::{DatasetMeta, EmbeddingRecord, LatentDataset};
use crate::error::{Error, Result};

pub const EXPORT_FORMAT_VERSION: u32 = 1;

/// An option discovered as one latent cluster. It may start in any state whose
/// nearest centroid is `centroid` and ends when that stops being true or the
/// episode ends.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptionSpec {
    pub id: usize,
    pub centroid: Vec<f64>,
    pub member_count: usize,
    pub label_histogram: BTreeMap<u8, usize>,
}

impl OptionSpec {
    pub fn can_initiate(&self, specs: &[OptionSpec], mu: &[f64]) -> bool {
        assign_option(specs, mu) == self.id
    }

    pub fn terminates(&self, specs: &[OptionSpec], mu: &[f64]) -> bool {
        assign_option(specs, mu) != self.id
    }
}

pub fn derive_options(model: &ClusterModel, dataset: &LatentDataset) -> Result<Vec<OptionSpec>> {
    if model.assignment.len() != dataset.len() {
        return Err(Error::Shape(format!(
            "cluster model covers {} records, dataset has {}",
            model.assignment.len(),
            dataset.len()
        )));
    }
    let mut specs: Vec<OptionSpec> = model
        .centroids
        .iter()
        .enumerate()
        .map(|(id, c)| OptionSpec {
            id,
            centroid: c.clone(),
            member_count: 0,
            label_histogram: BTreeMap::new(),
        })
        .collect();
    for (r, &a) in dataset.records.iter().zip(&model.assignment) {
        specs[a].member_count += 1;
        if let Some(l) = r.env_label {
            *specs[a].label_histogram.entry(l).or_default() += 1;
        }
    }
    Ok(specs)
}

/// Id of the option whose centroid is nearest to `mu` (ties to the lowest id).
pub fn assign_option(specs: &[OptionSpec], mu: &[f64]) -> usize {
    let centroids: Vec<Vec<f64>> = specs.iter().map(|s| s.centroid.clone()).collect();
    specs[nearest(&centroids, mu)].id
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    CentroidChange,
    EpisodeEnd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Termination {
    /// Step at which the running option ends.
    pub step: usize,
    pub option: usize,
    pub reason: TerminationReason,
}

/// Runs the option specs along one recorded episode: the option initiated at the
/// first state runs until its termination rule fires, then the option whose
/// initiation set holds the current state takes over.
pub fn replay_terminations(specs: &[OptionSpec], episode: &[EmbeddingRecord]) -> Vec<Termination> {
    let mut out = Vec::new();
    let Some(first) = episode.first() else {
        return out;
    };
    let mut running = assign_option(specs, &first.mu);
    for r in &episode[1..] {
        if specs[running].terminates(specs, &r.mu) {
            out.push(Termination {
                step: r.step,
                option: running,
                reason: TerminationReason::CentroidChange,
            });
            running = specs
                .iter()
                .find(|s| s.can_initiate(specs, &r.mu))
                .expect("initiation sets cover the latent space")
                .id;
        }
    }
    let last = episode.last().expect("nonempty");
    if last.done {
        out.push(Termination {
            step: last.step + 1,
            option: running,
            reason: TerminationReason::EpisodeEnd,
        });
    }
    out
}

/// Size-weighted mean over clusters of the majority label share.
pub fn label_purity(dataset: &LatentDataset, assignment: &[usize], k: usize) -> Result<f64> {
    if assignment.len() != dataset.len() || dataset.is_empty() {
        return Err(Error::Shape("label purity: assignment and dataset differ".into()));
    }
    let mut hist: Vec<BTreeMap<u8, usize>> = vec![BTreeMap::new(); k];
    for (r, &a) in dataset.records.iter().zip(assignment) {
        let l = r
            .env_label
            .ok_or_else(|| Error::Usage("label purity needs env labels on every record".into()))?;
        *hist[a].entry(l).or_default() += 1;
    }
    let majority: usize = hist.iter().map(|h| h.values().copied().max().unwrap_or(0)).sum();
    Ok(majority as f64 / dataset.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExportedOption {
    pub id: usize,
    pub centroid: Vec<f64>,
    pub member_count: usize,
    pub label_histogram: BTreeMap<u8, usize>,
    pub initiation: String,
    pub termination: String,
}

/// Versioned JSON document describing the discovered options.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptionExport {
    pub format_version: u32,
    pub dataset: DatasetMeta,
    pub records: usize,
    pub latent_dim: usize,
    pub k: usize,
    pub inertia: f64,
    pub silhouette: Option<f64>,
    pub label_purity: Option<f64>,
    /// `raw` when the clustered coordinates are the latents themselves.
    pub coordinates: String,
    pub options: Vec<ExportedOption>,
}

impl OptionExport {
    pub fn new(
        dataset: &LatentDataset,
        model: &ClusterModel,
        specs: &[OptionSpec],
        silhouette: Option<f64>,
        label_purity: Option<f64>,
    ) -> Self {
        OptionExport {
            format_version: EXPORT_FORMAT_VERSION,
            dataset: dataset.meta.clone(),
            records: dataset.len(),
            latent_dim: dataset.latent_dim,
            k: model.k,
            inertia: model.inertia,
            silhouette,
            label_purity,
            coordinates: "raw".into(),
            options: specs
                .iter()
                .map(|s| ExportedOption {
                    id: s.id,
                    centroid: s.centroid.clone(),
                    member_count: s.member_count,
                    label_histogram: s.label_histogram.clone(),
                    initiation: "nearest-centroid".into(),
                    termination: "centroid-change".into(),
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("export serializes") + "\n"
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let doc: OptionExport =
            serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        if doc.format_version != EXPORT_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported option export version {}",
                doc.format_version
            )));
        }
        Ok(doc)
    }

    pub fn specs(&self) -> Vec<OptionSpec> {
        self.options
            .iter()
            .map(|o| OptionSpec {
                id: o.id,
                centroid: o.centroid.clone(),
                member_count: o.member_count,
                label_histogram: o.label_histogram.clone(),
            })
            .collect()
    }
}
