//! Loading graphs from a preset or a directory.

use serde_json::{json, Value};
use spectral_fusion::io::{import_affinity_dir, import_feature_dir};
use spectral_fusion::{
    generate, normalized_laplacian, self_tuning_affinity, AffinityMatrix, ClusterLabels, FeatureMatrix,
    LaplacianStack, Result,
};

use crate::config::DatasetSource;

pub struct Loaded {
    pub affinities: Vec<AffinityMatrix>,
    pub stack: LaplacianStack,
    pub labels: Option<ClusterLabels>,
    /// Raw feature views, when the input was feature tables.
    pub features: Option<Vec<FeatureMatrix>>,
    /// Provenance recorded alongside the data, if any.
    pub provenance: Option<Value>,
}

impl Loaded {
    pub fn n(&self) -> usize {
        self.stack.n()
    }

    pub fn m(&self) -> usize {
        self.stack.m()
    }

    /// Shape and provenance for reports.
    pub fn describe(&self, source: &DatasetSource) -> Value {
        json!({
            "source": source,
            "n": self.n(),
            "m": self.m(),
            "labelled": self.labels.is_some(),
            "provenance": self.provenance,
        })
    }
}

fn stack_of(affinities: &[AffinityMatrix]) -> Result<LaplacianStack> {
    LaplacianStack::new(
        affinities
            .iter()
            .map(|w| normalized_laplacian(w).map(|l| l.matrix))
            .collect::<Result<_>>()?,
    )
}

pub fn load(source: &DatasetSource) -> Result<Loaded> {
    match source {
        DatasetSource::Preset { sbm, .. } => {
            let data = generate(sbm)?;
            let provenance = Some(data.provenance());
            Ok(Loaded {
                affinities: data.affinities,
                stack: data.stack,
                labels: Some(data.labels),
                features: None,
                provenance,
            })
        }
        DatasetSource::Affinities { dir } => {
            let data = import_affinity_dir(dir)?;
            Ok(Loaded {
                stack: stack_of(&data.affinities)?,
                affinities: data.affinities,
                labels: data.labels,
                features: None,
                provenance: data.provenance,
            })
        }
        DatasetSource::Features { dir, nn_index } => {
            let data = import_feature_dir(dir)?;
            let affinities = data
                .views
                .iter()
                .map(|z| self_tuning_affinity(z, *nn_index))
                .collect::<Result<Vec<_>>>()?;
            Ok(Loaded {
                stack: stack_of(&affinities)?,
                affinities,
                labels: data.labels,
                features: Some(data.views),
                provenance: None,
            })
        }
    }
}
