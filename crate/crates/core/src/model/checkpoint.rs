//! Checkpoint container: a JSON document holding the encoder config, the
//! skeleton graph, the taxonomy hash, and every weight array with its
//! shape. Loading validates shape agreement and the taxonomy hash.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Scalar;
use crate::taxonomy::build_taxonomy;

use super::params::{HeadParams, ModelParameters};
use super::skeleton::SkeletonGraph;

const FORMAT: &str = "phonolearn-checkpoint-v1";

#[derive(Serialize, Deserialize)]
struct TensorEntry<E> {
    name: String,
    shape: Vec<usize>,
    values: Vec<E>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile<E> {
    format: String,
    dtype: String,
    taxonomy_hash: String,
    gloss_count: usize,
    config: super::params::EncoderConfig,
    graph_joints: usize,
    graph_edges: Vec<(u32, u32)>,
    tensors: Vec<TensorEntry<E>>,
}

/// Write parameters and graph to `path` as deterministic JSON.
pub fn save_checkpoint<E: Scalar>(
    path: &Path,
    params: &ModelParameters<E>,
    graph: &SkeletonGraph,
) -> Result<()> {
    let file = CheckpointFile {
        format: FORMAT.to_string(),
        dtype: E::DTYPE.to_string(),
        taxonomy_hash: params.taxonomy_hash.clone(),
        gloss_count: params.gloss_count,
        config: params.config.clone(),
        graph_joints: graph.joints(),
        graph_edges: graph.edges().to_vec(),
        tensors: params
            .tensors()
            .iter()
            .map(|t| TensorEntry {
                name: t.name.clone(),
                shape: t.shape.clone(),
                values: t.values.clone(),
            })
            .collect(),
    };
    let json = serde_json::to_string(&file)
        .map_err(|e| Error::format(path, format!("serialize checkpoint: {e}")))?;
    std::fs::write(path, json).map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Load a checkpoint, validating format, dtype, taxonomy hash, and the
/// shape of every tensor against the declared config.
pub fn load_checkpoint<E: Scalar>(path: &Path) -> Result<(ModelParameters<E>, SkeletonGraph)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: CheckpointFile<E> =
        serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
    if file.format != FORMAT {
        return Err(Error::Validation(format!(
            "unsupported checkpoint format '{}'",
            file.format
        )));
    }
    if file.dtype != E::DTYPE {
        return Err(Error::Validation(format!(
            "checkpoint dtype {} does not match requested {}",
            file.dtype,
            E::DTYPE
        )));
    }
    let taxonomy = build_taxonomy();
    if file.taxonomy_hash != taxonomy.hash() {
        return Err(Error::Validation(format!(
            "checkpoint taxonomy hash {} does not match this build's {}",
            file.taxonomy_hash,
            taxonomy.hash()
        )));
    }
    file.config.validate()?;
    let graph = SkeletonGraph::from_edges(file.graph_joints, &file.graph_edges)?;
    if graph.joints() != file.config.joints {
        return Err(Error::Validation(format!(
            "graph has {} joints but config declares {}",
            graph.joints(),
            file.config.joints
        )));
    }

    // Build a skeleton parameter set with the expected shapes, then fill
    // values by name, insisting on exact shape agreement.
    let mut params =
        ModelParameters::<E>::init(file.config.clone(), &taxonomy, file.gloss_count, 0)?;
    params.taxonomy_hash = file.taxonomy_hash.clone();

    let mut entries: std::collections::BTreeMap<String, TensorEntry<E>> = file
        .tensors
        .into_iter()
        .map(|t| (t.name.clone(), t))
        .collect();
    for tensor in params.tensors_mut() {
        let entry = entries.remove(&tensor.name).ok_or_else(|| {
            Error::Validation(format!("checkpoint missing tensor '{}'", tensor.name))
        })?;
        if entry.shape != tensor.shape {
            return Err(Error::Validation(format!(
                "tensor '{}' has shape {:?}, expected {:?}",
                tensor.name, entry.shape, tensor.shape
            )));
        }
        if entry.values.len() != tensor.values.len() {
            return Err(Error::Validation(format!(
                "tensor '{}' has {} values, expected {}",
                tensor.name,
                entry.values.len(),
                tensor.values.len()
            )));
        }
        if entry.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "tensor '{}' contains non-finite values",
                tensor.name
            )));
        }
        tensor.values = entry.values;
        tensor.grad = None;
    }
    if let Some(extra) = entries.keys().next() {
        return Err(Error::Validation(format!(
            "checkpoint has unexpected tensor '{extra}'"
        )));
    }
    Ok((params, graph))
}

#[allow(dead_code)]
fn head_dims<E: Scalar>(head: &HeadParams<E>) -> (usize, usize) {
    (head.weight.shape[0], head.weight.shape[1])
}
