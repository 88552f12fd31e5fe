//! Forward pass: insert the parameters onto a tape, encode pose batches,
//! classify with any head.

use crate::error::{Error, Result};
use crate::numerics::{NodeId, Scalar, Tape};
use crate::taxonomy::TYPE_COUNT;

use super::params::{ModelParameters, INPUT_CHANNELS};
use super::skeleton::SkeletonGraph;

/// Which classification head to apply to an embedding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeadSelector {
    /// 1-based phoneme type id.
    Phoneme(usize),
    Gloss,
}

/// A model instantiated on one tape: parameter leaves plus the adjacency
/// constant. Gradients collected after `backward` map back onto the
/// owning [`ModelParameters`] in canonical tensor order.
pub struct TapedModel {
    blocks: Vec<(NodeId, NodeId, NodeId)>,
    heads: Vec<(NodeId, NodeId)>,
    gloss: (NodeId, NodeId),
    adjacency: NodeId,
    frames: usize,
    joints: usize,
    channels: Vec<usize>,
}

impl TapedModel {
    /// Record every parameter tensor as a grad-requiring leaf, and the
    /// normalized adjacency as a constant.
    pub fn insert<E: Scalar>(
        tape: &mut Tape<E>,
        params: &ModelParameters<E>,
        graph: &SkeletonGraph,
    ) -> Result<Self> {
        if graph.joints() != params.config.joints {
            return Err(Error::Dimension {
                op: "model_graph",
                left: vec![graph.joints()],
                right: vec![params.config.joints],
            });
        }
        let adj_values: Vec<E> = graph.adjacency().iter().map(|&x| E::from_f64(x)).collect();
        let v = graph.joints();
        let adjacency = tape.leaf(&[v, v], adj_values, false)?;

        let mut insert = |t: &crate::numerics::ParamTensor<E>| -> Result<NodeId> {
            tape.leaf(&t.shape, t.values.clone(), true)
        };
        let mut blocks = Vec::with_capacity(params.blocks.len());
        for b in &params.blocks {
            blocks.push((
                insert(&b.spatial_weight)?,
                insert(&b.temporal_kernel)?,
                insert(&b.bias)?,
            ));
        }
        let mut heads = Vec::with_capacity(params.heads.len());
        for h in &params.heads {
            heads.push((insert(&h.weight)?, insert(&h.bias)?));
        }
        let gloss = (insert(&params.gloss_head.weight)?, insert(&params.gloss_head.bias)?);

        Ok(TapedModel {
            blocks,
            heads,
            gloss,
            adjacency,
            frames: params.config.frames,
            joints: params.config.joints,
            channels: params.config.channels.clone(),
        })
    }

    /// Encode a pose batch [B, T, V, 3] into embeddings [B, d]. Per block:
    /// graph mixing, channel map, temporal convolution, bias, ReLU, and a
    /// residual connection when the channel widths match; a global mean
    /// pool over frames and joints produces the embedding.
    pub fn encode<E: Scalar>(&self, tape: &mut Tape<E>, x: NodeId) -> Result<NodeId> {
        let xs = tape.shape(x).to_vec();
        let expected_tail = [self.frames, self.joints, INPUT_CHANNELS];
        if xs.len() != 4 || xs[1..] != expected_tail {
            return Err(Error::Dimension {
                op: "encode",
                left: xs,
                right: expected_tail.to_vec(),
            });
        }
        let mut h = x;
        let mut cin = INPUT_CHANNELS;
        for (&cout, &(w, k, b)) in self.channels.iter().zip(&self.blocks) {
            let block_input = h;
            h = tape.spatial_mix(self.adjacency, h)?;
            h = tape.channel_map(h, w)?;
            h = tape.conv1d_temporal(h, k)?;
            h = tape.add_row_bias(h, b)?;
            h = tape.relu(h)?;
            if cin == cout {
                h = tape.add(h, block_input)?;
            }
            cin = cout;
        }
        tape.mean_pool(h)
    }

    /// Pre-softmax scores for one head: [B, d] -> [B, K].
    pub fn logits<E: Scalar>(
        &self,
        tape: &mut Tape<E>,
        embedding: NodeId,
        head: HeadSelector,
    ) -> Result<NodeId> {
        let (w, b) = match head {
            HeadSelector::Phoneme(type_id) => {
                if type_id < 1 || type_id > TYPE_COUNT {
                    return Err(Error::Range(format!(
                        "phoneme type id {type_id} outside [1, {TYPE_COUNT}]"
                    )));
                }
                self.heads[type_id - 1]
            }
            HeadSelector::Gloss => self.gloss,
        };
        let scores = tape.matmul(embedding, w)?;
        tape.add_row_bias(scores, b)
    }

    /// Class distribution for one head: softmax(θ·embedding + bias).
    pub fn classify<E: Scalar>(
        &self,
        tape: &mut Tape<E>,
        embedding: NodeId,
        head: HeadSelector,
    ) -> Result<NodeId> {
        let logits = self.logits(tape, embedding, head)?;
        tape.softmax(logits)
    }

    /// Accumulate this tape's parameter gradients back into `params`
    /// (canonical order; every tensor receives a buffer, zero where the
    /// loss did not reach it).
    pub fn accumulate_grads<E: Scalar>(
        &self,
        tape: &Tape<E>,
        params: &mut ModelParameters<E>,
    ) -> Result<()> {
        let ids = self.param_ids();
        let tensors = params.tensors_mut();
        debug_assert_eq!(ids.len(), tensors.len());
        for (id, tensor) in ids.into_iter().zip(tensors) {
            match tape.grad(id) {
                Some(g) => tensor.accumulate_grad(g)?,
                None => tensor.zero_grad(),
            }
        }
        Ok(())
    }

    fn param_ids(&self) -> Vec<NodeId> {
        let mut ids = Vec::new();
        for &(w, k, b) in &self.blocks {
            ids.push(w);
            ids.push(k);
            ids.push(b);
        }
        for &(w, b) in &self.heads {
            ids.push(w);
            ids.push(b);
        }
        ids.push(self.gloss.0);
        ids.push(self.gloss.1);
        ids
    }
}
