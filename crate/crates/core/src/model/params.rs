//! Encoder geometry and the full trainable parameter set.

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{ParamTensor, Scalar};
use crate::taxonomy::PhonemeTaxonomy;

/// Pose input channels: x, y, confidence.
pub const INPUT_CHANNELS: usize = 3;

/// Encoder geometry. The embedding is the mean-pooled output of the last
/// block, so `embedding_dim` must equal the last channel width.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub blocks: usize,
    pub channels: Vec<usize>,
    pub temporal_kernel: usize,
    pub embedding_dim: usize,
    pub joints: usize,
    pub frames: usize,
}

impl EncoderConfig {
    /// Desk-scale default: trains on CPU in minutes.
    pub fn desk_default() -> Self {
        EncoderConfig {
            blocks: 2,
            channels: vec![16, 32],
            temporal_kernel: 5,
            embedding_dim: 32,
            joints: 27,
            frames: 32,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.blocks == 0 || self.channels.len() != self.blocks {
            return Err(Error::Config(format!(
                "channels list has {} entries for {} blocks",
                self.channels.len(),
                self.blocks
            )));
        }
        if self.channels.iter().any(|&c| c == 0) {
            return Err(Error::Config("channel widths must be positive".into()));
        }
        if self.temporal_kernel % 2 == 0 || self.temporal_kernel == 0 {
            return Err(Error::Config(format!(
                "temporal kernel {} must be odd",
                self.temporal_kernel
            )));
        }
        if self.temporal_kernel > self.frames {
            return Err(Error::Config(format!(
                "temporal kernel {} exceeds frame count {}",
                self.temporal_kernel, self.frames
            )));
        }
        if self.embedding_dim != *self.channels.last().unwrap() {
            return Err(Error::Config(format!(
                "embedding dim {} must equal the last channel width {}",
                self.embedding_dim,
                self.channels.last().unwrap()
            )));
        }
        if self.joints == 0 || self.frames == 0 {
            return Err(Error::Config("joints and frames must be positive".into()));
        }
        Ok(())
    }
}

/// Weights of one encoder block: the spatial map applied after graph
/// mixing, the temporal convolution kernel, and the bias.
#[derive(Debug, Clone)]
pub struct BlockParams<E: Scalar> {
    pub spatial_weight: ParamTensor<E>, // [cin, cout]
    pub temporal_kernel: ParamTensor<E>, // [kt, cout, cout]
    pub bias: ParamTensor<E>,           // [cout]
}

/// One linear classification head.
#[derive(Debug, Clone)]
pub struct HeadParams<E: Scalar> {
    pub weight: ParamTensor<E>, // [d, classes]
    pub bias: ParamTensor<E>,   // [classes]
}

/// All trainable weights: encoder blocks, sixteen phoneme heads sized by
/// the taxonomy cardinalities, and one gloss head.
#[derive(Debug, Clone)]
pub struct ModelParameters<E: Scalar> {
    pub config: EncoderConfig,
    pub blocks: Vec<BlockParams<E>>,
    pub heads: Vec<HeadParams<E>>,
    pub gloss_head: HeadParams<E>,
    pub gloss_count: usize,
    pub taxonomy_hash: String,
}

fn xavier<E: Scalar>(
    rng: &mut ChaCha8Rng,
    name: &str,
    shape: Vec<usize>,
    fan_in: usize,
    fan_out: usize,
) -> ParamTensor<E> {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let dist = Uniform::new_inclusive(-bound, bound);
    let n: usize = shape.iter().product();
    let values: Vec<E> = (0..n).map(|_| E::from_f64(dist.sample(rng))).collect();
    ParamTensor::new(name, shape, values)
}

fn zeros<E: Scalar>(name: &str, shape: Vec<usize>) -> ParamTensor<E> {
    let n: usize = shape.iter().product();
    ParamTensor::new(name, shape, vec![E::zero(); n])
}

impl<E: Scalar> ModelParameters<E> {
    /// Fresh parameters: Xavier-uniform weights (±sqrt(6/(fan_in+fan_out))),
    /// zero biases. Deterministic in the seed.
    pub fn init(
        config: EncoderConfig,
        taxonomy: &PhonemeTaxonomy,
        gloss_count: usize,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        if gloss_count == 0 {
            return Err(Error::Config("gloss vocabulary must be non-empty".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let kt = config.temporal_kernel;
        let mut blocks = Vec::with_capacity(config.blocks);
        let mut cin = INPUT_CHANNELS;
        for (b, &cout) in config.channels.iter().enumerate() {
            blocks.push(BlockParams {
                spatial_weight: xavier(
                    &mut rng,
                    &format!("block{b}.spatial_weight"),
                    vec![cin, cout],
                    cin,
                    cout,
                ),
                temporal_kernel: xavier(
                    &mut rng,
                    &format!("block{b}.temporal_kernel"),
                    vec![kt, cout, cout],
                    cout * kt,
                    cout * kt,
                ),
                bias: zeros(&format!("block{b}.bias"), vec![cout]),
            });
            cin = cout;
        }
        let d = config.embedding_dim;
        let heads = taxonomy
            .types()
            .iter()
            .map(|ty| {
                let k = ty.cardinality as usize;
                HeadParams {
                    weight: xavier(
                        &mut rng,
                        &format!("head{:02}.weight", ty.id),
                        vec![d, k],
                        d,
                        k,
                    ),
                    bias: zeros(&format!("head{:02}.bias", ty.id), vec![k]),
                }
            })
            .collect();
        let gloss_head = HeadParams {
            weight: xavier(&mut rng, "gloss.weight", vec![d, gloss_count], d, gloss_count),
            bias: zeros("gloss.bias", vec![gloss_count]),
        };
        Ok(ModelParameters {
            config,
            blocks,
            heads,
            gloss_head,
            gloss_count,
            taxonomy_hash: taxonomy.hash(),
        })
    }

    /// Zero all phoneme-head weights and biases (verification mode: makes
    /// every head predict the uniform distribution exactly).
    pub fn zero_phoneme_heads(&mut self) {
        for head in &mut self.heads {
            head.weight.values.iter_mut().for_each(|v| *v = E::zero());
            head.bias.values.iter_mut().for_each(|v| *v = E::zero());
        }
    }

    /// Re-initialize the sixteen phoneme heads from the init scheme,
    /// leaving the encoder and gloss head untouched. Used when fine-tuning
    /// from a gloss-pretrained checkpoint.
    pub fn reinit_phoneme_heads(&mut self, taxonomy: &PhonemeTaxonomy, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = self.config.embedding_dim;
        for (head, ty) in self.heads.iter_mut().zip(taxonomy.types()) {
            let k = ty.cardinality as usize;
            head.weight = xavier(&mut rng, &format!("head{:02}.weight", ty.id), vec![d, k], d, k);
            head.bias = zeros(&format!("head{:02}.bias", ty.id), vec![k]);
        }
    }

    /// All parameter tensors in the canonical (optimizer) order.
    pub fn tensors(&self) -> Vec<&ParamTensor<E>> {
        let mut out = Vec::new();
        for b in &self.blocks {
            out.push(&b.spatial_weight);
            out.push(&b.temporal_kernel);
            out.push(&b.bias);
        }
        for h in &self.heads {
            out.push(&h.weight);
            out.push(&h.bias);
        }
        out.push(&self.gloss_head.weight);
        out.push(&self.gloss_head.bias);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut ParamTensor<E>> {
        let mut out = Vec::new();
        for b in &mut self.blocks {
            out.push(&mut b.spatial_weight);
            out.push(&mut b.temporal_kernel);
            out.push(&mut b.bias);
        }
        for h in &mut self.heads {
            out.push(&mut h.weight);
            out.push(&mut h.bias);
        }
        out.push(&mut self.gloss_head.weight);
        out.push(&mut self.gloss_head.bias);
        out
    }

    /// Zero-fill every gradient buffer.
    pub fn zero_grads(&mut self) {
        for t in self.tensors_mut() {
            t.zero_grad();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taxonomy::build_taxonomy;

    #[test]
    fn config_validation() {
        assert!(EncoderConfig::desk_default().validate().is_ok());

        let mut bad = EncoderConfig::desk_default();
        bad.temporal_kernel = 4;
        assert!(bad.validate().is_err());

        let mut bad = EncoderConfig::desk_default();
        bad.embedding_dim = 64;
        assert!(bad.validate().is_err());

        let mut bad = EncoderConfig::desk_default();
        bad.temporal_kernel = 33;
        assert!(bad.validate().is_err());

        let mut bad = EncoderConfig::desk_default();
        bad.channels = vec![16];
        assert!(bad.validate().is_err());
    }

    #[test]
    fn head_widths_match_taxonomy() {
        let tax = build_taxonomy();
        let params =
            ModelParameters::<f32>::init(EncoderConfig::desk_default(), &tax, 20, 1).unwrap();
        for (head, ty) in params.heads.iter().zip(tax.types()) {
            assert_eq!(head.weight.shape, vec![32, ty.cardinality as usize]);
            assert_eq!(head.bias.shape, vec![ty.cardinality as usize]);
        }
        assert_eq!(params.heads[15].weight.shape, vec![32, 58]);
        assert_eq!(params.gloss_head.weight.shape, vec![32, 20]);
    }

    #[test]
    fn init_is_seed_deterministic() {
        let tax = build_taxonomy();
        let a = ModelParameters::<f64>::init(EncoderConfig::desk_default(), &tax, 20, 9).unwrap();
        let b = ModelParameters::<f64>::init(EncoderConfig::desk_default(), &tax, 20, 9).unwrap();
        let c = ModelParameters::<f64>::init(EncoderConfig::desk_default(), &tax, 20, 10).unwrap();
        for (x, y) in a.tensors().iter().zip(b.tensors()) {
            assert_eq!(x.values, y.values);
        }
        assert!(a
            .tensors()
            .iter()
            .zip(c.tensors())
            .any(|(x, y)| x.values != y.values));
    }

    #[test]
    fn biases_start_at_zero_and_weights_in_bound() {
        let tax = build_taxonomy();
        let params =
            ModelParameters::<f64>::init(EncoderConfig::desk_default(), &tax, 20, 3).unwrap();
        for b in &params.blocks {
            assert!(b.bias.values.iter().all(|&v| v == 0.0));
        }
        for h in &params.heads {
            assert!(h.bias.values.iter().all(|&v| v == 0.0));
        }
        let bound = (6.0f64 / (32.0 + 5.0)).sqrt() + 1e-12;
        assert!(params.heads[0]
            .weight
            .values
            .iter()
            .all(|&v| v.abs() <= bound));
    }
}
