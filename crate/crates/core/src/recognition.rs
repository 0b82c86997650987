//! Image-conditioned production weights.
//!
//! A linear model maps block-mean image features to one logit per grammar
//! transition (a parent context plus the production filling it); a softmax
//! per context turns the logits into weights that guide enumeration toward
//! programs that tend to explain images like the one at hand. Rows are keyed
//! by entry *names*, not ids, so a model survives library growth: transitions
//! it has never seen start at zero weight vectors, which is exactly the
//! uniform prediction.

use crate::config::SgdConfig;
use crate::dsl::raster::RasterImage;
use crate::dsl::{Program, TypeError};
use crate::exec::map_slice;
use crate::grammar::Grammar;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use thiserror::Error;

/// A grammar transition named stably across library versions.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TransitionKey {
    /// Parent entry name and argument slot; `None` for the root slot.
    pub parent: Option<(String, usize)>,
    /// Entry name or constant literal filling the slot.
    pub production: String,
}

#[derive(Debug, Error)]
pub enum RecognitionError {
    #[error("feature vector has {found} entries, model expects {expected}")]
    FeatureShape { expected: usize, found: usize },
    #[error("training diverged at epoch {epoch} (loss {loss})")]
    Diverged { epoch: usize, loss: f64 },
}

/// One training pair: image features plus the production sites of a program
/// that renders to that image. Sites come pre-sorted by context so gradient
/// passes can batch repeated contexts.
#[derive(Debug, Clone)]
pub struct TrainSample {
    features: Vec<f64>,
    sites: Vec<(u32, u32)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainStats {
    pub initial_loss: f64,
    pub final_loss: f64,
    pub epochs: usize,
}

#[derive(Debug, Clone)]
pub struct RecognitionModel {
    fw: usize,
    fh: usize,
    keys: Vec<TransitionKey>,
    index: HashMap<TransitionKey, usize>,
    /// Row-major weights, one row of `fw * fh + 1` values per key; the last
    /// column is the bias.
    w: Vec<f64>,
}

impl RecognitionModel {
    pub fn new(fw: usize, fh: usize) -> RecognitionModel {
        RecognitionModel {
            fw,
            fh,
            keys: Vec::new(),
            index: HashMap::new(),
            w: Vec::new(),
        }
    }

    pub fn feature_dims(&self) -> (usize, usize) {
        (self.fw, self.fh)
    }

    fn n_features(&self) -> usize {
        self.fw * self.fh
    }

    fn stride(&self) -> usize {
        self.n_features() + 1
    }

    /// Block-mean features for an image.
    pub fn features(&self, img: &RasterImage) -> Vec<f64> {
        img.downsample(self.fw, self.fh)
    }

    /// Rows in insertion order, for serialization.
    pub fn rows(&self) -> impl Iterator<Item = (&TransitionKey, &[f64])> {
        let stride = self.stride();
        self.keys
            .iter()
            .enumerate()
            .map(move |(i, k)| (k, &self.w[i * stride..(i + 1) * stride]))
    }

    /// Rebuilds a model from serialized rows.
    pub fn from_rows(
        fw: usize,
        fh: usize,
        rows: impl IntoIterator<Item = (TransitionKey, Vec<f64>)>,
    ) -> Result<RecognitionModel, RecognitionError> {
        let mut m = RecognitionModel::new(fw, fh);
        let stride = m.stride();
        for (key, row) in rows {
            if row.len() != stride {
                return Err(RecognitionError::FeatureShape {
                    expected: stride,
                    found: row.len(),
                });
            }
            let id = m.keys.len();
            m.index.insert(key.clone(), id);
            m.keys.push(key);
            m.w.extend(row);
        }
        Ok(m)
    }

    fn key_of(&self, g: &Grammar, ctx: usize, pos: usize) -> TransitionKey {
        let parent = g
            .ctx_parent(ctx)
            .map(|(e, s)| (g.lib().entry(e).name.clone(), s));
        let production = g.production_label(g.ctx_productions(ctx)[pos]);
        TransitionKey { parent, production }
    }

    /// Interns a row for every transition of `g`, zero-initialized when new,
    /// and returns the per-context row table.
    fn align(&mut self, g: &Grammar) -> Vec<Vec<u32>> {
        let stride = self.stride();
        (0..g.n_ctx())
            .map(|ctx| {
                (0..g.ctx_productions(ctx).len())
                    .map(|pos| {
                        let key = self.key_of(g, ctx, pos);
                        if let Some(&id) = self.index.get(&key) {
                            return id as u32;
                        }
                        let id = self.keys.len();
                        self.index.insert(key.clone(), id);
                        self.keys.push(key);
                        self.w.extend(std::iter::repeat(0.0).take(stride));
                        id as u32
                    })
                    .collect()
            })
            .collect()
    }

    /// Read-only row table; unknown transitions map to `u32::MAX` and
    /// predict as zero logits.
    fn align_readonly(&self, g: &Grammar) -> Vec<Vec<u32>> {
        (0..g.n_ctx())
            .map(|ctx| {
                (0..g.ctx_productions(ctx).len())
                    .map(|pos| {
                        self.index
                            .get(&self.key_of(g, ctx, pos))
                            .map_or(u32::MAX, |&id| id as u32)
                    })
                    .collect()
            })
            .collect()
    }

    /// Per-context production weights for one image: softmax over the
    /// predicted logits, aligned with `g`'s layout.
    pub fn predict(&self, g: &Grammar, img: &RasterImage) -> Vec<Vec<f64>> {
        let x = self.features(img);
        let align = self.align_readonly(g);
        let stride = self.stride();
        align
            .iter()
            .map(|rows| {
                let mut logits: Vec<f64> = rows
                    .iter()
                    .map(|&r| {
                        if r == u32::MAX {
                            0.0
                        } else {
                            let row = &self.w[r as usize * stride..(r as usize + 1) * stride];
                            dot_with_bias(row, &x)
                        }
                    })
                    .collect();
                softmax_in_place(&mut logits);
                logits
            })
            .collect()
    }

    /// The grammar reweighted for one image.
    pub fn guide(&self, g: &Grammar, img: &RasterImage) -> Grammar {
        g.with_weights(self.predict(g, img))
    }

    /// Builds a training pair from an image and a program explaining it.
    pub fn make_sample(
        &self,
        g: &Grammar,
        img: &RasterImage,
        p: &Program,
    ) -> Result<TrainSample, TypeError> {
        let mut sites = g.production_sites(p)?;
        sites.sort_unstable();
        Ok(TrainSample {
            features: self.features(img),
            sites,
        })
    }

    /// Full-batch gradient descent on the mean per-sample site loss. The
    /// model is updated only if every epoch stays finite. Gradients are
    /// accumulated over fixed chunks folded in index order, so results are
    /// identical in parallel and sequential builds.
    pub fn train(
        &mut self,
        g: &Grammar,
        samples: &[TrainSample],
        cfg: &SgdConfig,
    ) -> Result<TrainStats, RecognitionError> {
        let nf = self.n_features();
        for s in samples {
            if s.features.len() != nf {
                return Err(RecognitionError::FeatureShape {
                    expected: nf,
                    found: s.features.len(),
                });
            }
        }
        let align = self.align(g);
        let stride = self.stride();
        if samples.is_empty() {
            return Ok(TrainStats {
                initial_loss: 0.0,
                final_loss: 0.0,
                epochs: 0,
            });
        }

        let mut w = self.w.clone();
        let inv_n = 1.0 / samples.len() as f64;
        let chunks: Vec<&[TrainSample]> = samples.chunks(64).collect();
        let mut initial_loss = 0.0;
        let mut loss = 0.0;
        for epoch in 0..=cfg.epochs {
            let parts = map_slice(&chunks, |chunk| chunk_pass(chunk, &w, &align, stride));
            let mut grad = vec![0.0f64; w.len()];
            loss = 0.0;
            for (part_loss, part_grad) in parts {
                loss += part_loss;
                for (gi, pg) in grad.iter_mut().zip(part_grad) {
                    *gi += pg;
                }
            }
            loss *= inv_n;
            if !loss.is_finite() {
                return Err(RecognitionError::Diverged { epoch, loss });
            }
            if epoch == 0 {
                initial_loss = loss;
            }
            if epoch == cfg.epochs {
                // Final pass measures the loss without another update.
                break;
            }
            let scale = cfg.step * inv_n;
            for (wi, gi) in w.iter_mut().zip(&grad) {
                *wi -= scale * gi;
            }
        }
        self.w = w;
        Ok(TrainStats {
            initial_loss,
            final_loss: loss,
            epochs: cfg.epochs,
        })
    }
}

fn dot_with_bias(row: &[f64], x: &[f64]) -> f64 {
    let n = x.len();
    let mut acc = row[n];
    for i in 0..n {
        acc += row[i] * x[i];
    }
    acc
}

fn softmax_in_place(z: &mut [f64]) {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in z.iter_mut() {
        *v = (*v - m).exp();
        total += *v;
    }
    for v in z.iter_mut() {
        *v /= total;
    }
}

/// Loss and gradient contribution of one chunk of samples, at fixed weights.
fn chunk_pass(
    chunk: &[TrainSample],
    w: &[f64],
    align: &[Vec<u32>],
    stride: usize,
) -> (f64, Vec<f64>) {
    let mut grad = vec![0.0f64; w.len()];
    let mut loss = 0.0;
    let mut probs: Vec<f64> = Vec::new();
    let mut counts: Vec<f64> = Vec::new();
    for sample in chunk {
        let x = &sample.features;
        let nf = x.len();
        // Sites are sorted by context; process each run of one context with
        // a single softmax.
        let mut i = 0;
        while i < sample.sites.len() {
            let ctx = sample.sites[i].0 as usize;
            let mut j = i;
            while j < sample.sites.len() && sample.sites[j].0 as usize == ctx {
                j += 1;
            }
            let rows = &align[ctx];
            probs.clear();
            probs.extend(rows.iter().map(|&r| {
                let row = &w[r as usize * stride..(r as usize + 1) * stride];
                dot_with_bias(row, x)
            }));
            softmax_in_place(&mut probs);
            counts.clear();
            counts.resize(rows.len(), 0.0);
            let run = (j - i) as f64;
            for &(_, pos) in &sample.sites[i..j] {
                counts[pos as usize] += 1.0;
                loss -= probs[pos as usize].max(f64::MIN_POSITIVE).ln();
            }
            for (k, &r) in rows.iter().enumerate() {
                let coef = run * probs[k] - counts[k];
                if coef == 0.0 {
                    continue;
                }
                let row = &mut grad[r as usize * stride..(r as usize + 1) * stride];
                for (ri, xi) in row[..nf].iter_mut().zip(x) {
                    *ri += coef * xi;
                }
                row[nf] += coef;
            }
            i = j;
        }
    }
    (loss, grad)
}
