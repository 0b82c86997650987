//! Serializable training snapshots.
//!
//! A checkpoint stores the learned library as program text, production
//! weights keyed by parent-slot and production label, the recognition
//! model's rows, and each beam's program texts. Everything numeric that can
//! be recomputed (beam priors, context layout) is recomputed on load, so a
//! checkpoint stays valid as long as the texts parse.

use super::{Beam, BeamItem, TrainState};
use crate::config::schema;
use crate::dsl::text::{parse, parse_ty, to_text, ParseError};
use crate::dsl::{Library, LibraryError, Ty, TypeError};
use crate::grammar::Grammar;
use crate::recognition::{RecognitionError, RecognitionModel, TransitionKey};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub schema: u32,
    pub cycle: usize,
    /// Learned entries in id order, as `(name, type, body)` text.
    pub entries: Vec<EntryRecord>,
    /// Production weights per context, in context layout order.
    pub weights: Vec<WeightRecord>,
    pub recognition: RecognitionRecord,
    /// Program texts per image beam, best prior first.
    pub beams: Vec<Vec<String>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EntryRecord {
    pub name: String,
    pub ty: String,
    pub body: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeightRecord {
    /// Parent entry name and argument slot; `None` for the root context.
    pub parent: Option<(String, usize)>,
    /// `(production label, weight)` per production in the context.
    pub over: Vec<(String, f64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecognitionRecord {
    pub feature_width: usize,
    pub feature_height: usize,
    pub rows: Vec<RowRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RowRecord {
    pub parent: Option<(String, usize)>,
    pub production: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("checkpoint schema {found}, this build reads {expected}")]
    Schema { expected: u32, found: u32 },
    #[error("entry {name}: {source}")]
    Entry {
        name: String,
        #[source]
        source: LibraryError,
    },
    #[error("{0}")]
    Parse(#[from] ParseError),
    #[error("{0}")]
    Type(#[from] TypeError),
    #[error("{0}")]
    Recognition(#[from] RecognitionError),
    #[error("weights do not match the library layout: {0}")]
    WeightShape(String),
}

/// Snapshots the state into a plain serializable record.
pub fn save(state: &TrainState) -> Checkpoint {
    let g = &state.grammar;
    let lib = g.lib();

    let entries = lib
        .learned_ids()
        .map(|id| {
            let e = lib.entry(id);
            EntryRecord {
                name: e.name.clone(),
                ty: e.ty.to_string(),
                body: to_text(lib, e.body().expect("learned entries have bodies")),
            }
        })
        .collect();

    let weights = (0..g.n_ctx())
        .map(|ctx| {
            let parent = g
                .ctx_parent(ctx)
                .map(|(e, s)| (lib.entry(e).name.clone(), s));
            let over = g
                .ctx_productions(ctx)
                .iter()
                .zip(g.weights(ctx))
                .map(|(&p, &w)| (g.production_label(p), w))
                .collect();
            WeightRecord { parent, over }
        })
        .collect();

    let (fw, fh) = state.q.feature_dims();
    let rows = state
        .q
        .rows()
        .map(|(key, values)| RowRecord {
            parent: key.parent.clone(),
            production: key.production.clone(),
            values: values.to_vec(),
        })
        .collect();

    let beams = state
        .beams
        .iter()
        .map(|b| {
            b.items
                .iter()
                .map(|it| to_text(lib, &it.program))
                .collect()
        })
        .collect();

    Checkpoint {
        schema: schema::CHECKPOINT,
        cycle: state.cycle,
        entries,
        weights,
        recognition: RecognitionRecord {
            feature_width: fw,
            feature_height: fh,
            rows,
        },
        beams,
    }
}

/// Rebuilds a training state from a checkpoint. Beam priors are recomputed
/// from the restored weights.
pub fn load(cp: &Checkpoint) -> Result<TrainState, LoadError> {
    if cp.schema != schema::CHECKPOINT {
        return Err(LoadError::Schema {
            expected: schema::CHECKPOINT,
            found: cp.schema,
        });
    }

    let mut lib = Library::base();
    for rec in &cp.entries {
        let ty = parse_ty(&rec.ty)?;
        let body = parse(&lib, &rec.body, &ty)?;
        lib.add(&rec.name, ty, body).map_err(|source| LoadError::Entry {
            name: rec.name.clone(),
            source,
        })?;
    }

    let layout = Grammar::uniform(lib.clone());
    if cp.weights.len() != layout.n_ctx() {
        return Err(LoadError::WeightShape(format!(
            "{} contexts stored, library has {}",
            cp.weights.len(),
            layout.n_ctx()
        )));
    }
    let mut weights = Vec::with_capacity(cp.weights.len());
    for (ctx, rec) in cp.weights.iter().enumerate() {
        let parent = layout
            .ctx_parent(ctx)
            .map(|(e, s)| (layout.lib().entry(e).name.clone(), s));
        if parent != rec.parent {
            return Err(LoadError::WeightShape(format!(
                "context {ctx} expects parent {parent:?}, stored {:?}",
                rec.parent
            )));
        }
        let by_label: HashMap<&str, f64> =
            rec.over.iter().map(|(l, w)| (l.as_str(), *w)).collect();
        let prods = layout.ctx_productions(ctx);
        if by_label.len() != prods.len() {
            return Err(LoadError::WeightShape(format!(
                "context {ctx} stores {} productions, library has {}",
                by_label.len(),
                prods.len()
            )));
        }
        let mut row = Vec::with_capacity(prods.len());
        for &p in prods {
            let label = layout.production_label(p);
            let w = by_label.get(label.as_str()).copied().ok_or_else(|| {
                LoadError::WeightShape(format!("context {ctx} is missing {label:?}"))
            })?;
            row.push(w);
        }
        weights.push(row);
    }
    let grammar = layout.with_weights(weights);

    let q = RecognitionModel::from_rows(
        cp.recognition.feature_width,
        cp.recognition.feature_height,
        cp.recognition.rows.iter().map(|r| {
            (
                TransitionKey {
                    parent: r.parent.clone(),
                    production: r.production.clone(),
                },
                r.values.clone(),
            )
        }),
    )?;

    let mut beams = Vec::with_capacity(cp.beams.len());
    for texts in &cp.beams {
        let mut items = Vec::with_capacity(texts.len());
        for t in texts {
            let program = parse(grammar.lib(), t, &Ty::Drawing)?;
            let log_prior = grammar.log_prior(&program)?;
            items.push(BeamItem { program, log_prior });
        }
        beams.push(Beam { items });
    }

    Ok(TrainState {
        grammar,
        q,
        beams,
        cycle: cp.cycle,
    })
}
