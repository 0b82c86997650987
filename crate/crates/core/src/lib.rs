//! Program induction for line drawings.
//!
//! The crate has three layers that build on each other:
//!
//! * a small typed DSL of drawing programs ([`dsl`]) with a deterministic
//!   rasterizer, so "program explains image" is an exact, testable relation;
//! * an induction engine ([`grammar`], [`enumerate`], [`recognition`],
//!   [`induction`]) that alternates guided enumeration, library compression
//!   and recognition-model training to solve a corpus of images;
//! * a grounding layer ([`trajectory`], [`motor`], [`behavior`], [`harness`])
//!   that turns programs into candidate pen trajectories, scores them with a
//!   fitted motor-cost model, and compares them against recorded drawing
//!   behavior.
//!
//! Everything is seeded and deterministic: the same config and inputs give
//! byte-identical outputs regardless of thread count.

pub mod behavior;
pub mod config;
pub mod dsl;
pub mod edit;
pub mod enumerate;
pub mod exec;
pub mod geom;
pub mod grammar;
pub mod harness;
pub mod induction;
pub mod recognition;
pub mod motor;
pub mod stimuli;
pub mod trajectory;
