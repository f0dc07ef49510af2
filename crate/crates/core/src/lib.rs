//! Reverse preference optimization at desk scale.
//!
//! * [`constraint`]: verifiable constraints with exact negation.
//! * [`adherence`]: adherence vectors, gap, dominance and pair taxonomy.
//! * [`pairs`]: RPO / DPO / KTO example construction and sample-efficiency analysis.
//! * [`loss`]: DPO and margin-augmented RPO objectives with analytic gradients.
//! * [`policy`]: tabular softmax policy, SGD trainer and RPO-vs-DPO arm comparison.
//! * [`metrics`]: CSR / ISR / SSR and per-step strict accuracies.
//! * [`corpus`]: record formats, seeded synthetic corpus, refine loop and judge protocol.

pub mod adherence;
pub mod constraint;
pub mod corpus;
pub mod loss;
pub mod metrics;
pub mod pairs;
pub mod policy;
pub mod text;

pub use adherence::{AdherenceVector, PairClass};
pub use constraint::{Constraint, ConstraintKind, ConstraintSet};
pub use loss::{LossConfig, PairLogits};
pub use pairs::{PreferencePair, ScoredResponse};
