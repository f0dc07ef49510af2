//! Data formats, the seeded synthetic corpus generator, the refine loop and
//! the external-judge protocol.

pub mod generate;
pub mod io;
pub mod judge;
pub mod profile;
pub mod realize;
pub mod refine;

pub use generate::{generate_corpus, AdherenceModel, Corpus, CountRange, GenConfig, GenError, ProfileSource};
pub use io::{instruction_samples, IoError, KtoRecord, PairRecord};
pub use profile::SystemProfile;
pub use realize::UnsatisfiableTemplate;
pub use refine::{refine_loop, Feedback, RefineConfig, RefineOutcome, Sampler};
