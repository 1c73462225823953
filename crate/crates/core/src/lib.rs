//! Self-alignment pretraining for cross-lingual biomedical entity linking.
//!
//! Names of the same concept are pulled together in embedding space and
//! names of different concepts pushed apart, using synonyms from an ontology
//! and, optionally, translation pairs. A query mention is then linked by
//! nearest-neighbour search over every ontology name.

pub mod benchmark;
pub mod bitext;
pub mod config;
pub mod encoder;
pub mod error;
pub mod io;
pub mod linalg;
pub mod linker;
pub mod record;
pub mod rng;
pub mod sap;
pub mod synthetic;
pub mod umls;

pub use config::TrainConfig;
pub use encoder::{init_params, EncoderParams};
pub use error::{Error, Result};
pub use record::{LabelId, Lang, NameRecord};

// The guide's code blocks run as doc-tests so the book cannot drift from the
// API. One module per chapter keeps failures attributable.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    mod intro {}
    #[doc = include_str!("../../../book/src/records.md")]
    mod records {}
    #[doc = include_str!("../../../book/src/encoder.md")]
    mod encoder {}
    #[doc = include_str!("../../../book/src/mining.md")]
    mod mining {}
    #[doc = include_str!("../../../book/src/loss.md")]
    mod loss {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/linking.md")]
    mod linking {}
    #[doc = include_str!("../../../book/src/benchmark.md")]
    mod benchmark {}
    #[doc = include_str!("../../../book/src/synthetic.md")]
    mod synthetic {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
