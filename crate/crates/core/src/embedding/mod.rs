//! Word embedding storage, file formats and lexicons.

mod io;
mod lexicon;
mod store;
pub mod synth;

pub use io::{load_embeddings, read_binary, read_text, save_embeddings, write_binary, write_text, Format};
pub use lexicon::{load_eval_spec, load_taxonomy, EvalSpec, Identity, IdentityTaxonomy};
pub use store::{normalize_token, EmbeddingStore, Resolved};
