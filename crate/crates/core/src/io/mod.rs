//! Reading and writing volumes, masks, embeddings and corpus manifests.

pub mod binary;
pub mod corpus;
pub mod nifti;

pub use binary::{load_embedding, load_feature_map, write_embedding, write_feature_map};
pub use corpus::{
    load_corpus, load_entries, load_entry, Corpus, CorpusEntry, CorpusRole, ImageBundle,
    LoadRequest,
};
pub use nifti::{load_mask, load_volume, write_mask, write_volume};
