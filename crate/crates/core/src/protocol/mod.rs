//! The embedding comparison protocol: configuration, inputs, and the two-party run.

pub mod config;
pub mod embedding;
pub mod session;

pub use config::{default_guard_band, Mode, ProtocolConfig, SessionConfig, Variant};
pub use embedding::{embedding_with_cosine, random_embedding, Embedding, EmbeddingDb};
pub use session::{
    run_local, run_local_with, run_party, run_seeded, seeded_nonce, LocalRun, PartyInput, PartyOutput, RunOptions, Server,
};

/// Cleartext reference: `cos(x, p_i) >= th` for every entry.
pub fn plaintext_matches(threshold: f64, query: &Embedding, db: &EmbeddingDb) -> Vec<bool> {
    db.embeddings.iter().map(|p| query.cosine(p) >= threshold).collect()
}

/// Entries whose cosine lies within the guard band around the threshold. The protocol
/// may decide those either way.
pub fn ambiguous(pc: &ProtocolConfig, query: &Embedding, db: &EmbeddingDb) -> Vec<bool> {
    db.embeddings.iter().map(|p| (query.cosine(p) - pc.threshold).abs() < pc.guard_band).collect()
}
