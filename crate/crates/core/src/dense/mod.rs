//! Dense retrieval over unit-normalized embeddings.

pub mod provider;
pub mod store;
pub mod vector;

pub use provider::{
    embed, hash_embed, EmbedItem, EmbeddingProvider, FileEmbeddings, HashEmbedder, HealthResponse, Role,
    ServiceEmbedder,
};
pub use store::{
    build_vector_store, read_embedding_file, semantic_topk, write_embedding_file, EmbeddingFile, VectorStore,
};
pub use vector::EmbeddingVector;
