//! Example representation, ingestion and synthetic generators.

mod example;
pub mod libsvm;
pub mod source;
pub mod synthetic;
pub mod tokens;

pub use example::SparseExample;
pub use libsvm::{format_libsvm, parse_libsvm_line};
pub use source::{stream, DataFormat, ExampleIter, ExampleSource, FileSource, MemorySource};
pub use synthetic::{
    generate_design, generate_multiclass, generate_token_stream, planted_token, DenseMatrix, DesignScale,
    MultiClassData, MultiClassDesign, SyntheticDesign, SyntheticProblem, TokenCorpus,
    TokenStreamDesign,
};
pub use tokens::{hash_token, parse_token_line, TokenDictionary, TokenHasher};
