//! Distributed representations of molecular graphs for drug pair scoring.
//!
//! The pipeline runs in two stages. First, molecules are parsed from SMILES
//! into heavy-atom graphs ([`molgraph`]), discrete substructure patterns are
//! induced over them ([`substructure`]) and a skipgram model with negative
//! sampling learns one dense vector per molecule from the resulting
//! graph-pattern corpus ([`corpus`], [`skipgram`]). Second, those vectors are
//! used alone or concatenated with circular fingerprints ([`fingerprint`]) as
//! drug features of an encoder-decoder pair scorer ([`pairscore`]) evaluated
//! with AUROC under random or cold splits ([`eval`]).
//!
//! Data-parallel loops go through [`par::Exec`]. With the default `parallel`
//! feature they run on rayon; without it every loop is sequential.

pub mod cli;
pub mod corpus;
pub mod eval;
pub mod fingerprint;
pub mod molgraph;
pub mod pairscore;
pub mod par;
pub mod skipgram;
pub mod substructure;
pub mod synth;

pub use corpus::{Corpus, UnigramTable};
pub use fingerprint::Fingerprint;
pub use molgraph::{parse_smiles, AtomLabel, BondOrder, MolecularGraph};
pub use par::Exec;
pub use skipgram::{EmbeddingTable, SkipgramConfig};
pub use substructure::{Inducer, Pattern, PatternKind, PatternMultiset, PatternVocabulary};
