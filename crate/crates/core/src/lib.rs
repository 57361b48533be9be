//! Multidimensional ontologies for contextual data quality: an MD data model, a Datalog±
//! ontology language, rule analysis, chase and top-down query answering, and quality
//! assessment through contexts.

pub mod analysis;
pub mod chase;
pub mod database;
pub mod error;
pub mod loader;
pub mod matching;
pub mod md;
pub mod model;
pub mod ontology;
pub mod parser;
pub mod quality;
pub mod query;

pub use database::{Database, FactIndex, Relation};
pub use error::*;
pub use model::*;
pub use ontology::Ontology;
pub use parser::{load_program_file, load_program_files, parse_program, parse_sources};
