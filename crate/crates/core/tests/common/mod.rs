#![allow(dead_code)]

use std::path::{Path, PathBuf};

use mdq_core::loader::load_database;
use mdq_core::{load_program_file, load_program_files, Database, Ontology};

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/hospital").join(name)
}

pub fn core() -> Ontology {
    load_program_file(&fixture("hospital_core.mdq")).unwrap()
}

pub fn full() -> Ontology {
    load_program_file(&fixture("hospital.mdq")).unwrap()
}

/// Core ontology with the context mapping and quality definitions.
pub fn with_quality() -> Ontology {
    let (a, b, c) = (fixture("hospital_core.mdq"), fixture("mapping.mdq"), fixture("quality.mdq"));
    load_program_files(&[&a, &b, &c]).unwrap()
}

pub fn data(o: &Ontology) -> Database {
    load_database(o, None).unwrap()
}
