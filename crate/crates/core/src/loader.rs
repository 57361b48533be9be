//! Extensional data: header-less CSV tables bound to declared predicates.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::database::Database;
use crate::error::DataError;
use crate::model::Value;
use crate::ontology::Ontology;

pub type Tables = BTreeMap<String, Vec<Vec<String>>>;

/// Builds the database for `ontology`: every declared predicate is present (possibly empty),
/// inline `fact` statements come first, then table rows in order. Duplicates collapse.
pub fn load_data(ontology: &Ontology, tables: &Tables) -> Result<Database, DataError> {
    let mut db = Database::new();
    for (p, arity) in ontology.schema.all_predicates() {
        db.declare(&p, arity)?;
    }
    for (p, t) in &ontology.facts {
        db.insert(p, t.clone())?;
    }
    for (p, rows) in tables {
        let Some(arity) = db.relation(p).map(|r| r.arity()) else {
            return Err(DataError::UnknownPredicate(p.clone()));
        };
        for (i, row) in rows.iter().enumerate() {
            if row.len() != arity {
                return Err(DataError::ArityMismatch {
                    predicate: p.clone(),
                    row: Some(i + 1),
                    expected: arity,
                    found: row.len(),
                });
            }
            db.insert(p, row.iter().map(|v| Value::constant(v)).collect())?;
        }
    }
    Ok(db)
}

/// Reads a header-less CSV file; fields are trimmed and blank lines skipped.
pub fn read_table(predicate: &str, path: &Path) -> Result<Vec<Vec<String>>, DataError> {
    let io = |message: String| DataError::Io {
        predicate: predicate.to_string(),
        path: path.display().to_string(),
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| io(e.to_string()))?;
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| io(e.to_string()))?;
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        rows.push(rec.iter().map(str::to_string).collect());
    }
    Ok(rows)
}

/// Collects the tables for an ontology. With `dir`, every declared predicate `P` reads
/// `dir/P.csv` when that file exists; otherwise the ontology's `data` bindings are used.
pub fn read_tables(ontology: &Ontology, dir: Option<&Path>) -> Result<Tables, DataError> {
    let mut files: Vec<(String, PathBuf)> = Vec::new();
    match dir {
        Some(dir) => {
            for p in ontology.schema.all_predicates().keys() {
                let f = dir.join(format!("{p}.csv"));
                if f.is_file() {
                    files.push((p.to_string(), f));
                }
            }
        }
        None => {
            for (p, f) in &ontology.data_bindings {
                files.push((p.to_string(), PathBuf::from(f)));
            }
        }
    }
    let mut tables = Tables::new();
    for (p, f) in files {
        tables.insert(p.clone(), read_table(&p, &f)?);
    }
    Ok(tables)
}

pub fn load_database(ontology: &Ontology, dir: Option<&Path>) -> Result<Database, DataError> {
    load_data(ontology, &read_tables(ontology, dir)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_program;

    fn onto() -> Ontology {
        parse_program(
            "dimension H { category Ward. }\n\
             relation Shifts(w: Ward, d: Ward; nurse, shift).\n\
             fact Ward(W1).",
        )
        .unwrap()
    }

    fn rows(r: &[&[&str]]) -> Vec<Vec<String>> {
        r.iter().map(|r| r.iter().map(|s| s.to_string()).collect()).collect()
    }

    #[test]
    fn empty_table_declares_predicate() {
        let mut t = Tables::new();
        t.insert("Shifts".into(), vec![]);
        let db = load_data(&onto(), &t).unwrap();
        assert!(db.relation("Shifts").unwrap().is_empty());
        assert_eq!(db.fact_count(), 1);
    }

    #[test]
    fn short_row_reports_row_number() {
        let mut t = Tables::new();
        t.insert("Shifts".into(), rows(&[&["W1", "W1", "Helen", "night"], &["W1", "W1", "Cathy"]]));
        assert_eq!(
            load_data(&onto(), &t).unwrap_err(),
            DataError::ArityMismatch {
                predicate: "Shifts".into(),
                row: Some(2),
                expected: 4,
                found: 3
            }
        );
    }

    #[test]
    fn unknown_table_and_idempotence() {
        let mut t = Tables::new();
        t.insert("Nope".into(), vec![]);
        assert!(matches!(load_data(&onto(), &t), Err(DataError::UnknownPredicate(_))));
        let mut t = Tables::new();
        let r = rows(&[&["W1", "W1", "Helen", "night"]]);
        t.insert("Shifts".into(), [r.clone(), r].concat());
        let db = load_data(&onto(), &t).unwrap();
        assert_eq!(db.fact_count(), 2);
        assert_eq!(db, load_data(&onto(), &t).unwrap());
    }
}
