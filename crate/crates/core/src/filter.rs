//! Conjunctive subject filters: `col=level[,col=level...]`.
//!
//! Levels are matched verbatim against the raw string values, no trimming
//! or escaping; a level containing a comma cannot be expressed.

use crate::dataset::{CategoricalTable, SubjectSet};
use crate::error::{Error, Result};

/// A parsed conjunction of column = level tests.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubjectFilter {
    source: String,
    clauses: Vec<(String, String)>,
}

impl SubjectFilter {
    pub fn parse(text: &str) -> Result<Self> {
        let bad = |reason: &str| Error::BadFilter {
            filter: text.to_owned(),
            reason: reason.to_owned(),
        };
        if text.is_empty() {
            return Err(bad("filter is empty"));
        }
        let mut clauses = Vec::new();
        for clause in text.split(',') {
            let (column, level) = clause
                .split_once('=')
                .ok_or_else(|| bad(&format!("clause {clause:?} is missing '='")))?;
            if column.is_empty() {
                return Err(bad(&format!("clause {clause:?} has an empty column name")));
            }
            clauses.push((column.to_owned(), level.to_owned()));
        }
        Ok(SubjectFilter {
            source: text.to_owned(),
            clauses,
        })
    }

    pub fn clauses(&self) -> &[(String, String)] {
        &self.clauses
    }

    /// Subjects satisfying every clause. Referencing a missing column is a
    /// validation error; a conjunction no subject satisfies is reported as
    /// an empty filter result.
    pub fn apply(&self, table: &CategoricalTable) -> Result<SubjectSet> {
        let mut tests: Vec<(usize, u32)> = Vec::with_capacity(self.clauses.len());
        for (column, level) in &self.clauses {
            let j = table
                .column_index(column)
                .ok_or_else(|| Error::MissingColumn(column.clone()))?;
            match table.levels(j).iter().position(|l| l == level) {
                // A level absent from the dictionary matches no subject.
                None => return Err(Error::EmptyFilter(self.source.clone())),
                Some(code) => tests.push((j, code as u32)),
            }
        }
        SubjectSet::from_predicate(table, |i| {
            tests.iter().all(|&(j, code)| table.code(i, j) == code)
        })
        .map_err(|_| Error::EmptyFilter(self.source.clone()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn table() -> CategoricalTable {
        CategoricalTable::from_csv_reader(
            Cursor::new("gender,party\nf,dem\nm,rep\nf,rep\nf,dem\n"),
            None,
        )
        .unwrap()
    }

    #[test]
    fn single_and_conjunctive_clauses() {
        let t = table();
        let set = SubjectFilter::parse("gender=f").unwrap().apply(&t).unwrap();
        assert_eq!(set.indices(), &[0, 2, 3]);
        let set = SubjectFilter::parse("gender=f,party=rep")
            .unwrap()
            .apply(&t)
            .unwrap();
        assert_eq!(set.indices(), &[2]);
    }

    #[test]
    fn malformed_filters_are_rejected_at_parse_time() {
        assert!(matches!(
            SubjectFilter::parse(""),
            Err(Error::BadFilter { .. })
        ));
        assert!(matches!(
            SubjectFilter::parse("gender"),
            Err(Error::BadFilter { .. })
        ));
        assert!(matches!(
            SubjectFilter::parse("=f"),
            Err(Error::BadFilter { .. })
        ));
        // Empty level is fine: it matches the empty-string category.
        assert!(SubjectFilter::parse("gender=").is_ok());
    }

    #[test]
    fn missing_column_vs_empty_result() {
        let t = table();
        assert!(matches!(
            SubjectFilter::parse("age=9").unwrap().apply(&t),
            Err(Error::MissingColumn(c)) if c == "age"
        ));
        assert!(matches!(
            SubjectFilter::parse("gender=x").unwrap().apply(&t),
            Err(Error::EmptyFilter(_))
        ));
        // Contradictory conjunction selects nothing.
        assert!(matches!(
            SubjectFilter::parse("gender=f,gender=m").unwrap().apply(&t),
            Err(Error::EmptyFilter(_))
        ));
    }
}
