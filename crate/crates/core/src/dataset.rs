//! Categorical tables: CSV ingestion, integer encoding, coarsening, and
//! synthetic product designs.
//!
//! A [`CategoricalTable`] is the empirical distribution everything else is
//! computed from: an `n x d` matrix of level codes plus the per-column level
//! dictionaries that map codes back to the raw strings.

use std::collections::HashMap;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Hard cap for synthetic designs; keeps `synth_product` from trying to
/// materialize something that cannot fit in memory anyway.
const MAX_SYNTH_ROWS: usize = 1 << 40;

/// An immutable table of `n` subjects described by `d` categorical variables.
///
/// Codes are stored column-major: `column(j)[i]` is the level index of
/// subject `i` on variable `j`. Level codes are assigned by first appearance
/// in the input, so ingestion is deterministic and order-stable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategoricalTable {
    names: Vec<String>,
    levels: Vec<Vec<String>>,
    columns: Vec<Vec<u32>>,
    n: usize,
}

impl CategoricalTable {
    /// Build a table from already-encoded parts, validating every invariant.
    pub fn from_parts(
        names: Vec<String>,
        levels: Vec<Vec<String>>,
        columns: Vec<Vec<u32>>,
    ) -> Result<Self> {
        let d = names.len();
        if d == 0 {
            return Err(Error::InvalidTable("d must be >= 1".into()));
        }
        if levels.len() != d || columns.len() != d {
            return Err(Error::InvalidTable(
                "names, levels and columns must have equal length".into(),
            ));
        }
        let n = columns[0].len();
        if n == 0 {
            return Err(Error::InvalidTable("n must be >= 1".into()));
        }
        for j in 0..d {
            if columns[j].len() != n {
                return Err(Error::InvalidTable(format!(
                    "column {} has {} rows, expected {}",
                    names[j],
                    columns[j].len(),
                    n
                )));
            }
            if levels[j].is_empty() {
                return Err(Error::InvalidTable(format!(
                    "column {} has no levels",
                    names[j]
                )));
            }
            let mut seen = HashMap::new();
            for (k, level) in levels[j].iter().enumerate() {
                if seen.insert(level.as_str(), k).is_some() {
                    return Err(Error::InvalidTable(format!(
                        "column {} has duplicate level {:?}",
                        names[j], level
                    )));
                }
            }
            let bound = levels[j].len() as u32;
            if let Some(&bad) = columns[j].iter().find(|&&c| c >= bound) {
                return Err(Error::InvalidTable(format!(
                    "column {} has code {} but only {} levels",
                    names[j], bad, bound
                )));
            }
        }
        Ok(CategoricalTable {
            names,
            levels,
            columns,
            n,
        })
    }

    /// Read a CSV file (UTF-8, header row, RFC 4180 quoting) and encode the
    /// selected columns. `selected = None` keeps every column in file order;
    /// otherwise columns appear in the order they are listed.
    ///
    /// Empty cells are encoded as the level `""`, a category of its own.
    pub fn ingest_csv(path: &Path, selected: Option<&[String]>) -> Result<Self> {
        let file = File::open(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_csv_reader(file, selected)
    }

    /// Same as [`ingest_csv`](Self::ingest_csv) but from any reader.
    pub fn from_csv_reader<R: Read>(reader: R, selected: Option<&[String]>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(false)
            .from_reader(reader);

        let headers: Vec<String> = rdr
            .headers()
            .map_err(csv_error)?
            .iter()
            .map(str::to_owned)
            .collect();

        let (names, picks): (Vec<String>, Vec<usize>) = match selected {
            None => (headers.clone(), (0..headers.len()).collect()),
            Some(wanted) => {
                let mut picks = Vec::with_capacity(wanted.len());
                for name in wanted {
                    let idx = headers
                        .iter()
                        .position(|h| h == name)
                        .ok_or_else(|| Error::MissingColumn(name.clone()))?;
                    picks.push(idx);
                }
                (wanted.to_vec(), picks)
            }
        };
        if names.is_empty() {
            return Err(Error::InvalidTable("no columns selected".into()));
        }

        let d = names.len();
        let mut levels: Vec<Vec<String>> = vec![Vec::new(); d];
        let mut index: Vec<HashMap<String, u32>> = vec![HashMap::new(); d];
        let mut columns: Vec<Vec<u32>> = vec![Vec::new(); d];

        for record in rdr.records() {
            let record = record.map_err(csv_error)?;
            for (slot, &src) in picks.iter().enumerate() {
                let raw = record.get(src).unwrap_or("");
                let code = match index[slot].get(raw) {
                    Some(&c) => c,
                    None => {
                        let c = levels[slot].len() as u32;
                        levels[slot].push(raw.to_owned());
                        index[slot].insert(raw.to_owned(), c);
                        c
                    }
                };
                columns[slot].push(code);
            }
        }
        if columns[0].is_empty() {
            return Err(Error::EmptyInput);
        }
        Self::from_parts(names, levels, columns)
    }

    /// Full factorial design over the given level counts, each cell repeated
    /// `replication` times. Every pair of columns is exactly independent
    /// under the empirical distribution by construction.
    pub fn synth_product(level_counts: &[usize], replication: usize) -> Result<Self> {
        if level_counts.is_empty() || replication == 0 || level_counts.contains(&0) {
            return Err(Error::InvalidTable(
                "level counts and replication must all be >= 1".into(),
            ));
        }
        let mut cells: usize = replication;
        for &c in level_counts {
            cells = cells
                .checked_mul(c)
                .filter(|&v| v <= MAX_SYNTH_ROWS)
                .ok_or_else(|| {
                    Error::DesignTooLarge(format!("{:?} x {}", level_counts, replication))
                })?;
        }
        let n = cells;
        let d = level_counts.len();

        let names = (0..d).map(|j| format!("v{}", j + 1)).collect();
        let levels = level_counts
            .iter()
            .map(|&c| (0..c).map(|v| v.to_string()).collect())
            .collect();

        // Cells in lexicographic order with the last column fastest; each
        // cell occupies `replication` consecutive rows.
        let mut columns = vec![Vec::with_capacity(n); d];
        let mut stride = vec![0usize; d];
        let mut acc = replication;
        for j in (0..d).rev() {
            stride[j] = acc;
            acc *= level_counts[j];
        }
        for row in 0..n {
            for j in 0..d {
                columns[j].push(((row / stride[j]) % level_counts[j]) as u32);
            }
        }
        Self::from_parts(names, levels, columns)
    }

    /// Replace one column's levels by buckets according to `map`. Row order,
    /// `n`, `d`, and all other columns are unchanged.
    pub fn coarsen(&self, map: &CoarseningMap) -> Result<Self> {
        let j = map.column;
        if j >= self.d() {
            return Err(Error::VariableOutOfRange {
                index: j,
                d: self.d(),
            });
        }
        // New bucket levels in first-appearance order over the old levels.
        let mut bucket_index: HashMap<&str, u32> = HashMap::new();
        let mut buckets: Vec<String> = Vec::new();
        let mut recode: Vec<u32> = Vec::with_capacity(self.levels[j].len());
        for old in &self.levels[j] {
            let bucket = map.mapping.get(old).ok_or_else(|| Error::UnmappedLevel {
                column: self.names[j].clone(),
                level: old.clone(),
            })?;
            let code = match bucket_index.get(bucket.as_str()) {
                Some(&c) => c,
                None => {
                    let c = buckets.len() as u32;
                    buckets.push(bucket.clone());
                    bucket_index.insert(bucket.as_str(), c);
                    c
                }
            };
            recode.push(code);
        }

        let mut out = self.clone();
        out.levels[j] = buckets;
        out.columns[j] = self.columns[j]
            .iter()
            .map(|&c| recode[c as usize])
            .collect();
        Ok(out)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, j: usize) -> &str {
        &self.names[j]
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn level_count(&self, j: usize) -> usize {
        self.levels[j].len()
    }

    pub fn levels(&self, j: usize) -> &[String] {
        &self.levels[j]
    }

    /// Level code of subject `i` on variable `j`.
    #[inline]
    pub fn code(&self, i: usize, j: usize) -> u32 {
        self.columns[j][i]
    }

    /// All codes of variable `j`, one per subject.
    #[inline]
    pub fn column(&self, j: usize) -> &[u32] {
        &self.columns[j]
    }

    /// Raw string value of subject `i` on variable `j`.
    pub fn decode(&self, i: usize, j: usize) -> &str {
        &self.levels[j][self.columns[j][i] as usize]
    }

    /// Append a copy of column `j` under a new name. Test and analysis
    /// helper for duplicate-variable behavior.
    pub fn with_duplicated_column(&self, j: usize, name: &str) -> Result<Self> {
        if j >= self.d() {
            return Err(Error::VariableOutOfRange {
                index: j,
                d: self.d(),
            });
        }
        let mut out = self.clone();
        out.names.push(name.to_owned());
        out.levels.push(self.levels[j].clone());
        out.columns.push(self.columns[j].clone());
        Ok(out)
    }

    /// Append a column that identifies every subject uniquely (levels
    /// "0".."n-1" in row order): an explicit database key, used to validate
    /// the keyed value formula against a materialized key.
    pub fn with_key_column(&self, name: &str) -> Result<Self> {
        let mut out = self.clone();
        out.names.push(name.to_owned());
        out.levels
            .push((0..self.n).map(|i| i.to_string()).collect());
        out.columns.push((0..self.n as u32).collect());
        Ok(out)
    }

    /// SHA-256 over a canonical encoding of the full table contents. Used to
    /// key the tree cache.
    pub fn content_hash(&self) -> [u8; 32] {
        let mut hasher = Sha256::new();
        hasher.update(b"uniqshap-table-v1");
        hasher.update((self.n as u64).to_le_bytes());
        hasher.update((self.d() as u64).to_le_bytes());
        for j in 0..self.d() {
            hasher.update((self.names[j].len() as u64).to_le_bytes());
            hasher.update(self.names[j].as_bytes());
            hasher.update((self.levels[j].len() as u64).to_le_bytes());
            for level in &self.levels[j] {
                hasher.update((level.len() as u64).to_le_bytes());
                hasher.update(level.as_bytes());
            }
            for &code in &self.columns[j] {
                hasher.update(code.to_le_bytes());
            }
        }
        hasher.finalize().into()
    }
}

fn csv_error(err: csv::Error) -> Error {
    match err.kind() {
        csv::ErrorKind::UnequalLengths {
            pos,
            expected_len,
            len,
        } => Error::RaggedRow {
            row: pos.as_ref().map(|p| p.line()).unwrap_or(0),
            expected: *expected_len as usize,
            found: *len as usize,
        },
        _ => Error::Csv(err.to_string()),
    }
}

/// A non-empty sorted set of subject indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubjectSet {
    indices: Vec<u32>,
}

impl SubjectSet {
    /// Canonicalizes (sorts, dedups) and validates against the subject count.
    pub fn new(mut indices: Vec<u32>, n: usize) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        if indices.is_empty() {
            return Err(Error::EmptySubjectSet);
        }
        if let Some(&last) = indices.last() {
            if last as usize >= n {
                return Err(Error::SubjectOutOfRange {
                    index: last as usize,
                    n,
                });
            }
        }
        Ok(SubjectSet { indices })
    }

    /// The full subject set `1:n`.
    pub fn all(n: usize) -> Self {
        assert!(n >= 1);
        SubjectSet {
            indices: (0..n as u32).collect(),
        }
    }

    /// Subjects satisfying a predicate on the row index.
    pub fn from_predicate<F: FnMut(usize) -> bool>(
        table: &CategoricalTable,
        mut pred: F,
    ) -> Result<Self> {
        let indices: Vec<u32> = (0..table.n())
            .filter(|&i| pred(i))
            .map(|i| i as u32)
            .collect();
        if indices.is_empty() {
            return Err(Error::EmptySubjectSet);
        }
        Ok(SubjectSet { indices })
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        false // by construction
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.indices.iter().map(|&i| i as usize)
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    /// |v| / n.
    pub fn fraction(&self, n: usize) -> f64 {
        self.indices.len() as f64 / n as f64
    }
}

/// A total re-bucketing of one column's levels.
#[derive(Debug, Clone)]
pub struct CoarseningMap {
    /// Index of the column the map applies to.
    pub column: usize,
    /// Old level string -> new bucket string. Must cover every level of the
    /// column it is applied to.
    pub mapping: HashMap<String, String>,
}

impl CoarseningMap {
    pub fn new(column: usize, mapping: HashMap<String, String>) -> Self {
        CoarseningMap { column, mapping }
    }

    /// Identity map over the current levels of `column`.
    pub fn identity(table: &CategoricalTable, column: usize) -> Self {
        let mapping = table
            .levels(column)
            .iter()
            .map(|l| (l.clone(), l.clone()))
            .collect();
        CoarseningMap { column, mapping }
    }

    /// Parse the two-column CSV format `old_level,new_bucket` (header row
    /// required). The target column is supplied by the caller.
    pub fn from_csv_reader<R: Read>(column: usize, reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(false)
            .from_reader(reader);
        let headers = rdr.headers().map_err(csv_error)?;
        if headers.len() != 2 {
            return Err(Error::BadCoarseningMap(format!(
                "expected 2 columns (old_level,new_bucket), found {}",
                headers.len()
            )));
        }
        let mut mapping = HashMap::new();
        for record in rdr.records() {
            let record = record.map_err(csv_error)?;
            let old = record.get(0).unwrap_or("").to_owned();
            let new = record.get(1).unwrap_or("").to_owned();
            if let Some(previous) = mapping.insert(old.clone(), new.clone()) {
                if previous != new {
                    return Err(Error::BadCoarseningMap(format!(
                        "level {:?} mapped to both {:?} and {:?}",
                        old, previous, new
                    )));
                }
            }
        }
        if mapping.is_empty() {
            return Err(Error::BadCoarseningMap("map has no entries".into()));
        }
        Ok(CoarseningMap { column, mapping })
    }

    pub fn from_csv_path(column: usize, path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_csv_reader(column, file)
    }
}
