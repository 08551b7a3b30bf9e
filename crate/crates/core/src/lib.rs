//! Quantifies how strongly each categorical variable identifies each subject
//! in a dataset.
//!
//! Revealing a variable shrinks the set of subjects a target could be; the
//! per-subject, per-variable value here is the Shapley attribution of the
//! total log cohort shrinkage across all orders in which variables could be
//! revealed, measured in bits. Cohort cardinalities are served by an
//! all-dimension tree ([`adtree`]), making the computation independent of
//! the subject count per query, and the whole engine is cross-checked
//! against closed-form entropy identities ([`infotheory`]).
//!
//! The main flow:
//!
//! ```
//! use uniqshap::{AdTree, CategoricalTable, SubjectSet};
//!
//! let table = CategoricalTable::from_csv_reader(
//!     std::io::Cursor::new("city,age\nparis,30\nparis,31\nlyon,30\nlyon,30\n"),
//!     None,
//! ).unwrap();
//! let tree = AdTree::build(&table, 16);
//! let matrix = uniqshap::shapley::shapley_all(&tree, 0).unwrap();
//! let report = uniqshap::shapley::aggregate(&matrix, &SubjectSet::all(table.n()), &table).unwrap();
//! assert_eq!(report.variables.len(), 2);
//! ```

pub mod adtree;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod filter;
pub mod infotheory;
mod numeric;
pub mod shapley;
pub mod subset;

pub use adtree::{naive_count, AdTree, PartialAssignment};
pub use dataset::{CategoricalTable, CoarseningMap, SubjectSet};
pub use error::{Error, Result};
pub use filter::SubjectFilter;
pub use shapley::{AggregateReport, ShapleyMatrix};
pub use subset::VariableSubset;
