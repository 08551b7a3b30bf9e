//! Fuzz the subject-filter expression parser and its evaluation.

#![no_main]

use libfuzzer_sys::fuzz_target;
use std::sync::OnceLock;
use uniqshap::{CategoricalTable, SubjectFilter};

fn table() -> &'static CategoricalTable {
    static TABLE: OnceLock<CategoricalTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        CategoricalTable::from_csv_reader(std::io::Cursor::new("v1,v2\nA,0\nA,1\nB,0\nB,0\n"), None)
            .unwrap()
    })
}

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(filter) = SubjectFilter::parse(text) {
            let _ = filter.apply(table());
        }
    }
});
