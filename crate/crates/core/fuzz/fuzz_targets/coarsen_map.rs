//! Fuzz the coarsening-map parser and its application to a fixed table.

#![no_main]

use libfuzzer_sys::fuzz_target;
use std::sync::OnceLock;
use uniqshap::{CategoricalTable, CoarseningMap};

fn table() -> &'static CategoricalTable {
    static TABLE: OnceLock<CategoricalTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        CategoricalTable::from_csv_reader(std::io::Cursor::new("v1,v2\nA,0\nA,1\nB,0\nB,0\n"), None)
            .unwrap()
    })
}

fuzz_target!(|data: &[u8]| {
    if let Ok(map) = CoarseningMap::from_csv_reader(0, std::io::Cursor::new(data)) {
        // Applying may legitimately fail on uncovered levels; it must not panic.
        let _ = table().coarsen(&map);
    }
});
