//! Fuzz the CSV ingestion entry point: arbitrary bytes as a CSV document,
//! with and without column selection. Must return an error or a valid
//! table, never panic.

#![no_main]

use libfuzzer_sys::fuzz_target;
use uniqshap::CategoricalTable;

fuzz_target!(|data: &[u8]| {
    let _ = CategoricalTable::from_csv_reader(std::io::Cursor::new(data), None);

    let selected = ["a".to_string(), "v1".to_string()];
    let _ = CategoricalTable::from_csv_reader(std::io::Cursor::new(data), Some(&selected));
});
