//! Fuzz the binary tree-cache decoder: raw bytes, and the same bytes with
//! the content hash patched to the fixture table's hash so structurally
//! interesting inputs get past the hash gate. A decode that succeeds must
//! yield a tree that answers queries without panicking.

#![no_main]

use libfuzzer_sys::fuzz_target;
use std::sync::OnceLock;
use uniqshap::adtree::decode_cache;
use uniqshap::{CategoricalTable, VariableSubset};

fn table() -> &'static CategoricalTable {
    static TABLE: OnceLock<CategoricalTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        CategoricalTable::from_csv_reader(std::io::Cursor::new("v1,v2\nA,0\nA,1\nB,0\nB,0\n"), None)
            .unwrap()
    })
}

fuzz_target!(|data: &[u8]| {
    let table = table();
    let _ = decode_cache(data, table);

    // The content hash lives at bytes 12..44 of the header.
    if data.len() >= 44 {
        let mut patched = data.to_vec();
        patched[12..44].copy_from_slice(&table.content_hash());
        if let Ok(tree) = decode_cache(&patched, table) {
            for t in 0..table.n() {
                for mask in 0u64..1 << table.d() {
                    let _ = tree.count_subject(t, VariableSubset::from_mask(mask));
                }
            }
        }
    }
});
