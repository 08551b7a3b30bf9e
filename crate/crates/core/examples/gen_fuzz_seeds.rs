//! Regenerates the checked-in fuzz corpus seeds.
//!
//! Usage: `cargo run --example gen_fuzz_seeds [-- <dir>]` (default:
//! `fuzz/corpus` next to the crate).

use std::fs;
use std::path::PathBuf;

use uniqshap::adtree::{encode_cache, AdTree};
use uniqshap::CategoricalTable;

fn main() {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fuzz/corpus"));

    let d1_csv = "v1,v2\nA,0\nA,1\nB,0\nB,0\n";
    let table = CategoricalTable::from_csv_reader(std::io::Cursor::new(d1_csv), None).unwrap();

    let seeds: Vec<(&str, &str, Vec<u8>)> = vec![
        ("ingest_csv", "d1", d1_csv.as_bytes().to_vec()),
        (
            "ingest_csv",
            "quoted",
            b"name,notes\nx,\"a,b\"\ny,\"line\nbreak\"\n".to_vec(),
        ),
        (
            "coarsen_map",
            "buckets",
            b"old_level,new_bucket\nA,all\nB,all\n".to_vec(),
        ),
        ("filter_expr", "conjunction", b"v1=B,v2=0".to_vec()),
        (
            "tree_cache",
            "d1_tree",
            encode_cache(&AdTree::build(&table, 1)),
        ),
        (
            "tree_cache",
            "d1_tree_expanded",
            encode_cache(&AdTree::build(&table, 0)),
        ),
    ];

    for (target, name, bytes) in seeds {
        let target_dir = dir.join(target);
        fs::create_dir_all(&target_dir).expect("create corpus dir");
        let path = target_dir.join(name);
        fs::write(&path, bytes).expect("write seed");
        println!("wrote {}", path.display());
    }
}
