//! Versioned binary cache for a built tree.
//!
//! The file is keyed by the content hash of the table it was built from, so
//! a cache can never silently answer queries for the wrong data. The layout
//! (all integers little-endian):
//!
//! ```text
//! magic      8  b"ADTCACHE"
//! version    4  u32, currently 1
//! table_hash 32
//! n          8  u64
//! d          4  u32
//! threshold  8  u64 leaf threshold
//! nodes      8  u64 total node count
//! levels     4d u32 level count per column
//! root       ...preorder node encoding
//! ```
//!
//! Node encoding: tag byte `0` = leaf (u64 row count, then u32 row indices),
//! tag byte `1` = internal (u64 count, u32 vary count, then per vary node
//! u16 variable, u32 MCV, u32 child count, then per child u32 value followed
//! by the child node). Decoding validates every structural invariant, so a
//! corrupt or adversarial file yields an error, never a panic.

use std::fs;
use std::path::Path;

use crate::adtree::{AdTree, Node, VaryNode};
use crate::dataset::CategoricalTable;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"ADTCACHE";
const VERSION: u32 = 1;

/// Serialize a built tree to its binary cache form.
pub fn encode_cache(tree: &AdTree<'_>) -> Vec<u8> {
    let table = tree.table();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&table.content_hash());
    out.extend_from_slice(&(table.n() as u64).to_le_bytes());
    out.extend_from_slice(&(table.d() as u32).to_le_bytes());
    out.extend_from_slice(&(tree.leaf_threshold() as u64).to_le_bytes());
    out.extend_from_slice(&(tree.node_count() as u64).to_le_bytes());
    for j in 0..table.d() {
        out.extend_from_slice(&(table.level_count(j) as u32).to_le_bytes());
    }
    encode_node(&tree.root, &mut out);
    out
}

fn encode_node(node: &Node, out: &mut Vec<u8>) {
    match node {
        Node::Leaf(rows) => {
            out.push(0);
            out.extend_from_slice(&(rows.len() as u64).to_le_bytes());
            for &row in rows {
                out.extend_from_slice(&row.to_le_bytes());
            }
        }
        Node::Internal { count, varies } => {
            out.push(1);
            out.extend_from_slice(&count.to_le_bytes());
            out.extend_from_slice(&(varies.len() as u32).to_le_bytes());
            for vary in varies {
                out.extend_from_slice(&vary.var.to_le_bytes());
                out.extend_from_slice(&vary.mcv.to_le_bytes());
                out.extend_from_slice(&(vary.children.len() as u32).to_le_bytes());
                for (value, child) in &vary.children {
                    out.extend_from_slice(&value.to_le_bytes());
                    encode_node(child, out);
                }
            }
        }
    }
}

/// Decode a cache produced by [`encode_cache`], verifying it belongs to
/// `table`.
pub fn decode_cache<'a>(bytes: &[u8], table: &'a CategoricalTable) -> Result<AdTree<'a>> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(8)? != MAGIC {
        return Err(Error::BadCache("bad magic".into()));
    }
    let version = cur.u32()?;
    if version != VERSION {
        return Err(Error::BadCache(format!("unsupported version {version}")));
    }
    let hash = cur.take(32)?;
    if hash != table.content_hash() {
        return Err(Error::CacheMismatch);
    }
    let n = cur.u64()?;
    let d = cur.u32()? as usize;
    if n != table.n() as u64 || d != table.d() {
        // The hash already pins these, but a malformed writer could disagree.
        return Err(Error::BadCache(
            "header dimensions disagree with table".into(),
        ));
    }
    let leaf_threshold = cur.u64()? as usize;
    let node_total = cur.u64()?;
    for j in 0..d {
        if cur.u32()? as usize != table.level_count(j) {
            return Err(Error::BadCache(format!(
                "level count mismatch on column {j}"
            )));
        }
    }
    let mut decoded_nodes = 0u64;
    let root = decode_node(&mut cur, table, 0, &mut decoded_nodes)?;
    if decoded_nodes != node_total {
        return Err(Error::BadCache(format!(
            "node count mismatch: header says {node_total}, decoded {decoded_nodes}"
        )));
    }
    if cur.pos != bytes.len() {
        return Err(Error::BadCache("trailing bytes after tree".into()));
    }
    Ok(AdTree::from_raw(
        table,
        leaf_threshold,
        decoded_nodes as usize,
        root,
    ))
}

fn decode_node(
    cur: &mut Cursor<'_>,
    table: &CategoricalTable,
    first_var: usize,
    decoded: &mut u64,
) -> Result<Node> {
    *decoded += 1;
    let d = table.d();
    let n = table.n() as u64;
    match cur.u8()? {
        0 => {
            let len = cur.u64()?;
            if len == 0 || len > n {
                return Err(Error::BadCache(format!("leaf claims {len} rows, n = {n}")));
            }
            cur.ensure(len as usize * 4)?;
            let mut rows = Vec::with_capacity(len as usize);
            let mut prev: Option<u32> = None;
            for _ in 0..len {
                let row = cur.u32()?;
                if row as u64 >= n || prev.is_some_and(|p| p >= row) {
                    return Err(Error::BadCache(
                        "leaf rows not sorted unique in range".into(),
                    ));
                }
                prev = Some(row);
                rows.push(row);
            }
            Ok(Node::Leaf(rows))
        }
        1 => {
            let count = cur.u64()?;
            if count == 0 || count > n {
                return Err(Error::BadCache(format!("node count {count} out of range")));
            }
            let vary_count = cur.u32()? as usize;
            // The builder always materializes a vary node for every variable
            // above the branch point.
            if vary_count != d - first_var {
                return Err(Error::BadCache(format!(
                    "expected {} vary nodes at depth {first_var}, found {vary_count}",
                    d - first_var
                )));
            }
            let mut varies = Vec::with_capacity(vary_count);
            for offset in 0..vary_count {
                let var = cur.u16()? as usize;
                if var != first_var + offset {
                    return Err(Error::BadCache("vary variables out of order".into()));
                }
                let level_count = table.level_count(var) as u32;
                let mcv = cur.u32()?;
                if mcv >= level_count {
                    return Err(Error::BadCache(format!(
                        "mcv {mcv} out of range for v{var}"
                    )));
                }
                let child_count = cur.u32()? as usize;
                if child_count >= table.level_count(var) {
                    return Err(Error::BadCache("more children than non-MCV levels".into()));
                }
                let mut children = Vec::with_capacity(child_count);
                let mut prev: Option<u32> = None;
                for _ in 0..child_count {
                    let value = cur.u32()?;
                    if value >= level_count || value == mcv || prev.is_some_and(|p| p >= value) {
                        return Err(Error::BadCache(
                            "child values must be sorted, unique, non-MCV, in range".into(),
                        ));
                    }
                    prev = Some(value);
                    let child = decode_node(cur, table, var + 1, decoded)?;
                    children.push((value, child));
                }
                varies.push(VaryNode {
                    var: var as u16,
                    mcv,
                    children,
                });
            }
            Ok(Node::Internal { count, varies })
        }
        tag => Err(Error::BadCache(format!("unknown node tag {tag}"))),
    }
}

/// Write the cache for a built tree.
pub fn save_cache(tree: &AdTree<'_>, path: &Path) -> Result<()> {
    fs::write(path, encode_cache(tree)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Load a cache and verify it was built for `table`.
pub fn load_cache<'a>(path: &Path, table: &'a CategoricalTable) -> Result<AdTree<'a>> {
    let bytes = fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode_cache(&bytes, table)
}

struct Cursor<'b> {
    bytes: &'b [u8],
    pos: usize,
}

impl<'b> Cursor<'b> {
    fn ensure(&self, len: usize) -> Result<()> {
        if self.bytes.len() - self.pos < len {
            Err(Error::BadCache("unexpected end of file".into()))
        } else {
            Ok(())
        }
    }

    fn take(&mut self, len: usize) -> Result<&'b [u8]> {
        self.ensure(len)?;
        let slice = &self.bytes[self.pos..self.pos + len];
        self.pos += len;
        Ok(slice)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}
