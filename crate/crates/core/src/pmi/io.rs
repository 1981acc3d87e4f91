//! PMI table persistence: a sorted, versioned binary file plus a TSV export
//! for eyeballing.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fsio;
use crate::pmi::PmiTable;

const MAGIC: &[u8; 4] = b"PMIT";
const VERSION: u32 = 1;

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

fn get_str(r: &mut impl Read) -> Result<String> {
    let len = get_u32(r)? as usize;
    if len > 1 << 20 {
        return Err(Error::Format(format!("implausible string length {len} in PMI table")));
    }
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf).map_err(|_| Error::Format("truncated PMI table".into()))?;
    String::from_utf8(buf).map_err(|_| Error::Format("non-UTF-8 token in PMI table".into()))
}

fn get_u32(r: &mut impl Read) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf).map_err(|_| Error::Format("truncated PMI table".into()))?;
    Ok(u32::from_le_bytes(buf))
}

fn get_u64(r: &mut impl Read) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf).map_err(|_| Error::Format("truncated PMI table".into()))?;
    Ok(u64::from_le_bytes(buf))
}

impl PmiTable {
    /// Serialize: magic, version, n_pairs, min_count, then the post,
    /// response and joint count sections in sorted order.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&self.n_pairs.to_le_bytes());
        out.extend_from_slice(&self.min_count.to_le_bytes());

        out.extend_from_slice(&(self.post_doc_count.len() as u64).to_le_bytes());
        for (tok, count) in &self.post_doc_count {
            put_str(&mut out, tok);
            out.extend_from_slice(&count.to_le_bytes());
        }
        out.extend_from_slice(&(self.resp_doc_count.len() as u64).to_le_bytes());
        for (tok, count) in &self.resp_doc_count {
            put_str(&mut out, tok);
            out.extend_from_slice(&count.to_le_bytes());
        }
        out.extend_from_slice(&(self.joint_count.len() as u64).to_le_bytes());
        for ((x, y), count) in &self.joint_count {
            put_str(&mut out, x);
            put_str(&mut out, y);
            out.extend_from_slice(&count.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<PmiTable> {
        let mut r = bytes;
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(|_| Error::Format("truncated PMI table".into()))?;
        if &magic != MAGIC {
            return Err(Error::Format("not a PMI table file (bad magic)".into()));
        }
        let version = get_u32(&mut r)?;
        if version != VERSION {
            return Err(Error::Format(format!(
                "unsupported PMI table version {version} (expected {VERSION})"
            )));
        }
        let n_pairs = get_u64(&mut r)?;
        let min_count = get_u64(&mut r)?;

        let mut post_doc_count = BTreeMap::new();
        for _ in 0..get_u64(&mut r)? {
            let tok = get_str(&mut r)?;
            post_doc_count.insert(tok, get_u64(&mut r)?);
        }
        let mut resp_doc_count = BTreeMap::new();
        for _ in 0..get_u64(&mut r)? {
            let tok = get_str(&mut r)?;
            resp_doc_count.insert(tok, get_u64(&mut r)?);
        }
        let mut joint_count = BTreeMap::new();
        for _ in 0..get_u64(&mut r)? {
            let x = get_str(&mut r)?;
            let y = get_str(&mut r)?;
            joint_count.insert((x, y), get_u64(&mut r)?);
        }
        if !r.is_empty() {
            return Err(Error::Format(format!("{} trailing bytes after PMI table", r.len())));
        }
        Ok(PmiTable { n_pairs, min_count, post_doc_count, resp_doc_count, joint_count })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fsio::write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<PmiTable> {
        Self::from_bytes(&fsio::read_bytes(path)?)
    }

    /// Human-readable dump: `kind<TAB>token(s)<TAB>count` lines.
    pub fn export_tsv(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("meta\tn_pairs\t{}\n", self.n_pairs));
        out.push_str(&format!("meta\tmin_count\t{}\n", self.min_count));
        for (tok, count) in &self.post_doc_count {
            out.push_str(&format!("post\t{tok}\t{count}\n"));
        }
        for (tok, count) in &self.resp_doc_count {
            out.push_str(&format!("resp\t{tok}\t{count}\n"));
        }
        for ((x, y), count) in &self.joint_count {
            out.push_str(&format!("joint\t{x}\t{y}\t{count}\n"));
        }
        out
    }
}
