//! Toy file-format registry: tags, compliance sniffers, and fixture writers.
//!
//! Three formats ship with the workbench, one per target in the zoo:
//!
//! * `mini-img` — 4-byte magic `MIN1` followed by a chunk list. Each chunk is
//!   a 4-byte tag, a 4-byte big-endian length, and that many payload bytes.
//! * `mini-xml` — balanced angle-bracket tags over printable bytes.
//! * `mini-doc` — 4-byte magic `%MDF` followed by at least one record. Each
//!   record is a 1-byte type, a 1-byte length, and that many payload bytes.
//!
//! Sniffers are total pure functions over byte strings: they classify, they
//! never error. Writers produce well-formed instances for fixtures and
//! property tests; the sniffer/writer pair for each format is kept in sync by
//! a duality property test.

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::Error;

/// Magic prefix for mini-img files (`4D 49 4E 31`).
pub const MINI_IMG_MAGIC: [u8; 4] = *b"MIN1";
/// Magic prefix for mini-doc files (`25 4D 44 46`).
pub const MINI_DOC_MAGIC: [u8; 4] = *b"%MDF";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FormatTag {
    MiniImg,
    MiniXml,
    MiniDoc,
}

impl FormatTag {
    pub fn all() -> [FormatTag; 3] {
        [FormatTag::MiniImg, FormatTag::MiniXml, FormatTag::MiniDoc]
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            FormatTag::MiniImg => "mini-img",
            FormatTag::MiniXml => "mini-xml",
            FormatTag::MiniDoc => "mini-doc",
        }
    }
}

impl fmt::Display for FormatTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FormatTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "mini-img" => Ok(FormatTag::MiniImg),
            "mini-xml" => Ok(FormatTag::MiniXml),
            "mini-doc" => Ok(FormatTag::MiniDoc),
            other => Err(Error::UnknownFormat(other.to_string())),
        }
    }
}

/// Verdict of a format sniffer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sniff {
    Compliant,
    Malformed(String),
}

impl Sniff {
    pub fn is_compliant(&self) -> bool {
        matches!(self, Sniff::Compliant)
    }

    fn bad(reason: &str) -> Sniff {
        Sniff::Malformed(reason.to_string())
    }
}

/// Classify `bytes` against the named format. Total: never errors.
pub fn sniff(format: FormatTag, bytes: &[u8]) -> Sniff {
    if bytes.is_empty() {
        return Sniff::bad("empty");
    }
    match format {
        FormatTag::MiniImg => sniff_mini_img(bytes),
        FormatTag::MiniXml => sniff_mini_xml(bytes),
        FormatTag::MiniDoc => sniff_mini_doc(bytes),
    }
}

fn sniff_mini_img(bytes: &[u8]) -> Sniff {
    if bytes.len() < 4 || bytes[..4] != MINI_IMG_MAGIC {
        return Sniff::bad("bad magic");
    }
    let mut pos = 4usize;
    while pos < bytes.len() {
        if bytes.len() - pos < 8 {
            return Sniff::bad("truncated chunk header");
        }
        let declared =
            u32::from_be_bytes([bytes[pos + 4], bytes[pos + 5], bytes[pos + 6], bytes[pos + 7]])
                as usize;
        pos += 8;
        if declared > bytes.len() - pos {
            return Sniff::bad("truncated chunk");
        }
        pos += declared;
    }
    Sniff::Compliant
}

fn printable(b: u8) -> bool {
    (0x20..=0x7e).contains(&b) || b == b'\t' || b == b'\n' || b == b'\r'
}

fn sniff_mini_xml(bytes: &[u8]) -> Sniff {
    let mut stack: Vec<&[u8]> = Vec::new();
    let mut elements = 0usize;
    let mut pos = 0usize;
    while pos < bytes.len() {
        let b = bytes[pos];
        if !printable(b) {
            return Sniff::bad("non-printable byte");
        }
        if b == b'<' {
            let closing = bytes.get(pos + 1) == Some(&b'/');
            let name_start = if closing { pos + 2 } else { pos + 1 };
            let mut end = name_start;
            while end < bytes.len() && bytes[end].is_ascii_lowercase() {
                end += 1;
            }
            if end == name_start || end - name_start > 16 || bytes.get(end) != Some(&b'>') {
                return Sniff::bad("malformed tag");
            }
            let name = &bytes[name_start..end];
            if closing {
                match stack.pop() {
                    Some(open) if open == name => {}
                    _ => return Sniff::bad("mismatched close tag"),
                }
            } else {
                stack.push(name);
                elements += 1;
            }
            pos = end + 1;
        } else if b == b'>' {
            return Sniff::bad("stray close bracket");
        } else {
            pos += 1;
        }
    }
    if !stack.is_empty() {
        return Sniff::bad("unbalanced tags");
    }
    if elements == 0 {
        return Sniff::bad("no elements");
    }
    Sniff::Compliant
}

fn sniff_mini_doc(bytes: &[u8]) -> Sniff {
    if bytes.len() < 4 || bytes[..4] != MINI_DOC_MAGIC {
        return Sniff::bad("bad magic");
    }
    let mut pos = 4usize;
    let mut records = 0usize;
    while pos < bytes.len() {
        if bytes.len() - pos < 2 {
            return Sniff::bad("truncated record header");
        }
        let len = bytes[pos + 1] as usize;
        pos += 2;
        if len > bytes.len() - pos {
            return Sniff::bad("truncated record");
        }
        pos += len;
        records += 1;
    }
    if records == 0 {
        return Sniff::bad("no records");
    }
    Sniff::Compliant
}

/// Smallest compliant instance of each format, used by the `empty_like`
/// corpus strategy.
pub fn minimal_instance(format: FormatTag) -> Vec<u8> {
    match format {
        FormatTag::MiniImg => mini_img_file(&[(*b"END0", &[])]),
        FormatTag::MiniXml => b"<a></a>".to_vec(),
        FormatTag::MiniDoc => mini_doc_file(&[(b'T', &[])]),
    }
}

/// Assemble a mini-img file from (tag, payload) chunks.
pub fn mini_img_file(chunks: &[([u8; 4], &[u8])]) -> Vec<u8> {
    let mut out = MINI_IMG_MAGIC.to_vec();
    for (tag, payload) in chunks {
        out.extend_from_slice(tag);
        out.extend_from_slice(&(payload.len() as u32).to_be_bytes());
        out.extend_from_slice(payload);
    }
    out
}

/// Assemble a mini-doc file from (type, payload) records. Payloads longer
/// than 255 bytes are truncated to fit the 1-byte length field.
pub fn mini_doc_file(records: &[(u8, &[u8])]) -> Vec<u8> {
    let mut out = MINI_DOC_MAGIC.to_vec();
    for (ty, payload) in records {
        let payload = &payload[..payload.len().min(255)];
        out.push(*ty);
        out.push(payload.len() as u8);
        out.extend_from_slice(payload);
    }
    out
}

/// Random well-formed instance of `format`, for property tests and fixtures.
pub fn write_random_instance<R: Rng>(format: FormatTag, rng: &mut R) -> Vec<u8> {
    match format {
        FormatTag::MiniImg => {
            let tags: [[u8; 4]; 5] = [*b"HDR0", *b"DATA", *b"CMAP", *b"META", *b"QQQQ"];
            let n = rng.gen_range(1..=5usize);
            let mut out = MINI_IMG_MAGIC.to_vec();
            for _ in 0..n {
                let tag = tags[rng.gen_range(0..tags.len())];
                let len = if tag == *b"HDR0" {
                    rng.gen_range(4..=16usize)
                } else {
                    rng.gen_range(0..=24usize)
                };
                out.extend_from_slice(&tag);
                out.extend_from_slice(&(len as u32).to_be_bytes());
                for _ in 0..len {
                    out.push(rng.gen());
                }
            }
            out
        }
        FormatTag::MiniXml => {
            let mut out = Vec::new();
            random_xml_element(rng, &mut out, 0);
            out
        }
        FormatTag::MiniDoc => {
            let types = [b'T', b'N', b'X', b'Q', b'Z'];
            let n = rng.gen_range(1..=6usize);
            let mut out = MINI_DOC_MAGIC.to_vec();
            for _ in 0..n {
                let ty = types[rng.gen_range(0..types.len())];
                let len = rng.gen_range(0..=20usize);
                out.push(ty);
                out.push(len as u8);
                for _ in 0..len {
                    out.push(rng.gen());
                }
            }
            out
        }
    }
}

fn random_xml_element<R: Rng>(rng: &mut R, out: &mut Vec<u8>, depth: usize) {
    let name_len = rng.gen_range(1..=3usize);
    let name: Vec<u8> = (0..name_len).map(|_| rng.gen_range(b'a'..=b'z')).collect();
    out.push(b'<');
    out.extend_from_slice(&name);
    out.push(b'>');
    let children = if depth >= 3 { 0 } else { rng.gen_range(0..=2usize) };
    for _ in 0..children {
        if rng.gen_bool(0.5) {
            random_xml_element(rng, out, depth + 1);
        } else {
            let text_len = rng.gen_range(1..=6usize);
            for _ in 0..text_len {
                out.push(rng.gen_range(b'a'..=b'z'));
            }
        }
    }
    out.push(b'<');
    out.push(b'/');
    out.extend_from_slice(&name);
    out.push(b'>');
}
