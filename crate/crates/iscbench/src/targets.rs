//! Instrumented toy programs-under-test with planted bugs.
//!
//! Each target is an in-process parser over raw bytes. Instrumentation is
//! static: every basic-block-like point carries a fixed edge id, and a run
//! returns the exact set of edges hit plus per-bug reach/trigger flags.
//! Targets are pure functions of their input, so traces are deterministic
//! and trials can replay them at will.
//!
//! Reach means control passed the instrumented bug-site location; trigger
//! means the fault condition held there as well, in which case parsing stops
//! with a fault (the crash analog).

use serde::Serialize;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::formats::{self, FormatTag, MINI_DOC_MAGIC, MINI_IMG_MAGIC};

/// Set of edge ids hit by one execution. Targets keep their static edge count
/// at or below 64 so a single word covers the whole map without collisions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EdgeSet(pub u64);

impl EdgeSet {
    #[inline]
    pub fn insert(&mut self, edge: u16) {
        debug_assert!(edge < 64);
        self.0 |= 1u64 << edge;
    }

    #[inline]
    pub fn contains(&self, edge: u16) -> bool {
        self.0 & (1u64 << edge) != 0
    }

    #[inline]
    pub fn union(&self, other: EdgeSet) -> EdgeSet {
        EdgeSet(self.0 | other.0)
    }

    /// Edges in `self` that are not in `other`.
    #[inline]
    pub fn difference(&self, other: EdgeSet) -> EdgeSet {
        EdgeSet(self.0 & !other.0)
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    #[inline]
    pub fn len(&self) -> u32 {
        self.0.count_ones()
    }

    pub fn ids(&self) -> Vec<u16> {
        (0..64).filter(|e| self.contains(*e)).collect()
    }
}

/// Outcome of one execution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Outcome {
    Clean,
    ParseError,
    /// Fault carries the index of the triggered bug in the target's bug list.
    Fault(u8),
}

/// Trace of one execution: edges hit plus per-bug reach/trigger bitmasks
/// (bit i corresponds to `TargetProgram::bugs[i]`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExecutionTrace {
    pub edges: EdgeSet,
    reached_mask: u32,
    triggered_mask: u32,
    pub outcome: Outcome,
}

impl ExecutionTrace {
    fn new() -> ExecutionTrace {
        ExecutionTrace {
            edges: EdgeSet::default(),
            reached_mask: 0,
            triggered_mask: 0,
            outcome: Outcome::Clean,
        }
    }

    #[inline]
    fn reach(&mut self, bug: u8) {
        self.reached_mask |= 1 << bug;
    }

    #[inline]
    fn trigger(&mut self, bug: u8) {
        debug_assert!(self.reached_mask & (1 << bug) != 0, "trigger implies reach");
        self.triggered_mask |= 1 << bug;
        self.outcome = Outcome::Fault(bug);
    }

    #[inline]
    pub fn reached(&self, bug_index: usize) -> bool {
        self.reached_mask & (1 << bug_index) != 0
    }

    #[inline]
    pub fn triggered(&self, bug_index: usize) -> bool {
        self.triggered_mask & (1 << bug_index) != 0
    }
}

/// A planted bug: identity, the instrumented site edge whose execution counts
/// as a reach, and a stored witness input known to trigger it.
#[derive(Debug, Clone)]
pub struct BugSite {
    pub bug_id: &'static str,
    pub description: &'static str,
    pub site_edge: u16,
    pub witness: Vec<u8>,
}

type RunFn = fn(&[u8]) -> ExecutionTrace;

pub struct TargetProgram {
    pub target_id: &'static str,
    pub format: FormatTag,
    pub total_edges: u16,
    pub bugs: Vec<BugSite>,
    run: RunFn,
    /// Inputs that, together with the witnesses and the exhaustive
    /// small-input sweep, exercise every instrumented edge. Used by the
    /// edge-count calibration test and handy as parser fixtures.
    pub probes: Vec<Vec<u8>>,
}

impl TargetProgram {
    #[inline]
    pub fn run(&self, input: &[u8]) -> ExecutionTrace {
        (self.run)(input)
    }

    pub fn bug_index(&self, bug_id: &str) -> Result<usize> {
        self.bugs
            .iter()
            .position(|b| b.bug_id == bug_id)
            .ok_or_else(|| Error::UnknownBug {
                bug: bug_id.to_string(),
                target: self.target_id.to_string(),
            })
    }

    /// Serializable summary for reports.
    pub fn descriptor(&self) -> TargetDescriptor {
        TargetDescriptor {
            target_id: self.target_id.to_string(),
            format: self.format,
            total_edges: self.total_edges,
            bugs: self
                .bugs
                .iter()
                .map(|b| BugDescriptor {
                    bug_id: b.bug_id.to_string(),
                    description: b.description.to_string(),
                    site_edge: b.site_edge,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TargetDescriptor {
    pub target_id: String,
    pub format: FormatTag,
    pub total_edges: u16,
    pub bugs: Vec<BugDescriptor>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BugDescriptor {
    pub bug_id: String,
    pub description: String,
    pub site_edge: u16,
}

/// All registered targets.
pub fn registry() -> &'static [TargetProgram] {
    static REGISTRY: OnceLock<Vec<TargetProgram>> = OnceLock::new();
    REGISTRY.get_or_init(|| vec![mini_img_target(), mini_xml_target(), mini_doc_target()])
}

pub fn find_target(target_id: &str) -> Result<&'static TargetProgram> {
    registry()
        .iter()
        .find(|t| t.target_id == target_id)
        .ok_or_else(|| Error::UnknownTarget(target_id.to_string()))
}

/// Thin wrapper over `TargetProgram::run` for crash-report validation.
pub fn run_target(target: &TargetProgram, input: &[u8]) -> ExecutionTrace {
    target.run(input)
}

// ---------------------------------------------------------------------------
// mini-img: chunked binary image container.
// Planted bug IMG001: the CMAP handler copies `declared` bytes without the
// bounds check every other handler performs.
// ---------------------------------------------------------------------------

mod img_edge {
    pub const ENTRY: u16 = 0;
    pub const MAGIC_OK: u16 = 1;
    pub const MAGIC_FAIL: u16 = 2;
    pub const CHUNK_HEADER: u16 = 3;
    pub const TRUNC_HEADER: u16 = 4;
    pub const TAG_HDR: u16 = 5;
    pub const HDR_INVALID: u16 = 6;
    pub const TAG_DATA: u16 = 7;
    pub const TAG_CMAP: u16 = 8;
    pub const CMAP_COPY_OK: u16 = 9;
    pub const CMAP_OVERFLOW: u16 = 10;
    pub const TAG_END: u16 = 11;
    pub const TAG_UNKNOWN: u16 = 12;
    pub const PAYLOAD_TRUNC: u16 = 13;
    pub const EOF_CLEAN: u16 = 14;
    pub const TOTAL: u16 = 15;
}

fn run_mini_img(input: &[u8]) -> ExecutionTrace {
    use img_edge::*;
    let mut t = ExecutionTrace::new();
    t.edges.insert(ENTRY);
    if input.len() < 4 || input[..4] != MINI_IMG_MAGIC {
        t.edges.insert(MAGIC_FAIL);
        t.outcome = Outcome::ParseError;
        return t;
    }
    t.edges.insert(MAGIC_OK);
    let mut pos = 4usize;
    loop {
        if pos == input.len() {
            t.edges.insert(EOF_CLEAN);
            return t;
        }
        if input.len() - pos < 8 {
            t.edges.insert(TRUNC_HEADER);
            t.outcome = Outcome::ParseError;
            return t;
        }
        let tag = [input[pos], input[pos + 1], input[pos + 2], input[pos + 3]];
        let declared =
            u32::from_be_bytes([input[pos + 4], input[pos + 5], input[pos + 6], input[pos + 7]])
                as usize;
        pos += 8;
        t.edges.insert(CHUNK_HEADER);
        let remaining = input.len() - pos;
        match &tag {
            b"HDR0" => {
                t.edges.insert(TAG_HDR);
                if declared < 4 {
                    t.edges.insert(HDR_INVALID);
                    t.outcome = Outcome::ParseError;
                    return t;
                }
                if declared > remaining {
                    t.edges.insert(PAYLOAD_TRUNC);
                    t.outcome = Outcome::ParseError;
                    return t;
                }
                pos += declared;
            }
            b"DATA" => {
                t.edges.insert(TAG_DATA);
                if declared > remaining {
                    t.edges.insert(PAYLOAD_TRUNC);
                    t.outcome = Outcome::ParseError;
                    return t;
                }
                pos += declared;
            }
            b"CMAP" => {
                // Bug site: the copy below trusts `declared`.
                t.edges.insert(TAG_CMAP);
                t.reach(0);
                if declared > remaining {
                    t.edges.insert(CMAP_OVERFLOW);
                    t.trigger(0);
                    return t;
                }
                t.edges.insert(CMAP_COPY_OK);
                pos += declared;
            }
            b"END0" => {
                t.edges.insert(TAG_END);
                return t;
            }
            _ => {
                t.edges.insert(TAG_UNKNOWN);
                if declared > remaining {
                    t.edges.insert(PAYLOAD_TRUNC);
                    t.outcome = Outcome::ParseError;
                    return t;
                }
                pos += declared;
            }
        }
    }
}

fn mini_img_target() -> TargetProgram {
    let witness = formats::mini_img_file(&[
        (*b"HDR0", &[0, 16, 0, 16]),
        (*b"DATA", &[1, 2]),
        (*b"ZZZZ", &[9]),
    ]);
    // Append a CMAP header declaring 256 bytes with nothing behind it.
    let mut witness = witness;
    witness.extend_from_slice(b"CMAP");
    witness.extend_from_slice(&256u32.to_be_bytes());

    let probes: Vec<Vec<u8>> = vec![
        formats::mini_img_file(&[(*b"END0", &[])]),
        formats::mini_img_file(&[(*b"CMAP", &[7])]),
        formats::mini_img_file(&[(*b"HDR0", &[0, 0])]),
        formats::mini_img_file(&[(*b"DATA", &[1, 2, 3, 4, 5])])[..4 + 8 + 1].to_vec(),
        [&MINI_IMG_MAGIC[..], &[1, 2, 3]].concat(),
    ];

    TargetProgram {
        target_id: "mini-img-parser",
        format: FormatTag::MiniImg,
        total_edges: img_edge::TOTAL,
        bugs: vec![BugSite {
            bug_id: "IMG001",
            description: "CMAP chunk copy trusts the declared length; a length \
                          exceeding the remaining bytes overruns the buffer",
            site_edge: img_edge::TAG_CMAP,
            witness,
        }],
        run: run_mini_img,
        probes,
    }
}

// ---------------------------------------------------------------------------
// mini-xml: balanced-tag document language.
// Planted bug XML001: element descent has no depth limit; nesting past 16
// exhausts the parser stack.
// ---------------------------------------------------------------------------

const XML_DEPTH_LIMIT: usize = 16;

mod xml_edge {
    pub const ENTRY: u16 = 0;
    pub const NONPRINTABLE: u16 = 1;
    pub const OPEN_TAG: u16 = 2;
    pub const CLOSE_TAG: u16 = 3;
    pub const TEXT: u16 = 4;
    pub const TAG_SYNTAX: u16 = 5;
    pub const MISMATCH: u16 = 6;
    pub const PUSH_NESTED: u16 = 7;
    pub const DEPTH_4: u16 = 8;
    pub const DEPTH_8: u16 = 9;
    pub const DEPTH_12: u16 = 10;
    pub const DEPTH_16: u16 = 11;
    pub const DEPTH_OVERFLOW: u16 = 12;
    pub const UNBALANCED_EOF: u16 = 13;
    pub const EOF_CLEAN: u16 = 14;
    pub const EMPTY_DOC: u16 = 15;
    pub const TOTAL: u16 = 16;
}

fn xml_printable(b: u8) -> bool {
    (0x20..=0x7e).contains(&b) || b == b'\t' || b == b'\n' || b == b'\r'
}

fn run_mini_xml(input: &[u8]) -> ExecutionTrace {
    use xml_edge::*;
    let mut t = ExecutionTrace::new();
    t.edges.insert(ENTRY);
    let mut stack: Vec<(usize, usize)> = Vec::new(); // (name_start, name_end)
    let mut elements = 0usize;
    let mut pos = 0usize;
    while pos < input.len() {
        let b = input[pos];
        if !xml_printable(b) {
            t.edges.insert(NONPRINTABLE);
            t.outcome = Outcome::ParseError;
            return t;
        }
        if b == b'<' {
            let closing = input.get(pos + 1) == Some(&b'/');
            let name_start = if closing { pos + 2 } else { pos + 1 };
            let mut end = name_start;
            while end < input.len() && input[end].is_ascii_lowercase() {
                end += 1;
            }
            if end == name_start || end - name_start > 16 || input.get(end) != Some(&b'>') {
                t.edges.insert(TAG_SYNTAX);
                t.outcome = Outcome::ParseError;
                return t;
            }
            if closing {
                match stack.pop() {
                    Some((s, e)) if &input[s..e] == &input[name_start..end] => {
                        t.edges.insert(CLOSE_TAG);
                    }
                    _ => {
                        t.edges.insert(MISMATCH);
                        t.outcome = Outcome::ParseError;
                        return t;
                    }
                }
            } else {
                t.edges.insert(OPEN_TAG);
                elements += 1;
                // Bug site: descent into a child element, no depth guard.
                if !stack.is_empty() {
                    t.edges.insert(PUSH_NESTED);
                    t.reach(0);
                }
                stack.push((name_start, end));
                let depth = stack.len();
                if depth >= 4 {
                    t.edges.insert(DEPTH_4);
                }
                if depth >= 8 {
                    t.edges.insert(DEPTH_8);
                }
                if depth >= 12 {
                    t.edges.insert(DEPTH_12);
                }
                if depth >= 16 {
                    t.edges.insert(DEPTH_16);
                }
                if depth > XML_DEPTH_LIMIT {
                    t.edges.insert(DEPTH_OVERFLOW);
                    t.trigger(0);
                    return t;
                }
            }
            pos = end + 1;
        } else if b == b'>' {
            t.edges.insert(TAG_SYNTAX);
            t.outcome = Outcome::ParseError;
            return t;
        } else {
            t.edges.insert(TEXT);
            pos += 1;
            while pos < input.len()
                && xml_printable(input[pos])
                && input[pos] != b'<'
                && input[pos] != b'>'
            {
                pos += 1;
            }
        }
    }
    if !stack.is_empty() {
        t.edges.insert(UNBALANCED_EOF);
        t.outcome = Outcome::ParseError;
    } else if elements == 0 {
        t.edges.insert(EMPTY_DOC);
        t.outcome = Outcome::ParseError;
    } else {
        t.edges.insert(EOF_CLEAN);
    }
    t
}

fn mini_xml_target() -> TargetProgram {
    let witness: Vec<u8> = b"<a>".repeat(XML_DEPTH_LIMIT + 1);

    let probes: Vec<Vec<u8>> = vec![
        b"<a>x</a>".to_vec(),
        b"<a><b></b></a>".to_vec(),
        b"</a>".to_vec(),
    ];

    TargetProgram {
        target_id: "mini-xml-parser",
        format: FormatTag::MiniXml,
        total_edges: xml_edge::TOTAL,
        bugs: vec![BugSite {
            bug_id: "XML001",
            description: "element descent is unbounded; nesting deeper than 16 \
                          levels exhausts the parser stack",
            site_edge: xml_edge::PUSH_NESTED,
            witness,
        }],
        run: run_mini_xml,
        probes,
    }
}

// ---------------------------------------------------------------------------
// mini-doc: record-stream document container.
// Planted bug DOC001: the extended-record ('X') processor trusts the 4-byte
// key after the extension signature; the keyed maintenance path corrupts
// parser state. Reaching the processor requires the 3-byte signature, so the
// bug sits behind a narrow but format-legal gate, and the key is checked
// byte by byte.
// ---------------------------------------------------------------------------

/// Extension signature an 'X' record must carry to enter extended processing.
pub const MINI_DOC_EXT_SIG: [u8; 3] = [0xeb, 0x57, 0x0b];
/// Maintenance key that takes the extended processor down its fault path.
pub const MINI_DOC_EXT_KEY: [u8; 4] = [0x10, 0x20, 0x40, 0x64];

mod doc_edge {
    pub const ENTRY: u16 = 0;
    pub const MAGIC_OK: u16 = 1;
    pub const MAGIC_FAIL: u16 = 2;
    pub const RECORD_HEADER: u16 = 3;
    pub const TRUNC_RECORD: u16 = 4;
    pub const REC_TEXT: u16 = 5;
    pub const TEXT_NONEMPTY: u16 = 6;
    pub const REC_NUMBER: u16 = 7;
    pub const NUMBER_SMALL: u16 = 8;
    pub const NUMBER_LARGE: u16 = 9;
    pub const REC_UNKNOWN: u16 = 10;
    pub const REC_X: u16 = 11;
    pub const X_SIG_OK: u16 = 12;
    pub const X_SIG_BAD: u16 = 13;
    pub const X_EXT: u16 = 14;
    pub const X_KEY_1: u16 = 15;
    pub const X_KEY_2: u16 = 16;
    pub const X_KEY_3: u16 = 17;
    pub const X_TRIGGER: u16 = 18;
    pub const X_SHORT: u16 = 19;
    pub const EOF_CLEAN: u16 = 20;
    pub const NO_RECORDS: u16 = 21;
    pub const TOTAL: u16 = 22;
}

fn run_mini_doc(input: &[u8]) -> ExecutionTrace {
    use doc_edge::*;
    let mut t = ExecutionTrace::new();
    t.edges.insert(ENTRY);
    if input.len() < 4 || input[..4] != MINI_DOC_MAGIC {
        t.edges.insert(MAGIC_FAIL);
        t.outcome = Outcome::ParseError;
        return t;
    }
    t.edges.insert(MAGIC_OK);
    let mut pos = 4usize;
    let mut records = 0usize;
    while pos < input.len() {
        if input.len() - pos < 2 {
            t.edges.insert(TRUNC_RECORD);
            t.outcome = Outcome::ParseError;
            return t;
        }
        let ty = input[pos];
        let len = input[pos + 1] as usize;
        pos += 2;
        if len > input.len() - pos {
            t.edges.insert(TRUNC_RECORD);
            t.outcome = Outcome::ParseError;
            return t;
        }
        t.edges.insert(RECORD_HEADER);
        records += 1;
        let payload = &input[pos..pos + len];
        pos += len;
        match ty {
            b'T' => {
                t.edges.insert(REC_TEXT);
                if !payload.is_empty() {
                    t.edges.insert(TEXT_NONEMPTY);
                }
            }
            b'N' => {
                t.edges.insert(REC_NUMBER);
                if !payload.is_empty() {
                    if payload[0] < 0x80 {
                        t.edges.insert(NUMBER_SMALL);
                    } else {
                        t.edges.insert(NUMBER_LARGE);
                    }
                }
            }
            b'X' => {
                t.edges.insert(REC_X);
                if payload.len() >= 3 && payload[..3] == MINI_DOC_EXT_SIG {
                    t.edges.insert(X_SIG_OK);
                    if payload.len() >= 7 {
                        // Bug site: extended maintenance processing.
                        t.edges.insert(X_EXT);
                        t.reach(0);
                        if payload[3] == MINI_DOC_EXT_KEY[0] {
                            t.edges.insert(X_KEY_1);
                            if payload[4] == MINI_DOC_EXT_KEY[1] {
                                t.edges.insert(X_KEY_2);
                                if payload[5] == MINI_DOC_EXT_KEY[2] {
                                    t.edges.insert(X_KEY_3);
                                    if payload[6] == MINI_DOC_EXT_KEY[3] {
                                        t.edges.insert(X_TRIGGER);
                                        t.trigger(0);
                                        return t;
                                    }
                                }
                            }
                        }
                    } else {
                        t.edges.insert(X_SHORT);
                    }
                } else {
                    t.edges.insert(X_SIG_BAD);
                }
            }
            _ => {
                t.edges.insert(REC_UNKNOWN);
            }
        }
    }
    if records == 0 {
        t.edges.insert(NO_RECORDS);
        t.outcome = Outcome::ParseError;
    } else {
        t.edges.insert(EOF_CLEAN);
    }
    t
}

/// The minimal input triggering DOC001: one 'X' record carrying the
/// extension signature followed by the maintenance key.
pub fn mini_doc_trigger_input() -> Vec<u8> {
    let payload: Vec<u8> = [&MINI_DOC_EXT_SIG[..], &MINI_DOC_EXT_KEY[..]].concat();
    formats::mini_doc_file(&[(b'X', &payload)])
}

fn mini_doc_target() -> TargetProgram {
    let sig_short: Vec<u8> = MINI_DOC_EXT_SIG.to_vec();
    let sig_nokey: Vec<u8> = [&MINI_DOC_EXT_SIG[..], &[0, 0, 0, 0]].concat();

    let probes: Vec<Vec<u8>> = vec![
        formats::mini_doc_file(&[(b'T', &[]), (b'T', b"note")]),
        formats::mini_doc_file(&[(b'N', &[0x05]), (b'N', &[0xc8])]),
        formats::mini_doc_file(&[(b'Q', &[1, 2, 3])]),
        formats::mini_doc_file(&[(b'X', &[0, 0])]),
        formats::mini_doc_file(&[(b'X', &sig_short)]),
        formats::mini_doc_file(&[(b'X', &sig_nokey)]),
        MINI_DOC_MAGIC.to_vec(),
        [&MINI_DOC_MAGIC[..], &[b'T', 9, b'x']].concat(),
    ];

    TargetProgram {
        target_id: "mini-doc-parser",
        format: FormatTag::MiniDoc,
        total_edges: doc_edge::TOTAL,
        bugs: vec![BugSite {
            bug_id: "DOC001",
            description: "extended-record maintenance path trusts the 4-byte key \
                          following the extension signature; the keyed path \
                          corrupts parser state",
            site_edge: doc_edge::X_EXT,
            witness: mini_doc_trigger_input(),
        }],
        run: run_mini_doc,
        probes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formats::{mini_doc_file, mini_img_file, sniff, Sniff};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn registry_has_three_targets_with_distinct_formats() {
        let targets = registry();
        assert!(targets.len() >= 3);
        let mut formats: Vec<FormatTag> = targets.iter().map(|t| t.format).collect();
        formats.sort();
        formats.dedup();
        assert_eq!(formats.len(), targets.len());
    }

    #[test]
    fn every_witness_triggers_its_bug() {
        for target in registry() {
            for (i, bug) in target.bugs.iter().enumerate() {
                let trace = target.run(&bug.witness);
                assert!(trace.reached(i), "{} witness must reach", bug.bug_id);
                assert!(trace.triggered(i), "{} witness must trigger", bug.bug_id);
                assert_eq!(trace.outcome, Outcome::Fault(i as u8));
            }
        }
    }

    #[test]
    fn wrong_magic_is_parse_error_without_reach() {
        let t = find_target("mini-img-parser").unwrap();
        let trace = t.run(b"NOPE rest of file");
        assert_eq!(trace.outcome, Outcome::ParseError);
        assert!(!trace.reached(0));
    }

    #[test]
    fn well_formed_input_without_bug_chunk_is_clean_and_unreached() {
        let t = find_target("mini-img-parser").unwrap();
        let input = mini_img_file(&[(*b"HDR0", &[0, 1, 0, 1]), (*b"DATA", &[7, 7])]);
        let trace = t.run(&input);
        assert_eq!(trace.outcome, Outcome::Clean);
        assert!(!trace.reached(0));
    }

    #[test]
    fn valid_cmap_chunk_reaches_without_triggering() {
        let t = find_target("mini-img-parser").unwrap();
        let input = mini_img_file(&[(*b"CMAP", &[1, 2, 3])]);
        let trace = t.run(&input);
        assert_eq!(trace.outcome, Outcome::Clean);
        assert!(trace.reached(0));
        assert!(!trace.triggered(0));
    }

    #[test]
    fn xml_depth_limit_is_sharp() {
        let t = find_target("mini-xml-parser").unwrap();
        let at_limit: Vec<u8> = {
            let mut v = b"<a>".repeat(XML_DEPTH_LIMIT);
            v.extend_from_slice(&b"</a>".repeat(XML_DEPTH_LIMIT));
            v
        };
        let trace = t.run(&at_limit);
        assert_eq!(trace.outcome, Outcome::Clean, "depth 16 parses cleanly");
        assert!(trace.reached(0));
        assert!(!trace.triggered(0));

        let over = b"<a>".repeat(XML_DEPTH_LIMIT + 1);
        assert!(t.run(&over).triggered(0), "depth 17 triggers");
    }

    #[test]
    fn doc_key_is_checked_byte_by_byte() {
        let t = find_target("mini-doc-parser").unwrap();
        let mut payload: Vec<u8> = [&MINI_DOC_EXT_SIG[..], &MINI_DOC_EXT_KEY[..]].concat();
        payload[6] ^= 0xff;
        let near = mini_doc_file(&[(b'X', &payload)]);
        let trace = t.run(&near);
        assert!(trace.reached(0));
        assert!(!trace.triggered(0));
        assert!(trace.edges.contains(doc_edge::X_KEY_3));
        assert!(!trace.edges.contains(doc_edge::X_TRIGGER));
    }

    #[test]
    fn traces_are_deterministic_over_random_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for target in registry() {
            let inputs: Vec<Vec<u8>> = (0..1000)
                .map(|_| {
                    let len = rng.gen_range(0..64usize);
                    (0..len).map(|_| rng.gen()).collect()
                })
                .collect();
            for input in &inputs {
                assert_eq!(target.run(input), target.run(input));
            }
        }
    }

    #[test]
    fn trigger_count_never_exceeds_reach_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for target in registry() {
            let mut reaches = 0u64;
            let mut triggers = 0u64;
            for _ in 0..2000 {
                let len = rng.gen_range(0..96usize);
                let input: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
                let trace = target.run(&input);
                for i in 0..target.bugs.len() {
                    if trace.triggered(i) {
                        assert!(trace.reached(i), "trigger implies reach");
                        triggers += 1;
                    }
                    if trace.reached(i) {
                        reaches += 1;
                    }
                }
            }
            assert!(triggers <= reaches);
        }
    }

    #[test]
    fn witnesses_for_binary_targets_are_not_format_compliant_by_accident() {
        // The mini-doc witness is a legal file (a conditions bug); the
        // mini-img witness is an overflow and must be malformed.
        let img = find_target("mini-img-parser").unwrap();
        assert!(matches!(
            sniff(FormatTag::MiniImg, &img.bugs[0].witness),
            Sniff::Malformed(_)
        ));
        let doc = find_target("mini-doc-parser").unwrap();
        assert_eq!(sniff(FormatTag::MiniDoc, &doc.bugs[0].witness), Sniff::Compliant);
    }

    /// Gated difficulty of the mini-doc bug: conditioned on reaching the
    /// extended processor, uniformly random payloads almost never trigger.
    /// Monte Carlo over 64-byte inputs whose first ten bytes are pinned to
    /// the reach prefix (magic, an 'X' record header, the extension
    /// signature); the remaining 54 bytes are uniform.
    #[test]
    fn mini_doc_trigger_is_rare_conditioned_on_reach() {
        let target = find_target("mini-doc-parser").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut prefix = MINI_DOC_MAGIC.to_vec();
        prefix.push(b'X');
        prefix.push(58); // record payload spans the rest of the 64 bytes
        prefix.extend_from_slice(&MINI_DOC_EXT_SIG);
        let mut reaches = 0u64;
        let mut triggers = 0u64;
        for _ in 0..1_000_000u64 {
            let mut input = prefix.clone();
            while input.len() < 64 {
                input.push(rng.gen());
            }
            let trace = target.run(&input);
            if trace.reached(0) {
                reaches += 1;
            }
            if trace.triggered(0) {
                triggers += 1;
            }
        }
        assert!(reaches >= 1_000_000, "every sample carries the reach prefix");
        let ratio = triggers as f64 / reaches as f64;
        assert!(
            ratio < 1e-3,
            "triggering must be rare given reach: {triggers}/{reaches}"
        );
    }

    /// Exhaustive sweep over all inputs of length <= 3 plus the stored
    /// witnesses and probes must exercise exactly the static edge map.
    #[test]
    fn total_edges_matches_exhaustive_small_input_sweep() {
        for target in registry() {
            let mut seen = EdgeSet::default();
            let mut buf = [0u8; 3];
            seen = seen.union(target.run(&[]).edges);
            for a in 0..=255u8 {
                buf[0] = a;
                seen = seen.union(target.run(&buf[..1]).edges);
                for b in 0..=255u8 {
                    buf[1] = b;
                    seen = seen.union(target.run(&buf[..2]).edges);
                    for c in 0..=255u8 {
                        buf[2] = c;
                        seen = seen.union(target.run(&buf[..3]).edges);
                    }
                }
            }
            for bug in &target.bugs {
                seen = seen.union(target.run(&bug.witness).edges);
            }
            for probe in &target.probes {
                seen = seen.union(target.run(probe).edges);
            }
            let expected: Vec<u16> = (0..target.total_edges).collect();
            assert_eq!(
                seen.ids(),
                expected,
                "target {} edge map mismatch",
                target.target_id
            );
        }
    }
}
