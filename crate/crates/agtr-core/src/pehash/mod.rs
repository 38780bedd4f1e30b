//! Metadata hashing for Windows PE binaries and AGTR construction from
//! digest groups.
//!
//! The digest covers a fixed set of header features: COFF characteristics,
//! subsystem, log2-bucketed stack/heap commit sizes, and per-section
//! log2-bucketed virtual address and raw size, XOR-folded section flags,
//! and a bucketed byte-entropy of the raw section contents. Two files with
//! identical values for all tracked features share a digest; everything
//! else (DOS stub, timestamps, checksum, raw bytes beyond their entropy
//! bucket) is deliberately ignored so polymorphic siblings collide.

mod parser;

pub mod fixture;

pub use parser::{entropy_bucket, log2_bucket, parse_pe, xor_fold, MAX_SECTIONS};

use std::fmt;

use sha2::{Digest, Sha256};

use crate::clustering::{Clustering, SampleId, SINGLETON_PREFIX};
use crate::error::Result;

/// Parse failures, each a distinct reportable condition.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PeParseError {
    /// The file does not start with the `MZ` DOS magic.
    #[error("missing MZ magic")]
    MissingMzMagic,
    /// The PE header offset points outside the file.
    #[error("PE header offset {offset} out of range for {file_len}-byte file")]
    BadPeOffset {
        /// The `e_lfanew` value.
        offset: u64,
        /// Total file length.
        file_len: u64,
    },
    /// No `PE\0\0` signature at the header offset.
    #[error("missing PE signature")]
    MissingPeSignature,
    /// The file ends before the required header fields.
    #[error("truncated headers")]
    TruncatedHeaders,
    /// More sections than the loader limit allows.
    #[error("section count {count} exceeds the limit of {}", MAX_SECTIONS)]
    SectionCountExceeded {
        /// Declared section count.
        count: u16,
    },
    /// A section's raw data extends beyond the file.
    #[error("section {index} raw data ({offset}+{size}) beyond {file_len}-byte file")]
    SectionOutOfBounds {
        /// Zero-based section index.
        index: usize,
        /// Raw data offset.
        offset: u64,
        /// Raw data size.
        size: u64,
        /// Total file length.
        file_len: u64,
    },
    /// The optional header magic is neither PE32 nor PE32+.
    #[error("unsupported optional header magic {magic:#06x}")]
    UnsupportedOptionalHeaderMagic {
        /// The magic value found.
        magic: u16,
    },
}

impl PeParseError {
    /// Stable variant name used as the `status` column in digest CSVs.
    pub fn status_name(&self) -> &'static str {
        match self {
            PeParseError::MissingMzMagic => "MissingMzMagic",
            PeParseError::BadPeOffset { .. } => "BadPeOffset",
            PeParseError::MissingPeSignature => "MissingPeSignature",
            PeParseError::TruncatedHeaders => "TruncatedHeaders",
            PeParseError::SectionCountExceeded { .. } => "SectionCountExceeded",
            PeParseError::SectionOutOfBounds { .. } => "SectionOutOfBounds",
            PeParseError::UnsupportedOptionalHeaderMagic { .. } => "UnsupportedOptionalHeaderMagic",
        }
    }
}

/// Digest features of one section, in section-table order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SectionFeature {
    /// `floor(log2(virtual address))`, bucketed.
    pub vaddr_log2: u8,
    /// `floor(log2(raw data size))`, bucketed.
    pub raw_size_log2: u8,
    /// XOR-fold of the 32-bit section characteristics.
    pub characteristics_folded: u8,
    /// Bucketed first-order byte entropy of the raw data.
    pub entropy_bucket: u8,
}

/// Normalized header and section features feeding the digest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeMetadata {
    /// COFF file characteristics flag word.
    pub characteristics: u16,
    /// Optional-header subsystem value.
    pub subsystem: u16,
    /// Bucketed stack commit size.
    pub stack_commit_log2: u8,
    /// Bucketed heap commit size.
    pub heap_commit_log2: u8,
    /// Per-section features in on-disk section-table order.
    pub sections: Vec<SectionFeature>,
}

/// A metadata digest: 64 lowercase hex characters of SHA-256 over the
/// canonical feature packing.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PeDigest(String);

impl PeDigest {
    /// Wraps an existing digest string, validating shape.
    pub fn from_hex(hex: impl AsRef<str>) -> Option<Self> {
        let hex = hex.as_ref();
        let ok = hex.len() == 64
            && hex
                .bytes()
                .all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b));
        ok.then(|| PeDigest(hex.to_string()))
    }

    /// The digest as lowercase hex.
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for PeDigest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Computes the digest of already-extracted metadata.
///
/// Packing is bit-exact and platform-independent: characteristics and
/// subsystem as big-endian 16-bit words, the two commit buckets, then per
/// section `vaddr_log2 ‖ raw_size_log2 ‖ characteristics_folded ‖
/// entropy_bucket`.
pub fn pehash_digest(meta: &PeMetadata) -> PeDigest {
    let mut buffer = Vec::with_capacity(6 + meta.sections.len() * 4);
    buffer.extend_from_slice(&meta.characteristics.to_be_bytes());
    buffer.extend_from_slice(&meta.subsystem.to_be_bytes());
    buffer.push(meta.stack_commit_log2);
    buffer.push(meta.heap_commit_log2);
    for section in &meta.sections {
        buffer.push(section.vaddr_log2);
        buffer.push(section.raw_size_log2);
        buffer.push(section.characteristics_folded);
        buffer.push(section.entropy_bucket);
    }
    let hash = Sha256::digest(&buffer);
    let mut hex = String::with_capacity(64);
    for byte in hash {
        use fmt::Write;
        write!(hex, "{byte:02x}").expect("writing to a String cannot fail");
    }
    PeDigest(hex)
}

/// Parses and digests a PE image in one step.
pub fn pehash_of_bytes(data: &[u8]) -> std::result::Result<PeDigest, PeParseError> {
    Ok(pehash_digest(&parse_pe(data)?))
}

/// Groups samples by digest into an AGTR: samples sharing a digest share a
/// cluster (named by the digest); samples without a digest (parse failures)
/// become singleton clusters. Runs in O(m).
pub fn build_agtr<I>(digests: I) -> Result<Clustering>
where
    I: IntoIterator<Item = (SampleId, Option<PeDigest>)>,
{
    Clustering::from_assignments(digests.into_iter().map(|(id, digest)| {
        let cluster = match digest {
            Some(d) => d.0,
            None => format!("{SINGLETON_PREFIX}{id}"),
        };
        (id.to_string(), cluster)
    }))
}

#[cfg(test)]
mod tests {
    use super::fixture::PeFixture;
    use super::*;

    #[test]
    fn digest_shape() {
        let meta = PeMetadata {
            characteristics: 0x0102,
            subsystem: 2,
            stack_commit_log2: 12,
            heap_commit_log2: 12,
            sections: vec![SectionFeature {
                vaddr_log2: 12,
                raw_size_log2: 9,
                characteristics_folded: 0xC0,
                entropy_bucket: 140,
            }],
        };
        let digest = pehash_digest(&meta);
        assert_eq!(digest.as_str().len(), 64);
        assert!(digest.as_str().chars().all(|c| c.is_ascii_hexdigit()));
        assert_eq!(digest, pehash_digest(&meta.clone()));
    }

    #[test]
    fn digest_is_deterministic_across_parses() {
        let image = PeFixture::pe32().section(".text", 0x1000, 0x60000020, b"code".to_vec()).build();
        let a = pehash_of_bytes(&image).unwrap();
        let b = pehash_of_bytes(&image).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn subsystem_changes_digest() {
        let base = PeFixture::pe32().section(".text", 0x1000, 0x60000020, b"code".to_vec());
        let a = pehash_of_bytes(&base.clone().build()).unwrap();
        let b = pehash_of_bytes(&base.subsystem(3).build()).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn equal_histogram_sections_share_digest() {
        let a = PeFixture::pe32()
            .section(".data", 0x2000, 0xC0000040, b"AABBCCDD".to_vec())
            .build();
        let b = PeFixture::pe32()
            .section(".data", 0x2000, 0xC0000040, b"DDCCBBAA".to_vec())
            .build();
        assert_eq!(
            pehash_of_bytes(&a).unwrap(),
            pehash_of_bytes(&b).unwrap()
        );
    }

    #[test]
    fn digest_hex_round_trip() {
        let image = PeFixture::pe32().section(".text", 0x1000, 0x60000020, b"x".to_vec()).build();
        let digest = pehash_of_bytes(&image).unwrap();
        assert_eq!(PeDigest::from_hex(digest.as_str()), Some(digest));
        assert_eq!(PeDigest::from_hex("zz"), None);
    }

    #[test]
    fn agtr_groups_by_digest() {
        let d1 = PeDigest::from_hex(&"a".repeat(64)).unwrap();
        let d2 = PeDigest::from_hex(&"b".repeat(64)).unwrap();
        let agtr = build_agtr([
            (SampleId::new("x").unwrap(), Some(d1.clone())),
            (SampleId::new("y").unwrap(), Some(d1)),
            (SampleId::new("z").unwrap(), Some(d2)),
        ])
        .unwrap();
        assert_eq!(agtr.cluster_count(), 2);
        assert_eq!(
            agtr.cluster_of(&SampleId::new("x").unwrap()),
            agtr.cluster_of(&SampleId::new("y").unwrap())
        );
    }

    #[test]
    fn parse_failures_become_singletons() {
        let d = PeDigest::from_hex(&"c".repeat(64)).unwrap();
        let agtr = build_agtr([
            (SampleId::new("good").unwrap(), Some(d)),
            (SampleId::new("bad1").unwrap(), None),
            (SampleId::new("bad2").unwrap(), None),
        ])
        .unwrap();
        assert_eq!(agtr.cluster_count(), 3);
        assert_eq!(
            agtr.cluster_of(&SampleId::new("bad1").unwrap()),
            Some("__singleton__:bad1")
        );
    }

    #[test]
    fn duplicate_sample_rejected() {
        let err = build_agtr([
            (SampleId::new("x").unwrap(), None),
            (SampleId::new("x").unwrap(), None),
        ])
        .unwrap_err();
        assert!(matches!(err, crate::error::Error::DuplicateSample { .. }));
    }

    #[test]
    fn status_names_are_stable() {
        assert_eq!(PeParseError::MissingMzMagic.status_name(), "MissingMzMagic");
        assert_eq!(
            PeParseError::SectionCountExceeded { count: 100 }.status_name(),
            "SectionCountExceeded"
        );
    }
}
