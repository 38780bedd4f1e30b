//! Minimal PE image parser extracting exactly the header and section
//! fields that feed the metadata digest.
//!
//! This is not a loader: it validates just enough structure to locate the
//! COFF header, the optional header (32- and 64-bit variants), and the
//! section table, and to slice each section's raw data for the entropy
//! feature. Every failure mode is a distinct, reportable variant.

use super::{PeMetadata, PeParseError, SectionFeature};

/// OS loader limit on the number of sections.
pub const MAX_SECTIONS: u16 = 96;

const DOS_HEADER_LEN: usize = 0x40;
const E_LFANEW_OFFSET: usize = 0x3C;
const PE_SIGNATURE: &[u8; 4] = b"PE\0\0";
const COFF_LEN: usize = 20;
const SECTION_HEADER_LEN: usize = 40;
const MAGIC_PE32: u16 = 0x10B;
const MAGIC_PE32_PLUS: u16 = 0x20B;

fn read_u16(data: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([data[at], data[at + 1]])
}

fn read_u32(data: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([data[at], data[at + 1], data[at + 2], data[at + 3]])
}

fn read_u64(data: &[u8], at: usize) -> u64 {
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&data[at..at + 8]);
    u64::from_le_bytes(bytes)
}

/// Parses a PE image and extracts the digest metadata.
pub fn parse_pe(data: &[u8]) -> Result<PeMetadata, PeParseError> {
    if data.len() < 2 || &data[..2] != b"MZ" {
        return Err(PeParseError::MissingMzMagic);
    }
    if data.len() < DOS_HEADER_LEN {
        return Err(PeParseError::TruncatedHeaders);
    }
    let pe_offset = read_u32(data, E_LFANEW_OFFSET) as usize;
    if pe_offset.checked_add(4).is_none_or(|end| end > data.len()) {
        return Err(PeParseError::BadPeOffset {
            offset: pe_offset as u64,
            file_len: data.len() as u64,
        });
    }
    if &data[pe_offset..pe_offset + 4] != PE_SIGNATURE {
        return Err(PeParseError::MissingPeSignature);
    }

    let coff = pe_offset + 4;
    if coff + COFF_LEN > data.len() {
        return Err(PeParseError::TruncatedHeaders);
    }
    let section_count = read_u16(data, coff + 2);
    let optional_size = read_u16(data, coff + 16) as usize;
    let characteristics = read_u16(data, coff + 18);
    if section_count > MAX_SECTIONS {
        return Err(PeParseError::SectionCountExceeded {
            count: section_count,
        });
    }

    let opt = coff + COFF_LEN;
    if optional_size < 2 || opt + 2 > data.len() {
        return Err(PeParseError::TruncatedHeaders);
    }
    let magic = read_u16(data, opt);
    // byte span of the fields we require, per optional-header variant
    let required = match magic {
        MAGIC_PE32 => 88,      // ..= heap commit (u32 at +84)
        MAGIC_PE32_PLUS => 104, // ..= heap commit (u64 at +96)
        other => return Err(PeParseError::UnsupportedOptionalHeaderMagic { magic: other }),
    };
    if optional_size < required || opt + required > data.len() {
        return Err(PeParseError::TruncatedHeaders);
    }
    let subsystem = read_u16(data, opt + 68);
    let (stack_commit, heap_commit) = if magic == MAGIC_PE32 {
        (read_u32(data, opt + 76) as u64, read_u32(data, opt + 84) as u64)
    } else {
        (read_u64(data, opt + 80), read_u64(data, opt + 96))
    };

    let table = opt + optional_size;
    let table_end = table + SECTION_HEADER_LEN * section_count as usize;
    if table_end > data.len() {
        return Err(PeParseError::TruncatedHeaders);
    }

    let mut sections = Vec::with_capacity(section_count as usize);
    for index in 0..section_count as usize {
        let header = table + index * SECTION_HEADER_LEN;
        let virtual_address = read_u32(data, header + 12);
        let raw_size = read_u32(data, header + 16);
        let raw_pointer = read_u32(data, header + 20);
        let section_characteristics = read_u32(data, header + 36);
        let raw = if raw_size == 0 {
            &[][..]
        } else {
            let start = raw_pointer as u64;
            let end = start + raw_size as u64;
            if end > data.len() as u64 {
                return Err(PeParseError::SectionOutOfBounds {
                    index,
                    offset: start,
                    size: raw_size as u64,
                    file_len: data.len() as u64,
                });
            }
            &data[start as usize..end as usize]
        };
        sections.push(SectionFeature {
            vaddr_log2: log2_bucket(virtual_address as u64),
            raw_size_log2: log2_bucket(raw_size as u64),
            characteristics_folded: xor_fold(section_characteristics),
            entropy_bucket: entropy_bucket(raw),
        });
    }

    Ok(PeMetadata {
        characteristics,
        subsystem,
        stack_commit_log2: log2_bucket(stack_commit),
        heap_commit_log2: log2_bucket(heap_commit),
        sections,
    })
}

/// `floor(log2(max(v, 1)))`, clipped to [0, 63].
pub fn log2_bucket(v: u64) -> u8 {
    v.max(1).ilog2() as u8
}

/// Folds 32 bits of section flags down to 8 by XOR.
pub fn xor_fold(flags: u32) -> u8 {
    (flags ^ (flags >> 8) ^ (flags >> 16) ^ (flags >> 24)) as u8
}

/// First-order byte entropy in bits, scaled by 32 and floored into an
/// 8-bit bucket. A perfectly uniform byte distribution reaches exactly
/// 8.0 bits (bucket index 256), which folds into the top bucket 255.
/// Empty input is bucket 0.
pub fn entropy_bucket(data: &[u8]) -> u8 {
    if data.is_empty() {
        return 0;
    }
    let mut freq = [0u64; 256];
    for &byte in data {
        freq[byte as usize] += 1;
    }
    let len = data.len() as f64;
    let mut entropy = 0.0f64;
    for &count in &freq {
        if count > 0 {
            let p = count as f64 / len;
            entropy -= p * p.log2();
        }
    }
    ((entropy * 32.0).floor() as u32).min(255) as u8
}
