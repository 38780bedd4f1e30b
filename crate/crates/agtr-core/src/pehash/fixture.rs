//! Deterministic builders for synthetic, well-formed PE images.
//!
//! Used by the digest test suites to craft files that differ in exactly one
//! tracked feature (sensitivity checks) or only in untracked bytes such as
//! the DOS stub, timestamp, or checksum (insensitivity checks). The images
//! are structurally valid for parsing purposes; they are not runnable
//! programs.

/// One synthetic section: a name, tracked header fields, and raw contents.
#[derive(Debug, Clone)]
pub struct FixtureSection {
    /// Section name, at most 8 bytes.
    pub name: String,
    /// Virtual address (tracked via its log2 bucket).
    pub virtual_address: u32,
    /// Section characteristics flags (tracked via XOR-fold).
    pub characteristics: u32,
    /// Raw section contents (tracked via size bucket and entropy bucket).
    pub data: Vec<u8>,
}

/// Chainable builder for synthetic PE32 / PE32+ images.
#[derive(Debug, Clone)]
pub struct PeFixture {
    pe32_plus: bool,
    characteristics: u16,
    subsystem: u16,
    stack_commit: u64,
    heap_commit: u64,
    timestamp: u32,
    checksum: u32,
    dos_stub: Vec<u8>,
    sections: Vec<FixtureSection>,
}

const MACHINE_I386: u16 = 0x014C;
const MACHINE_AMD64: u16 = 0x8664;
const OPT_SIZE_PE32: u16 = 0xE0;
const OPT_SIZE_PE32_PLUS: u16 = 0xF0;

impl PeFixture {
    /// A 32-bit image with GUI subsystem and 4 KiB commits.
    pub fn pe32() -> Self {
        PeFixture {
            pe32_plus: false,
            characteristics: 0x0102, // EXECUTABLE_IMAGE | 32BIT_MACHINE
            subsystem: 2,            // WINDOWS_GUI
            stack_commit: 0x1000,
            heap_commit: 0x1000,
            timestamp: 0,
            checksum: 0,
            dos_stub: Vec::new(),
            sections: Vec::new(),
        }
    }

    /// A 64-bit image with GUI subsystem and 4 KiB commits.
    pub fn pe64() -> Self {
        PeFixture {
            pe32_plus: true,
            characteristics: 0x0022, // EXECUTABLE_IMAGE | LARGE_ADDRESS_AWARE
            ..Self::pe32()
        }
    }

    /// Sets the COFF characteristics flag word (tracked).
    pub fn characteristics(mut self, value: u16) -> Self {
        self.characteristics = value;
        self
    }

    /// Sets the subsystem (tracked).
    pub fn subsystem(mut self, value: u16) -> Self {
        self.subsystem = value;
        self
    }

    /// Sets the stack commit size (tracked via its log2 bucket).
    pub fn stack_commit(mut self, value: u64) -> Self {
        self.stack_commit = value;
        self
    }

    /// Sets the heap commit size (tracked via its log2 bucket).
    pub fn heap_commit(mut self, value: u64) -> Self {
        self.heap_commit = value;
        self
    }

    /// Sets the COFF timestamp (untracked).
    pub fn timestamp(mut self, value: u32) -> Self {
        self.timestamp = value;
        self
    }

    /// Sets the optional-header checksum field (untracked).
    pub fn checksum(mut self, value: u32) -> Self {
        self.checksum = value;
        self
    }

    /// Inserts arbitrary DOS stub bytes between the DOS header and the PE
    /// signature (untracked).
    pub fn dos_stub(mut self, stub: Vec<u8>) -> Self {
        self.dos_stub = stub;
        self
    }

    /// Appends a section.
    pub fn section(
        mut self,
        name: &str,
        virtual_address: u32,
        characteristics: u32,
        data: Vec<u8>,
    ) -> Self {
        assert!(name.len() <= 8, "section names are at most 8 bytes");
        self.sections.push(FixtureSection {
            name: name.to_string(),
            virtual_address,
            characteristics,
            data,
        });
        self
    }

    /// Serializes the image.
    pub fn build(&self) -> Vec<u8> {
        let opt_size = if self.pe32_plus {
            OPT_SIZE_PE32_PLUS
        } else {
            OPT_SIZE_PE32
        } as usize;
        let pe_offset = 0x40 + self.dos_stub.len();
        let table_offset = pe_offset + 4 + 20 + opt_size;
        let raw_base = table_offset + 40 * self.sections.len();

        let mut image = Vec::with_capacity(raw_base + 256);

        // DOS header
        image.extend_from_slice(b"MZ");
        image.resize(0x3C, 0);
        image.extend_from_slice(&(pe_offset as u32).to_le_bytes());
        image.extend_from_slice(&self.dos_stub);

        // signature + COFF header
        image.extend_from_slice(b"PE\0\0");
        let machine = if self.pe32_plus { MACHINE_AMD64 } else { MACHINE_I386 };
        image.extend_from_slice(&machine.to_le_bytes());
        image.extend_from_slice(&(self.sections.len() as u16).to_le_bytes());
        image.extend_from_slice(&self.timestamp.to_le_bytes());
        image.extend_from_slice(&0u32.to_le_bytes()); // symbol table
        image.extend_from_slice(&0u32.to_le_bytes()); // symbol count
        image.extend_from_slice(&(opt_size as u16).to_le_bytes());
        image.extend_from_slice(&self.characteristics.to_le_bytes());

        self.write_optional_header(&mut image);
        debug_assert_eq!(image.len(), table_offset);

        // section table
        let mut raw_pointer = raw_base;
        for section in &self.sections {
            let mut name = [0u8; 8];
            name[..section.name.len()].copy_from_slice(section.name.as_bytes());
            image.extend_from_slice(&name);
            image.extend_from_slice(&(section.data.len() as u32).to_le_bytes()); // virtual size
            image.extend_from_slice(&section.virtual_address.to_le_bytes());
            image.extend_from_slice(&(section.data.len() as u32).to_le_bytes()); // raw size
            let pointer = if section.data.is_empty() { 0 } else { raw_pointer as u32 };
            image.extend_from_slice(&pointer.to_le_bytes());
            image.extend_from_slice(&[0u8; 12]); // relocations / line numbers
            image.extend_from_slice(&section.characteristics.to_le_bytes());
            raw_pointer += section.data.len();
        }

        for section in &self.sections {
            image.extend_from_slice(&section.data);
        }
        image
    }

    fn write_optional_header(&self, image: &mut Vec<u8>) {
        let magic: u16 = if self.pe32_plus { 0x20B } else { 0x10B };
        image.extend_from_slice(&magic.to_le_bytes());
        image.push(14); // linker major
        image.push(0); // linker minor
        image.extend_from_slice(&0u32.to_le_bytes()); // size of code
        image.extend_from_slice(&0u32.to_le_bytes()); // size of initialized data
        image.extend_from_slice(&0u32.to_le_bytes()); // size of uninitialized data
        image.extend_from_slice(&0x1000u32.to_le_bytes()); // entry point
        image.extend_from_slice(&0x1000u32.to_le_bytes()); // base of code
        if self.pe32_plus {
            image.extend_from_slice(&0x1_4000_0000u64.to_le_bytes()); // image base
        } else {
            image.extend_from_slice(&0x2000u32.to_le_bytes()); // base of data
            image.extend_from_slice(&0x40_0000u32.to_le_bytes()); // image base
        }
        image.extend_from_slice(&0x1000u32.to_le_bytes()); // section alignment
        image.extend_from_slice(&0x200u32.to_le_bytes()); // file alignment
        image.extend_from_slice(&4u16.to_le_bytes()); // OS major
        image.extend_from_slice(&0u16.to_le_bytes()); // OS minor
        image.extend_from_slice(&0u16.to_le_bytes()); // image major
        image.extend_from_slice(&0u16.to_le_bytes()); // image minor
        image.extend_from_slice(&4u16.to_le_bytes()); // subsystem major
        image.extend_from_slice(&0u16.to_le_bytes()); // subsystem minor
        image.extend_from_slice(&0u32.to_le_bytes()); // win32 version
        image.extend_from_slice(&0x4000u32.to_le_bytes()); // size of image
        image.extend_from_slice(&0x400u32.to_le_bytes()); // size of headers
        image.extend_from_slice(&self.checksum.to_le_bytes());
        image.extend_from_slice(&self.subsystem.to_le_bytes());
        image.extend_from_slice(&0u16.to_le_bytes()); // dll characteristics
        if self.pe32_plus {
            image.extend_from_slice(&0x10_0000u64.to_le_bytes()); // stack reserve
            image.extend_from_slice(&self.stack_commit.to_le_bytes());
            image.extend_from_slice(&0x10_0000u64.to_le_bytes()); // heap reserve
            image.extend_from_slice(&self.heap_commit.to_le_bytes());
        } else {
            image.extend_from_slice(&0x10_0000u32.to_le_bytes()); // stack reserve
            image.extend_from_slice(&(self.stack_commit as u32).to_le_bytes());
            image.extend_from_slice(&0x10_0000u32.to_le_bytes()); // heap reserve
            image.extend_from_slice(&(self.heap_commit as u32).to_le_bytes());
        }
        image.extend_from_slice(&0u32.to_le_bytes()); // loader flags
        image.extend_from_slice(&16u32.to_le_bytes()); // rva and sizes count
        image.extend_from_slice(&[0u8; 16 * 8]); // data directories
    }
}

#[cfg(test)]
mod tests {
    use super::super::{parse_pe, PeParseError};
    use super::*;

    #[test]
    fn minimal_pe32_parses() {
        let image = PeFixture::pe32()
            .section(".text", 0x1000, 0x60000020, b"\x90\x90\xC3".to_vec())
            .build();
        let meta = parse_pe(&image).unwrap();
        assert_eq!(meta.sections.len(), 1);
        assert_eq!(meta.subsystem, 2);
        assert_eq!(meta.characteristics, 0x0102);
        // independently computed field dump: stack/heap commit 0x1000 -> bucket 12,
        // vaddr 0x1000 -> 12, raw size 3 -> 1, flags 0x60000020 -> 0x40
        assert_eq!(meta.stack_commit_log2, 12);
        assert_eq!(meta.heap_commit_log2, 12);
        assert_eq!(meta.sections[0].vaddr_log2, 12);
        assert_eq!(meta.sections[0].raw_size_log2, 1);
        assert_eq!(meta.sections[0].characteristics_folded, 0x40);
    }

    #[test]
    fn minimal_pe64_parses() {
        let image = PeFixture::pe64()
            .stack_commit(0x8000)
            .section(".data", 0x2000, 0xC0000040, vec![0u8; 64])
            .build();
        let meta = parse_pe(&image).unwrap();
        assert_eq!(meta.stack_commit_log2, 15);
        assert_eq!(meta.sections.len(), 1);
        assert_eq!(meta.sections[0].entropy_bucket, 0);
    }

    #[test]
    fn sectionless_image_parses() {
        let meta = parse_pe(&PeFixture::pe32().build()).unwrap();
        assert!(meta.sections.is_empty());
    }

    #[test]
    fn empty_section_gets_zero_entropy_bucket() {
        let image = PeFixture::pe32()
            .section(".bss", 0x3000, 0xC0000080, Vec::new())
            .build();
        let meta = parse_pe(&image).unwrap();
        assert_eq!(meta.sections[0].entropy_bucket, 0);
        assert_eq!(meta.sections[0].raw_size_log2, 0);
    }

    #[test]
    fn untracked_bytes_do_not_affect_parse() {
        let a = PeFixture::pe32()
            .section(".text", 0x1000, 0x60000020, b"abc".to_vec())
            .build();
        let b = PeFixture::pe32()
            .timestamp(0xDEADBEEF)
            .checksum(0x1234_5678)
            .dos_stub(b"This program cannot be run in DOS mode.".to_vec())
            .section(".text", 0x1000, 0x60000020, b"abc".to_vec())
            .build();
        assert_eq!(parse_pe(&a).unwrap(), parse_pe(&b).unwrap());
    }

    #[test]
    fn truncated_build_is_rejected() {
        let image = PeFixture::pe32()
            .section(".text", 0x1000, 0x60000020, b"abc".to_vec())
            .build();
        let cut = &image[..image.len() - 2];
        assert_eq!(
            parse_pe(cut).unwrap_err(),
            PeParseError::SectionOutOfBounds {
                index: 0,
                offset: (image.len() - 3) as u64,
                size: 3,
                file_len: (image.len() - 2) as u64,
            }
        );
    }

    #[test]
    fn section_cap_enforced() {
        let mut fixture = PeFixture::pe32();
        for i in 0..97 {
            fixture = fixture.section(&format!("s{i}"), 0x1000 * (i + 1), 0x40000040, vec![7u8; 4]);
        }
        assert_eq!(
            parse_pe(&fixture.build()).unwrap_err(),
            PeParseError::SectionCountExceeded { count: 97 }
        );
    }
}
