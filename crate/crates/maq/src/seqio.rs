//! FASTA input and output.
//!
//! Records are identified by the first whitespace-delimited token of their
//! header line. Sequence lines may wrap; residues are uppercased and the
//! alphabet of the whole file is inferred once all records are read.

use std::collections::HashSet;
use std::fmt;
use std::io::{self, BufRead, Write};

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FastaError {
    #[error("input contains no FASTA records")]
    EmptyFile,
    #[error("duplicate record id '{0}'")]
    DuplicateId(String),
    #[error("invalid residue '{ch}' in record '{id}' (line {line})")]
    InvalidChar { id: String, ch: char, line: usize },
    #[error("sequence data on line {0} before the first '>' header")]
    MissingHeader(usize),
    #[error("header on line {0} has no identifier")]
    MissingId(usize),
    #[error("record '{0}' has no residues")]
    EmptySequence(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Alphabet {
    Protein,
    Nucleotide,
}

impl fmt::Display for Alphabet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Alphabet::Protein => f.write_str("protein"),
            Alphabet::Nucleotide => f.write_str("nucleotide"),
        }
    }
}

const NUCLEOTIDE_SYMBOLS: &[u8] = b"ACGTUN";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceRecord {
    pub id: String,
    /// Header text after the id, if any. Carried through to output only.
    pub description: Option<String>,
    pub residues: String,
}

impl SequenceRecord {
    pub fn new(id: impl Into<String>, residues: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            description: None,
            residues: residues.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.residues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.residues.is_empty()
    }
}

/// An ordered, validated set of records sharing one alphabet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    records: Vec<SequenceRecord>,
    alphabet: Alphabet,
}

impl Dataset {
    /// Validates ids, residues and infers the alphabet.
    pub fn from_records(records: Vec<SequenceRecord>) -> Result<Self, FastaError> {
        if records.is_empty() {
            return Err(FastaError::EmptyFile);
        }
        let mut seen = HashSet::with_capacity(records.len());
        for record in &records {
            if !seen.insert(record.id.as_str()) {
                return Err(FastaError::DuplicateId(record.id.clone()));
            }
            if record.residues.is_empty() {
                return Err(FastaError::EmptySequence(record.id.clone()));
            }
            if let Some(ch) = record.residues.chars().find(|c| !c.is_ascii_uppercase()) {
                return Err(FastaError::InvalidChar {
                    id: record.id.clone(),
                    ch,
                    line: 0,
                });
            }
        }
        let alphabet = infer_alphabet(&records);
        Ok(Self { records, alphabet })
    }

    pub fn records(&self) -> &[SequenceRecord] {
        &self.records
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    /// Number of records (L).
    pub fn count(&self) -> usize {
        self.records.len()
    }

    /// Longest record length (N).
    pub fn max_len(&self) -> usize {
        self.records.iter().map(SequenceRecord::len).max().unwrap_or(0)
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.records.iter().position(|r| r.id == id)
    }

    pub fn get(&self, index: usize) -> &SequenceRecord {
        &self.records[index]
    }
}

fn infer_alphabet(records: &[SequenceRecord]) -> Alphabet {
    let nucleotide = records
        .iter()
        .all(|r| r.residues.bytes().all(|b| NUCLEOTIDE_SYMBOLS.contains(&b)));
    if nucleotide {
        Alphabet::Nucleotide
    } else {
        Alphabet::Protein
    }
}

/// Parses FASTA text from a buffered reader.
pub fn parse_fasta<R: BufRead>(reader: R) -> Result<Dataset, FastaError> {
    let mut records: Vec<SequenceRecord> = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let line = line.trim_end_matches(['\r', '\n']);
        if let Some(header) = line.strip_prefix('>') {
            let header = header.trim();
            let mut parts = header.splitn(2, char::is_whitespace);
            let id = parts
                .next()
                .filter(|s| !s.is_empty())
                .ok_or(FastaError::MissingId(lineno))?;
            let description = parts
                .next()
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(str::to_string);
            records.push(SequenceRecord {
                id: id.to_string(),
                description,
                residues: String::new(),
            });
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let record = records.last_mut().ok_or(FastaError::MissingHeader(lineno))?;
        for ch in line.chars().filter(|c| !c.is_whitespace()) {
            if !ch.is_ascii_alphabetic() {
                return Err(FastaError::InvalidChar {
                    id: record.id.clone(),
                    ch,
                    line: lineno,
                });
            }
            record.residues.push(ch.to_ascii_uppercase());
        }
    }
    Dataset::from_records(records)
}

pub fn parse_fasta_str(text: &str) -> Result<Dataset, FastaError> {
    parse_fasta(text.as_bytes())
}

/// Writes `(header, sequence)` pairs as FASTA with 60-column wrapping.
pub fn write_fasta_entries<'a, W, I>(mut out: W, entries: I) -> io::Result<()>
where
    W: Write,
    I: IntoIterator<Item = (&'a str, Option<&'a str>, &'a str)>,
{
    for (id, description, seq) in entries {
        match description {
            Some(desc) => writeln!(out, ">{id} {desc}")?,
            None => writeln!(out, ">{id}")?,
        }
        for chunk in seq.as_bytes().chunks(60) {
            out.write_all(chunk)?;
            out.write_all(b"\n")?;
        }
    }
    Ok(())
}

pub fn write_fasta<W: Write>(out: W, dataset: &Dataset) -> io::Result<()> {
    write_fasta_entries(
        out,
        dataset
            .records()
            .iter()
            .map(|r| (r.id.as_str(), r.description.as_deref(), r.residues.as_str())),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const SAMPLE_FASTA: &str = "\
>Base
NVRLMLRL
>Control
NVRLMLRL
>Insertion
MNVRLMLRL
>Deletion
NRLMLRL
>Point
NVMLRLNL
>InsertionAndDeletion
MNVRLRL
";

    #[test]
    fn sample_dataset_shape() {
        let ds = parse_fasta_str(SAMPLE_FASTA).unwrap();
        assert_eq!(ds.count(), 6);
        assert_eq!(ds.max_len(), 9);
        assert_eq!(ds.alphabet(), Alphabet::Protein);
        let ids: Vec<_> = ds.records().iter().map(|r| r.id.as_str()).collect();
        assert_eq!(
            ids,
            [
                "Base",
                "Control",
                "Insertion",
                "Deletion",
                "Point",
                "InsertionAndDeletion"
            ]
        );
    }

    #[test]
    fn single_nucleotide_record() {
        let ds = parse_fasta_str(">a\nACGT\n").unwrap();
        assert_eq!(ds.count(), 1);
        assert_eq!(ds.max_len(), 4);
        assert_eq!(ds.alphabet(), Alphabet::Nucleotide);
    }

    #[test]
    fn duplicate_id_rejected() {
        let err = parse_fasta_str(">a\nACGT\n>a\nTTTT\n").unwrap_err();
        assert!(matches!(err, FastaError::DuplicateId(id) if id == "a"));
    }

    #[test]
    fn error_paths() {
        assert!(matches!(parse_fasta_str(""), Err(FastaError::EmptyFile)));
        assert!(matches!(parse_fasta_str("\n\n"), Err(FastaError::EmptyFile)));
        assert!(matches!(
            parse_fasta_str("ACGT\n>a\nAC\n"),
            Err(FastaError::MissingHeader(1))
        ));
        assert!(matches!(
            parse_fasta_str(">a\nAC-GT\n"),
            Err(FastaError::InvalidChar { ch: '-', line: 2, .. })
        ));
        assert!(matches!(
            parse_fasta_str(">a\nAC1\n"),
            Err(FastaError::InvalidChar { ch: '1', .. })
        ));
        assert!(matches!(
            parse_fasta_str(">a\n>b\nAC\n"),
            Err(FastaError::EmptySequence(id)) if id == "a"
        ));
        assert!(matches!(parse_fasta_str(">\nAC\n"), Err(FastaError::MissingId(1))));
    }

    #[test]
    fn wrapped_lowercase_and_description() {
        let ds = parse_fasta_str(">x some words here\r\nacg\r\n  tu \n\n>y\nMK\n").unwrap();
        let x = ds.get(0);
        assert_eq!(x.id, "x");
        assert_eq!(x.description.as_deref(), Some("some words here"));
        assert_eq!(x.residues, "ACGTU");
        // MK forces protein for the whole file
        assert_eq!(ds.alphabet(), Alphabet::Protein);
        assert_eq!(ds.index_of("y"), Some(1));
    }

    fn arb_dataset() -> impl Strategy<Value = Vec<SequenceRecord>> {
        prop::collection::vec(("[A-Z]{1,150}", prop::option::of("[a-z ]{0,12}")), 1..8).prop_map(|items| {
            items
                .into_iter()
                .enumerate()
                .map(|(i, (residues, desc))| SequenceRecord {
                    id: format!("seq{i}"),
                    description: desc.map(|d| d.trim().to_string()).filter(|d| !d.is_empty()),
                    residues,
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn fasta_round_trip(records in arb_dataset()) {
            let ds = Dataset::from_records(records).unwrap();
            let mut buf = Vec::new();
            write_fasta(&mut buf, &ds).unwrap();
            let back = parse_fasta(buf.as_slice()).unwrap();
            prop_assert_eq!(back, ds);
        }
    }
}
