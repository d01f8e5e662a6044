//! Stage-2 enrichment: structure/format parsing, text and table blocks,
//! and index-based syntactic search.

mod extract;
mod index;
mod sniff;
mod tokenize;

pub use extract::{csv_values, extract_content};
pub use index::{IndexContribution, SearchIndex};
pub use sniff::identify_format;
pub use tokenize::{normalize_term, tokenize};

use serde::{Deserialize, Serialize};

use crate::format::FormatId;
use crate::store::Pid;

/// Kind of a structural block within extracted text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BlockKind {
    Paragraph,
    TableCell,
}

/// A structural block: byte span into [`ContentRecord::text`], plus table
/// coordinates when the block is a cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Block {
    pub kind: BlockKind,
    pub start: usize,
    pub end: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub row: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub col: Option<usize>,
    /// Column header (row-0 value of the block's column). TableCell only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub header: Option<String>,
}

impl Block {
    pub fn paragraph(start: usize, end: usize) -> Self {
        Block {
            kind: BlockKind::Paragraph,
            start,
            end,
            row: None,
            col: None,
            header: None,
        }
    }

    pub fn table_cell(start: usize, end: usize, row: usize, col: usize, header: String) -> Self {
        Block {
            kind: BlockKind::TableCell,
            start,
            end,
            row: Some(row),
            col: Some(col),
            header: Some(header),
        }
    }
}

/// A normalized term with byte offsets into the original text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub term: String,
    pub start: usize,
    pub end: usize,
}

/// Parsed content of one asset: full text, structural blocks, and tokens.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContentRecord {
    pub pid: Pid,
    pub format: FormatId,
    pub text: String,
    pub blocks: Vec<Block>,
    pub tokens: Vec<Token>,
}

/// One ranked retrieval result.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchHit {
    pub pid: Pid,
    pub score: f64,
    pub snippet: String,
}
