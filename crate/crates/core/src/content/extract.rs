//! Extractors for the registered text formats.
//!
//! Plain text and markdown-lite produce paragraph blocks; CSV produces one
//! table cell block per cell. Binary formats have registry entries for
//! identification and policy purposes but no extractor.

use super::{tokenize, Block, ContentRecord};
use crate::error::{Error, Result};
use crate::format::{media, FormatId};
use crate::store::Pid;

/// Parse the structure and format of an asset's bytes into a [`ContentRecord`].
///
/// Supported formats: `text/plain`, `text/csv`, `text/markdown-lite`.
pub fn extract_content(pid: &Pid, format: &FormatId, bytes: &[u8]) -> Result<ContentRecord> {
    let decode = |bytes: &[u8]| -> Result<String> {
        String::from_utf8(bytes.to_vec())
            .map_err(|e| Error::Decode(format!("{pid}: invalid UTF-8 at byte {}", e.utf8_error().valid_up_to())))
    };
    let (text, blocks) = match format.as_str() {
        media::TEXT_PLAIN => {
            let text = decode(bytes)?;
            let blocks = paragraph_blocks(&text);
            (text, blocks)
        }
        media::TEXT_MARKDOWN_LITE => {
            let text = decode(bytes)?;
            let blocks = markdown_lite_blocks(&text);
            (text, blocks)
        }
        media::TEXT_CSV => {
            let text = decode(bytes)?;
            let blocks = csv_blocks(&text)?;
            (text, blocks)
        }
        other => return Err(Error::UnsupportedFormat(other.to_string())),
    };
    let tokens = tokenize(&text);
    Ok(ContentRecord {
        pid: pid.clone(),
        format: format.clone(),
        text,
        blocks,
        tokens,
    })
}

/// Chunks separated by blank lines become paragraph blocks.
fn paragraph_blocks(text: &str) -> Vec<Block> {
    let mut blocks = Vec::new();
    let mut start: Option<usize> = None;
    let mut pos = 0;
    for line in text.split_inclusive('\n') {
        let is_blank = line.trim().is_empty();
        if is_blank {
            if let Some(s) = start.take() {
                blocks.push(Block::paragraph(s, pos));
            }
        } else if start.is_none() {
            start = Some(pos);
        }
        pos += line.len();
    }
    if let Some(s) = start {
        blocks.push(Block::paragraph(s, trim_end_offset(text, s, text.len())));
    }
    // Trim trailing newlines off closed paragraphs too.
    for b in &mut blocks {
        b.end = trim_end_offset(text, b.start, b.end);
    }
    blocks
}

fn trim_end_offset(text: &str, start: usize, end: usize) -> usize {
    start + text[start..end].trim_end().len()
}

/// Markdown-lite: a `#`-prefixed line is its own paragraph block (the
/// heading text, hashes excluded); other chunks behave like plain text.
fn markdown_lite_blocks(text: &str) -> Vec<Block> {
    let mut blocks = Vec::new();
    let mut para_start: Option<usize> = None;
    let mut pos = 0;
    let close = |start: &mut Option<usize>, end: usize, blocks: &mut Vec<Block>| {
        if let Some(s) = start.take() {
            blocks.push(Block::paragraph(s, trim_end_offset(text, s, end)));
        }
    };
    for line in text.split_inclusive('\n') {
        let trimmed = line.trim_end();
        if trimmed.trim_start().starts_with('#') {
            close(&mut para_start, pos, &mut blocks);
            let hashes = line.len() - line.trim_start_matches([' ', '#']).len();
            let head_start = pos + hashes;
            let head_end = trim_end_offset(text, head_start, pos + line.len());
            if head_start < head_end {
                blocks.push(Block::paragraph(head_start, head_end));
            }
        } else if trimmed.is_empty() {
            close(&mut para_start, pos, &mut blocks);
        } else if para_start.is_none() {
            para_start = Some(pos);
        }
        pos += line.len();
    }
    close(&mut para_start, text.len(), &mut blocks);
    blocks
}

/// A parsed CSV field: unescaped value plus the byte span of its content
/// in the source text (inside the quotes for quoted fields).
#[derive(Debug, Clone, PartialEq)]
struct CsvField {
    value: String,
    start: usize,
    end: usize,
}

/// One table cell block per cell, header row included. Cell header is the
/// row-0 value of the cell's column.
fn csv_blocks(text: &str) -> Result<Vec<Block>> {
    let rows = parse_csv(text)?;
    let headers: Vec<String> = rows
        .first()
        .map(|r| r.iter().map(|f| f.value.clone()).collect())
        .unwrap_or_default();
    let mut blocks = Vec::new();
    for (row_idx, row) in rows.iter().enumerate() {
        for (col_idx, field) in row.iter().enumerate() {
            let header = headers.get(col_idx).cloned().unwrap_or_default();
            blocks.push(Block::table_cell(
                field.start, field.end, row_idx, col_idx, header,
            ));
        }
    }
    Ok(blocks)
}

/// Parsed CSV cell values by row (unescaped, header row included).
pub fn csv_values(text: &str) -> Result<Vec<Vec<String>>> {
    Ok(parse_csv(text)?
        .into_iter()
        .map(|row| row.into_iter().map(|f| f.value).collect())
        .collect())
}

/// Span-tracking CSV parser.
///
/// Dialect is fixed: comma separator, `"` quoting with `""` escapes, LF or
/// CRLF row endings, first row is the header. No dialect sniffing. A
/// hand-rolled parser because cell byte spans into the source text are part
/// of the block contract.
fn parse_csv(text: &str) -> Result<Vec<Vec<CsvField>>> {
    let bytes = text.as_bytes();
    let mut rows: Vec<Vec<CsvField>> = Vec::new();
    let mut row: Vec<CsvField> = Vec::new();
    let mut i = 0;

    while i < bytes.len() {
        // One field per iteration.
        if bytes[i] == b'"' {
            let content_start = i + 1;
            let mut value = String::new();
            let mut j = content_start;
            let content_end;
            loop {
                match bytes.get(j) {
                    Some(b'"') if bytes.get(j + 1) == Some(&b'"') => {
                        value.push('"');
                        j += 2;
                    }
                    Some(b'"') => {
                        content_end = j;
                        j += 1;
                        break;
                    }
                    Some(_) => {
                        let c = text[j..].chars().next().expect("in-bounds char");
                        value.push(c);
                        j += c.len_utf8();
                    }
                    None => {
                        return Err(Error::Parse(format!(
                            "unterminated quoted CSV field starting at byte {}",
                            content_start - 1
                        )))
                    }
                }
            }
            row.push(CsvField {
                value,
                start: content_start,
                end: content_end,
            });
            i = j;
            // After a quoted field only a separator, row end, or EOF is legal.
            match bytes.get(i) {
                Some(b',') => i += 1,
                Some(b'\n') => {
                    i += 1;
                    rows.push(std::mem::take(&mut row));
                }
                Some(b'\r') if bytes.get(i + 1) == Some(&b'\n') => {
                    i += 2;
                    rows.push(std::mem::take(&mut row));
                }
                None => {}
                Some(_) => {
                    return Err(Error::Parse(format!(
                        "unexpected byte after closing quote at offset {i}"
                    )))
                }
            }
        } else {
            let start = i;
            while i < bytes.len() && bytes[i] != b',' && bytes[i] != b'\n' && bytes[i] != b'\r' {
                i += 1;
            }
            row.push(CsvField {
                value: text[start..i].to_string(),
                start,
                end: i,
            });
            match bytes.get(i) {
                Some(b',') => i += 1,
                Some(b'\n') => {
                    i += 1;
                    rows.push(std::mem::take(&mut row));
                }
                Some(b'\r') if bytes.get(i + 1) == Some(&b'\n') => {
                    i += 2;
                    rows.push(std::mem::take(&mut row));
                }
                Some(b'\r') => {
                    return Err(Error::Parse(format!("bare carriage return at offset {i}")))
                }
                _ => {}
            }
        }
    }
    if !row.is_empty() {
        rows.push(row);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::content::BlockKind;

    fn pid() -> Pid {
        Pid::parse("ikmf:00000000000000000000000000000001").unwrap()
    }

    fn csv_record(text: &str) -> ContentRecord {
        extract_content(&pid(), &FormatId::new(media::TEXT_CSV), text.as_bytes()).unwrap()
    }

    #[test]
    fn two_by_two_csv_yields_four_cells() {
        let rec = csv_record("name,org\nSmith,FernUni\n");
        let cells: Vec<&Block> = rec
            .blocks
            .iter()
            .filter(|b| b.kind == BlockKind::TableCell)
            .collect();
        assert_eq!(cells.len(), 4);
        let cell = cells
            .iter()
            .find(|b| b.row == Some(1) && b.col == Some(0))
            .unwrap();
        assert_eq!(cell.header.as_deref(), Some("name"));
        assert_eq!(&rec.text[cell.start..cell.end], "Smith");
    }

    #[test]
    fn empty_text_file_has_no_blocks() {
        let rec = extract_content(&pid(), &FormatId::new(media::TEXT_PLAIN), b"").unwrap();
        assert!(rec.text.is_empty());
        assert!(rec.blocks.is_empty());
        assert!(rec.tokens.is_empty());
    }

    #[test]
    fn unregistered_format_is_unsupported() {
        let err = extract_content(&pid(), &FormatId::new(media::IMAGE_TIFF), b"II*\0").unwrap_err();
        assert!(matches!(err, Error::UnsupportedFormat(_)));
    }

    #[test]
    fn invalid_utf8_is_decode_error() {
        let err =
            extract_content(&pid(), &FormatId::new(media::TEXT_PLAIN), &[0x80, 0x81]).unwrap_err();
        assert!(matches!(err, Error::Decode(_)));
    }

    #[test]
    fn paragraphs_split_on_blank_lines() {
        let rec = extract_content(
            &pid(),
            &FormatId::new(media::TEXT_PLAIN),
            b"first paragraph\nstill first\n\nsecond paragraph\n",
        )
        .unwrap();
        assert_eq!(rec.blocks.len(), 2);
        assert_eq!(&rec.text[rec.blocks[0].start..rec.blocks[0].end], "first paragraph\nstill first");
        assert_eq!(&rec.text[rec.blocks[1].start..rec.blocks[1].end], "second paragraph");
    }

    #[test]
    fn markdown_lite_headings_are_own_blocks() {
        let rec = extract_content(
            &pid(),
            &FormatId::new(media::TEXT_MARKDOWN_LITE),
            b"# Title\n\nBody text here.\n## Sub\nMore body.\n",
        )
        .unwrap();
        let slices: Vec<&str> = rec
            .blocks
            .iter()
            .map(|b| &rec.text[b.start..b.end])
            .collect();
        assert_eq!(slices, ["Title", "Body text here.", "Sub", "More body."]);
    }

    #[test]
    fn quoted_cells_unescape_and_span_interior() {
        let rec = csv_record("name,note\n\"Smith, J.\",\"said \"\"hi\"\"\"\n");
        let cell = rec
            .blocks
            .iter()
            .find(|b| b.row == Some(1) && b.col == Some(0))
            .unwrap();
        assert_eq!(&rec.text[cell.start..cell.end], "Smith, J.");
        // Value with escapes lives in the relation extractor via fields; the
        // block span stays raw but non-empty.
        let note = rec
            .blocks
            .iter()
            .find(|b| b.row == Some(1) && b.col == Some(1))
            .unwrap();
        assert!(cell.start < cell.end && note.start < note.end);
    }

    #[test]
    fn header_only_csv_has_only_row_zero() {
        let rec = csv_record("name,org\n");
        assert!(rec.blocks.iter().all(|b| b.row == Some(0)));
        assert_eq!(rec.blocks.len(), 2);
    }

    #[test]
    fn csv_rows_share_column_counts() {
        let rec = csv_record("a,b,c\n1,2,3\n4,5,6\n");
        for row in 0..3 {
            let count = rec.blocks.iter().filter(|b| b.row == Some(row)).count();
            assert_eq!(count, 3);
        }
    }

    #[test]
    fn unterminated_quote_is_parse_error() {
        assert!(matches!(
            csv_blocks("a,b\n\"open,2\n"),
            Err(Error::Parse(_))
        ));
    }
}
