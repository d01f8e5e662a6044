//! Gazetteer and pattern extractors over content records.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::gazetteer::{normalize_surface, ExtractionPattern, Gazetteer, GazetteerEntry};
use super::{AttributeMention, AttributeValue, CandidateRelation, Mention, Origin, RelationObject};
use crate::content::{tokenize, Block, BlockKind, ContentRecord, Token};

/// Extractor confidence constants. Engine defaults per the reference
/// configuration; override for tuned deployments.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KeaConfig {
    /// Surface form equals the canonical label after normalization.
    pub exact_confidence: f64,
    /// Alternative surface form (including honorific-prefixed hits).
    pub alt_confidence: f64,
    /// Relations derived from table rows.
    pub table_fact_confidence: f64,
}

impl Default for KeaConfig {
    fn default() -> Self {
        KeaConfig {
            exact_confidence: 1.0,
            alt_confidence: 0.8,
            table_fact_confidence: 0.9,
        }
    }
}

/// Longest-match gazetteer scan over prose and table cells.
///
/// Prose blocks are scanned as one stream per block; each table cell is
/// scanned independently with `origin = Table`. Honorific prefixes are
/// skipped for matching but stay inside the mention span, and such hits
/// score as alt-form matches.
pub fn extract_entities(record: &ContentRecord, gaz: &Gazetteer) -> Vec<Mention> {
    extract_entities_with(record, gaz, &KeaConfig::default())
}

pub fn extract_entities_with(
    record: &ContentRecord,
    gaz: &Gazetteer,
    cfg: &KeaConfig,
) -> Vec<Mention> {
    if gaz.entries.is_empty() {
        return Vec::new();
    }
    let mut mentions = Vec::new();
    for (origin, span) in scan_regions(record) {
        let tokens: Vec<Token> = record
            .tokens
            .iter()
            .filter(|t| t.start >= span.0 && t.end <= span.1)
            .cloned()
            .collect();
        scan_tokens(record, &tokens, gaz, cfg, origin, &mut mentions);
    }
    mentions.sort_by_key(|m| (m.start, m.end));
    mentions
}

/// Regions to scan: paragraph blocks as prose, cells as table; the whole
/// text as prose when the record has no blocks at all.
fn scan_regions(record: &ContentRecord) -> Vec<(Origin, (usize, usize))> {
    if record.blocks.is_empty() {
        return vec![(Origin::Prose, (0, record.text.len()))];
    }
    record
        .blocks
        .iter()
        .map(|b| match b.kind {
            BlockKind::Paragraph => (Origin::Prose, (b.start, b.end)),
            BlockKind::TableCell => (Origin::Table, (b.start, b.end)),
        })
        .collect()
}

fn scan_tokens(
    record: &ContentRecord,
    tokens: &[Token],
    gaz: &Gazetteer,
    cfg: &KeaConfig,
    origin: Origin,
    out: &mut Vec<Mention>,
) {
    let lookup = gaz.lookup();
    let honorifics = gaz.honorific_tokens();
    let max_len = gaz.max_surface_tokens();

    let mut i = 0;
    while i < tokens.len() {
        // Skip any run of honorific prefixes; the span keeps them.
        let mut j = i;
        loop {
            let next = honorifics
                .iter()
                .filter(|h| starts_with_terms(&tokens[j..], h))
                .map(|h| h.len())
                .max();
            match next {
                Some(n) if j + n < tokens.len() => j += n,
                _ => break,
            }
        }

        let mut matched = None;
        for len in (1..=max_len.min(tokens.len() - j)).rev() {
            let key: Vec<String> = tokens[j..j + len].iter().map(|t| t.term.clone()).collect();
            if let Some(entry) = lookup.get(&key) {
                matched = Some((len, *entry));
                break;
            }
        }

        if let Some((len, entry)) = matched {
            let start = tokens[i].start;
            let end = tokens[j + len - 1].end;
            out.push(make_mention(record, start, end, entry, cfg, origin));
            i = j + len;
        } else {
            i += 1;
        }
    }
}

fn starts_with_terms(tokens: &[Token], terms: &[String]) -> bool {
    tokens.len() >= terms.len() && tokens.iter().zip(terms).all(|(t, s)| &t.term == s)
}

fn make_mention(
    record: &ContentRecord,
    start: usize,
    end: usize,
    entry: &GazetteerEntry,
    cfg: &KeaConfig,
    origin: Origin,
) -> Mention {
    let surface = record.text[start..end].to_string();
    let confidence = if normalize_surface(&surface) == normalize_surface(&entry.label) {
        cfg.exact_confidence
    } else {
        cfg.alt_confidence
    };
    Mention {
        pid: record.pid.clone(),
        start,
        end,
        surface,
        canonical_label: entry.label.clone(),
        candidate_class: entry.class.clone(),
        confidence,
        origin,
    }
}

// ---------------------------------------------------------------------------
// Attributes
// ---------------------------------------------------------------------------

static ISO_DATE: OnceLock<Regex> = OnceLock::new();
static MONTH_DATE: OnceLock<Regex> = OnceLock::new();
static MEASUREMENT: OnceLock<Regex> = OnceLock::new();

const MONTHS: [&str; 12] = [
    "January", "February", "March", "April", "May", "June", "July", "August", "September",
    "October", "November", "December",
];

/// Registered measurement units, longest first so `kg` wins over `g`-less `m`.
const UNITS: [&str; 4] = ["kg", "m", "€", "%"];

/// Date and measurement extraction.
///
/// Dates: `YYYY-MM-DD` and `Month D, YYYY`, both validated against the
/// calendar and normalized to ISO-8601. Measurements: decimal number
/// followed by a registered unit token (kg, m, €, %).
pub fn extract_attributes(record: &ContentRecord) -> Vec<AttributeMention> {
    let text = &record.text;
    let mut out: Vec<AttributeMention> = Vec::new();

    let iso = ISO_DATE.get_or_init(|| Regex::new(r"(\d{4})-(\d{2})-(\d{2})").expect("valid regex"));
    for cap in iso.captures_iter(text) {
        let m = cap.get(0).expect("whole match");
        if !standalone(text, m.start(), m.end()) {
            continue;
        }
        if let Some(date) = valid_date(&cap[1], &cap[2], &cap[3]) {
            out.push(attribute(record, m.start(), m.end(), AttributeValue::Date { iso: date }));
        }
    }

    let month = MONTH_DATE.get_or_init(|| {
        Regex::new(&format!(r"({})\s+(\d{{1,2}}),\s+(\d{{4}})", MONTHS.join("|")))
            .expect("valid regex")
    });
    for cap in month.captures_iter(text) {
        let m = cap.get(0).expect("whole match");
        if !standalone(text, m.start(), m.end()) {
            continue;
        }
        let month_num = MONTHS.iter().position(|n| *n == &cap[1]).expect("month alternation") + 1;
        if let Some(date) = valid_date(&cap[3], &month_num.to_string(), &cap[2]) {
            out.push(attribute(record, m.start(), m.end(), AttributeValue::Date { iso: date }));
        }
    }

    let meas = MEASUREMENT.get_or_init(|| {
        Regex::new(&format!(r"(\d+(?:\.\d+)?)\s*({})", UNITS.join("|"))).expect("valid regex")
    });
    for cap in meas.captures_iter(text) {
        let m = cap.get(0).expect("whole match");
        if !standalone(text, m.start(), m.end()) {
            continue;
        }
        // Skip numbers that are part of an ISO date already matched.
        if out.iter().any(|a| overlaps(a.start, a.end, m.start(), m.end())) {
            continue;
        }
        let magnitude: f64 = cap[1].parse().expect("digits parse as f64");
        out.push(attribute(
            record,
            m.start(),
            m.end(),
            AttributeValue::Measurement {
                magnitude,
                unit: cap[2].to_string(),
            },
        ));
    }

    out.sort_by_key(|a| (a.start, a.end));
    out
}

fn attribute(record: &ContentRecord, start: usize, end: usize, value: AttributeValue) -> AttributeMention {
    AttributeMention {
        pid: record.pid.clone(),
        start,
        end,
        value,
        confidence: 1.0,
    }
}

/// Neither end of the match touches an adjacent alphanumeric codepoint.
fn standalone(text: &str, start: usize, end: usize) -> bool {
    let before_ok = text[..start]
        .chars()
        .next_back()
        .map_or(true, |c| !c.is_alphanumeric());
    let after_ok = text[end..].chars().next().map_or(true, |c| !c.is_alphanumeric());
    before_ok && after_ok
}

fn overlaps(a0: usize, a1: usize, b0: usize, b1: usize) -> bool {
    a0 < b1 && b0 < a1
}

fn valid_date(y: &str, m: &str, d: &str) -> Option<String> {
    let (y, m, d) = (y.parse().ok()?, m.parse().ok()?, d.parse().ok()?);
    let date = chrono::NaiveDate::from_ymd_opt(y, m, d)?;
    Some(date.format("%Y-%m-%d").to_string())
}

// ---------------------------------------------------------------------------
// Relations
// ---------------------------------------------------------------------------

/// Pattern-based relation extraction.
///
/// For each pattern (subject class, connective, object class) and each
/// mention pair of matching classes in document order, the between-text
/// must contain the connective as a contiguous token sequence. Patterns
/// whose object class is `Date` or `Measurement` pair the subject with
/// attribute mentions instead.
pub fn extract_relations(
    record: &ContentRecord,
    mentions: &[Mention],
    attributes: &[AttributeMention],
    patterns: &[ExtractionPattern],
) -> Vec<CandidateRelation> {
    let mut out = Vec::new();
    for pattern in patterns {
        let connective: Vec<String> = tokenize(&pattern.connective)
            .into_iter()
            .map(|t| t.term)
            .collect();
        if connective.is_empty() {
            continue;
        }
        let subjects = mentions
            .iter()
            .filter(|m| m.candidate_class == pattern.subject_class);
        for subject in subjects {
            match pattern.object_class.as_str() {
                "Date" | "Measurement" => {
                    for attr in attributes {
                        let kind_matches = matches!(
                            (&attr.value, pattern.object_class.as_str()),
                            (AttributeValue::Date { .. }, "Date")
                                | (AttributeValue::Measurement { .. }, "Measurement")
                        );
                        if kind_matches && connects(record, subject.end, attr.start, &connective) {
                            out.push(relation(
                                record,
                                subject,
                                RelationObject::Attribute(attr.clone()),
                                attr.start,
                                attr.end,
                                pattern,
                            ));
                        }
                    }
                }
                _ => {
                    for object in mentions
                        .iter()
                        .filter(|m| m.candidate_class == pattern.object_class)
                    {
                        if connects(record, subject.end, object.start, &connective) {
                            out.push(relation(
                                record,
                                subject,
                                RelationObject::Mention(object.clone()),
                                object.start,
                                object.end,
                                pattern,
                            ));
                        }
                    }
                }
            }
        }
    }
    out.sort_by_key(|r| (r.evidence_start, r.evidence_end, r.predicate_label.clone()));
    out
}

/// Subject must precede object; between-text must contain the connective.
fn connects(record: &ContentRecord, subj_end: usize, obj_start: usize, connective: &[String]) -> bool {
    if subj_end > obj_start {
        return false;
    }
    let between: Vec<String> = tokenize(&record.text[subj_end..obj_start])
        .into_iter()
        .map(|t| t.term)
        .collect();
    between
        .windows(connective.len())
        .any(|w| w == connective)
}

fn relation(
    record: &ContentRecord,
    subject: &Mention,
    object: RelationObject,
    obj_start: usize,
    obj_end: usize,
    pattern: &ExtractionPattern,
) -> CandidateRelation {
    CandidateRelation {
        pid: record.pid.clone(),
        subject: subject.clone(),
        predicate_label: pattern.predicate.clone(),
        object,
        confidence: pattern.confidence,
        evidence_start: subject.start.min(obj_start),
        evidence_end: obj_end.max(subject.end),
    }
}

// ---------------------------------------------------------------------------
// Table facts
// ---------------------------------------------------------------------------

/// Row-wise fact extraction from table cells.
///
/// In each data row the first gazetteer-resolvable cell is the subject;
/// every other cell yields a relation whose predicate is the normalized
/// column header (tokens joined by `_`) and whose object is the cell's
/// mention or attribute. Cells that resolve to neither are skipped.
pub fn extract_table_facts(record: &ContentRecord, gaz: &Gazetteer) -> Vec<CandidateRelation> {
    extract_table_facts_with(record, gaz, &KeaConfig::default())
}

pub fn extract_table_facts_with(
    record: &ContentRecord,
    gaz: &Gazetteer,
    cfg: &KeaConfig,
) -> Vec<CandidateRelation> {
    let mut rows: std::collections::BTreeMap<usize, Vec<&Block>> = std::collections::BTreeMap::new();
    for b in &record.blocks {
        if b.kind == BlockKind::TableCell {
            if let Some(row) = b.row {
                rows.entry(row).or_default().push(b);
            }
        }
    }

    let mut out = Vec::new();
    for (row, mut cells) in rows {
        if row == 0 {
            continue; // header row
        }
        cells.sort_by_key(|b| b.col);
        let subject_pos = cells
            .iter()
            .position(|c| resolve_cell(record, c, gaz, cfg).is_some());
        let Some(subject_pos) = subject_pos else {
            continue;
        };
        let subject = resolve_cell(record, cells[subject_pos], gaz, cfg).expect("resolvable");
        for (i, cell) in cells.iter().enumerate() {
            if i == subject_pos {
                continue;
            }
            let predicate_label = predicate_from_header(cell.header.as_deref().unwrap_or(""));
            if predicate_label.is_empty() {
                continue;
            }
            let object = if let Some(m) = resolve_cell(record, cell, gaz, cfg) {
                RelationObject::Mention(m)
            } else if let Some(a) = cell_attribute(record, cell) {
                RelationObject::Attribute(a)
            } else {
                continue;
            };
            out.push(CandidateRelation {
                pid: record.pid.clone(),
                subject: subject.clone(),
                predicate_label,
                object,
                confidence: cfg.table_fact_confidence,
                evidence_start: subject.start.min(cell.start),
                evidence_end: subject.end.max(cell.end),
            });
        }
    }
    out
}

/// Normalized column header as a predicate identifier: tokens joined by `_`.
pub fn predicate_from_header(header: &str) -> String {
    tokenize(header)
        .into_iter()
        .map(|t| t.term)
        .collect::<Vec<_>>()
        .join("_")
}

/// A cell resolves when its whole content (after optional honorific
/// prefix) is a gazetteer surface.
fn resolve_cell(
    record: &ContentRecord,
    cell: &Block,
    gaz: &Gazetteer,
    cfg: &KeaConfig,
) -> Option<Mention> {
    let tokens: Vec<Token> = record
        .tokens
        .iter()
        .filter(|t| t.start >= cell.start && t.end <= cell.end)
        .cloned()
        .collect();
    if tokens.is_empty() {
        return None;
    }
    let lookup = gaz.lookup();
    let mut skip = 0;
    for h in gaz.honorific_tokens() {
        if starts_with_terms(&tokens[skip..], &h) && skip + h.len() < tokens.len() {
            skip += h.len();
        }
    }
    let key: Vec<String> = tokens[skip..].iter().map(|t| t.term.clone()).collect();
    let entry = lookup.get(&key)?;
    Some(make_mention(
        record,
        cell.start,
        cell.end,
        entry,
        cfg,
        Origin::Table,
    ))
}

fn cell_attribute(record: &ContentRecord, cell: &Block) -> Option<AttributeMention> {
    extract_attributes(record)
        .into_iter()
        .find(|a| a.start >= cell.start && a.end <= cell.end)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::content::extract_content;
    use crate::format::{media, FormatId};
    use crate::store::Pid;

    fn pid() -> Pid {
        Pid::parse("ikmf:000000000000000000000000000000aa").unwrap()
    }

    fn text_record(text: &str) -> ContentRecord {
        extract_content(&pid(), &FormatId::new(media::TEXT_PLAIN), text.as_bytes()).unwrap()
    }

    fn csv_record(text: &str) -> ContentRecord {
        extract_content(&pid(), &FormatId::new(media::TEXT_CSV), text.as_bytes()).unwrap()
    }

    fn demo_gazetteer() -> Gazetteer {
        Gazetteer::from_json(
            r#"{
              "honorifics": ["Dr.", "Prof."],
              "entries": [
                {"surface": "Smith", "label": "Smith", "class": "Person"},
                {"surface": "Project X", "label": "Project X", "class": "Project"},
                {"surface": "FernUni", "label": "FernUni", "class": "Organisation"}
              ]
            }"#,
        )
        .unwrap()
    }

    #[test]
    fn gazetteer_scan_finds_person_and_project() {
        let rec = text_record("Dr. Smith leads Project X");
        let mentions = extract_entities(&rec, &demo_gazetteer());
        assert_eq!(mentions.len(), 2);
        assert_eq!(mentions[0].candidate_class, "Person");
        assert_eq!(mentions[0].surface, "Dr. Smith");
        assert_eq!(mentions[0].canonical_label, "Smith");
        assert_eq!(mentions[0].confidence, 0.8); // honorific-prefixed alt form
        assert_eq!(mentions[1].candidate_class, "Project");
        assert_eq!(mentions[1].confidence, 1.0);
    }

    #[test]
    fn empty_gazetteer_finds_nothing() {
        let rec = text_record("Dr. Smith leads Project X");
        assert!(extract_entities(&rec, &Gazetteer::default()).is_empty());
    }

    #[test]
    fn prose_and_table_origins_are_separate_mentions() {
        let rec = csv_record("name,org\nSmith,FernUni\n");
        let mut text = rec.text.clone();
        text.push_str("\nSmith visited.\n");
        // Build a record carrying both a table and a paragraph.
        let mut blocks = rec.blocks.clone();
        let para_start = rec.text.len() + 1;
        blocks.push(Block::paragraph(para_start, para_start + "Smith visited.".len()));
        let record = ContentRecord {
            pid: pid(),
            format: FormatId::new(media::TEXT_CSV),
            tokens: tokenize(&text),
            text,
            blocks,
        };
        let mentions = extract_entities(&record, &demo_gazetteer());
        let smiths: Vec<&Mention> = mentions
            .iter()
            .filter(|m| m.canonical_label == "Smith")
            .collect();
        assert_eq!(smiths.len(), 2);
        assert!(smiths.iter().any(|m| m.origin == Origin::Table));
        assert!(smiths.iter().any(|m| m.origin == Origin::Prose));
    }

    #[test]
    fn mention_span_contains_surface() {
        let rec = text_record("Prof. Dr. Smith joined Project X and FernUni.");
        for m in extract_entities(&rec, &demo_gazetteer()) {
            assert_eq!(&rec.text[m.start..m.end], m.surface);
        }
    }

    #[test]
    fn iso_date_extracted_and_normalized() {
        let rec = text_record("on 2023-05-01 the survey began");
        let attrs = extract_attributes(&rec);
        assert_eq!(attrs.len(), 1);
        assert_eq!(attrs[0].value, AttributeValue::Date { iso: "2023-05-01".into() });
    }

    #[test]
    fn month_name_date_normalized() {
        let rec = text_record("Signed on May 1, 2023 in Hagen.");
        let attrs = extract_attributes(&rec);
        assert_eq!(attrs.len(), 1);
        assert_eq!(attrs[0].value, AttributeValue::Date { iso: "2023-05-01".into() });
    }

    #[test]
    fn invalid_calendar_date_rejected() {
        let rec = text_record("bogus 2023-13-40 stamp");
        assert!(extract_attributes(&rec).is_empty());
    }

    #[test]
    fn measurement_with_unit() {
        let rec = text_record("the sample weighs 7.5 kg today");
        let attrs = extract_attributes(&rec);
        assert_eq!(attrs.len(), 1);
        assert_eq!(
            attrs[0].value,
            AttributeValue::Measurement { magnitude: 7.5, unit: "kg".into() }
        );
    }

    #[test]
    fn unit_must_be_token_bounded() {
        let rec = text_record("7 meters is not a bare unit, 7 m is");
        let attrs = extract_attributes(&rec);
        assert_eq!(attrs.len(), 1);
        assert_eq!(&rec.text[attrs[0].start..attrs[0].end], "7 m");
    }

    fn pi_pattern() -> Vec<ExtractionPattern> {
        vec![ExtractionPattern {
            subject_class: "Person".into(),
            connective: "is principal investigator for".into(),
            object_class: "Project".into(),
            predicate: "isPrincipalInvestigatorFor".into(),
            confidence: 1.0,
        }]
    }

    #[test]
    fn principal_investigator_pattern_matches() {
        let rec = text_record("Dr. Smith is principal investigator for Project X");
        let mentions = extract_entities(&rec, &demo_gazetteer());
        let rels = extract_relations(&rec, &mentions, &[], &pi_pattern());
        assert_eq!(rels.len(), 1);
        assert_eq!(rels[0].predicate_label, "isPrincipalInvestigatorFor");
        assert_eq!(rels[0].subject.canonical_label, "Smith");
        match &rels[0].object {
            RelationObject::Mention(m) => assert_eq!(m.canonical_label, "Project X"),
            _ => panic!("expected mention object"),
        }
    }

    #[test]
    fn missing_connective_yields_nothing() {
        let rec = text_record("Dr. Smith talked about Project X");
        let mentions = extract_entities(&rec, &demo_gazetteer());
        assert!(extract_relations(&rec, &mentions, &[], &pi_pattern()).is_empty());
    }

    #[test]
    fn class_filter_applies() {
        // Two Person mentions but the pattern requires a Project object.
        let rec = text_record("Smith is principal investigator for Smith");
        let mentions = extract_entities(&rec, &demo_gazetteer());
        assert_eq!(mentions.len(), 2);
        assert!(extract_relations(&rec, &mentions, &[], &pi_pattern()).is_empty());
    }

    #[test]
    fn table_row_yields_header_predicate_fact() {
        let rec = csv_record("name,org\nSmith,FernUni\n");
        let rels = extract_table_facts(&rec, &demo_gazetteer());
        assert_eq!(rels.len(), 1);
        let r = &rels[0];
        assert_eq!(r.subject.canonical_label, "Smith");
        assert_eq!(r.predicate_label, "org");
        assert_eq!(r.confidence, 0.9);
        match &r.object {
            RelationObject::Mention(m) => {
                assert_eq!(m.canonical_label, "FernUni");
                assert_eq!(m.origin, Origin::Table);
            }
            _ => panic!("expected mention object"),
        }
    }

    #[test]
    fn header_only_table_yields_nothing() {
        let rec = csv_record("name,org\n");
        assert!(extract_table_facts(&rec, &demo_gazetteer()).is_empty());
    }

    #[test]
    fn unresolvable_row_is_skipped() {
        let rec = csv_record("name,org\nNobody,Unknown Inc\n");
        assert!(extract_table_facts(&rec, &demo_gazetteer()).is_empty());
    }

    #[test]
    fn attribute_cells_become_attribute_objects() {
        let rec = csv_record("name,joined\nSmith,2023-05-01\n");
        let rels = extract_table_facts(&rec, &demo_gazetteer());
        assert_eq!(rels.len(), 1);
        assert_eq!(rels[0].predicate_label, "joined");
        match &rels[0].object {
            RelationObject::Attribute(a) => {
                assert_eq!(a.value, AttributeValue::Date { iso: "2023-05-01".into() })
            }
            _ => panic!("expected attribute object"),
        }
    }

    #[test]
    fn multiword_header_becomes_identifier() {
        assert_eq!(predicate_from_header("Member Of"), "member_of");
        assert_eq!(predicate_from_header(""), "");
    }
}
