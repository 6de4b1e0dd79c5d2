//! Split evidence documents into passages for ranking and augmentation.
//!
//! Paragraph granularity greedily merges consecutive whole paragraphs up to a
//! word cap (default 256) and splits oversized paragraphs at sentence, then at
//! hard word boundaries. Sentence granularity emits one passage per sentence.

use serde::{Deserialize, Serialize};

use crate::corpus::EvidenceDocument;

/// Default word cap for paragraph passages.
pub const DEFAULT_MAX_WORDS: usize = 256;

/// Chunking granularity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    Paragraph,
    Sentence,
}

impl std::fmt::Display for Granularity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Granularity::Paragraph => write!(f, "para"),
            Granularity::Sentence => write!(f, "sent"),
        }
    }
}

/// A contiguous slice of an evidence document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Passage {
    pub passage_id: String,
    pub parent_doc_id: String,
    /// Copied from the parent document so ranking can join passages to
    /// source backgrounds without the document at hand.
    pub source_domain: String,
    pub text: String,
    pub word_count: usize,
    pub granularity: Granularity,
    /// Byte offsets into the parent document content.
    pub char_span: (usize, usize),
}

// Word tokens that end with '.' but do not end a sentence.
const ABBREVIATIONS: &[&str] = &[
    "al", "approx", "co", "dr", "e.g", "etc", "fig", "i.e", "inc", "jr", "ltd", "mr", "mrs",
    "ms", "prof", "sr", "st", "u.k", "u.n", "u.s", "vol", "vs",
];

/// Byte spans of whitespace-delimited words within `text`, offset by `base`.
fn word_spans(text: &str, base: usize) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut start: Option<usize> = None;
    for (idx, ch) in text.char_indices() {
        if ch.is_whitespace() {
            if let Some(s) = start.take() {
                spans.push((base + s, base + idx));
            }
        } else if start.is_none() {
            start = Some(idx);
        }
    }
    if let Some(s) = start {
        spans.push((base + s, base + text.len()));
    }
    spans
}

/// Trimmed byte spans of paragraph blocks. A paragraph boundary is a blank
/// line (two or more newlines with only horizontal whitespace between).
fn paragraph_spans(content: &str) -> Vec<(usize, usize)> {
    let mut blocks = Vec::new();
    let mut block_start: Option<usize> = None;
    let mut offset = 0usize;
    for line in content.split_inclusive('\n') {
        let line_start = offset;
        offset += line.len();
        if line.trim().is_empty() {
            if let Some(start) = block_start.take() {
                blocks.push((start, line_start));
            }
        } else if block_start.is_none() {
            block_start = Some(line_start);
        }
    }
    if let Some(start) = block_start {
        blocks.push((start, content.len()));
    }
    blocks
        .into_iter()
        .filter_map(|(start, end)| trim_span(content, start, end))
        .collect()
}

/// Shrink a span to its non-whitespace extent; `None` if all whitespace.
fn trim_span(content: &str, start: usize, end: usize) -> Option<(usize, usize)> {
    let slice = &content[start..end];
    let first = slice.find(|c: char| !c.is_whitespace())?;
    let last = slice.rfind(|c: char| !c.is_whitespace())?;
    let last_end = last + slice[last..].chars().next().map_or(1, char::len_utf8);
    Some((start + first, start + last_end))
}

fn is_abbreviation(token: &str) -> bool {
    ABBREVIATIONS.contains(&token.to_ascii_lowercase().as_str())
}

/// Trimmed byte spans of sentences within `content[start..end]`.
///
/// Splits after `. ! ?` (plus closing quotes/brackets) when followed by
/// whitespace and an uppercase letter; a '.' preceded by a known abbreviation
/// does not split.
fn sentence_spans(content: &str, start: usize, end: usize) -> Vec<(usize, usize)> {
    let slice = &content[start..end];
    let chars: Vec<(usize, char)> = slice.char_indices().collect();
    let mut spans = Vec::new();
    let mut sent_start = 0usize;
    let mut i = 0usize;
    while i < chars.len() {
        let (idx, ch) = chars[i];
        if ch == '.' || ch == '!' || ch == '?' {
            // Absorb closing quotes and brackets into the sentence.
            let mut j = i + 1;
            while j < chars.len() && matches!(chars[j].1, '"' | '\'' | '\u{2019}' | '\u{201D}' | ')' | ']') {
                j += 1;
            }
            let sentence_end = chars.get(j).map_or(slice.len(), |&(k, _)| k);
            // Require whitespace then an uppercase letter to split.
            let mut k = j;
            let mut saw_space = false;
            while k < chars.len() && chars[k].1.is_whitespace() {
                saw_space = true;
                k += 1;
            }
            let next_upper = chars.get(k).is_some_and(|&(_, c)| c.is_uppercase());
            let mut split = saw_space && next_upper;
            if split && ch == '.' {
                // Token immediately before the period.
                let token_end = idx;
                let mut t = i;
                while t > 0 && !chars[t - 1].1.is_whitespace() {
                    t -= 1;
                }
                let token = slice[chars[t].0..token_end].trim_matches(|c: char| !c.is_alphanumeric() && c != '.');
                if is_abbreviation(token.trim_end_matches('.')) {
                    split = false;
                }
            }
            if split {
                spans.push((start + sent_start, start + sentence_end));
                sent_start = chars.get(k).map_or(slice.len(), |&(m, _)| m);
                i = k;
                continue;
            }
            i = j;
            continue;
        }
        i += 1;
    }
    if sent_start < slice.len() {
        spans.push((start + sent_start, start + slice.len()));
    }
    spans
        .into_iter()
        .filter_map(|(s, e)| trim_span(content, s, e))
        .collect()
}

fn make_passage(
    doc: &EvidenceDocument,
    granularity: Granularity,
    index: usize,
    span: (usize, usize),
) -> Passage {
    let text = doc.content[span.0..span.1].to_string();
    let word_count = text.split_whitespace().count();
    let tag = match granularity {
        Granularity::Paragraph => 'p',
        Granularity::Sentence => 's',
    };
    Passage {
        passage_id: format!("{}#{}{}", doc.doc_id, tag, index),
        parent_doc_id: doc.doc_id.clone(),
        source_domain: doc.source_domain.clone(),
        text,
        word_count,
        granularity,
        char_span: span,
    }
}

/// Split one oversized paragraph into spans of at most `max_words` words,
/// first at sentence boundaries, then at hard word boundaries.
fn split_oversized(content: &str, span: (usize, usize), max_words: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut acc: Option<(usize, usize, usize)> = None; // (start, end, words)
    for sentence in sentence_spans(content, span.0, span.1) {
        let words = word_spans(&content[sentence.0..sentence.1], sentence.0);
        if words.is_empty() {
            continue;
        }
        if words.len() > max_words {
            if let Some((s, e, _)) = acc.take() {
                out.push((s, e));
            }
            for chunk in words.chunks(max_words) {
                out.push((chunk[0].0, chunk[chunk.len() - 1].1));
            }
            continue;
        }
        match acc {
            Some((s, _, w)) if w + words.len() <= max_words => {
                acc = Some((s, sentence.1, w + words.len()));
            }
            Some((s, e, _)) => {
                out.push((s, e));
                acc = Some((sentence.0, sentence.1, words.len()));
            }
            None => acc = Some((sentence.0, sentence.1, words.len())),
        }
    }
    if let Some((s, e, _)) = acc {
        out.push((s, e));
    }
    out
}

/// Chunk a document into paragraph passages of at most `max_words` words.
///
/// Consecutive whole paragraphs merge into one passage while the total stays
/// within the cap; an oversized paragraph is split on its own.
pub fn chunk_paragraphs(doc: &EvidenceDocument, max_words: usize) -> Vec<Passage> {
    assert!(max_words >= 1, "max_words must be at least 1");
    let content = &doc.content;
    let mut spans: Vec<(usize, usize)> = Vec::new();
    let mut acc: Option<(usize, usize, usize)> = None; // (start, end, words)
    for para in paragraph_spans(content) {
        let words = content[para.0..para.1].split_whitespace().count();
        if words > max_words {
            if let Some((s, e, _)) = acc.take() {
                spans.push((s, e));
            }
            spans.extend(split_oversized(content, para, max_words));
            continue;
        }
        match acc {
            Some((s, _, w)) if w + words <= max_words => acc = Some((s, para.1, w + words)),
            Some((s, e, _)) => {
                spans.push((s, e));
                acc = Some((para.0, para.1, words));
            }
            None => acc = Some((para.0, para.1, words)),
        }
    }
    if let Some((s, e, _)) = acc {
        spans.push((s, e));
    }
    spans
        .into_iter()
        .enumerate()
        .map(|(i, span)| make_passage(doc, Granularity::Paragraph, i, span))
        .collect()
}

/// Chunk a document into one passage per sentence.
pub fn chunk_sentences(doc: &EvidenceDocument) -> Vec<Passage> {
    let mut passages = Vec::new();
    for para in paragraph_spans(&doc.content) {
        for span in sentence_spans(&doc.content, para.0, para.1) {
            let index = passages.len();
            passages.push(make_passage(doc, Granularity::Sentence, index, span));
        }
    }
    passages
}

/// Chunk at the requested granularity. `max_words` only applies to paragraphs.
pub fn chunk_document(doc: &EvidenceDocument, granularity: Granularity, max_words: usize) -> Vec<Passage> {
    match granularity {
        Granularity::Paragraph => chunk_paragraphs(doc, max_words),
        Granularity::Sentence => chunk_sentences(doc),
    }
}

/// One line of a passage file: a passage tagged with the claim it belongs to,
/// carrying the question so ranking needs no second input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassageRecord {
    pub claim_id: String,
    pub question: String,
    #[serde(flatten)]
    pub passage: Passage,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(content: &str) -> EvidenceDocument {
        EvidenceDocument {
            doc_id: "d1".to_string(),
            url: "https://example.com/a".to_string(),
            archived_url: None,
            source_domain: "example.com".to_string(),
            content: content.to_string(),
            model_stance: None,
            human_stance: None,
            human_credibility: None,
            source_type: None,
        }
    }

    fn words(n: usize) -> String {
        (0..n).map(|i| format!("w{i}")).collect::<Vec<_>>().join(" ")
    }

    #[test]
    fn single_300_word_paragraph_splits_into_256_and_44() {
        let d = doc(&words(300));
        let passages = chunk_paragraphs(&d, 256);
        assert_eq!(passages.len(), 2);
        assert_eq!(passages[0].word_count, 256);
        assert_eq!(passages[1].word_count, 44);
    }

    #[test]
    fn two_small_paragraphs_merge_greedily() {
        let d = doc(&format!("{}\n\n{}", words(100), words(100)));
        let passages = chunk_paragraphs(&d, 256);
        assert_eq!(passages.len(), 1);
        assert_eq!(passages[0].word_count, 200);
    }

    #[test]
    fn paragraph_over_cap_is_not_merged() {
        let d = doc(&format!("{}\n\n{}", words(200), words(100)));
        let passages = chunk_paragraphs(&d, 256);
        assert_eq!(passages.len(), 2);
        assert_eq!(passages[0].word_count, 200);
        assert_eq!(passages[1].word_count, 100);
    }

    #[test]
    fn empty_content_yields_no_passages() {
        assert!(chunk_paragraphs(&doc(""), 256).is_empty());
        assert!(chunk_sentences(&doc("")).is_empty());
        assert!(chunk_paragraphs(&doc("  \n\n  \n"), 256).is_empty());
    }

    #[test]
    fn oversized_paragraph_splits_at_sentence_boundaries() {
        // 100 + 40 + 100 words in one paragraph, cap 150: the first two
        // sentences pack together, the third starts a new passage.
        let sentence = |n: usize| format!("Sent {} end.", words(n - 2));
        let para = format!("{} {} {}", sentence(100), sentence(40), sentence(100));
        let d = doc(&para);
        let passages = chunk_paragraphs(&d, 150);
        assert_eq!(passages.len(), 2);
        assert_eq!(passages[0].word_count, 140);
        assert_eq!(passages[1].word_count, 100);
    }

    #[test]
    fn sentence_chunking_splits_on_terminators() {
        let d = doc("A. B? C!");
        let passages = chunk_sentences(&d);
        assert_eq!(passages.len(), 3);
        assert_eq!(passages[0].text, "A.");
        assert_eq!(passages[1].text, "B?");
        assert_eq!(passages[2].text, "C!");
    }

    #[test]
    fn sentence_chunking_keeps_abbreviations_together() {
        let d = doc("The U.S. economy grew.");
        assert_eq!(chunk_sentences(&d).len(), 1);
        let d = doc("Dr. Smith spoke. The hall was full.");
        let passages = chunk_sentences(&d);
        assert_eq!(passages.len(), 2);
        assert_eq!(passages[0].text, "Dr. Smith spoke.");
    }

    #[test]
    fn sentence_chunking_requires_uppercase_continuation() {
        let d = doc("Version 2.5 shipped today. It works.");
        let passages = chunk_sentences(&d);
        assert_eq!(passages.len(), 2);
        assert_eq!(passages[0].text, "Version 2.5 shipped today.");
    }

    #[test]
    fn spans_slice_back_to_text() {
        let content = format!("{}\n\n{}", words(100), words(300));
        let d = doc(&content);
        for passage in chunk_paragraphs(&d, 256) {
            assert_eq!(passage.text, &content[passage.char_span.0..passage.char_span.1]);
        }
    }

    #[test]
    fn multibyte_content_chunks_without_panicking() {
        let content = "Täst «quoted» sentence. Нет данных here. Done!";
        let d = doc(content);
        let passages = chunk_sentences(&d);
        assert_eq!(passages.len(), 3);
        for passage in &passages {
            assert_eq!(passage.text, &content[passage.char_span.0..passage.char_span.1]);
        }
    }

    #[test]
    fn coverage_is_total_and_spans_ordered() {
        let content = format!("{}\n\n{}\n\n{}", words(10), words(400), "Tail. Sentence two!");
        let d = doc(&content);
        let passages = chunk_paragraphs(&d, 256);
        let mut covered = vec![false; content.len()];
        let mut last_end = 0;
        for p in &passages {
            assert!(p.char_span.0 >= last_end, "spans overlap or are unordered");
            last_end = p.char_span.1;
            for flag in &mut covered[p.char_span.0..p.char_span.1] {
                *flag = true;
            }
        }
        for (idx, ch) in content.char_indices() {
            if !ch.is_whitespace() {
                assert!(covered[idx], "byte {idx} ({ch}) uncovered");
            }
        }
    }
}
