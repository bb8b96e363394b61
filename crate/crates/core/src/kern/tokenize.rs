//! Cell-level tokenization of kern text, with category filtering. Token
//! sequences feed SER and the corpus statistics.

use super::cell::{parse_data_cell, render_subtoken, DataCell};
use super::error::{Mode, Reporter};
use super::lex::{self, RecordKind, SpineKind};
use super::standardize;

pub const RECORD_SEPARATOR: &str = "\n";
pub const SPINE_SEPARATOR: &str = "\t";

/// Token categories that can be filtered out of the stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TokenCategory {
    Durations,
    Pitches,
    Accidentals,
    Articulations,
    Dynamics,
    Ornaments,
    Lyrics,
    Barlines,
    Interpretations,
}

impl TokenCategory {
    pub const ALL: [TokenCategory; 9] = [
        TokenCategory::Durations,
        TokenCategory::Pitches,
        TokenCategory::Accidentals,
        TokenCategory::Articulations,
        TokenCategory::Dynamics,
        TokenCategory::Ornaments,
        TokenCategory::Lyrics,
        TokenCategory::Barlines,
        TokenCategory::Interpretations,
    ];
}

/// Non-empty set of token categories to keep.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenFilter {
    included: Vec<TokenCategory>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("a token filter must include at least one category")]
pub struct EmptyFilter;

impl TokenFilter {
    /// Keeps every category.
    pub fn full() -> TokenFilter {
        TokenFilter {
            included: TokenCategory::ALL.to_vec(),
        }
    }

    pub fn new(included: &[TokenCategory]) -> Result<TokenFilter, EmptyFilter> {
        if included.is_empty() {
            return Err(EmptyFilter);
        }
        let mut list = included.to_vec();
        list.sort();
        list.dedup();
        Ok(TokenFilter { included: list })
    }

    /// Full filter minus the given categories; errors when nothing is left.
    pub fn excluding(excluded: &[TokenCategory]) -> Result<TokenFilter, EmptyFilter> {
        let keep: Vec<TokenCategory> = TokenCategory::ALL
            .iter()
            .copied()
            .filter(|c| !excluded.contains(c))
            .collect();
        TokenFilter::new(&keep)
    }

    pub fn includes(&self, cat: TokenCategory) -> bool {
        self.included.contains(&cat)
    }

    pub fn is_full(&self) -> bool {
        self.included.len() == TokenCategory::ALL.len()
    }
}

/// Tokenizes text into standardized cells, one token per cell, with a
/// record separator token between records and a spine separator between
/// cells. With the full filter, `detokenize` reproduces the standardized
/// document.
pub fn tokenize(text: &str, filter: &TokenFilter) -> Vec<String> {
    let std_text = standardize(text);
    if std_text.is_empty() {
        return Vec::new();
    }
    let mut reporter = Reporter::new(Mode::Lenient);
    let lexed = lex::lex(&std_text, &mut reporter).expect("standardized text lexes");

    let mut tokens: Vec<String> = Vec::new();
    let mut record_tokens: Vec<Vec<String>> = Vec::new();

    // the exclusive header is a record of its own
    if filter.includes(TokenCategory::Interpretations) {
        record_tokens.push(
            lexed
                .spines
                .iter()
                .map(|s| s.exclusive_label().to_string())
                .collect(),
        );
    }

    for record in &lexed.records {
        match record.kind {
            RecordKind::Barline if !filter.includes(TokenCategory::Barlines) => continue,
            RecordKind::Interpretation if !filter.includes(TokenCategory::Interpretations) => {
                continue
            }
            _ => {}
        }
        let cells: Vec<String> = record
            .cells
            .iter()
            .map(|cell| {
                let kind = lexed
                    .spines
                    .get(cell.spine)
                    .copied()
                    .unwrap_or(SpineKind::Other);
                if record.kind != RecordKind::Data {
                    return cell.text.clone();
                }
                match kind {
                    SpineKind::Kern => filter_kern_cell(&cell.text, filter),
                    SpineKind::Dynam => {
                        if filter.includes(TokenCategory::Dynamics) {
                            cell.text.clone()
                        } else {
                            ".".to_string()
                        }
                    }
                    SpineKind::Text => {
                        if filter.includes(TokenCategory::Lyrics) {
                            cell.text.clone()
                        } else {
                            ".".to_string()
                        }
                    }
                    SpineKind::Other => cell.text.clone(),
                }
            })
            .collect();
        record_tokens.push(cells);
    }

    for (i, cells) in record_tokens.iter().enumerate() {
        if i > 0 {
            tokens.push(RECORD_SEPARATOR.to_string());
        }
        for (j, cell) in cells.iter().enumerate() {
            if j > 0 {
                tokens.push(SPINE_SEPARATOR.to_string());
            }
            tokens.push(cell.clone());
        }
    }
    tokens
}

/// Inverse of `tokenize` under the full filter.
pub fn detokenize(tokens: &[String]) -> String {
    if tokens.is_empty() {
        return String::new();
    }
    let mut out: String = tokens.concat();
    out.push('\n');
    out
}

/// True for the record/spine separator tokens.
pub fn is_separator(token: &str) -> bool {
    token == RECORD_SEPARATOR || token == SPINE_SEPARATOR
}

fn filter_kern_cell(cell: &str, filter: &TokenFilter) -> String {
    if filter.is_full() || cell == "." {
        return cell.to_string();
    }
    let (parsed, _) = parse_data_cell(cell);
    let subs: Vec<crate::kern::cell::ParsedNote> = match parsed {
        DataCell::Null => return ".".to_string(),
        DataCell::Rest(r) => vec![r],
        DataCell::Notes(ns) => ns,
    };
    let mut rendered = Vec::new();
    for mut sub in subs {
        if !filter.includes(TokenCategory::Durations) {
            sub.recip = None;
            sub.dots = 0;
        }
        if !filter.includes(TokenCategory::Pitches) {
            sub.pitch = None;
        }
        if !filter.includes(TokenCategory::Accidentals) {
            sub.accidental = None;
        }
        if !filter.includes(TokenCategory::Articulations) {
            sub.articulations.clear();
        }
        if !filter.includes(TokenCategory::Ornaments) {
            sub.ornaments.clear();
        }
        let text = render_subtoken(&sub);
        if !text.is_empty() {
            rendered.push(text);
        }
    }
    if rendered.is_empty() {
        ".".to_string()
    } else {
        rendered.join(" ")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_filter_tokens() {
        let tokens = tokenize("**kern\n4c\n*-", &TokenFilter::full());
        assert_eq!(tokens, vec!["**kern", "\n", "4c", "\n", "*-"]);
    }

    #[test]
    fn duration_exclusion_strips_digits() {
        let filter = TokenFilter::excluding(&[TokenCategory::Durations]).unwrap();
        let tokens = tokenize("**kern\n4c\n*-", &filter);
        assert_eq!(tokens, vec!["**kern", "\n", "c", "\n", "*-"]);
    }

    #[test]
    fn empty_filter_is_rejected() {
        assert_eq!(TokenFilter::new(&[]), Err(EmptyFilter));
        assert!(TokenFilter::excluding(&TokenCategory::ALL).is_err());
    }

    #[test]
    fn detokenize_restores_document() {
        let text = "**kern\n4c\n*-";
        let std_text = standardize(text);
        let tokens = tokenize(text, &TokenFilter::full());
        assert_eq!(detokenize(&tokens), std_text);
    }

    #[test]
    fn separators_are_recognizable() {
        assert!(is_separator("\n"));
        assert!(is_separator("\t"));
        assert!(!is_separator("4c"));
    }
}
