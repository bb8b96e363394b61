//! Conversion between kern and ekern, the tokenized variant in which the
//! symbols of one cell are joined by `@` and the sub-pieces of one symbol by
//! `\u{b7}` (middle dot). `8A#L` becomes `8@A·#@L`. The exclusive
//! interpretation of converted spines is `**ekern`.

use super::error::{EkernSyntaxError, Mode, Reporter};
use super::lex::{self, RecordKind, SpineKind};
use super::standardize;

const SYMBOL_SEP: char = '@';
const PIECE_SEP: char = '\u{b7}';

/// Converts (possibly messy) kern text to ekern. The input is standardized
/// first, so the output is canonical.
pub fn to_ekern(text: &str) -> String {
    let std_text = standardize(text);
    if std_text.is_empty() {
        return std_text;
    }
    let mut reporter = Reporter::new(Mode::Lenient);
    let lexed = lex::lex(&std_text, &mut reporter).expect("standardized text lexes");
    let mut lines: Vec<String> = Vec::new();
    for record in &lexed.records {
        let cells: Vec<String> = record
            .cells
            .iter()
            .map(|cell| {
                let kind = lexed.spines.get(cell.spine).copied().unwrap_or(SpineKind::Other);
                if kind == SpineKind::Kern && record.kind == RecordKind::Data {
                    encode_cell(&cell.text)
                } else {
                    cell.text.clone()
                }
            })
            .collect();
        lines.push(cells.join("\t"));
    }
    // the exclusive header record is rewritten separately because lex
    // consumes it before emitting records
    let mut out = String::new();
    let header: Vec<String> = lexed
        .spines
        .iter()
        .map(|s| match s {
            SpineKind::Kern => "**ekern".to_string(),
            other => other.exclusive_label().to_string(),
        })
        .collect();
    out.push_str(&header.join("\t"));
    out.push('\n');
    out.push_str(&lines.join("\n"));
    out.push('\n');
    out
}

/// Splits a canonical kern data cell into `@`/`·`-separated form.
fn encode_cell(cell: &str) -> String {
    if cell == "." {
        return cell.to_string();
    }
    cell.split(' ')
        .map(encode_subtoken)
        .collect::<Vec<_>>()
        .join(" ")
}

fn encode_subtoken(sub: &str) -> String {
    let mut symbols: Vec<Vec<String>> = Vec::new();
    let chars: Vec<char> = sub.chars().collect();
    let mut i = 0usize;
    // duration digits and dots form one symbol
    let mut duration_pieces: Vec<String> = Vec::new();
    let mut digits = String::new();
    while i < chars.len() && chars[i].is_ascii_digit() {
        digits.push(chars[i]);
        i += 1;
    }
    if !digits.is_empty() {
        duration_pieces.push(digits);
    }
    while i < chars.len() && chars[i] == '.' {
        duration_pieces.push(".".to_string());
        i += 1;
    }
    if !duration_pieces.is_empty() {
        symbols.push(duration_pieces);
    }
    // pitch letters (or rest) with an optional accidental form one symbol
    let mut pitch = String::new();
    while i < chars.len() && (chars[i].is_ascii_alphabetic() && matches!(chars[i].to_ascii_lowercase(), 'a'..='g' | 'r'))
    {
        // stop at ornament letters that only look like pitches when the
        // pitch run has already ended
        if !pitch.is_empty() && chars[i] != pitch.chars().next().unwrap() {
            break;
        }
        pitch.push(chars[i]);
        i += 1;
    }
    if !pitch.is_empty() {
        let mut pieces = vec![pitch];
        let mut accidental = String::new();
        while i < chars.len() && matches!(chars[i], '#' | '-' | 'n') {
            accidental.push(chars[i]);
            i += 1;
        }
        if !accidental.is_empty() {
            pieces.push(accidental);
        }
        symbols.push(pieces);
    }
    // every remaining marker is its own symbol
    while i < chars.len() {
        let c = chars[i];
        let sym = if c == '^' && i + 1 < chars.len() && chars[i + 1] == '^' {
            i += 1;
            "^^".to_string()
        } else if c == 'q' {
            let mut s = String::from('q');
            while i + 1 < chars.len() && chars[i + 1] == 'q' {
                s.push('q');
                i += 1;
            }
            s
        } else {
            c.to_string()
        };
        symbols.push(vec![sym]);
        i += 1;
    }
    symbols
        .iter()
        .map(|pieces| pieces.join(&PIECE_SEP.to_string()))
        .collect::<Vec<_>>()
        .join(&SYMBOL_SEP.to_string())
}

/// Converts ekern text back to canonical kern.
pub fn from_ekern(text: &str) -> Result<String, EkernSyntaxError> {
    if text.trim().is_empty() {
        return Ok(String::new());
    }
    let mut lines: Vec<String> = Vec::new();
    let mut spine_kinds: Vec<bool> = Vec::new(); // true = ekern spine
    let mut header_seen = false;
    for (idx, raw_line) in text.split('\n').enumerate() {
        let line_no = idx + 1;
        let line = raw_line.strip_suffix('\r').unwrap_or(raw_line);
        if line.starts_with("!!") || line.is_empty() {
            lines.push(line.to_string());
            continue;
        }
        let cells: Vec<&str> = line.split('\t').collect();
        if !header_seen {
            if !cells[0].starts_with("**") {
                return Err(EkernSyntaxError::new(
                    line_no,
                    1,
                    "ekern input must open with an exclusive interpretation",
                ));
            }
            header_seen = true;
            let mut out_cells = Vec::new();
            for cell in &cells {
                if *cell == "**ekern" || *cell == "**kern" {
                    spine_kinds.push(true);
                    out_cells.push("**kern");
                } else {
                    spine_kinds.push(false);
                    out_cells.push(*cell);
                }
            }
            lines.push(out_cells.join("\t"));
            continue;
        }
        let first = cells[0].chars().next();
        let is_data = !matches!(first, Some('*') | Some('=') | Some('!'));
        if !is_data {
            lines.push(line.to_string());
            continue;
        }
        let mut out_cells: Vec<String> = Vec::new();
        let mut col = 1usize;
        for (ci, cell) in cells.iter().enumerate() {
            let is_ekern = spine_kinds.get(ci).copied().unwrap_or(true);
            if is_ekern {
                out_cells.push(decode_cell(cell, line_no, col)?);
            } else {
                out_cells.push(cell.to_string());
            }
            col += cell.chars().count() + 1;
        }
        lines.push(out_cells.join("\t"));
    }
    if !header_seen {
        return Err(EkernSyntaxError::new(1, 1, "empty ekern input"));
    }
    // re-standardize so that arbitrary (hand-written) ekern also lands in
    // the canonical form
    Ok(standardize(&lines.join("\n")))
}

fn decode_cell(cell: &str, line: usize, col: usize) -> Result<String, EkernSyntaxError> {
    if cell == "." {
        return Ok(cell.to_string());
    }
    let mut subs = Vec::new();
    for sub in cell.split(' ') {
        subs.push(decode_subtoken(sub, line, col)?);
    }
    Ok(subs.join(" "))
}

fn decode_subtoken(sub: &str, line: usize, col: usize) -> Result<String, EkernSyntaxError> {
    if sub.is_empty() {
        return Err(EkernSyntaxError::new(line, col, "empty ekern subtoken"));
    }
    let mut out = String::new();
    for symbol in sub.split(SYMBOL_SEP) {
        if symbol.is_empty() {
            return Err(EkernSyntaxError::new(
                line,
                col,
                "empty symbol between '@' separators",
            ));
        }
        for piece in symbol.split(PIECE_SEP) {
            if piece.is_empty() {
                return Err(EkernSyntaxError::new(
                    line,
                    col,
                    "empty piece between '\u{b7}' separators",
                ));
            }
            out.push_str(piece);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encodes_the_separator_example() {
        assert_eq!(encode_subtoken("8A#L"), "8@A\u{b7}#@L");
    }

    #[test]
    fn null_token_passes_through() {
        assert_eq!(encode_cell("."), ".");
    }

    #[test]
    fn dotted_duration_groups_with_dots() {
        assert_eq!(encode_subtoken("4.cc#"), "4\u{b7}.@cc\u{b7}#");
    }

    #[test]
    fn markers_are_single_symbols() {
        assert_eq!(encode_subtoken("8c[L'"), "8@c@[@L@'");
        assert_eq!(encode_subtoken("4r"), "4@r");
    }

    #[test]
    fn decode_rejects_separator_misuse() {
        assert!(decode_subtoken("8@@c", 1, 1).is_err());
        assert!(decode_subtoken("@8c", 1, 1).is_err());
        assert!(decode_subtoken("8\u{b7}@c", 1, 1).is_err());
    }

    #[test]
    fn decode_inverts_encode() {
        for tok in ["8A#L", "4.cc#", "8c[L'", "4r", "2.r", "cq", "4c^^^"] {
            assert_eq!(decode_subtoken(&encode_subtoken(tok), 1, 1).unwrap(), tok);
        }
    }
}
