//! Line assembly for fixed-form and free-form sources, and the token
//! scanner shared by both.

use super::ParseError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceForm {
    /// Columns 1-5 label, column 6 continuation, 7-72 statement text.
    Fixed,
    /// The restricted free form emitted by the refactorer.
    Free,
}

/// One statement after comments are stripped and continuations joined.
#[derive(Debug, Clone, PartialEq)]
pub struct LogicalLine {
    pub label: Option<u32>,
    pub text: String,
    pub line: usize,
    /// 1-based column of the first character of `text`.
    pub col: usize,
}

fn strip_bang_comment(s: &str) -> &str {
    match s.find('!') {
        Some(i) => &s[..i],
        None => s,
    }
}

pub fn logical_lines(src: &str, form: SourceForm) -> Result<Vec<LogicalLine>, ParseError> {
    match form {
        SourceForm::Fixed => fixed_lines(src),
        SourceForm::Free => free_lines(src),
    }
}

fn fixed_lines(src: &str) -> Result<Vec<LogicalLine>, ParseError> {
    let mut out: Vec<LogicalLine> = Vec::new();
    for (i, raw) in src.lines().enumerate() {
        let lineno = i + 1;
        let raw = raw.trim_end_matches('\r');
        let first = raw.chars().next();
        if matches!(first, Some('c' | 'C' | '*' | '!')) || raw.trim().is_empty() {
            continue;
        }
        // A leading tab stands for the label field.
        let expanded;
        let line: &str = if let Some(rest) = raw.strip_prefix('\t') {
            expanded = format!("      {rest}");
            &expanded
        } else {
            raw
        };
        let chars: Vec<char> = line.chars().take(72).collect();
        let field = |a: usize, b: usize| -> String { chars.iter().skip(a).take(b - a).collect() };
        let label_field = field(0, 5);
        let cont = chars.get(5).copied().unwrap_or(' ');
        let text: String = field(6, chars.len().max(6));
        let text = strip_bang_comment(&text).to_string();
        if cont != ' ' && cont != '0' {
            if !label_field.trim().is_empty() {
                return Err(ParseError::syntax(lineno, 1, "continuation line carries a label"));
            }
            let prev = out
                .last_mut()
                .ok_or_else(|| ParseError::syntax(lineno, 6, "continuation without an initial line"))?;
            prev.text.push_str(&text);
            continue;
        }
        if text.trim().is_empty() && label_field.trim().is_empty() {
            continue;
        }
        let label = parse_label(label_field.trim(), lineno)?;
        out.push(LogicalLine { label, text, line: lineno, col: 7 });
    }
    Ok(out)
}

fn free_lines(src: &str) -> Result<Vec<LogicalLine>, ParseError> {
    let mut out: Vec<LogicalLine> = Vec::new();
    let mut pending: Option<LogicalLine> = None;
    for (i, raw) in src.lines().enumerate() {
        let lineno = i + 1;
        let body = strip_bang_comment(raw.trim_end_matches('\r')).trim_end();
        if body.trim().is_empty() {
            continue;
        }
        let mut text = body.trim_start().to_string();
        let indent = body.len() - body.trim_start().len();
        if pending.is_some() {
            if let Some(rest) = text.strip_prefix('&') {
                text = rest.to_string();
            }
        }
        let continues = text.ends_with('&');
        if continues {
            text.pop();
        }
        match pending.as_mut() {
            Some(p) => {
                p.text.push(' ');
                p.text.push_str(&text);
            }
            None => {
                let (label, rest, off) = split_free_label(&text, lineno)?;
                pending = Some(LogicalLine { label, text: rest, line: lineno, col: indent + 1 + off });
            }
        }
        if !continues {
            out.extend(pending.take());
        }
    }
    if let Some(p) = pending {
        return Err(ParseError::syntax(p.line, p.col, "unterminated continuation"));
    }
    Ok(out)
}

fn split_free_label(text: &str, line: usize) -> Result<(Option<u32>, String, usize), ParseError> {
    let digits = text.chars().take_while(|c| c.is_ascii_digit()).count();
    if digits > 0 && text[digits..].starts_with(' ') {
        let label = parse_label(&text[..digits], line)?;
        let rest = text[digits..].trim_start();
        let off = text.len() - rest.len();
        return Ok((label, rest.to_string(), off));
    }
    Ok((None, text.to_string(), 0))
}

fn parse_label(s: &str, line: usize) -> Result<Option<u32>, ParseError> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse::<u32>()
        .ok()
        .filter(|l| *l > 0 && *l <= 99999)
        .map(Some)
        .ok_or_else(|| ParseError::syntax(line, 1, format!("invalid statement label `{s}`")))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Int(i32),
    Real(f32),
    Logical(bool),
    /// `.lt.`, `.and.`, ... and their symbolic spellings, normalised to
    /// the dotted name without dots.
    DotOp(&'static str),
    Plus,
    Minus,
    Star,
    Pow,
    Slash,
    LParen,
    RParen,
    Comma,
    Assign,
    Colon,
    DoubleColon,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub col: usize,
}

const DOT_OPS: [&str; 10] = ["lt", "le", "gt", "ge", "eq", "ne", "and", "or", "not", "eqv"];

fn dot_word(chars: &[char], i: usize) -> Option<(String, usize)> {
    // chars[i] == '.'; returns the word and the index just past the closing dot
    let mut j = i + 1;
    let mut w = String::new();
    while j < chars.len() && chars[j].is_ascii_alphabetic() {
        w.push(chars[j].to_ascii_lowercase());
        j += 1;
    }
    if j < chars.len() && chars[j] == '.' && !w.is_empty() {
        Some((w, j + 1))
    } else {
        None
    }
}

fn static_op(w: &str) -> Option<&'static str> {
    DOT_OPS.iter().copied().find(|o| *o == w)
}

/// Tokenises one logical line. Identifiers are lower-cased.
pub fn tokenize(line: &LogicalLine) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = line.text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let err = |i: usize, msg: String| ParseError::syntax(line.line, line.col + i, msg);
    while i < chars.len() {
        let c = chars[i];
        let col = line.col + i;
        let push = |out: &mut Vec<Token>, tok| out.push(Token { tok, col });
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let mut s = String::new();
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                s.push(chars[i].to_ascii_lowercase());
                i += 1;
            }
            push(&mut out, Tok::Ident(s));
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            let mut is_real = false;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            if i < chars.len() && chars[i] == '.' {
                let operator_follows = dot_word(&chars, i)
                    .is_some_and(|(w, _)| static_op(&w).is_some() || w == "true" || w == "false");
                if !operator_follows {
                    is_real = true;
                    i += 1;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            if i < chars.len() && matches!(chars[i], 'e' | 'E' | 'd' | 'D') {
                let mut j = i + 1;
                if j < chars.len() && matches!(chars[j], '+' | '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                    is_real = true;
                    i = j;
                }
            }
            let text: String = chars[start..i].iter().collect::<String>().to_ascii_lowercase().replace('d', "e");
            if is_real {
                let v: f32 = text.parse().map_err(|_| err(start, format!("bad real literal `{text}`")))?;
                push(&mut out, Tok::Real(v));
            } else {
                let v: i32 = text.parse().map_err(|_| err(start, format!("integer literal `{text}` out of range")))?;
                push(&mut out, Tok::Int(v));
            }
            continue;
        }
        if c == '.' {
            if let Some((w, end)) = dot_word(&chars, i) {
                match w.as_str() {
                    "true" => push(&mut out, Tok::Logical(true)),
                    "false" => push(&mut out, Tok::Logical(false)),
                    _ => match static_op(&w) {
                        Some(op) => push(&mut out, Tok::DotOp(op)),
                        None => return Err(err(i, format!("unknown operator `.{w}.`"))),
                    },
                }
                i = end;
                continue;
            }
            return Err(err(i, "stray `.`".into()));
        }
        let next = chars.get(i + 1).copied();
        let (tok, len) = match (c, next) {
            ('*', Some('*')) => (Tok::Pow, 2),
            (':', Some(':')) => (Tok::DoubleColon, 2),
            ('=', Some('=')) => (Tok::DotOp("eq"), 2),
            ('/', Some('=')) => (Tok::DotOp("ne"), 2),
            ('<', Some('=')) => (Tok::DotOp("le"), 2),
            ('>', Some('=')) => (Tok::DotOp("ge"), 2),
            ('<', _) => (Tok::DotOp("lt"), 1),
            ('>', _) => (Tok::DotOp("gt"), 1),
            ('+', _) => (Tok::Plus, 1),
            ('-', _) => (Tok::Minus, 1),
            ('*', _) => (Tok::Star, 1),
            ('/', _) => (Tok::Slash, 1),
            ('(', _) => (Tok::LParen, 1),
            (')', _) => (Tok::RParen, 1),
            (',', _) => (Tok::Comma, 1),
            ('=', _) => (Tok::Assign, 1),
            (':', _) => (Tok::Colon, 1),
            _ => return Err(err(i, format!("unexpected character `{c}`"))),
        };
        push(&mut out, tok);
        i += len;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<Tok> {
        let l = LogicalLine { label: None, text: s.into(), line: 1, col: 7 };
        tokenize(&l).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn fixed_form_labels_continuations_and_comments() {
        let src = "c comment\n   10 continue\n      x = 1 +\n     &    2 ! trailing\n* star comment\n";
        let lines = logical_lines(src, SourceForm::Fixed).unwrap();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0].label, Some(10));
        assert_eq!(lines[1].text.split_whitespace().collect::<String>(), "x=1+2");
    }

    #[test]
    fn text_beyond_column_72_is_ignored() {
        let mut s = String::from("      x = 1");
        s.push_str(&" ".repeat(72 - s.len()));
        s.push_str("+ 99");
        let lines = logical_lines(&s, SourceForm::Fixed).unwrap();
        assert_eq!(toks(&lines[0].text), vec![Tok::Ident("x".into()), Tok::Assign, Tok::Int(1)]);
    }

    #[test]
    fn numbers_and_dot_operators() {
        assert_eq!(
            toks("1.eq.2 .and. 1.5e-3 .lt. 2."),
            vec![
                Tok::Int(1),
                Tok::DotOp("eq"),
                Tok::Int(2),
                Tok::DotOp("and"),
                Tok::Real(1.5e-3),
                Tok::DotOp("lt"),
                Tok::Real(2.0)
            ]
        );
        assert_eq!(toks("1e5 2.0d0"), vec![Tok::Real(1e5), Tok::Real(2.0)]);
        assert_eq!(toks("a**2"), vec![Tok::Ident("a".into()), Tok::Pow, Tok::Int(2)]);
    }

    #[test]
    fn free_form_continuation() {
        let src = "call f(a, &\n    & b)\n10 continue\n";
        let lines = logical_lines(src, SourceForm::Free).unwrap();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[1].label, Some(10));
        assert_eq!(lines[1].text, "continue");
    }
}
