use super::SyntaxError;

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
    Eof,
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Token {
    pub tok: Tok,
    pub offset: usize,
}

pub(crate) fn tokenize(src: &str) -> Result<Vec<Token>, SyntaxError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let tok = match c {
            b'+' => Tok::Plus,
            b'-' => Tok::Minus,
            b'*' => Tok::Star,
            b'/' => Tok::Slash,
            b'^' => Tok::Caret,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b',' => Tok::Comma,
            b'0'..=b'9' | b'.' => {
                i = scan_number(bytes, i);
                let text = &src[start..i];
                let value: f64 = text
                    .parse()
                    .map_err(|_| SyntaxError::new(start, &["number"]))?;
                if !value.is_finite() {
                    return Err(SyntaxError::new(start, &["finite number"]));
                }
                out.push(Token {
                    tok: Tok::Num(value),
                    offset: start,
                });
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push(Token {
                    tok: Tok::Ident(src[start..i].to_string()),
                    offset: start,
                });
                continue;
            }
            _ => {
                return Err(SyntaxError::new(
                    start,
                    &["number", "identifier", "operator", "'('", "')'"],
                ))
            }
        };
        out.push(Token { tok, offset: start });
        i += 1;
    }
    out.push(Token {
        tok: Tok::Eof,
        offset: src.len(),
    });
    Ok(out)
}

/// Digits, optional fraction, optional exponent.
fn scan_number(b: &[u8], mut i: usize) -> usize {
    while i < b.len() && b[i].is_ascii_digit() {
        i += 1;
    }
    if i < b.len() && b[i] == b'.' {
        i += 1;
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
        }
    }
    if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
        let mut k = i + 1;
        if k < b.len() && (b[k] == b'+' || b[k] == b'-') {
            k += 1;
        }
        if k < b.len() && b[k].is_ascii_digit() {
            while k < b.len() && b[k].is_ascii_digit() {
                k += 1;
            }
            i = k;
        }
    }
    i
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_and_identifiers() {
        let toks = tokenize("2.5e-3*sinh(x)").unwrap();
        assert_eq!(toks[0].tok, Tok::Num(2.5e-3));
        assert_eq!(toks[1].tok, Tok::Star);
        assert_eq!(toks[2].tok, Tok::Ident("sinh".into()));
        assert_eq!(toks[2].offset, 7);
        assert_eq!(toks.last().unwrap().tok, Tok::Eof);
    }

    #[test]
    fn exponent_without_digits_is_not_consumed() {
        let toks = tokenize("2e").unwrap();
        assert_eq!(toks[0].tok, Tok::Num(2.0));
        assert_eq!(toks[1].tok, Tok::Ident("e".into()));
    }

    #[test]
    fn rejects_stray_characters_and_huge_literals() {
        assert_eq!(tokenize("x $ y").unwrap_err().offset, 2);
        assert_eq!(tokenize("1e999").unwrap_err().offset, 0);
        assert!(tokenize(".").is_err());
    }
}
