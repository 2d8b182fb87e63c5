//! Minimal SQL tokenizer, string-literal and comment aware. Used to clean
//! LLM-generated SQL, find referenced identifiers, and rewrite them against
//! the table schema. Not a parser: it only needs token boundaries.

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Tok {
    /// Bare word: identifier or keyword, as written.
    Word(String),
    /// Quoted identifier (double quotes, backticks, or brackets), content only.
    Quoted(String),
    /// Single-quoted string literal, content only ('' unescaped).
    Str(String),
    Num(String),
    /// Punctuation / operator, including `;`.
    Sym(String),
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub tok: Tok,
    pub start: usize,
    pub end: usize,
}

impl Token {
    pub fn word_eq(&self, kw: &str) -> bool {
        matches!(&self.tok, Tok::Word(w) if w.eq_ignore_ascii_case(kw))
    }

    pub fn is_sym(&self, s: &str) -> bool {
        matches!(&self.tok, Tok::Sym(x) if x == s)
    }
}

fn scan_delimited(bytes: &[u8], mut i: usize, close: u8, doubled_escape: bool) -> (String, usize) {
    // i points just past the opening delimiter
    let mut content = Vec::new();
    while i < bytes.len() {
        if bytes[i] == close {
            if doubled_escape && i + 1 < bytes.len() && bytes[i + 1] == close {
                content.push(close);
                i += 2;
                continue;
            }
            i += 1;
            return (String::from_utf8_lossy(&content).into_owned(), i);
        }
        content.push(bytes[i]);
        i += 1;
    }
    // unterminated: take the rest (LLM output can be ragged)
    (String::from_utf8_lossy(&content).into_owned(), i)
}

pub(crate) fn lex(sql: &str) -> Vec<Token> {
    let bytes = sql.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let start = i;
        let b = bytes[i];
        if b.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        // line comment
        if b == b'-' && i + 1 < bytes.len() && bytes[i + 1] == b'-' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        // block comment
        if b == b'/' && i + 1 < bytes.len() && bytes[i + 1] == b'*' {
            i += 2;
            while i + 1 < bytes.len() && !(bytes[i] == b'*' && bytes[i + 1] == b'/') {
                i += 1;
            }
            i = (i + 2).min(bytes.len());
            continue;
        }
        if b == b'\'' {
            let (s, next) = scan_delimited(bytes, i + 1, b'\'', true);
            tokens.push(Token {
                tok: Tok::Str(s),
                start,
                end: next,
            });
            i = next;
            continue;
        }
        if b == b'"' || b == b'`' {
            let (s, next) = scan_delimited(bytes, i + 1, b, true);
            tokens.push(Token {
                tok: Tok::Quoted(s),
                start,
                end: next,
            });
            i = next;
            continue;
        }
        if b == b'[' {
            let (s, next) = scan_delimited(bytes, i + 1, b']', false);
            tokens.push(Token {
                tok: Tok::Quoted(s),
                start,
                end: next,
            });
            i = next;
            continue;
        }
        if b.is_ascii_digit() || (b == b'.' && i + 1 < bytes.len() && bytes[i + 1].is_ascii_digit())
        {
            let mut j = i;
            let mut seen_dot = false;
            while j < bytes.len() {
                let c = bytes[j];
                if c.is_ascii_digit() {
                    j += 1;
                } else if c == b'.' && !seen_dot {
                    seen_dot = true;
                    j += 1;
                } else if (c == b'e' || c == b'E')
                    && j + 1 < bytes.len()
                    && (bytes[j + 1].is_ascii_digit()
                        || ((bytes[j + 1] == b'+' || bytes[j + 1] == b'-')
                            && j + 2 < bytes.len()
                            && bytes[j + 2].is_ascii_digit()))
                {
                    j += 2;
                } else {
                    break;
                }
            }
            tokens.push(Token {
                tok: Tok::Num(sql[i..j].to_string()),
                start,
                end: j,
            });
            i = j;
            continue;
        }
        if b == b'_' || b.is_ascii_alphabetic() {
            let mut j = i;
            while j < bytes.len()
                && (bytes[j] == b'_' || bytes[j] == b'$' || bytes[j].is_ascii_alphanumeric())
            {
                j += 1;
            }
            tokens.push(Token {
                tok: Tok::Word(sql[i..j].to_string()),
                start,
                end: j,
            });
            i = j;
            continue;
        }
        // multi-char operators first
        let two = if i + 1 < bytes.len() { &sql[i..i + 2] } else { "" };
        if matches!(two, "<=" | ">=" | "<>" | "!=" | "||") {
            tokens.push(Token {
                tok: Tok::Sym(two.to_string()),
                start,
                end: i + 2,
            });
            i += 2;
            continue;
        }
        tokens.push(Token {
            tok: Tok::Sym(sql[i..i + 1].to_string()),
            start,
            end: i + 1,
        });
        i += 1;
    }
    tokens
}
