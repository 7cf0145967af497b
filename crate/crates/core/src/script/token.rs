use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenKind {
    Identifier,
    String,
    Number,
    Operator,
    Bracket,
    Dot,
    Comma,
    Newline,
}

/// One lexical token. `start..end` is a byte span into the source, so
/// `&source[start..end]` is exactly the token text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Token {
    pub kind: TokenKind,
    pub start: usize,
    pub end: usize,
    pub text: String,
    /// Decoded content of a string literal.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quote: Option<char>,
    /// False only for a string literal that runs into a newline or the end.
    pub terminated: bool,
}

impl Token {
    pub fn is(&self, kind: TokenKind, text: &str) -> bool {
        self.kind == kind && self.text == text
    }

    pub fn is_op(&self, text: &str) -> bool {
        self.is(TokenKind::Operator, text)
    }

    pub fn is_bracket(&self, text: &str) -> bool {
        self.is(TokenKind::Bracket, text)
    }

    pub fn is_open_bracket(&self) -> bool {
        self.kind == TokenKind::Bracket && matches!(self.text.as_str(), "(" | "[" | "{")
    }

    pub fn is_close_bracket(&self) -> bool {
        self.kind == TokenKind::Bracket && matches!(self.text.as_str(), ")" | "]" | "}")
    }
}

const TWO_CHAR_OPS: [&str; 7] = ["==", "!=", "<=", ">=", "**", "//", "->"];

/// Splits `source` into tokens. Never fails: stray characters become
/// single-character operator tokens and unterminated strings are flagged.
/// Whitespace, line continuations and `#` comments produce no tokens.
pub fn tokenize(source: &str) -> Vec<Token> {
    let bytes = source.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = source[i..].chars().next().unwrap_or('\0');
        let width = c.len_utf8();
        match c {
            ' ' | '\t' | '\r' => i += 1,
            '\\' if source[i + 1..].starts_with('\n') => i += 2,
            '#' => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            }
            '\n' => {
                tokens.push(simple(source, TokenKind::Newline, i, i + 1));
                i += 1;
            }
            '"' | '\'' => {
                let (tok, next) = lex_string(source, i, c);
                tokens.push(tok);
                i = next;
            }
            '.' if bytes.get(i + 1).is_some_and(u8::is_ascii_digit) => {
                let end = lex_number(bytes, i);
                tokens.push(simple(source, TokenKind::Number, i, end));
                i = end;
            }
            '.' => {
                tokens.push(simple(source, TokenKind::Dot, i, i + 1));
                i += 1;
            }
            ',' => {
                tokens.push(simple(source, TokenKind::Comma, i, i + 1));
                i += 1;
            }
            '(' | ')' | '[' | ']' | '{' | '}' => {
                tokens.push(simple(source, TokenKind::Bracket, i, i + 1));
                i += 1;
            }
            c if c.is_ascii_digit() => {
                let end = lex_number(bytes, i);
                tokens.push(simple(source, TokenKind::Number, i, end));
                i = end;
            }
            c if c == '_' || c.is_alphabetic() => {
                let mut end = i + width;
                while let Some(n) = source[end..].chars().next() {
                    if n == '_' || n.is_alphanumeric() {
                        end += n.len_utf8();
                    } else {
                        break;
                    }
                }
                tokens.push(simple(source, TokenKind::Identifier, i, end));
                i = end;
            }
            _ => {
                let end = if TWO_CHAR_OPS.iter().any(|op| source[i..].starts_with(op)) {
                    i + 2
                } else {
                    i + width
                };
                tokens.push(simple(source, TokenKind::Operator, i, end));
                i = end;
            }
        }
    }
    tokens
}

fn simple(source: &str, kind: TokenKind, start: usize, end: usize) -> Token {
    Token {
        kind,
        start,
        end,
        text: source[start..end].to_string(),
        value: None,
        quote: None,
        terminated: true,
    }
}

fn lex_number(bytes: &[u8], start: usize) -> usize {
    let mut i = start;
    let digits = |i: &mut usize| {
        while *i < bytes.len() && bytes[*i].is_ascii_digit() {
            *i += 1;
        }
    };
    digits(&mut i);
    if i < bytes.len() && bytes[i] == b'.' {
        i += 1;
        digits(&mut i);
    }
    if i < bytes.len() && matches!(bytes[i], b'e' | b'E') {
        let mut j = i + 1;
        if j < bytes.len() && matches!(bytes[j], b'+' | b'-') {
            j += 1;
        }
        if j < bytes.len() && bytes[j].is_ascii_digit() {
            i = j;
            digits(&mut i);
        }
    }
    i
}

fn lex_string(source: &str, start: usize, quote: char) -> (Token, usize) {
    let mut value = String::new();
    let mut chars = source[start + 1..].char_indices();
    let mut end = source.len();
    let mut terminated = false;
    while let Some((off, ch)) = chars.next() {
        let at = start + 1 + off;
        match ch {
            '\n' => {
                end = at;
                break;
            }
            '\\' => match chars.next() {
                Some((_, 'n')) => value.push('\n'),
                Some((_, 't')) => value.push('\t'),
                Some((_, '\\')) => value.push('\\'),
                Some((_, '"')) => value.push('"'),
                Some((_, '\'')) => value.push('\''),
                Some((o, '\n')) => {
                    value.push('\\');
                    end = start + 1 + o;
                    break;
                }
                Some((_, other)) => {
                    value.push('\\');
                    value.push(other);
                }
                None => value.push('\\'),
            },
            c if c == quote => {
                end = at + 1;
                terminated = true;
                break;
            }
            c => value.push(c),
        }
    }
    let token = Token {
        kind: TokenKind::String,
        start,
        end,
        text: source[start..end].to_string(),
        value: Some(value),
        quote: Some(quote),
        terminated,
    };
    (token, end)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<(TokenKind, String)> {
        tokenize(src).into_iter().map(|t| (t.kind, t.text)).collect()
    }

    #[test]
    fn unterminated_keyword_string() {
        let toks = tokenize("df.sort_values(by=\"C");
        let last = toks.last().unwrap();
        assert_eq!(last.kind, TokenKind::String);
        assert!(!last.terminated);
        assert_eq!(last.value.as_deref(), Some("C"));
        assert!(toks[toks.len() - 2].is_op("="));
        assert_eq!(toks[toks.len() - 3].text, "by");
    }

    #[test]
    fn empty_source() {
        assert!(tokenize("").is_empty());
    }

    #[test]
    fn nested_list_subscript() {
        let toks = tokenize("df[[\"a\", \"b\"");
        let opens = toks.iter().filter(|t| t.is_open_bracket()).count();
        let strings: Vec<_> = toks.iter().filter(|t| t.kind == TokenKind::String).collect();
        assert_eq!(opens, 2);
        assert_eq!(strings.len(), 2);
        assert!(strings.iter().all(|s| s.terminated));
    }

    #[test]
    fn spans_are_lossless() {
        let src = "x = df[df['A'] >= 1.5e3] # note\ny = 'é'";
        for t in tokenize(src) {
            assert_eq!(&src[t.start..t.end], t.text);
        }
    }

    #[test]
    fn operators_and_numbers() {
        assert_eq!(
            kinds("a!=-2"),
            vec![
                (TokenKind::Identifier, "a".into()),
                (TokenKind::Operator, "!=".into()),
                (TokenKind::Operator, "-".into()),
                (TokenKind::Number, "2".into()),
            ]
        );
    }

    #[test]
    fn string_stops_at_newline() {
        let toks = tokenize("a = \"abc\nb");
        assert!(!toks[2].terminated);
        assert_eq!(toks[3].kind, TokenKind::Newline);
        assert_eq!(toks[4].text, "b");
    }

    #[test]
    fn escapes_are_decoded() {
        let toks = tokenize(r#""a\"b\\c""#);
        assert_eq!(toks[0].value.as_deref(), Some("a\"b\\c"));
        assert!(toks[0].terminated);
    }
}
