use super::diagnostic::{Code, Diagnostic, Span};

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Comma,
    Equals,
    Ident(String),
    Number(f64),
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Equals => "`=`".into(),
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Number(n) => format!("number {n}"),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

/// Splits `src` into tokens. Unrecognized characters are reported and
/// skipped; the token list always ends with `Eof`.
pub fn lex(src: &str) -> (Vec<Token>, Vec<Diagnostic>) {
    let mut tokens = Vec::new();
    let mut diags = Vec::new();
    let mut chars = src.char_indices().peekable();
    let (mut line, mut col) = (1u32, 1u32);

    while let Some(&(offset, c)) = chars.peek() {
        let span = Span {
            offset,
            line,
            column: col,
        };
        let mut advance = |chars: &mut std::iter::Peekable<std::str::CharIndices>| {
            let (_, c) = chars.next().unwrap();
            if c == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
        };
        let single = match c {
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            '{' => Some(Tok::LBrace),
            '}' => Some(Tok::RBrace),
            '[' => Some(Tok::LBracket),
            ']' => Some(Tok::RBracket),
            ',' => Some(Tok::Comma),
            '=' => Some(Tok::Equals),
            _ => None,
        };
        if let Some(tok) = single {
            advance(&mut chars);
            tokens.push(Token { tok, span });
            continue;
        }
        if c.is_whitespace() {
            advance(&mut chars);
            continue;
        }
        if c == '#' {
            while let Some(&(_, c)) = chars.peek() {
                if c == '\n' {
                    break;
                }
                advance(&mut chars);
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let mut text = String::new();
            while let Some(&(_, c)) = chars.peek() {
                if c.is_ascii_alphanumeric() || c == '_' {
                    text.push(c);
                    advance(&mut chars);
                } else {
                    break;
                }
            }
            if let Some(&(_, '*')) = chars.peek() {
                text.push('*');
                advance(&mut chars);
            }
            tokens.push(Token {
                tok: Tok::Ident(text),
                span,
            });
            continue;
        }
        if c.is_ascii_digit() || c == '-' || c == '+' || c == '.' {
            let mut text = String::new();
            let mut prev = ' ';
            while let Some(&(_, c)) = chars.peek() {
                let sign_ok =
                    (c == '-' || c == '+') && (text.is_empty() || prev == 'e' || prev == 'E');
                if c.is_ascii_digit() || c == '.' || c == 'e' || c == 'E' || sign_ok {
                    text.push(c);
                    prev = c;
                    advance(&mut chars);
                } else {
                    break;
                }
            }
            match text.parse::<f64>() {
                Ok(n) if n.is_finite() => tokens.push(Token {
                    tok: Tok::Number(n),
                    span,
                }),
                _ => diags.push(Diagnostic::new(
                    Code::Syntax,
                    span,
                    format!("malformed number `{text}`"),
                )),
            }
            continue;
        }
        advance(&mut chars);
        diags.push(Diagnostic::new(
            Code::Syntax,
            span,
            format!("unexpected character `{c}`"),
        ));
    }
    tokens.push(Token {
        tok: Tok::Eof,
        span: Span {
            offset: src.len(),
            line,
            column: col,
        },
    });
    (tokens, diags)
}
