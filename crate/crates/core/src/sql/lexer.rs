use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    /// Identifier or keyword, lower-cased.
    Word(String),
    Int(i64),
    Str(String),
    Comma,
    Dot,
    LParen,
    RParen,
    Star,
    Plus,
    Minus,
    Eq,
    Neq,
    Lt,
    Le,
    Gt,
    Ge,
    Semi,
    Eof,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub tok: Tok,
    pub line: usize,
    pub column: usize,
}

pub fn tokenize(src: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let err = |line, column, message: String| Error::Syntax { line, column, message };

    while i < chars.len() {
        let c = chars[i];
        let (start_line, start_col) = (line, col);
        let advance = |n: usize, i: &mut usize, col: &mut usize| {
            *i += n;
            *col += n;
        };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            advance(1, &mut i, &mut col);
            continue;
        }
        // -- comment to end of line
        if c == '-' && chars.get(i + 1) == Some(&'-') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let push = |out: &mut Vec<Token>, tok| out.push(Token { tok, line: start_line, column: start_col });
        if c.is_ascii_alphabetic() || c == '_' {
            let s = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            col += i - s;
            let word: String = chars[s..i].iter().collect::<String>().to_ascii_lowercase();
            push(&mut out, Tok::Word(word));
            continue;
        }
        if c.is_ascii_digit() {
            let s = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            col += i - s;
            let text: String = chars[s..i].iter().collect();
            let v = text
                .parse::<i64>()
                .map_err(|_| err(start_line, start_col, format!("integer literal `{text}` out of range")))?;
            push(&mut out, Tok::Int(v));
            continue;
        }
        if c == '\'' {
            let mut s = String::new();
            i += 1;
            col += 1;
            loop {
                match chars.get(i) {
                    None => return Err(err(start_line, start_col, "unterminated string literal".into())),
                    Some('\'') if chars.get(i + 1) == Some(&'\'') => {
                        s.push('\'');
                        i += 2;
                        col += 2;
                    }
                    Some('\'') => {
                        i += 1;
                        col += 1;
                        break;
                    }
                    Some('\n') => {
                        s.push('\n');
                        i += 1;
                        line += 1;
                        col = 1;
                    }
                    Some(ch) => {
                        s.push(*ch);
                        i += 1;
                        col += 1;
                    }
                }
            }
            push(&mut out, Tok::Str(s));
            continue;
        }
        let two: Option<Tok> = match (c, chars.get(i + 1)) {
            ('<', Some('=')) => Some(Tok::Le),
            ('>', Some('=')) => Some(Tok::Ge),
            ('<', Some('>')) | ('!', Some('=')) => Some(Tok::Neq),
            _ => None,
        };
        if let Some(t) = two {
            advance(2, &mut i, &mut col);
            push(&mut out, t);
            continue;
        }
        let one = match c {
            ',' => Tok::Comma,
            '.' => Tok::Dot,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '*' => Tok::Star,
            '+' => Tok::Plus,
            '-' => Tok::Minus,
            '=' => Tok::Eq,
            '<' => Tok::Lt,
            '>' => Tok::Gt,
            ';' => Tok::Semi,
            other => return Err(err(start_line, start_col, format!("unexpected character `{other}`"))),
        };
        advance(1, &mut i, &mut col);
        push(&mut out, one);
    }
    out.push(Token { tok: Tok::Eof, line, column: col });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokens_carry_positions() {
        let toks = tokenize("SELECT a\n  FROM t WHERE x <= 'it''s'").unwrap();
        assert_eq!(toks[0].tok, Tok::Word("select".into()));
        assert_eq!((toks[2].line, toks[2].column), (2, 3));
        assert!(toks.iter().any(|t| t.tok == Tok::Le));
        assert!(toks.iter().any(|t| t.tok == Tok::Str("it's".into())));
    }

    #[test]
    fn lexical_errors() {
        assert!(matches!(tokenize("select #"), Err(Error::Syntax { line: 1, column: 8, .. })));
        assert!(matches!(tokenize("'open"), Err(Error::Syntax { .. })));
    }
}
