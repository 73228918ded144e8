//! Minimal s-expression reader for solver output.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Sexpr {
    Atom(String),
    List(Vec<Sexpr>),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("s-expression error at byte {pos}: {msg}")]
pub struct SexprError {
    pub pos: usize,
    pub msg: String,
}

impl Sexpr {
    pub fn atom(&self) -> Option<&str> {
        match self {
            Sexpr::Atom(s) => Some(s),
            Sexpr::List(_) => None,
        }
    }

    pub fn list(&self) -> Option<&[Sexpr]> {
        match self {
            Sexpr::List(v) => Some(v),
            Sexpr::Atom(_) => None,
        }
    }

    /// Head symbol of a list.
    pub fn head(&self) -> Option<&str> {
        self.list()?.first()?.atom()
    }
}

/// Reads every top-level s-expression (bare atoms included) from `text`.
pub fn parse_all(text: &str) -> Result<Vec<Sexpr>, SexprError> {
    let bytes = text.as_bytes();
    let mut pos = 0;
    let mut stack: Vec<Vec<Sexpr>> = vec![Vec::new()];
    let err = |pos, msg: &str| SexprError {
        pos,
        msg: msg.to_string(),
    };
    while pos < bytes.len() {
        let c = bytes[pos];
        match c {
            b';' => {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            }
            b'(' => {
                stack.push(Vec::new());
                pos += 1;
            }
            b')' => {
                if stack.len() < 2 {
                    return Err(err(pos, "unbalanced `)`"));
                }
                let done = stack.pop().unwrap();
                stack.last_mut().unwrap().push(Sexpr::List(done));
                pos += 1;
            }
            c if c.is_ascii_whitespace() => pos += 1,
            b'|' | b'"' => {
                let start = pos;
                pos += 1;
                while pos < bytes.len() && bytes[pos] != c {
                    pos += 1;
                }
                if pos >= bytes.len() {
                    return Err(err(start, "unterminated quoted token"));
                }
                pos += 1;
                let tok = &text[start..pos];
                let tok = if c == b'|' { &tok[1..tok.len() - 1] } else { tok };
                stack.last_mut().unwrap().push(Sexpr::Atom(tok.to_string()));
            }
            _ => {
                let start = pos;
                while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() && !b"();".contains(&bytes[pos]) {
                    pos += 1;
                }
                stack.last_mut().unwrap().push(Sexpr::Atom(text[start..pos].to_string()));
            }
        }
    }
    if stack.len() != 1 {
        return Err(err(bytes.len(), "unbalanced `(`"));
    }
    Ok(stack.pop().unwrap())
}
