//! Text formats: the AMN s-expression language and CSV vectors/matrices.
//!
//! ```text
//! ; relu
//! (input x 1)
//! (mux y x (const 0) (affine z [[-1]] [0] x))
//! (output y)
//! ```
//!
//! Declarations are `(input name dim)`, `(const name vec)`,
//! `(affine name matrix vec arg...)`, `(mux name a b guard)` and a single
//! `(output name)`. Arguments are names declared earlier or nested
//! declarations; `(const v)` without a name is allowed inline. Numbers are
//! exact: `0.7005`, `-3/4` and `1e-3` all parse to rationals.

use std::collections::HashSet;
use std::io::Read;

use thiserror::Error;

use crate::network::{build, Network, NetworkError, Node, NodeDesc};
use crate::rational::{parse_rational, to_canonical_string, Matrix, Rational};
use crate::train::DataError;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AmnError {
    #[error("{line}:{col}: syntax error: {message}")]
    Syntax { line: usize, col: usize, message: String },
    #[error("{line}:{col}: {message}")]
    Semantic { line: usize, col: usize, message: String },
    #[error(transparent)]
    Network(#[from] NetworkError),
}

impl AmnError {
    pub fn is_syntax(&self) -> bool {
        matches!(self, AmnError::Syntax { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Open,
    Close,
    LBracket,
    RBracket,
    Comma,
    Atom(String),
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(text: &str) -> Vec<Token> {
    let mut out = Vec::new();
    let mut chars = text.chars().peekable();
    let (mut line, mut col) = (1, 1);
    let mut atom = String::new();
    let mut start = (1, 1);
    let flush = |atom: &mut String, out: &mut Vec<Token>, start: (usize, usize)| {
        if !atom.is_empty() {
            out.push(Token {
                tok: Tok::Atom(std::mem::take(atom)),
                line: start.0,
                col: start.1,
            });
        }
    };
    while let Some(c) = chars.next() {
        let punct = match c {
            '(' => Some(Tok::Open),
            ')' => Some(Tok::Close),
            '[' => Some(Tok::LBracket),
            ']' => Some(Tok::RBracket),
            ',' => Some(Tok::Comma),
            _ => None,
        };
        if let Some(tok) = punct {
            flush(&mut atom, &mut out, start);
            out.push(Token { tok, line, col });
        } else if c == ';' {
            flush(&mut atom, &mut out, start);
            while chars.peek().is_some_and(|&c| c != '\n') {
                chars.next();
            }
        } else if c.is_whitespace() {
            flush(&mut atom, &mut out, start);
        } else {
            if atom.is_empty() {
                start = (line, col);
            }
            atom.push(c);
        }
        if c == '\n' {
            line += 1;
            col = 1;
        } else {
            col += 1;
        }
    }
    flush(&mut atom, &mut out, start);
    out
}

fn valid_name(s: &str) -> bool {
    let mut cs = s.chars();
    cs.next().is_some_and(|c| c.is_alphabetic() || c == '_')
        && cs.all(|c| c.is_alphanumeric() || matches!(c, '_' | '.' | '\''))
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    end: (usize, usize),
    decls: Vec<(String, NodeDesc)>,
    defined: HashSet<String>,
    output: Option<String>,
    anon: usize,
}

impl Parser {
    fn here(&self) -> (usize, usize) {
        self.toks.get(self.pos).map_or(self.end, |t| (t.line, t.col))
    }

    fn syntax<T>(&self, message: impl Into<String>) -> Result<T, AmnError> {
        let (line, col) = self.here();
        Err(AmnError::Syntax {
            line,
            col,
            message: message.into(),
        })
    }

    fn semantic<T>(&self, at: (usize, usize), message: impl Into<String>) -> Result<T, AmnError> {
        Err(AmnError::Semantic {
            line: at.0,
            col: at.1,
            message: message.into(),
        })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), AmnError> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            self.syntax(format!("expected {what}"))
        }
    }

    fn atom(&mut self, what: &str) -> Result<String, AmnError> {
        match self.peek() {
            Some(Tok::Atom(a)) => {
                let a = a.clone();
                self.pos += 1;
                Ok(a)
            }
            _ => self.syntax(format!("expected {what}")),
        }
    }

    fn new_name(&mut self) -> Result<String, AmnError> {
        let name = self.atom("a node name")?;
        if !valid_name(&name) {
            self.pos -= 1;
            return self.syntax(format!("`{name}` is not a valid name"));
        }
        Ok(name)
    }

    fn number(&mut self) -> Result<Rational, AmnError> {
        let a = self.atom("a number")?;
        parse_rational(&a).or_else(|_| {
            self.pos -= 1;
            self.syntax(format!("`{a}` is not a number"))
        })
    }

    fn vector(&mut self) -> Result<Vec<Rational>, AmnError> {
        self.expect(Tok::LBracket, "`[`")?;
        let mut v = vec![self.number()?];
        loop {
            match self.peek() {
                Some(Tok::RBracket) => {
                    self.pos += 1;
                    return Ok(v);
                }
                Some(Tok::Comma) => {
                    self.pos += 1;
                    v.push(self.number()?);
                }
                Some(Tok::Atom(_)) => v.push(self.number()?),
                _ => return self.syntax("expected a number or `]`"),
            }
        }
    }

    fn matrix(&mut self) -> Result<Matrix, AmnError> {
        let at = self.here();
        self.expect(Tok::LBracket, "`[`")?;
        let mut rows = vec![self.vector()?];
        loop {
            match self.peek() {
                Some(Tok::RBracket) => {
                    self.pos += 1;
                    break;
                }
                Some(Tok::Comma) => self.pos += 1,
                Some(Tok::LBracket) => rows.push(self.vector()?),
                _ => return self.syntax("expected a row or `]`"),
            }
        }
        match Matrix::from_rows(rows) {
            Some(m) => Ok(m),
            None => self.semantic(at, "matrix rows have different lengths"),
        }
    }

    fn define(&mut self, at: (usize, usize), name: String, desc: NodeDesc) -> Result<String, AmnError> {
        if !self.defined.insert(name.clone()) {
            return self.semantic(at, format!("`{name}` declared twice"));
        }
        self.decls.push((name.clone(), desc));
        Ok(name)
    }

    /// A name declared earlier or a nested declaration.
    fn arg(&mut self) -> Result<String, AmnError> {
        let at = self.here();
        match self.peek() {
            Some(Tok::Open)
                if matches!(self.toks.get(self.pos + 1).map(|t| &t.tok),
                    Some(Tok::Atom(k)) if k == "input" || k == "output") =>
            {
                self.syntax("expected `)`")
            }
            Some(Tok::Open) => match self.decl(false)? {
                Some(name) => Ok(name),
                None => self.semantic(at, "`output` cannot be nested"),
            },
            Some(Tok::Atom(_)) => {
                let name = self.atom("a node name")?;
                if !self.defined.contains(&name) {
                    return self.semantic(at, format!("`{name}` is used before it is declared"));
                }
                Ok(name)
            }
            _ => self.syntax("expected a node name or declaration"),
        }
    }

    /// Returns the declared name, or `None` for `output`.
    fn decl(&mut self, top: bool) -> Result<Option<String>, AmnError> {
        let at = self.here();
        self.expect(Tok::Open, "`(`")?;
        let head = self.atom("a declaration keyword")?;
        let name = match head.as_str() {
            "input" => {
                if !top {
                    return self.semantic(at, "`input` cannot be nested");
                }
                let name = self.new_name()?;
                let dim_at = self.here();
                let dim = self.atom("a dimension")?;
                let dim = match dim.parse::<usize>() {
                    Ok(d) if d > 0 => d,
                    _ => return self.semantic(dim_at, format!("`{dim}` is not a positive dimension")),
                };
                Some(self.define(at, name, NodeDesc::Input { dim })?)
            }
            "const" => {
                let (name, value) = match self.peek() {
                    Some(Tok::LBracket) => (None, self.vector()?),
                    Some(Tok::Atom(a)) if parse_rational(a).is_ok() => (None, vec![self.number()?]),
                    _ => {
                        let name = self.new_name()?;
                        let value = match self.peek() {
                            Some(Tok::LBracket) => self.vector()?,
                            _ => vec![self.number()?],
                        };
                        (Some(name), value)
                    }
                };
                let name = match name {
                    Some(n) => n,
                    None => {
                        self.anon += 1;
                        format!("_c{}", self.anon)
                    }
                };
                Some(self.define(at, name, NodeDesc::Constant { value })?)
            }
            "affine" => {
                let name = self.new_name()?;
                let weights = self.matrix()?;
                let bias = self.vector()?;
                let mut children = vec![self.arg()?];
                while self.peek() != Some(&Tok::Close) && self.peek().is_some() {
                    children.push(self.arg()?);
                }
                Some(self.define(
                    at,
                    name,
                    NodeDesc::Affine {
                        weights,
                        bias,
                        children,
                    },
                )?)
            }
            "mux" => {
                let name = self.new_name()?;
                let x = self.arg()?;
                let y = self.arg()?;
                let z = self.arg()?;
                Some(self.define(at, name, NodeDesc::Mux { x, y, z })?)
            }
            "output" => {
                if !top {
                    return self.semantic(at, "`output` cannot be nested");
                }
                let name = self.arg()?;
                if self.output.replace(name).is_some() {
                    return self.semantic(at, "more than one output");
                }
                None
            }
            other => {
                self.pos -= 1;
                return self.syntax(format!("unknown declaration `{other}`"));
            }
        };
        self.expect(Tok::Close, "`)`")?;
        Ok(name)
    }
}

/// Parses an AMN document.
pub fn parse_amn(text: &str) -> Result<Network, AmnError> {
    let toks = lex(text);
    let end = match text.lines().count() {
        0 => (1, 1),
        n => (n, text.lines().last().map_or(0, |l| l.chars().count()) + 1),
    };
    let mut p = Parser {
        toks,
        pos: 0,
        end,
        decls: Vec::new(),
        defined: HashSet::new(),
        output: None,
        anon: 0,
    };
    while p.pos < p.toks.len() {
        p.decl(true)?;
    }
    let Some(output) = p.output.clone() else {
        return p.semantic(end, "no output declared");
    };
    Ok(build(&p.decls, &output)?)
}

fn write_vector(out: &mut String, v: &[Rational]) {
    out.push('[');
    for (i, x) in v.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push_str(&to_canonical_string(x));
    }
    out.push(']');
}

/// Canonical text: one declaration per line in evaluation order, rationals
/// as integers or `p/q`. Node names that are not valid identifiers are
/// replaced by `n<index>`.
pub fn serialize_amn(net: &Network) -> String {
    let mut used: HashSet<&str> = net.names().iter().map(String::as_str).collect();
    let mut names: Vec<String> = Vec::with_capacity(net.len());
    for id in net.ids() {
        let n = net.name(id);
        if valid_name(n) {
            names.push(n.to_string());
        } else {
            let mut k = id.0;
            while used.contains(format!("n{k}").as_str()) {
                k += net.len();
            }
            names.push(format!("n{k}"));
            used.insert(n);
        }
    }
    let mut out = String::new();
    for id in net.ids() {
        let name = &names[id.0];
        match net.node(id) {
            Node::Input { dim } => out.push_str(&format!("(input {name} {dim})")),
            Node::Constant { value } => {
                out.push_str(&format!("(const {name} "));
                write_vector(&mut out, value);
                out.push(')');
            }
            Node::Affine {
                weights,
                bias,
                children,
            } => {
                out.push_str(&format!("(affine {name} ["));
                for i in 0..weights.rows() {
                    if i > 0 {
                        out.push(' ');
                    }
                    write_vector(&mut out, weights.row_slice(i));
                }
                out.push_str("] ");
                write_vector(&mut out, bias);
                for c in children {
                    out.push(' ');
                    out.push_str(&names[c.0]);
                }
                out.push(')');
            }
            Node::Mux { x, y, z } => {
                out.push_str(&format!("(mux {name} {} {} {})", names[x.0], names[y.0], names[z.0]));
            }
        }
        out.push('\n');
    }
    out.push_str(&format!("(output {})\n", names[net.output().0]));
    out
}

fn records<R: Read>(reader: R) -> Result<Vec<Vec<Rational>>, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        let parsed: Result<Vec<Rational>, _> = rec.iter().map(parse_rational).collect();
        match parsed {
            Ok(v) => rows.push(v),
            // a non-numeric first line is a header
            Err(_) if i == 0 => {}
            Err(source) => return Err(DataError::Value { row: i + 1, source }),
        }
    }
    Ok(rows)
}

/// Rows of a numeric CSV; an optional header line is skipped.
pub fn read_matrix<R: Read>(reader: R) -> Result<Matrix, DataError> {
    let rows = records(reader)?;
    let width = rows.first().map(Vec::len).ok_or(DataError::Shape)?;
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != width) {
        return Err(DataError::Width {
            row: i + 1,
            expected: width,
            found: r.len(),
        });
    }
    Matrix::from_rows(rows).ok_or(DataError::Shape)
}

/// A vector written as one row or one column.
pub fn read_vector<R: Read>(reader: R) -> Result<Vec<Rational>, DataError> {
    let m = read_matrix(reader)?;
    match (m.rows(), m.cols()) {
        (1, _) | (_, 1) => Ok(m.entries().to_vec()),
        _ => Err(DataError::Shape),
    }
}

/// Comma-separated inline vector such as `1,-2/3,0.5`.
pub fn parse_inline_vector(text: &str) -> Result<Vec<Rational>, DataError> {
    read_vector(text.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::library;
    use crate::rational::{int, ratio};

    const RELU: &str = "(input x 1)(mux y x (const 0) (affine z [[-1]] [0] x))(output y)";

    #[test]
    fn relu_document() {
        let net = parse_amn(RELU).unwrap();
        assert_eq!(net.evaluate(&[int(-2)]).unwrap(), vec![int(0)]);
        assert_eq!(net.evaluate(&[int(5)]).unwrap(), vec![int(5)]);
        for x in [-3, 0, 7] {
            assert_eq!(net.evaluate(&[int(x)]), library::relu().evaluate(&[int(x)]));
        }
    }

    #[test]
    fn canonical_text_is_a_fixed_point() {
        let text = serialize_amn(&parse_amn(RELU).unwrap());
        assert_eq!(serialize_amn(&parse_amn(&text).unwrap()), text);
        assert_eq!(parse_amn(&text).unwrap(), parse_amn(RELU).unwrap());
    }

    #[test]
    fn exact_decimals() {
        let net = parse_amn("(input x 2)\n(affine y [[0.7005, -0.2638]] [1e-3] x)\n(output y)").unwrap();
        let y = net.evaluate(&[int(1), int(0)]).unwrap();
        assert_eq!(y[0], ratio(7005, 10000) + ratio(1, 1000));
        assert!(serialize_amn(&net).contains("[[1401/2000, -1319/5000]] [1/1000]"));
    }

    #[test]
    fn errors() {
        let fwd = parse_amn("(input x 1)(mux y x x z)(affine z [[1]] [0] x)(output y)").unwrap_err();
        assert!(matches!(fwd, AmnError::Semantic { line: 1, col: 23, .. }), "{fwd}");
        let dup = parse_amn("(input x 1)(affine x [[1]] [0] x)(output x)").unwrap_err();
        assert!(matches!(dup, AmnError::Semantic { .. }));
        let open = parse_amn("(input x 1)\n(affine y [[1]] [0] x\n(output y)").unwrap_err();
        assert!(matches!(open, AmnError::Syntax { line: 3, .. }), "{open}");
        let dims = parse_amn("(input x 2)(affine y [[1]] [0] x)(output y)").unwrap_err();
        assert!(matches!(dims, AmnError::Network(NetworkError::Dim(_))));
        assert!(parse_amn("(input x 1)").is_err());
        assert!(parse_amn("(input x 1)(frob y x)(output x)").unwrap_err().is_syntax());
        assert!(parse_amn("(input x 1)(affine y [[1] [1 2]] [0 0] x)(output y)").is_err());
    }

    #[test]
    fn csv_vectors() {
        assert_eq!(read_vector("a,b\n1,-1/2\n".as_bytes()).unwrap(), vec![int(1), ratio(-1, 2)]);
        assert_eq!(read_vector("1\n2\n3\n".as_bytes()).unwrap(), vec![int(1), int(2), int(3)]);
        assert!(read_vector("1,2\n3,4\n".as_bytes()).is_err());
        let m = read_matrix("0.8,0.5\n-0.4,1.2\n".as_bytes()).unwrap();
        assert_eq!(m.row_slice(1), &[ratio(-2, 5), ratio(6, 5)]);
        assert_eq!(parse_inline_vector("5").unwrap(), vec![int(5)]);
    }
}
