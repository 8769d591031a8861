//! Recursive-descent parser for the concrete formula syntax.
//!
//! ```text
//! formula  := implies
//! implies  := or ("->" implies)?
//! or       := and ("|" and)*
//! and      := until ("&" until)*
//! until    := unary ("U" "[" int "," int "]" unary)*
//! unary    := "!" unary | ("F"|"G") "[" int "," int "]" unary | primary
//! primary  := "true" | "false" | "(" formula ")" | atom
//! atom     := linexpr (">=" | "<=") number
//! ```

use super::{Formula, Predicate, StlError};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(f64),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Bang,
    Amp,
    Pipe,
    Arrow,
    Ge,
    Le,
    Plus,
    Minus,
    Star,
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> StlError {
    StlError::Syntax {
        line,
        column,
        message: message.into(),
    }
}

fn tokenize(text: &str) -> Result<Vec<Token>, StlError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        if c == '\n' {
            line += 1;
            col = 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        let two = |s: &str| chars[i..].iter().take(2).collect::<String>() == s;
        let (tok, len) = if two("->") {
            (Tok::Arrow, 2)
        } else if two(">=") {
            (Tok::Ge, 2)
        } else if two("<=") {
            (Tok::Le, 2)
        } else {
            match c {
                '(' => (Tok::LParen, 1),
                ')' => (Tok::RParen, 1),
                '[' => (Tok::LBracket, 1),
                ']' => (Tok::RBracket, 1),
                ',' => (Tok::Comma, 1),
                '!' => (Tok::Bang, 1),
                '&' => (Tok::Amp, 1),
                '|' => (Tok::Pipe, 1),
                '+' => (Tok::Plus, 1),
                '-' => (Tok::Minus, 1),
                '*' => (Tok::Star, 1),
                c if c.is_ascii_digit() || c == '.' => {
                    let mut j = i;
                    while j < chars.len() && (chars[j].is_ascii_digit() || chars[j] == '.') {
                        j += 1;
                    }
                    if j < chars.len() && (chars[j] == 'e' || chars[j] == 'E') {
                        let mut k = j + 1;
                        if k < chars.len() && (chars[k] == '+' || chars[k] == '-') {
                            k += 1;
                        }
                        if k < chars.len() && chars[k].is_ascii_digit() {
                            while k < chars.len() && chars[k].is_ascii_digit() {
                                k += 1;
                            }
                            j = k;
                        }
                    }
                    let s: String = chars[i..j].iter().collect();
                    let v: f64 = s
                        .parse()
                        .map_err(|_| syntax(tl, tc, format!("malformed number `{s}`")))?;
                    (Tok::Num(v), j - i)
                }
                c if c.is_alphabetic() || c == '_' => {
                    let mut j = i;
                    while j < chars.len() && (chars[j].is_alphanumeric() || chars[j] == '_') {
                        j += 1;
                    }
                    (Tok::Ident(chars[i..j].iter().collect()), j - i)
                }
                other => return Err(syntax(tl, tc, format!("unexpected character `{other}`"))),
            }
        };
        out.push(Token {
            tok,
            line: tl,
            column: tc,
        });
        i += len;
        col += len;
    }
    out.push(Token {
        tok: Tok::Eof,
        line,
        column: col,
    });
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<Token>,
    pos: usize,
    names: &'a [String],
}

fn is_keyword(s: &str) -> bool {
    matches!(s, "F" | "G" | "U" | "true" | "false")
}

impl Parser<'_> {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn next(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err_here(&self, message: impl Into<String>) -> StlError {
        let t = self.peek();
        syntax(t.line, t.column, message)
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<Token, StlError> {
        if self.peek().tok == tok {
            Ok(self.next())
        } else {
            Err(self.err_here(format!("expected {what}")))
        }
    }

    fn is_ident(&self, name: &str) -> bool {
        matches!(&self.peek().tok, Tok::Ident(s) if s == name)
    }

    fn formula(&mut self) -> Result<Formula, StlError> {
        let lhs = self.or()?;
        if self.peek().tok == Tok::Arrow {
            self.next();
            let rhs = self.formula()?;
            return Ok(Formula::implies(lhs, rhs));
        }
        Ok(lhs)
    }

    fn or(&mut self) -> Result<Formula, StlError> {
        let mut items = vec![self.and()?];
        while self.peek().tok == Tok::Pipe {
            self.next();
            items.push(self.and()?);
        }
        Ok(if items.len() == 1 { items.pop().unwrap() } else { Formula::Or(items) })
    }

    fn and(&mut self) -> Result<Formula, StlError> {
        let mut items = vec![self.until()?];
        while self.peek().tok == Tok::Amp {
            self.next();
            items.push(self.until()?);
        }
        Ok(if items.len() == 1 { items.pop().unwrap() } else { Formula::And(items) })
    }

    fn until(&mut self) -> Result<Formula, StlError> {
        let mut lhs = self.unary()?;
        while self.is_ident("U") {
            self.next();
            let (a, b) = self.interval()?;
            let rhs = self.unary()?;
            lhs = Formula::until(lhs, rhs, a, b);
        }
        Ok(lhs)
    }

    fn interval(&mut self) -> Result<(usize, usize), StlError> {
        let open = self.expect(Tok::LBracket, "`[`")?;
        let a = self.step_index()?;
        self.expect(Tok::Comma, "`,`")?;
        let b = self.step_index()?;
        self.expect(Tok::RBracket, "`]`")?;
        if a > b {
            return Err(StlError::Interval {
                a,
                b,
                line: open.line,
                column: open.column,
            });
        }
        Ok((a, b))
    }

    fn step_index(&mut self) -> Result<usize, StlError> {
        match self.peek().tok {
            Tok::Num(v) if v >= 0.0 && v.fract() == 0.0 && v < 1e9 => {
                self.next();
                Ok(v as usize)
            }
            _ => Err(self.err_here("expected a non-negative integer step index")),
        }
    }

    fn unary(&mut self) -> Result<Formula, StlError> {
        if self.peek().tok == Tok::Bang {
            self.next();
            return Ok(Formula::not(self.unary()?));
        }
        if self.is_ident("F") || self.is_ident("G") {
            let always = self.is_ident("G");
            self.next();
            let (a, b) = self.interval()?;
            let inner = self.unary()?;
            return Ok(if always {
                Formula::always(inner, a, b)
            } else {
                Formula::eventually(inner, a, b)
            });
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Formula, StlError> {
        match self.peek().tok.clone() {
            Tok::LParen => {
                self.next();
                let f = self.formula()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(f)
            }
            Tok::Ident(s) if s == "true" => {
                self.next();
                Ok(Formula::True)
            }
            Tok::Ident(s) if s == "false" => {
                self.next();
                Ok(Formula::not(Formula::True))
            }
            Tok::Ident(s) if is_keyword(&s) => Err(self.err_here(format!("unexpected keyword `{s}`"))),
            Tok::Ident(_) | Tok::Num(_) | Tok::Minus | Tok::Plus => self.atom(),
            Tok::Eof => Err(self.err_here("unexpected end of input")),
            _ => Err(self.err_here("expected a formula")),
        }
    }

    fn atom(&mut self) -> Result<Formula, StlError> {
        let start = self.peek().clone();
        let (coeffs, constant) = self.linexpr()?;
        let op = self.next();
        let ge = match op.tok {
            Tok::Ge => true,
            Tok::Le => false,
            _ => return Err(syntax(op.line, op.column, "expected `>=` or `<=`")),
        };
        let rhs = self.signed_number()?;
        if coeffs.iter().all(|c| *c == 0.0) {
            return Err(syntax(start.line, start.column, StlError::ConstantPredicate.to_string()));
        }
        let pred = if ge {
            Predicate {
                coeffs,
                offset: constant - rhs,
            }
        } else {
            Predicate {
                coeffs: coeffs.into_iter().map(|c| -c).collect(),
                offset: rhs - constant,
            }
        };
        Ok(Formula::Pred(pred))
    }

    fn signed_number(&mut self) -> Result<f64, StlError> {
        let mut sign = 1.0;
        loop {
            match self.peek().tok {
                Tok::Minus => {
                    sign = -sign;
                    self.next();
                }
                Tok::Plus => {
                    self.next();
                }
                _ => break,
            }
        }
        match self.peek().tok {
            Tok::Num(v) => {
                self.next();
                Ok(sign * v)
            }
            _ => Err(self.err_here("expected a number")),
        }
    }

    fn linexpr(&mut self) -> Result<(Vec<f64>, f64), StlError> {
        let mut coeffs = vec![0.0; self.names.len()];
        let mut constant = 0.0;
        let mut first = true;
        loop {
            let mut sign = 1.0;
            let mut saw_sign = false;
            while matches!(self.peek().tok, Tok::Plus | Tok::Minus) {
                if self.peek().tok == Tok::Minus {
                    sign = -sign;
                }
                saw_sign = true;
                self.next();
            }
            if !first && !saw_sign {
                break;
            }
            first = false;
            let tok = self.peek().clone();
            match tok.tok {
                Tok::Num(v) => {
                    self.next();
                    if self.peek().tok == Tok::Star {
                        self.next();
                    }
                    if let Tok::Ident(name) = self.peek().tok.clone() {
                        if is_keyword(&name) {
                            return Err(self.err_here(format!("unexpected keyword `{name}`")));
                        }
                        let idx = self.lookup(&name)?;
                        self.next();
                        coeffs[idx] += sign * v;
                    } else {
                        constant += sign * v;
                    }
                }
                Tok::Ident(name) if !is_keyword(&name) => {
                    let idx = self.lookup(&name)?;
                    self.next();
                    coeffs[idx] += sign;
                }
                _ => return Err(syntax(tok.line, tok.column, "expected a linear term")),
            }
        }
        Ok((coeffs, constant))
    }

    fn lookup(&self, name: &str) -> Result<usize, StlError> {
        let t = self.peek();
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| StlError::UnknownVariable {
                name: name.to_string(),
                line: t.line,
                column: t.column,
            })
    }
}

/// Parses a formula over the given state-variable names.
pub fn parse(text: &str, names: &[String]) -> Result<Formula, StlError> {
    let toks = tokenize(text)?;
    let mut p = Parser { toks, pos: 0, names };
    let f = p.formula()?;
    if p.peek().tok != Tok::Eof {
        return Err(p.err_here("trailing input"));
    }
    Ok(f)
}
