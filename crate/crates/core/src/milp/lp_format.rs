//! CPLEX-style LP text format.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use super::model::{LinExpr, MilpModel, ObjSense, Sense, VarId, VarKind};
use super::MilpError;

const TERMS_PER_LINE: usize = 8;

/// Maps a model name onto the LP identifier alphabet.
pub fn sanitize_name(name: &str) -> String {
    let mut out: String = name
        .chars()
        .map(|c| match c {
            '[' => '(',
            ']' => ')',
            'a'..='z' | 'A'..='Z' | '0'..='9' | '_' | '(' | ')' | '.' | ',' | '#' | '$' | '%' | '&' | ';' | '?' | '@'
            | '{' | '}' | '~' | '!' | '|' | '\'' => c,
            _ => '_',
        })
        .collect();
    let first = out.chars().next();
    let reserved = matches!(
        out.to_ascii_lowercase().as_str(),
        "minimize" | "minimise" | "minimum" | "min" | "maximize" | "maximise" | "maximum" | "max" | "subject"
            | "such" | "st" | "s.t." | "bounds" | "bound" | "binaries" | "binary" | "bin" | "generals"
            | "general" | "gen" | "end" | "free" | "inf" | "infinity"
    );
    let needs_prefix = reserved
        || match first {
            None => true,
            Some(c) => c.is_ascii_digit() || c == '.' || c == 'e' || c == 'E',
        };
    if needs_prefix {
        out.insert(0, '_');
    }
    out
}

fn unique_names<'a>(names: impl Iterator<Item = &'a str>) -> Vec<String> {
    let mut used = BTreeSet::new();
    names
        .map(|n| {
            let base = sanitize_name(n);
            let mut cand = base.clone();
            let mut k = 1;
            while !used.insert(cand.clone()) {
                cand = format!("{base}_{k}");
                k += 1;
            }
            cand
        })
        .collect()
}

fn write_expr(out: &mut String, terms: &[(VarId, f64)], names: &[String]) {
    if terms.is_empty() {
        out.push_str(" 0 ");
        out.push_str(&names[0]);
        return;
    }
    for (i, (v, c)) in terms.iter().enumerate() {
        if i > 0 && i % TERMS_PER_LINE == 0 {
            out.push_str("\n   ");
        }
        let sign = if c.is_sign_negative() { '-' } else { '+' };
        let _ = write!(out, " {sign} {:?} {}", c.abs(), names[v.0]);
    }
}

fn fmt_bound(v: f64) -> String {
    if v == f64::INFINITY {
        "+inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v:?}")
    }
}

/// Renders `model` as LP text. Names are sanitized and made unique.
pub fn write_lp(model: &MilpModel) -> String {
    let vnames = unique_names(model.variables.iter().map(|v| v.name.as_str()));
    let cnames = unique_names(model.constraints.iter().map(|c| c.name.as_str()));
    let mut out = String::new();
    out.push_str(match model.sense() {
        ObjSense::Minimize => "Minimize\n",
        ObjSense::Maximize => "Maximize\n",
    });
    out.push_str(" obj:");
    if model.variables.is_empty() {
        out.push_str(" 0");
    } else {
        write_expr(&mut out, &model.objective, &vnames);
    }
    if model.objective_offset != 0.0 {
        let sign = if model.objective_offset < 0.0 { '-' } else { '+' };
        let _ = write!(out, " {sign} {:?}", model.objective_offset.abs());
    }
    out.push_str("\nSubject To\n");
    for (c, name) in model.constraints.iter().zip(&cnames) {
        let _ = write!(out, " {name}:");
        write_expr(&mut out, &c.terms, &vnames);
        let op = match c.sense {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        };
        let _ = writeln!(out, " {op} {:?}", c.rhs);
    }
    out.push_str("Bounds\n");
    for (v, name) in model.variables.iter().zip(&vnames) {
        match (v.lower, v.upper) {
            (l, u) if l == f64::NEG_INFINITY && u == f64::INFINITY => {
                let _ = writeln!(out, " {name} free");
            }
            (l, u) if l == u => {
                let _ = writeln!(out, " {name} = {:?}", l);
            }
            (l, u) => {
                let _ = writeln!(out, " {} <= {name} <= {}", fmt_bound(l), fmt_bound(u));
            }
        }
    }
    let bins: Vec<&String> = model
        .variables
        .iter()
        .zip(&vnames)
        .filter(|(v, _)| v.kind == VarKind::Binary)
        .map(|(_, n)| n)
        .collect();
    if !bins.is_empty() {
        out.push_str("Binaries\n");
        for chunk in bins.chunks(TERMS_PER_LINE) {
            out.push(' ');
            out.push_str(&chunk.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(" "));
            out.push('\n');
        }
    }
    out.push_str("End\n");
    out
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Word(String),
    Op(&'static str),
}

fn tokenize(text: &str) -> Result<Vec<(Tok, usize)>, MilpError> {
    let mut out = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.split('\\').next().unwrap_or("");
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            if c.is_whitespace() {
                i += 1;
                continue;
            }
            let two: String = chars[i..(i + 2).min(chars.len())].iter().collect();
            let op = match two.as_str() {
                "<=" | "=<" => Some(("<=", 2)),
                ">=" | "=>" => Some((">=", 2)),
                _ => match c {
                    '<' => Some(("<=", 1)),
                    '>' => Some((">=", 1)),
                    '=' => Some(("=", 1)),
                    '+' => Some(("+", 1)),
                    '-' => Some(("-", 1)),
                    ':' => Some((":", 1)),
                    _ => None,
                },
            };
            if let Some((op, len)) = op {
                out.push((Tok::Op(op), ln + 1));
                i += len;
                continue;
            }
            if c.is_ascii_digit() || c == '.' {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    let mut j = i + 1;
                    if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                        j += 1;
                    }
                    if j < chars.len() && chars[j].is_ascii_digit() {
                        i = j;
                        while i < chars.len() && chars[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let s: String = chars[start..i].iter().collect();
                let v = s.parse::<f64>().map_err(|_| MilpError::Parse {
                    line: ln + 1,
                    message: format!("bad number `{s}`"),
                })?;
                out.push((Tok::Num(v), ln + 1));
                continue;
            }
            let start = i;
            while i < chars.len() && !chars[i].is_whitespace() && !"<>=+-:".contains(chars[i]) {
                i += 1;
            }
            out.push((Tok::Word(chars[start..i].iter().collect()), ln + 1));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Section {
    Objective,
    Constraints,
    Bounds,
    Binaries,
    Generals,
    End,
}

fn section_at(toks: &[(Tok, usize)], i: usize) -> Option<(Section, usize, Option<ObjSense>)> {
    let Tok::Word(w) = &toks[i].0 else {
        return None;
    };
    let w = w.to_ascii_lowercase();
    let next = toks.get(i + 1).and_then(|t| match &t.0 {
        Tok::Word(n) => Some(n.to_ascii_lowercase()),
        _ => None,
    });
    match w.as_str() {
        "minimize" | "minimise" | "minimum" | "min" => Some((Section::Objective, 1, Some(ObjSense::Minimize))),
        "maximize" | "maximise" | "maximum" | "max" => Some((Section::Objective, 1, Some(ObjSense::Maximize))),
        "subject" | "such" if next.as_deref() == Some("to") || next.as_deref() == Some("that") => {
            Some((Section::Constraints, 2, None))
        }
        "st" | "s.t." => Some((Section::Constraints, 1, None)),
        "bounds" | "bound" => Some((Section::Bounds, 1, None)),
        "binaries" | "binary" | "bin" => Some((Section::Binaries, 1, None)),
        "generals" | "general" | "gen" => Some((Section::Generals, 1, None)),
        "end" => Some((Section::End, 1, None)),
        _ => None,
    }
}

struct Builder {
    names: HashMap<String, usize>,
    order: Vec<String>,
    lower: Vec<Option<f64>>,
    upper: Vec<Option<f64>>,
    binary: Vec<bool>,
    bound_order: Vec<usize>,
}

impl Builder {
    fn bounded_var(&mut self, name: &str) -> usize {
        let v = self.var(name);
        if !self.bound_order.contains(&v) {
            self.bound_order.push(v);
        }
        v
    }

    /// Variables listed in the Bounds section come first, in that order.
    fn final_order(&self) -> Vec<usize> {
        let mut order = self.bound_order.clone();
        let mut seen = vec![false; self.order.len()];
        order.iter().for_each(|&v| seen[v] = true);
        order.extend((0..self.order.len()).filter(|&v| !seen[v]));
        order
    }

    fn var(&mut self, name: &str) -> usize {
        if let Some(&i) = self.names.get(name) {
            return i;
        }
        let i = self.order.len();
        self.names.insert(name.to_string(), i);
        self.order.push(name.to_string());
        self.lower.push(None);
        self.upper.push(None);
        self.binary.push(false);
        i
    }
}

fn perr(line: usize, message: impl Into<String>) -> MilpError {
    MilpError::Parse {
        line,
        message: message.into(),
    }
}

fn is_inf(w: &str) -> bool {
    matches!(w.to_ascii_lowercase().as_str(), "inf" | "infinity")
}

/// Parses one linear expression starting at `i`; returns terms, constant and the next index.
fn parse_expr(
    toks: &[(Tok, usize)],
    mut i: usize,
    b: &mut Builder,
) -> Result<(Vec<(usize, f64)>, f64, usize), MilpError> {
    let mut terms = Vec::new();
    let mut constant = 0.0;
    loop {
        let mut sign = 1.0;
        let mut saw = false;
        while let Some((Tok::Op(op @ ("+" | "-")), _)) = toks.get(i) {
            if *op == "-" {
                sign = -sign;
            }
            saw = true;
            i += 1;
        }
        if i >= toks.len() || section_at(toks, i).is_some() {
            break;
        }
        if !terms.is_empty() || constant != 0.0 {
            if !saw {
                break;
            }
        }
        match &toks[i].0 {
            Tok::Num(v) => {
                i += 1;
                match toks.get(i) {
                    Some((Tok::Word(w), _)) if !is_inf(w) && section_at(toks, i).is_none() => {
                        terms.push((b.var(w), sign * v));
                        i += 1;
                    }
                    _ => constant += sign * v,
                }
            }
            Tok::Word(w) if toks.get(i + 1).map(|t| &t.0) != Some(&Tok::Op(":")) => {
                terms.push((b.var(w), sign));
                i += 1;
            }
            _ => break,
        }
    }
    Ok((terms, constant, i))
}

fn parse_number(toks: &[(Tok, usize)], mut i: usize) -> Option<(f64, usize)> {
    let mut sign = 1.0;
    while let Some((Tok::Op(op @ ("+" | "-")), _)) = toks.get(i) {
        if *op == "-" {
            sign = -sign;
        }
        i += 1;
    }
    match toks.get(i) {
        Some((Tok::Num(v), _)) => Some((sign * v, i + 1)),
        Some((Tok::Word(w), _)) if is_inf(w) => Some((sign * f64::INFINITY, i + 1)),
        _ => None,
    }
}

/// Parses LP text produced by `write_lp` (and the common subset of the format).
pub fn parse_lp(text: &str) -> Result<MilpModel, MilpError> {
    let toks = tokenize(text)?;
    let mut b = Builder {
        names: HashMap::new(),
        order: Vec::new(),
        lower: Vec::new(),
        upper: Vec::new(),
        binary: Vec::new(),
        bound_order: Vec::new(),
    };
    let mut sense = ObjSense::Minimize;
    let mut objective: Vec<(usize, f64)> = Vec::new();
    let mut offset = 0.0;
    let mut rows: Vec<(String, Vec<(usize, f64)>, Sense, f64)> = Vec::new();
    let mut section: Option<Section> = None;
    let mut i = 0;
    while i < toks.len() {
        if let Some((s, len, os)) = section_at(&toks, i) {
            section = Some(s);
            if let Some(os) = os {
                sense = os;
            }
            i += len;
            if s == Section::End {
                break;
            }
            continue;
        }
        let line = toks[i].1;
        // Optional `name:` label.
        let mut label = None;
        if let (Tok::Word(w), Some((Tok::Op(":"), _))) = (&toks[i].0, toks.get(i + 1)) {
            label = Some(w.clone());
            i += 2;
        }
        match section {
            Some(Section::Objective) => {
                let (terms, c, next) = parse_expr(&toks, i, &mut b)?;
                objective.extend(terms);
                offset += c;
                if next == i && label.is_none() {
                    return Err(perr(line, "unexpected token in objective"));
                }
                i = next;
            }
            Some(Section::Constraints) => {
                let (terms, c, next) = parse_expr(&toks, i, &mut b)?;
                let op = match toks.get(next) {
                    Some((Tok::Op("<="), _)) => Sense::Le,
                    Some((Tok::Op(">="), _)) => Sense::Ge,
                    Some((Tok::Op("="), _)) => Sense::Eq,
                    _ => return Err(perr(line, "expected a relational operator")),
                };
                let (rhs, next) = parse_number(&toks, next + 1).ok_or_else(|| perr(line, "expected right-hand side"))?;
                let name = label.unwrap_or_else(|| format!("c{}", rows.len()));
                rows.push((name, terms, op, rhs - c));
                i = next;
            }
            Some(Section::Bounds) => {
                i = parse_bound(&toks, i, &mut b)?;
            }
            Some(Section::Binaries) | Some(Section::Generals) => match &toks[i].0 {
                Tok::Word(w) => {
                    let v = b.var(w);
                    b.binary[v] = true;
                    i += 1;
                }
                _ => return Err(perr(line, "expected a variable name")),
            },
            Some(Section::End) | None => return Err(perr(line, "content outside of any section")),
        }
    }
    let mut model = MilpModel::new();
    let order = b.final_order();
    let mut remap = vec![0; order.len()];
    for (new, &old) in order.iter().enumerate() {
        remap[old] = new;
    }
    for &k in &order {
        let name = &b.order[k];
        let (kind, dl, du) = if b.binary[k] {
            (VarKind::Binary, 0.0, 1.0)
        } else {
            (VarKind::Continuous, 0.0, f64::INFINITY)
        };
        model.add_variable(name, kind, b.lower[k].unwrap_or(dl), b.upper[k].unwrap_or(du))?;
    }
    for (name, terms, op, rhs) in rows {
        let expr = LinExpr {
            terms: terms.into_iter().map(|(v, c)| (VarId(remap[v]), c)).collect(),
            constant: 0.0,
        };
        model.add_constraint(&name, expr, op, rhs)?;
    }
    let obj = LinExpr {
        terms: objective.into_iter().map(|(v, c)| (VarId(remap[v]), c)).collect(),
        constant: offset,
    };
    model.set_objective(sense, obj)?;
    Ok(model)
}

fn parse_bound(toks: &[(Tok, usize)], i: usize, b: &mut Builder) -> Result<usize, MilpError> {
    let line = toks[i].1;
    // `l <= x [<= u]`
    if let Some((l, next)) = parse_number(toks, i) {
        let Some((Tok::Op(op), _)) = toks.get(next) else {
            return Err(perr(line, "malformed bound"));
        };
        let Some((Tok::Word(w), _)) = toks.get(next + 1) else {
            return Err(perr(line, "malformed bound"));
        };
        let v = b.bounded_var(w);
        match *op {
            "<=" => b.lower[v] = Some(l),
            ">=" => b.upper[v] = Some(l),
            "=" => {
                b.lower[v] = Some(l);
                b.upper[v] = Some(l);
            }
            _ => return Err(perr(line, "malformed bound")),
        }
        let mut j = next + 2;
        if let Some((Tok::Op(op2 @ ("<=" | ">=")), _)) = toks.get(j) {
            let (u, after) = parse_number(toks, j + 1).ok_or_else(|| perr(line, "malformed bound"))?;
            if *op2 == "<=" {
                b.upper[v] = Some(u);
            } else {
                b.lower[v] = Some(u);
            }
            j = after;
        }
        return Ok(j);
    }
    let Tok::Word(w) = &toks[i].0 else {
        return Err(perr(line, "malformed bound"));
    };
    let v = b.bounded_var(w);
    match toks.get(i + 1) {
        Some((Tok::Word(f), _)) if f.eq_ignore_ascii_case("free") => {
            b.lower[v] = Some(f64::NEG_INFINITY);
            b.upper[v] = Some(f64::INFINITY);
            Ok(i + 2)
        }
        Some((Tok::Op(op), _)) => {
            let (val, next) = parse_number(toks, i + 2).ok_or_else(|| perr(line, "malformed bound"))?;
            match *op {
                "<=" => b.upper[v] = Some(val),
                ">=" => b.lower[v] = Some(val),
                _ => {
                    b.lower[v] = Some(val);
                    b.upper[v] = Some(val);
                }
            }
            Ok(next)
        }
        _ => Err(perr(line, "malformed bound")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> MilpModel {
        let mut m = MilpModel::new();
        let k = m.add_continuous("k", -5.0, 1e6).unwrap();
        let z = m.add_binary("z_F").unwrap();
        let r = m.add_continuous("rhoK[cand=3]", f64::NEG_INFINITY, f64::INFINITY).unwrap();
        let f = m.add_continuous("fixed", 2.5, 2.5).unwrap();
        m.add_constraint("gadget[0]", LinExpr::var(r) - LinExpr::term(k, 1e-7) + LinExpr::term(z, 1e6), Sense::Le, 3.25)
            .unwrap();
        m.add_constraint("", LinExpr::var(k) + LinExpr::var(f), Sense::Ge, -1.0).unwrap();
        m.add_constraint("eq", LinExpr::var(z) - LinExpr::var(r), Sense::Eq, 0.0).unwrap();
        m.set_objective(ObjSense::Maximize, LinExpr::term(k, -2.0) + LinExpr::var(r) + 4.0).unwrap();
        m
    }

    #[test]
    fn sanitizing_maps_brackets_and_equals() {
        assert_eq!(sanitize_name("rhoK[cand=3]"), "rhoK(cand_3)");
        assert_eq!(sanitize_name("uL[3][0]"), "uL(3)(0)");
        assert_eq!(sanitize_name("3x"), "_3x");
        assert_eq!(sanitize_name("e1"), "_e1");
        assert_eq!(sanitize_name("End"), "_End");
    }

    #[test]
    fn round_trip_preserves_structure() {
        let m = sample();
        let text = write_lp(&m);
        let back = parse_lp(&text).unwrap();
        assert_eq!(back.num_vars(), m.num_vars());
        assert_eq!(back.sense(), m.sense());
        assert_eq!(back.objective_offset, m.objective_offset);
        for (a, b) in m.variables.iter().zip(&back.variables) {
            assert_eq!(sanitize_name(&a.name), b.name);
            assert_eq!((a.kind, a.lower, a.upper), (b.kind, b.lower, b.upper));
        }
        assert_eq!(back.objective, m.objective);
        for (a, b) in m.constraints.iter().zip(&back.constraints) {
            assert_eq!((a.terms.clone(), a.sense, a.rhs), (b.terms.clone(), b.sense, b.rhs));
        }
        assert_eq!(write_lp(&back), text);
    }

    #[test]
    fn long_rows_wrap_and_still_parse() {
        let mut m = MilpModel::new();
        let mut e = LinExpr::default();
        for i in 0..30 {
            let v = m.add_continuous(&format!("x{i}"), 0.0, 1.0).unwrap();
            e.add_term(v, 1.0 + i as f64);
        }
        m.add_constraint("big", e, Sense::Le, 10.0).unwrap();
        let text = write_lp(&m);
        assert!(text.lines().all(|l| l.len() < 255));
        assert_eq!(parse_lp(&text).unwrap().constraints[0].terms.len(), 30);
    }

    #[test]
    fn parse_errors_carry_lines() {
        let err = parse_lp("Minimize\n obj: x\nSubject To\n c: x + y 3\nEnd\n").unwrap_err();
        assert!(matches!(err, MilpError::Parse { line: 4, .. }), "{err:?}");
    }
}
