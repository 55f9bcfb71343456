//! Self-describing text serialization of a conic program (format `conicdump
//! v1`), for debugging and the optional external-solver adapter.
//!
//! Layout, one record per line, whitespace-separated:
//!
//! ```text
//! conicdump v1
//! vars <count>
//! name <index> <name>                       (optional, one per variable)
//! objective <expr>
//! eq <expr>                                 (expr == 0)
//! ineq <expr>                               (expr >= 0)
//! soc <ntail> <head-expr> | <tail-expr> ... (‖tail‖ ≤ head)
//! exp <center> <halfwidth> <stages> <x-expr> | <y-expr>
//! lmi <dim> <nterms>                        (followed by matrix records)
//!   const <re im>*dim²
//!   term <var> <re im>*dim²
//! ```
//!
//! An `<expr>` is `<constant> <nterms> (<var> <coeff>)*`. Floats use `{:e}`
//! round-trip formatting.

use super::{ConicError, ConicProgram, ExpApprox, LinExpr, LmiBlock, VarId};
use crate::linalg::{C64, CMatrix};
use std::fmt::Write as _;

fn write_expr(out: &mut String, e: &LinExpr) {
    write!(out, "{:e} {}", e.constant, e.terms.len()).unwrap();
    for &(v, c) in &e.terms {
        write!(out, " {} {:e}", v.0, c).unwrap();
    }
}

fn write_matrix(out: &mut String, m: &CMatrix) {
    for i in 0..m.rows {
        for j in 0..m.cols {
            let e = m[(i, j)];
            write!(out, " {:e} {:e}", e.re, e.im).unwrap();
        }
    }
}

pub fn dump_program(p: &ConicProgram) -> String {
    let mut out = String::new();
    out.push_str("conicdump v1\n");
    writeln!(out, "vars {}", p.nvars).unwrap();
    for (i, n) in p.names.iter().enumerate() {
        if !n.is_empty() {
            writeln!(out, "name {} {}", i, n.replace(' ', "_")).unwrap();
        }
    }
    out.push_str("objective ");
    write_expr(&mut out, &p.objective);
    out.push('\n');
    for e in &p.eqs {
        out.push_str("eq ");
        write_expr(&mut out, e);
        out.push('\n');
    }
    for e in &p.ineqs {
        out.push_str("ineq ");
        write_expr(&mut out, e);
        out.push('\n');
    }
    for s in &p.socs {
        write!(out, "soc {} ", s.tail.len()).unwrap();
        write_expr(&mut out, &s.head);
        for t in &s.tail {
            out.push_str(" | ");
            write_expr(&mut out, t);
        }
        out.push('\n');
    }
    for e in &p.exps {
        write!(
            out,
            "exp {:e} {:e} {} ",
            e.approx.center, e.approx.halfwidth, e.approx.segments
        )
        .unwrap();
        write_expr(&mut out, &e.x);
        out.push_str(" | ");
        write_expr(&mut out, &e.y);
        out.push('\n');
    }
    for lmi in &p.lmis {
        writeln!(out, "lmi {} {}", lmi.dim, lmi.terms.len()).unwrap();
        out.push_str("const");
        write_matrix(&mut out, &lmi.constant);
        out.push('\n');
        for (v, m) in &lmi.terms {
            write!(out, "term {}", v.0).unwrap();
            write_matrix(&mut out, m);
            out.push('\n');
        }
    }
    out
}

struct Tokens<'a> {
    toks: Vec<&'a str>,
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn next(&mut self) -> Result<&'a str, ConicError> {
        let t = self
            .toks
            .get(self.pos)
            .copied()
            .ok_or_else(|| ConicError::ParseError("unexpected end of record".into()))?;
        self.pos += 1;
        Ok(t)
    }

    fn next_f64(&mut self) -> Result<f64, ConicError> {
        self.next()?
            .parse()
            .map_err(|e| ConicError::ParseError(format!("bad float: {e}")))
    }

    fn next_usize(&mut self) -> Result<usize, ConicError> {
        self.next()?
            .parse()
            .map_err(|e| ConicError::ParseError(format!("bad integer: {e}")))
    }
}

fn read_expr(t: &mut Tokens) -> Result<LinExpr, ConicError> {
    let constant = t.next_f64()?;
    let n = t.next_usize()?;
    let mut e = LinExpr::constant(constant);
    for _ in 0..n {
        let v = t.next_usize()?;
        let c = t.next_f64()?;
        e.push(VarId(v), c);
    }
    Ok(e)
}

fn read_matrix(t: &mut Tokens, dim: usize) -> Result<CMatrix, ConicError> {
    let mut m = CMatrix::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..dim {
            let re = t.next_f64()?;
            let im = t.next_f64()?;
            m[(i, j)] = C64::new(re, im);
        }
    }
    Ok(m)
}

pub fn parse_program(text: &str) -> Result<ConicProgram, ConicError> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| ConicError::ParseError("empty dump".into()))?;
    if header.trim() != "conicdump v1" {
        return Err(ConicError::ParseError(format!("bad header: {header}")));
    }
    let mut p = ConicProgram::new();
    let mut pending_lmi: Option<(usize, usize, CMatrix, Vec<(VarId, CMatrix)>)> = None;
    for line in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut t = Tokens { toks: line.split_whitespace().collect(), pos: 0 };
        let tag = t.next()?;
        // Matrix records belonging to an open LMI.
        if let Some((dim, nterms, cst, terms)) = pending_lmi.take() {
            match tag {
                "const" => {
                    let m = read_matrix(&mut t, dim)?;
                    pending_lmi = Some((dim, nterms, m, terms));
                    continue;
                }
                "term" => {
                    let v = VarId(t.next_usize()?);
                    let m = read_matrix(&mut t, dim)?;
                    let mut terms = terms;
                    terms.push((v, m));
                    if terms.len() == nterms {
                        p.lmis.push(LmiBlock::new(cst, terms)?);
                    } else {
                        pending_lmi = Some((dim, nterms, cst, terms));
                    }
                    continue;
                }
                _ => {
                    if nterms == 0 {
                        p.lmis.push(LmiBlock::new(cst, terms)?);
                    } else {
                        return Err(ConicError::ParseError("truncated lmi record".into()));
                    }
                }
            }
        }
        match tag {
            "vars" => {
                let n = t.next_usize()?;
                for _ in 0..n {
                    p.add_var("");
                }
            }
            "name" => {
                let i = t.next_usize()?;
                let name = t.next()?;
                p.names[i] = name.to_string();
            }
            "objective" => {
                let e = read_expr(&mut t)?;
                p.maximize(e);
            }
            "eq" => p.add_eq(read_expr(&mut t)?),
            "ineq" => p.add_ineq(read_expr(&mut t)?),
            "soc" => {
                let ntail = t.next_usize()?;
                let head = read_expr(&mut t)?;
                let mut tail = Vec::with_capacity(ntail);
                for _ in 0..ntail {
                    let bar = t.next()?;
                    if bar != "|" {
                        return Err(ConicError::ParseError("expected |".into()));
                    }
                    tail.push(read_expr(&mut t)?);
                }
                p.add_soc(head, tail);
            }
            "exp" => {
                let center = t.next_f64()?;
                let halfwidth = t.next_f64()?;
                let segments = t.next_usize()? as u32;
                let x = read_expr(&mut t)?;
                let bar = t.next()?;
                if bar != "|" {
                    return Err(ConicError::ParseError("expected |".into()));
                }
                let y = read_expr(&mut t)?;
                p.add_exp(x, y, ExpApprox { center, halfwidth, segments });
            }
            "lmi" => {
                let dim = t.next_usize()?;
                let nterms = t.next_usize()?;
                pending_lmi = Some((dim, nterms, CMatrix::zeros(dim, dim), Vec::new()));
            }
            other => {
                return Err(ConicError::ParseError(format!("unknown record: {other}")));
            }
        }
    }
    if let Some((_, nterms, cst, terms)) = pending_lmi.take() {
        if terms.len() == nterms {
            p.lmis.push(LmiBlock::new(cst, terms)?);
        } else {
            return Err(ConicError::ParseError("truncated trailing lmi".into()));
        }
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dump_parse_round_trip() {
        let mut p = ConicProgram::new();
        let x = p.add_var("x");
        let y = p.add_var("y");
        p.maximize(LinExpr::var(x).plus(&LinExpr::term(y, 2.0)));
        p.add_ineq(LinExpr::constant(3.0).minus(&LinExpr::var(x)));
        p.add_eq(LinExpr::var(y).shifted(-1.0));
        p.add_soc(LinExpr::var(x), vec![LinExpr::var(y), LinExpr::constant(0.5)]);
        p.add_exp(LinExpr::var(x), LinExpr::var(y), ExpApprox::default());
        let mut m = CMatrix::identity(2);
        m[(0, 1)] = C64::new(0.0, 1.0);
        m[(1, 0)] = C64::new(0.0, -1.0);
        p.add_lmi(LmiBlock::new(m, vec![(x, CMatrix::identity(2))]).unwrap());

        let text = dump_program(&p);
        let q = parse_program(&text).unwrap();
        assert_eq!(q.nvars, p.nvars);
        assert_eq!(q.eqs.len(), 1);
        assert_eq!(q.ineqs.len(), 1);
        assert_eq!(q.socs.len(), 1);
        assert_eq!(q.exps.len(), 1);
        assert_eq!(q.lmis.len(), 1);
        let text2 = dump_program(&q);
        assert_eq!(text, text2, "dump must be a fixpoint after one round trip");
    }
}
