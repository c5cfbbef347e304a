//! SDPA sparse format (`.dat-s`) export and import.
//!
//! A problem `min ⟨C, Z⟩ s.t. ⟨A_k, Z⟩ = b_k, Z ⪰ 0` is the SDPA dual
//! `max ⟨F_0, Y⟩ s.t. ⟨F_k, Y⟩ = c_k`, so `c = b`, `F_0 = −C`, `F_k = A_k`.
//! Blocks are written in their real form; complex blocks appear as the
//! `2n × 2n` embedding with halved data.

use std::fmt::Write;

use super::{Layout, SdpProblem};
use crate::error::{Error, Result};
use crate::linalg::{self, C64};

pub fn export(p: &SdpProblem) -> String {
    let layout: Vec<Layout> = p.blocks.iter().enumerate().map(|(b, &n)| Layout { n, real: p.block_is_real(b) }).collect();
    let mut out = String::new();
    let _ = writeln!(out, "\"freecert SDP export");
    let _ = writeln!(out, "{}", p.constraints.len());
    let _ = writeln!(out, "{}", layout.len());
    let sizes: Vec<String> = layout.iter().map(|l| l.size().to_string()).collect();
    let _ = writeln!(out, "{}", sizes.join(" "));
    let rhs: Vec<String> = p.constraints.iter().map(|c| format!("{:?}", c.rhs)).collect();
    let _ = writeln!(out, "{}", rhs.join(" "));
    let mut emit = |k: usize, b: usize, m: &nalgebra::DMatrix<f64>, sign: f64| {
        for i in 0..m.nrows() {
            for j in i..m.ncols() {
                let v = sign * m[(i, j)];
                if v != 0.0 {
                    let _ = writeln!(out, "{k} {} {} {} {v:?}", b + 1, i + 1, j + 1);
                }
            }
        }
    };
    if let Some(obj) = &p.objective {
        for (b, c) in obj {
            emit(0, *b, &layout[*b].data(c), -1.0);
        }
    }
    for (k, c) in p.constraints.iter().enumerate() {
        for (b, a) in &c.terms {
            emit(k + 1, *b, &layout[*b].data(a), 1.0);
        }
    }
    out
}

/// Parses SDPA sparse text into a problem with real blocks. Diagonal
/// (negative-size) blocks become dense blocks of the same size.
pub fn import(text: &str) -> Result<SdpProblem> {
    let mut tokens: Vec<(usize, String)> = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.starts_with('"') || line.starts_with('*') || line.is_empty() {
            continue;
        }
        for tok in line.split(|c: char| c.is_whitespace() || "{}(),".contains(c)).filter(|t| !t.is_empty()) {
            tokens.push((ln + 1, tok.to_string()));
        }
    }
    let mut it = tokens.into_iter();
    let mut next = |what: &str| -> Result<(usize, String)> {
        it.next().ok_or_else(|| Error::Parse { pos: 0, msg: format!("unexpected end of input, expected {what}") })
    };
    fn num<T: std::str::FromStr>(tok: (usize, String), what: &str) -> Result<T> {
        tok.1.parse().map_err(|_| Error::Parse { pos: tok.0, msg: format!("bad {what} `{}`", tok.1) })
    }
    let m: usize = num(next("constraint count")?, "constraint count")?;
    let nb: usize = num(next("block count")?, "block count")?;
    let mut sizes = Vec::with_capacity(nb);
    for _ in 0..nb {
        let s: i64 = num(next("block size")?, "block size")?;
        sizes.push(s.unsigned_abs() as usize);
    }
    let mut rhs = Vec::with_capacity(m);
    for _ in 0..m {
        rhs.push(num::<f64>(next("right-hand side")?, "right-hand side")?);
    }
    let mut mats: Vec<Vec<Option<linalg::CMat>>> = vec![vec![None; nb]; m + 1];
    loop {
        let Ok(first) = next("entry") else { break };
        let line = first.0;
        let k: usize = num(first, "matrix index")?;
        let b: usize = num(next("block index")?, "block index")?;
        let i: usize = num(next("row")?, "row")?;
        let j: usize = num(next("column")?, "column")?;
        let v: f64 = num(next("value")?, "value")?;
        if k > m || b == 0 || b > nb || i == 0 || j == 0 || i > sizes[b - 1] || j > sizes[b - 1] {
            return Err(Error::Parse { pos: line, msg: format!("entry ({k}, {b}, {i}, {j}) out of range") });
        }
        let n = sizes[b - 1];
        let mat = mats[k][b - 1].get_or_insert_with(|| linalg::zeros(n, n));
        mat[(i - 1, j - 1)] = C64::new(v, 0.0);
        mat[(j - 1, i - 1)] = C64::new(v, 0.0);
    }
    let mut p = SdpProblem::new(sizes);
    let collect = |row: &mut Vec<Option<linalg::CMat>>, sign: f64| -> Vec<(usize, linalg::CMat)> {
        row.iter_mut().enumerate().filter_map(|(b, m)| m.take().map(|m| (b, m * C64::new(sign, 0.0)))).collect()
    };
    let obj = collect(&mut mats[0], -1.0);
    if !obj.is_empty() {
        p.set_objective(obj)?;
    }
    for (k, r) in rhs.into_iter().enumerate() {
        let terms = collect(&mut mats[k + 1], 1.0);
        p.add_constraint(terms, r)?;
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, from_real};

    #[test]
    fn real_round_trip() {
        let mut p = SdpProblem::new(vec![2, 1]);
        p.add_constraint(vec![(0, from_real(2, 2, &[1.0, 0.25, 0.25, -3.0])), (1, linalg::eye(1))], 1.5).unwrap();
        p.add_constraint(vec![(1, linalg::eye(1) * c(0.1, 0.0))], -0.7).unwrap();
        p.set_objective(vec![(0, linalg::eye(2))]).unwrap();
        let back = import(&export(&p)).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn complex_round_trip() {
        let mut p = SdpProblem::new(vec![2]);
        let mut k = linalg::zeros(2, 2);
        k[(0, 1)] = c(0.3, 1.0);
        p.add_complex_constraint(vec![(0, k)], c(0.5, -0.25)).unwrap();
        let text = export(&p);
        let back = import(&text).unwrap();
        assert_eq!(back.blocks(), &[4]);
        assert_eq!(export(&back).lines().skip(1).collect::<Vec<_>>(), text.lines().skip(1).collect::<Vec<_>>());
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(import("1\n1\n2\n1.0\n1 1 3 1 1.0\n"), Err(Error::Parse { pos: 5, .. })));
        assert!(import("1\n1\n").is_err());
        let p = import("\"c\n1\n1\n{-2}\n1.0\n1 1 1 1 1.0\n1 1 2 2 1.0\n").unwrap();
        assert_eq!(p.blocks(), &[2]);
    }
}
