//! Plain-text dump of a [`ConicProblem`] for cross-checking with other
//! solvers.
//!
//! The format is line oriented. Every section starts with a keyword and a
//! count, followed by that many records. Matrices are written as sparse
//! triplets `row col re im` (zero-based, entries with modulus below 1e-300
//! omitted).
//!
//! ```text
//! sdp-dump 1
//! vars <n>
//! psd <dim> complex|real | nonneg | free
//! objective <k>
//! trace <var> <nnz> / scalar <var> <coeff>   followed by triplets
//! linear <m>
//! <ge|eq> <rhs> <k>                           followed by k terms
//! lmi <count>
//! dim <d> constant <nnz> congruences <g> scalars <s>
//! ```

use std::fmt::Write as _;

use crate::problem::{ConicProblem, Field, LinearExpr, LinearTerm, Sense, VarKind};
use crate::CMat;

fn triplets(out: &mut String, m: &CMat) {
    let nz: Vec<_> = m
        .iter()
        .enumerate()
        .filter(|(_, v)| v.norm() > 1e-300)
        .map(|(k, v)| (k % m.nrows(), k / m.nrows(), *v))
        .collect();
    let _ = writeln!(out, "{} {} {}", m.nrows(), m.ncols(), nz.len());
    for (r, c, v) in nz {
        let _ = writeln!(out, "{r} {c} {:e} {:e}", v.re, v.im);
    }
}

fn expr(out: &mut String, e: &LinearExpr) {
    let _ = writeln!(out, "terms {}", e.terms.len());
    for t in &e.terms {
        match t {
            LinearTerm::Trace { var, mat } => {
                let _ = write!(out, "trace {} ", var.0);
                triplets(out, mat.as_matrix());
            }
            LinearTerm::Scalar { var, coeff } => {
                let _ = writeln!(out, "scalar {} {:e}", var.0, coeff);
            }
        }
    }
}

/// Renders `problem` in the dump format.
pub fn to_text(problem: &ConicProblem) -> String {
    let mut out = String::from("sdp-dump 1\n");
    let _ = writeln!(out, "vars {}", problem.vars.len());
    for v in &problem.vars {
        let _ = match v.kind {
            VarKind::Psd { dim, field: Field::Complex } => writeln!(out, "psd {dim} complex"),
            VarKind::Psd { dim, field: Field::Real } => writeln!(out, "psd {dim} real"),
            VarKind::NonNeg => writeln!(out, "nonneg"),
            VarKind::Free => writeln!(out, "free"),
        };
    }
    out.push_str("objective\n");
    expr(&mut out, &problem.objective);
    let _ = writeln!(out, "linear {}", problem.linear.len());
    for con in &problem.linear {
        let sense = match con.sense {
            Sense::GreaterEq => "ge",
            Sense::Equal => "eq",
        };
        let _ = writeln!(out, "{sense} {:e}", con.rhs);
        expr(&mut out, &con.expr);
    }
    let _ = writeln!(out, "lmi {}", problem.lmis.len());
    for lmi in &problem.lmis {
        let _ = writeln!(out, "dim {}", lmi.dim());
        out.push_str("constant ");
        triplets(&mut out, lmi.constant.as_matrix());
        let _ = writeln!(out, "congruences {}", lmi.congruences.len());
        for g in &lmi.congruences {
            let members: Vec<String> = g.members.iter().map(|(v, a)| format!("{}:{:e}", v.0, a)).collect();
            let _ = writeln!(out, "members {}", members.join(" "));
            match &g.map {
                Some(l) => {
                    out.push_str("map ");
                    triplets(&mut out, l);
                }
                None => out.push_str("map identity\n"),
            }
        }
        let _ = writeln!(out, "scalars {}", lmi.scalars.len());
        for (v, d) in &lmi.scalars {
            let _ = write!(out, "scalar {} ", v.0);
            triplets(&mut out, d.as_matrix());
        }
    }
    out
}
