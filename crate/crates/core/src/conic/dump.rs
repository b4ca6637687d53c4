//! Plain-text dump of a [`ConicProblem`] for offline inspection.
//!
//! Layout, one record per line, `%` starts a comment:
//!
//! ```text
//! vars <n>
//! var <index> <name>
//! objective <constant> <nnz>        followed by <nnz> lines `<var> <coef>`
//! ineq <label> <constant> <nnz>     same term lines, meaning expr >= 0
//! eq <label> <constant> <nnz>       same term lines, meaning expr == 0
//! lmi <label> <size> <parts>
//! part identity <dim> | part factor <rows> <cols>
//!   factor entries `<i> <j> <re> <im>` (coordinate list, 0-based, nonzeros only)
//! constant <nnz>                    entries `<i> <j> <re> <im>`
//! term <var> <nnz>                  entries `<i> <j> <re> <im>`
//! end
//! ```

use std::io::Write;
use std::path::Path;

use super::model::{AffExpr, ConicProblem, SparseHerm};
use crate::error::Result;
use crate::linalg::CMat;

fn write_terms<W: Write>(w: &mut W, e: &AffExpr) -> std::io::Result<()> {
    for &(v, c) in &e.terms {
        writeln!(w, "{} {:e}", v.0, c)?;
    }
    Ok(())
}

fn write_entries<W: Write>(w: &mut W, s: &SparseHerm) -> std::io::Result<()> {
    for &(i, j, z) in &s.entries {
        writeln!(w, "{i} {j} {:e} {:e}", z.re, z.im)?;
    }
    Ok(())
}

fn sparse_of(m: &CMat) -> SparseHerm {
    SparseHerm::from_dense(m)
}

fn label(s: &str) -> String {
    s.replace(char::is_whitespace, "_")
}

pub fn write_problem<W: Write>(w: &mut W, p: &ConicProblem) -> std::io::Result<()> {
    writeln!(w, "% conic problem dump")?;
    writeln!(w, "vars {}", p.n_vars())?;
    for (k, name) in p.var_names.iter().enumerate() {
        writeln!(w, "var {k} {}", label(name))?;
    }
    writeln!(w, "objective {:e} {}", p.objective.constant, p.objective.terms.len())?;
    write_terms(w, &p.objective)?;
    for c in &p.ineqs {
        writeln!(w, "ineq {} {:e} {}", label(&c.label), c.expr.constant, c.expr.terms.len())?;
        write_terms(w, &c.expr)?;
    }
    for c in &p.eqs {
        writeln!(w, "eq {} {:e} {}", label(&c.label), c.expr.constant, c.expr.terms.len())?;
        write_terms(w, &c.expr)?;
    }
    for b in &p.lmis {
        writeln!(w, "lmi {} {} {}", label(&b.label), b.size, b.parts.len())?;
        for part in &b.parts {
            match &part.factor {
                None => writeln!(w, "part identity {}", part.inner.dim)?,
                Some(k) => {
                    let s = sparse_of(k);
                    writeln!(w, "part factor {} {} {}", k.nrows(), k.ncols(), s.entries.len())?;
                    write_entries(w, &s)?;
                }
            }
            let s = sparse_of(&part.inner.constant);
            writeln!(w, "constant {}", s.entries.len())?;
            write_entries(w, &s)?;
            for (v, t) in &part.inner.terms {
                writeln!(w, "term {} {}", v.0, t.entries.len())?;
                write_entries(w, t)?;
            }
        }
    }
    writeln!(w, "end")
}

pub fn dump_to_file(p: &ConicProblem, path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_problem(&mut f, p)?;
    f.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dump_lists_every_block() {
        let mut p = ConicProblem::new();
        let w = p.add_psd_var(2, "W");
        p.add_ineq(w.trace().plus_const(-1.0), "tr W >= 1");
        p.minimize(w.trace());
        let mut buf = Vec::new();
        write_problem(&mut buf, &p).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("% conic problem dump\nvars 4\n"));
        assert_eq!(text.lines().filter(|l| l.starts_with("lmi ")).count(), 1);
        assert_eq!(text.lines().filter(|l| l.starts_with("term ")).count(), 4);
        assert!(text.trim_end().ends_with("end"));
    }
}
