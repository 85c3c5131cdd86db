use std::io::{self, Write};

use crate::lp::LinearProgram;
use crate::Scalar;

/// Writes `lp` in the plain-text block format:
///
/// ```text
/// LP
/// VARS <n>
/// <idx> <name> <lower> <upper> <cost>
/// ROWS <m>
/// <idx> <name> <L|G|E> <rhs>
/// COEFS <nnz>
/// <row> <col> <value>
/// END
/// ```
///
/// Infinite bounds print as `inf` / `-inf`. Names never contain whitespace.
pub fn write_lp_text<T: Scalar, W: Write>(lp: &LinearProgram<T>, mut out: W) -> io::Result<()> {
    let clean = |s: &str| s.replace(char::is_whitespace, "_");
    writeln!(out, "LP")?;
    writeln!(out, "VARS {}", lp.n_vars())?;
    for j in 0..lp.n_vars() {
        writeln!(
            out,
            "{j} {} {} {} {}",
            clean(lp.var_name(j)),
            fmt(lp.lower()[j]),
            fmt(lp.upper()[j]),
            fmt(lp.objective()[j])
        )?;
    }
    writeln!(out, "ROWS {}", lp.n_rows())?;
    let mut nnz = 0;
    for (r, row) in lp.rows().iter().enumerate() {
        writeln!(out, "{r} {} {} {}", clean(&row.name), row.sense.symbol(), fmt(row.rhs))?;
        nnz += row.coefs.len();
    }
    writeln!(out, "COEFS {nnz}")?;
    for (r, row) in lp.rows().iter().enumerate() {
        for &(j, a) in &row.coefs {
            writeln!(out, "{r} {j} {}", fmt(a))?;
        }
    }
    writeln!(out, "END")
}

fn fmt<T: Scalar>(v: T) -> String {
    let v = v.to_f64_lossy();
    if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v:?}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::Sense;

    #[test]
    fn dump_layout() {
        let mut lp = LinearProgram::<f64>::new();
        let x = lp.add_var("x a", 0.0, f64::INFINITY, 2.5);
        lp.add_row("cap", vec![(x, 1.0)], Sense::Le, 4.0);
        let mut buf = Vec::new();
        write_lp_text(&lp, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "LP\nVARS 1\n0 x_a 0.0 inf 2.5\nROWS 1\n0 cap L 4.0\nCOEFS 1\n0 0 1.0\nEND\n"
        );
    }
}
