//! Deterministic CSV emission.
//!
//! Floats use Rust's shortest round-trip formatting, so identical inputs and
//! seed produce byte-identical output.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path as FsPath;

use anyhow::{Context, Result};

use crp_core::CheckRow;

/// Quote a CSV field when it contains separators or quotes.
fn field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writer to stdout or to `--out` path.
pub fn sink(out: Option<&FsPath>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(path) => {
            let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
            Box::new(BufWriter::new(f))
        }
        None => Box::new(io::stdout().lock()),
    })
}

pub fn write_check_rows(w: &mut dyn Write, rows: &[CheckRow]) -> io::Result<()> {
    writeln!(w, "scenario,check,statistic,value,std_error,z,pass,seed,n_paths")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            field(&r.scenario),
            field(&r.check),
            field(&r.statistic),
            r.value,
            fmt_opt(r.std_error),
            fmt_opt(r.z),
            r.pass,
            r.seed,
            r.n_paths
        )?;
    }
    Ok(())
}

pub struct PathRow {
    pub path_id: u64,
    pub n: usize,
    pub w: f64,
    pub t: f64,
    pub x: f64,
}

pub fn write_path_rows(w: &mut dyn Write, rows: &[PathRow]) -> io::Result<()> {
    writeln!(w, "path_id,n,W_n,T_n,X_n")?;
    for r in rows {
        writeln!(w, "{},{},{},{},{}", r.path_id, r.n, r.w, r.t, r.x)?;
    }
    Ok(())
}

pub fn write_convert_row(
    w: &mut dyn Write,
    scenario: &str,
    rho: f64,
    alpha: f64,
    q_interarrival: &str,
    q_claim: &str,
    seed: u64,
) -> io::Result<()> {
    writeln!(w, "scenario,rho,alpha,q_interarrival,q_claim,seed")?;
    writeln!(
        w,
        "{},{},{},{},{},{}",
        field(scenario),
        rho,
        alpha,
        field(q_interarrival),
        field(q_claim),
        seed
    )
}

pub fn write_premium_row(
    w: &mut dyn Write,
    scenario: &str,
    p_source: f64,
    p_target: f64,
    seed: u64,
) -> io::Result<()> {
    writeln!(w, "scenario,p_source,p_target,loading,seed")?;
    writeln!(w, "{},{},{},{},{}", field(scenario), p_source, p_target, p_target - p_source, seed)
}

pub fn write_renewal_rows(
    w: &mut dyn Write,
    family: &str,
    params: &str,
    rows: &[(f64, f64)],
    tail_tol: f64,
) -> io::Result<()> {
    writeln!(w, "family,params,t,expected_count,tail_tol")?;
    for (t, m) in rows {
        writeln!(w, "{},{},{},{},{}", field(family), field(params), t, m, tail_tol)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quoting_commas() {
        assert_eq!(field("plain"), "plain");
        assert_eq!(field("a,b"), "\"a,b\"");
        assert_eq!(field("say \"hi\""), "\"say \"\"hi\"\"\"");
    }

    #[test]
    fn check_rows_csv_shape() {
        let rows = vec![CheckRow {
            scenario: "s".into(),
            check: "unit_mass".into(),
            statistic: "t=2".into(),
            value: 1.0,
            std_error: Some(0.01),
            z: None,
            pass: true,
            seed: 42,
            n_paths: 1000,
        }];
        let mut buf = Vec::new();
        write_check_rows(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "scenario,check,statistic,value,std_error,z,pass,seed,n_paths\ns,unit_mass,t=2,1,0.01,,true,42,1000\n"
        );
    }
}
