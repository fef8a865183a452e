//! CSV and JSON writers. Floats use Rust's shortest round-trip formatting,
//! so reruns produce byte-identical files.

use std::fs::File;
use std::path::Path;

use ckdv_core::invariants::InvariantReport;
use ckdv_core::stability::StabilitySample;
use ckdv_core::{Components, CoupledState, Grid1D, RealField};
use serde::Serialize;

use crate::error::{CliError, CliResult};

fn num(v: f64) -> String {
    let a = v.abs();
    if v.is_nan() {
        "nan".into()
    } else if a == 0.0 || (1e-4..1e15).contains(&a) || a.is_infinite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn writer(path: &Path) -> CliResult<csv::Writer<File>> {
    Ok(csv::Writer::from_path(path)?)
}

pub fn fields_header(n_components: usize) -> Vec<String> {
    let mut h = vec!["x".to_string(), "u".to_string()];
    h.extend((1..=n_components).map(|i| format!("phi_{i}")));
    h
}

pub fn snapshot_name(t: f64) -> String {
    format!("fields_t{t:010.4}.csv")
}

pub fn write_fields(path: &Path, state: &CoupledState) -> CliResult<()> {
    let mut w = writer(path)?;
    w.write_record(fields_header(state.n_components()))?;
    let fields: Vec<&[f64]> = state.all_fields().map(|f| f.values()).collect();
    for (j, x) in state.grid().nodes().iter().enumerate() {
        let mut row = vec![num(*x)];
        row.extend(fields.iter().map(|f| num(f[j])));
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a snapshot written by [`write_fields`] (or by hand) onto `grid`.
pub fn read_fields(path: &Path, grid: &Grid1D, n_components: usize) -> CliResult<CoupledState> {
    let bad = |msg: String| CliError::Config(format!("initial.path {}: {msg}", path.display()));
    let mut r = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let header: Vec<String> = r
        .headers()
        .map_err(|e| bad(e.to_string()))?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    if header != fields_header(n_components) {
        return Err(bad(format!(
            "expected columns {:?}, found {header:?}",
            fields_header(n_components).join(",")
        )));
    }
    let mut columns = vec![Vec::with_capacity(grid.n_points()); n_components + 1];
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        for (col, cell) in columns.iter_mut().zip(rec.iter().skip(1)) {
            let v: f64 = cell
                .trim()
                .parse()
                .map_err(|_| bad(format!("row {}: cannot parse {cell:?}", line + 2)))?;
            col.push(v);
        }
    }
    if columns[0].len() != grid.n_points() {
        return Err(bad(format!(
            "{} rows for a grid of {} points",
            columns[0].len(),
            grid.n_points()
        )));
    }
    let mut fields = columns
        .into_iter()
        .map(|c| RealField::new(grid, c).map_err(|e| bad(e.to_string())));
    let u = fields.next().expect("u column")?;
    let phi = fields.collect::<CliResult<Vec<_>>>()?;
    Ok(CoupledState::new(u, phi)?)
}

pub fn invariants_header(n_components: usize) -> Vec<String> {
    let mut h: Vec<String> = ["t", "H", "V", "H1"].iter().map(|s| s.to_string()).collect();
    h.extend((1..=n_components).map(|i| format!("Hhalf_{i}")));
    for i in 1..=n_components {
        h.extend((1..=n_components).map(|j| format!("M_{i}{j}")));
    }
    h.push("sobolev".into());
    h.push("apriori_bound".into());
    h
}

pub fn write_invariants(path: &Path, n_components: usize, records: &[InvariantReport]) -> CliResult<()> {
    let mut w = writer(path)?;
    w.write_record(invariants_header(n_components))?;
    for r in records {
        let mut row = vec![num(r.t), num(r.h), num(r.v), num(r.h1)];
        row.extend(r.h_half.iter().map(|v| num(*v)));
        match &r.m {
            Some(m) => row.extend(m.iter().flatten().map(|v| num(*v))),
            None => row.extend(std::iter::repeat_n("nan".to_string(), n_components * n_components)),
        }
        row.push(num(r.sobolev()));
        row.push(num(r.apriori_bound));
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_stability(path: &Path, samples: &[StabilitySample]) -> CliResult<()> {
    let mut w = writer(path)?;
    w.write_record(["t", "dI", "dII", "tau_star", "sobolev"])?;
    for s in samples {
        w.write_record([num(s.t), num(s.d1), num(s.d2), num(s.tau_star), num(s.sobolev)])?;
    }
    w.flush()?;
    Ok(())
}

/// Generic table writer for the check commands.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> CliResult<()> {
    let mut w = writer(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn cell(v: f64) -> String {
    num(v)
}

pub fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn headers_follow_the_column_contract() {
        assert_eq!(fields_header(2).join(","), "x,u,phi_1,phi_2");
        assert_eq!(
            invariants_header(2).join(","),
            "t,H,V,H1,Hhalf_1,Hhalf_2,M_11,M_12,M_21,M_22,sobolev,apriori_bound"
        );
    }

    #[test]
    fn numbers_stay_short_and_exact() {
        assert_eq!(num(0.0), "0");
        assert_eq!(num(-14.4), "-14.4");
        assert_eq!(num(1.5e-13), "1.5e-13");
        assert_eq!(num(f64::NAN), "nan");
        for v in [1e-300, 3.0e20, -7.25e-5, 0.1 + 0.2] {
            assert_eq!(num(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn snapshot_names_sort_by_time() {
        assert_eq!(snapshot_name(0.0), "fields_t00000.0000.csv");
        assert_eq!(snapshot_name(2.5), "fields_t00002.5000.csv");
        assert!(snapshot_name(9.0) < snapshot_name(10.0));
    }

    #[test]
    fn fields_round_trip_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let g = Grid1D::new(20.0 * PI, 64).unwrap();
        let s = CoupledState::new(
            RealField::from_fn(&g, |x| (x / 7.0).sin() / 3.0).unwrap(),
            vec![RealField::from_fn(&g, |x| (-x * x).exp()).unwrap(); 2],
        )
        .unwrap();
        let path = dir.path().join("f.csv");
        write_fields(&path, &s).unwrap();
        assert_eq!(read_fields(&path, &g, 2).unwrap(), s);
        assert!(matches!(read_fields(&path, &g, 1), Err(CliError::Config(_))));
        let coarse = Grid1D::new(20.0 * PI, 32).unwrap();
        assert!(matches!(read_fields(&path, &coarse, 2), Err(CliError::Config(_))));
    }
}
