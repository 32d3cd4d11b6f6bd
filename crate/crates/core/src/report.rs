//! CSV and Markdown rendering of power tables.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::adjustments::Method;
use crate::error::{Error, Result};
use crate::power_engine::{CellResult, PowerTable};
use crate::trait_sim::{Family, StudyConfig};

pub const CSV_HEADER: &str =
    "family,delta_prime,p,d,method,power,rejections,replicates,non_testable,fallbacks,mc_stderr";

pub fn write_csv<W: Write>(table: &PowerTable, mut out: W) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for c in &table.cells {
        writeln!(
            out,
            "{},{:.4},{},{},{},{:.4},{},{},{},{},{:.6}",
            table.family.name(),
            c.config.delta_prime,
            c.config.p,
            c.config.d,
            c.method.cli_name(),
            c.power,
            c.rejections,
            c.replicates,
            c.non_testable,
            c.fallback_count,
            c.mc_std_err
        )?;
    }
    Ok(())
}

pub fn emit_csv(table: &PowerTable, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_csv(table, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn csv_string(table: &PowerTable) -> String {
    let mut buf = Vec::new();
    write_csv(table, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("CSV output is ASCII")
}

/// Reads a table written by [`write_csv`].
///
/// Only the columns present in the file are recovered; study settings
/// not in the file take their defaults.
pub fn parse_csv(text: &str) -> Result<PowerTable> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == CSV_HEADER => {}
        other => {
            return Err(Error::Parse(format!("unexpected CSV header: {other:?}")));
        }
    }
    let mut family = None;
    let mut cells = Vec::new();
    for (lineno, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let bad = |what: &str| Error::Parse(format!("line {}: bad {what}", lineno + 2));
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 11 {
            return Err(bad("column count"));
        }
        let fam = Family::parse(cols[0])?;
        if *family.get_or_insert(fam) != fam {
            return Err(bad("family (mixed families)"));
        }
        let num = |i: usize, what: &str| cols[i].parse::<f64>().map_err(|_| bad(what));
        let count = |i: usize, what: &str| cols[i].parse::<usize>().map_err(|_| bad(what));
        let replicates = count(7, "replicates")?;
        let config = StudyConfig {
            family: fam,
            delta_prime: num(1, "delta_prime")?,
            p: num(2, "p")?,
            d: num(3, "d")?,
            n_replicates: replicates,
            ..Default::default()
        };
        let method = Method::from_cli(cols[4], fam)?;
        cells.push(CellResult::from_counts(
            config,
            method,
            count(6, "rejections")?,
            replicates,
            count(8, "non_testable")?,
            count(9, "fallbacks")?,
        ));
    }
    let family = family.ok_or_else(|| Error::Parse("CSV has no data rows".into()))?;
    Ok(PowerTable::new(family, cells))
}

/// `rejections / replicates` in percent, rounded half-to-even to one decimal.
pub fn percent_one_decimal(rejections: usize, replicates: usize) -> String {
    if replicates == 0 {
        return "NA".into();
    }
    let scaled = 1000 * rejections as u128;
    let reps = replicates as u128;
    let mut tenths = scaled / reps;
    let rem = scaled % reps;
    if 2 * rem > reps || (2 * rem == reps && tenths % 2 == 1) {
        tenths += 1;
    }
    format!("{}.{}", tenths / 10, tenths % 10)
}

pub fn delta_prime_label(dp: f64) -> String {
    for (value, label) in [
        (1.0 / 3.0, "1/3"),
        (2.0 / 3.0, "2/3"),
        (1.0, "1"),
        (0.0, "0"),
    ] {
        if (dp - value).abs() < 5e-5 {
            return label.into();
        }
    }
    format!("{dp:.4}")
}

pub fn write_markdown<W: Write>(table: &PowerTable, mut out: W) -> Result<()> {
    let methods = table.methods();
    let trait_name = match table.family {
        Family::Normal => "normal trait, ANOVA",
        Family::LogNormal => "lognormal trait, Kruskal-Wallis",
    };
    for (i, dp) in table.delta_primes().into_iter().enumerate() {
        if i > 0 {
            writeln!(out)?;
        }
        writeln!(
            out,
            "#### Power (%) by analysis method: δ′ = {} ({trait_name})\n",
            delta_prime_label(dp)
        )?;
        write!(out, "| p | d (mm Hg) |")?;
        for m in &methods {
            write!(out, " {} |", m.column_label())?;
        }
        writeln!(out)?;
        write!(out, "|---:|---:|")?;
        for _ in &methods {
            write!(out, "---:|")?;
        }
        writeln!(out)?;

        let mut rows: Vec<(f64, f64)> = Vec::new();
        for c in table
            .cells
            .iter()
            .filter(|c| (c.config.delta_prime - dp).abs() < 1e-9)
        {
            if !rows.contains(&(c.config.p, c.config.d)) {
                rows.push((c.config.p, c.config.d));
            }
        }
        for (p, d) in rows {
            write!(out, "| {p} | {d} |")?;
            for &m in &methods {
                let cell = table
                    .get(dp, p, d, m)
                    .map(|c| percent_one_decimal(c.rejections, c.replicates))
                    .unwrap_or_else(|| "NA".into());
                write!(out, " {cell} |")?;
            }
            writeln!(out)?;
        }
    }
    Ok(())
}

pub fn emit_markdown(table: &PowerTable, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_markdown(table, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn markdown_string(table: &PowerTable) -> String {
    let mut buf = Vec::new();
    write_markdown(table, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("Markdown output is UTF-8")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::power_engine::{run_grid, GridSpec};
    use proptest::prelude::*;

    fn small_table(family: Family, reps: usize) -> PowerTable {
        let spec = GridSpec {
            ps: vec![0.3],
            ds: vec![10.0],
            delta_primes: vec![1.0],
            base: StudyConfig {
                n_replicates: reps,
                master_seed: 4,
                family,
                ..Default::default()
            },
            ..GridSpec::standard(family)
        };
        run_grid(&spec).unwrap()
    }

    #[test]
    fn csv_single_cell() {
        let table = small_table(Family::Normal, 40);
        let text = csv_string(&table);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines.len(), 8);
        let names: Vec<&str> = lines[1..]
            .iter()
            .map(|l| l.split(',').nth(4).unwrap())
            .collect();
        assert_eq!(
            names,
            [
                "underlying",
                "observed",
                "omit-affected",
                "omit-treated",
                "covariate",
                "constant",
                "levy"
            ]
        );
        assert!(lines[1].starts_with("normal,1.0000,0.3,10,underlying,"));
        assert_eq!(csv_string(&small_table(Family::Normal, 40)), text);
    }

    #[test]
    fn csv_delta_prime_formatting() {
        let spec = GridSpec {
            ps: vec![0.5],
            ds: vec![20.0],
            methods: vec![Method::AllObserved],
            base: StudyConfig {
                n_replicates: 3,
                ..Default::default()
            },
            ..GridSpec::standard(Family::Normal)
        };
        let text = csv_string(&run_grid(&spec).unwrap());
        let dps: Vec<&str> = text
            .lines()
            .skip(1)
            .map(|l| l.split(',').nth(1).unwrap())
            .collect();
        assert_eq!(dps, ["1.0000", "0.6667", "0.3333"]);
    }

    #[test]
    fn csv_round_trip() {
        let table = small_table(Family::LogNormal, 30);
        let text = csv_string(&table);
        let parsed = parse_csv(&text).unwrap();
        assert_eq!(csv_string(&parsed), text);
        for (a, b) in table.cells.iter().zip(&parsed.cells) {
            assert_eq!(a.power, b.power);
            assert_eq!(a.method, b.method);
            assert_eq!(a.rejections, b.rejections);
        }
    }

    #[test]
    fn csv_parse_errors() {
        assert!(parse_csv("nope\n").is_err());
        assert!(parse_csv(&format!("{CSV_HEADER}\n")).is_err());
        let bad = format!("{CSV_HEADER}\nnormal,1.0000,0.1,10,bogus,0.1,1,10,0,0,0.1\n");
        assert!(parse_csv(&bad).is_err());
    }

    #[test]
    fn percent_rounding() {
        assert_eq!(percent_one_decimal(1000, 1000), "100.0");
        assert_eq!(percent_one_decimal(447, 1000), "44.7");
        assert_eq!(percent_one_decimal(0, 1000), "0.0");
        // 0.25% -> 0.2, 0.75% -> 0.8 (half to even)
        assert_eq!(percent_one_decimal(1, 400), "0.2");
        assert_eq!(percent_one_decimal(3, 400), "0.8");
        assert_eq!(percent_one_decimal(1, 3), "33.3");
        assert_eq!(percent_one_decimal(2, 3), "66.7");
    }

    #[test]
    fn markdown_shapes() {
        let mut spec = GridSpec::standard(Family::Normal);
        spec.base.n_replicates = 2;
        let md = markdown_string(&run_grid(&spec).unwrap());
        assert_eq!(md.matches("#### ").count(), 3);
        let rows: Vec<&str> = md.lines().filter(|l| l.starts_with("| 0.")).collect();
        assert_eq!(rows.len(), 45);
        assert!(rows.iter().all(|r| r.matches('|').count() == 10));

        let mut spec = GridSpec::standard(Family::LogNormal);
        spec.base.n_replicates = 2;
        spec.delta_primes = vec![1.0];
        let md = markdown_string(&run_grid(&spec).unwrap());
        let header = md.lines().find(|l| l.starts_with("| p |")).unwrap();
        assert_eq!(header.matches('|').count(), 9);
        assert!(!header.contains("covariate"));
        assert!(md.contains("δ′ = 1 "));
    }

    proptest! {
        #[test]
        fn parsed_power_matches_printed(rej in 0usize..=500, extra in 0usize..500) {
            let reps = rej + extra + 1;
            let cell = CellResult::from_counts(StudyConfig::default(), Method::AllObserved, rej, reps, 0, 0);
            let table = PowerTable::new(Family::Normal, vec![cell.clone()]);
            let parsed = parse_csv(&csv_string(&table)).unwrap();
            prop_assert_eq!(format!("{:.4}", parsed.cells[0].power), format!("{:.4}", cell.power));
            prop_assert_eq!(parsed.cells[0].rejections, rej);
        }
    }
}
