//! Numeric CSV tables as written by this crate, and plotting them.

use crate::error::{Error, Result};

use super::svg::{line_chart, Series};

/// Column names and rows of a numeric CSV. Lines starting with `#` are
/// comments; the first other line is the header. Empty cells read as NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn parse(text: &str) -> Result<Table> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
        let (_, header) = lines.next().ok_or_else(|| Error::Parse { line: 1, message: "missing header".into() })?;
        let columns: Vec<String> = header.split(',').map(|c| c.trim().to_string()).collect();
        if columns.iter().any(String::is_empty) {
            return Err(Error::Parse { line: 1, message: "empty column name".into() });
        }
        let mut rows = Vec::new();
        for (i, line) in lines {
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != columns.len() {
                return Err(Error::Parse { line: i + 1, message: format!("expected {} cells, got {}", columns.len(), cells.len()) });
            }
            let row = cells
                .iter()
                .map(|c| {
                    let c = c.trim();
                    if c.is_empty() {
                        Ok(f64::NAN)
                    } else {
                        c.parse::<f64>().map_err(|_| Error::Parse { line: i + 1, message: format!("not a number: `{c}`") })
                    }
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        Ok(Table { columns, rows })
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let k = self
            .columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::InvalidArgument(format!("no column `{name}`; have {}", self.columns.join(", "))))?;
        Ok(self.rows.iter().map(|r| r[k]).collect())
    }
}

/// Line chart of `ys` against `x`.
pub fn plot_table(table: &Table, x: &str, ys: &[String], title: &str) -> Result<String> {
    let xv = table.column(x)?;
    let series = ys
        .iter()
        .map(|y| Ok(Series::new(y.clone(), xv.iter().copied().zip(table.column(y)?).collect())))
        .collect::<Result<Vec<_>>>()?;
    Ok(line_chart(title, x, &ys.join(", "), &series))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_crate_csv() {
        let t = Table::parse("# units: t [time]\nt,E,x\n0.0,1.0,\n1.0,0.5,2\n").unwrap();
        assert_eq!(t.columns, vec!["t", "E", "x"]);
        assert_eq!(t.column("E").unwrap(), vec![1.0, 0.5]);
        assert!(t.column("x").unwrap()[0].is_nan());
        assert!(t.column("y").is_err());
        let svg = plot_table(&t, "t", &["E".into()], "E").unwrap();
        assert!(svg.contains("<polyline"));
    }

    #[test]
    fn rejects_ragged_rows() {
        assert!(Table::parse("a,b\n1\n").is_err());
        assert!(Table::parse("a,b\n1,zz\n").is_err());
        assert!(Table::parse("# only comments\n").is_err());
    }
}
