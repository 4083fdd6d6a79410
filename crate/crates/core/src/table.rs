//! Convergence tables and their CSV/Markdown forms.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::recovery::observed_rate;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRow {
    /// Cells per side; the mesh has `2 n^2` triangles.
    pub n: usize,
    pub error_plain: f64,
    pub rate_plain: Option<f64>,
    pub error_post: f64,
    pub rate_post: Option<f64>,
}

impl TableRow {
    /// `"2n x n"`: triangles along the bottom side by cells up the side.
    pub fn label(&self) -> String {
        format!("{}x{}", 2 * self.n, self.n)
    }

    pub fn elements(&self) -> usize {
        2 * self.n * self.n
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub title: String,
    /// Column heading of the plain error, e.g. `|grad u - grad_h u_h|`.
    pub plain_label: String,
    pub post_label: String,
    pub rows: Vec<TableRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Markdown,
}

impl ConvergenceTable {
    /// Builds the table and fills the rate columns from the errors.
    pub fn from_errors(
        title: impl Into<String>,
        plain_label: impl Into<String>,
        post_label: impl Into<String>,
        levels: &[usize],
        plain: &[f64],
        post: &[f64],
    ) -> Self {
        let rows = levels
            .iter()
            .zip(plain.iter().zip(post))
            .map(|(&n, (&error_plain, &error_post))| TableRow {
                n,
                error_plain,
                rate_plain: None,
                error_post,
                rate_post: None,
            })
            .collect();
        let mut table =
            Self { title: title.into(), plain_label: plain_label.into(), post_label: post_label.into(), rows };
        table.recompute_rates();
        table
    }

    pub fn recompute_rates(&mut self) {
        for i in 0..self.rows.len() {
            if i == 0 {
                self.rows[0].rate_plain = None;
                self.rows[0].rate_post = None;
                continue;
            }
            let (p, c) = (&self.rows[i - 1], &self.rows[i]);
            let rp = observed_rate(p.n, p.error_plain, c.n, c.error_plain);
            let rq = observed_rate(p.n, p.error_post, c.n, c.error_post);
            self.rows[i].rate_plain = Some(rp);
            self.rows[i].rate_post = Some(rq);
        }
    }

    pub fn levels(&self) -> Vec<usize> {
        self.rows.iter().map(|r| r.n).collect()
    }

    pub fn plain_errors(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.error_plain).collect()
    }

    pub fn post_errors(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.error_post).collect()
    }

    pub fn post_rates(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.rate_post).collect()
    }

    pub fn plain_rates(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.rate_plain).collect()
    }

    pub fn emit(&self, format: TableFormat) -> String {
        match format {
            TableFormat::Csv => self.to_csv(),
            TableFormat::Markdown => self.to_markdown(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("level,elements,error_plain,rate_plain,error_post,rate_post\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.label(),
                r.elements(),
                format_sci(r.error_plain),
                format_rate(r.rate_plain),
                format_sci(r.error_post),
                format_rate(r.rate_post)
            ));
        }
        out
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        if !self.title.is_empty() {
            out.push_str(&format!("**{}**\n\n", self.title));
        }
        out.push_str(&format!(
            "| Number of elements | {} | Rate | {} | Rate |\n|---|---|---|---|---|\n",
            self.plain_label, self.post_label
        ));
        for r in &self.rows {
            out.push_str(&format!(
                "| {}×{} | {} | {} | {} | {} |\n",
                2 * r.n,
                r.n,
                format_sci(r.error_plain),
                format_rate(r.rate_plain),
                format_sci(r.error_post),
                format_rate(r.rate_post)
            ));
        }
        out
    }

    /// Reads back the output of [`ConvergenceTable::to_csv`]. Labels and
    /// titles are not part of the CSV and come back empty.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::CheckFailed("empty CSV".into()))?;
        if header.trim() != "level,elements,error_plain,rate_plain,error_post,rate_post" {
            return Err(Error::CheckFailed(format!("unexpected CSV header {header:?}")));
        }
        let bad = |line: &str| Error::CheckFailed(format!("malformed CSV row {line:?}"));
        let mut rows = Vec::new();
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != 6 {
                return Err(bad(line));
            }
            let n = cells[0].split('x').nth(1).and_then(|s| s.parse().ok()).ok_or_else(|| bad(line))?;
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad(line));
            let rate = |s: &str| if s.is_empty() { Ok(None) } else { num(s).map(Some) };
            rows.push(TableRow {
                n,
                error_plain: num(cells[2])?,
                rate_plain: rate(cells[3])?,
                error_post: num(cells[4])?,
                rate_post: rate(cells[5])?,
            });
        }
        Ok(Self { title: String::new(), plain_label: String::new(), post_label: String::new(), rows })
    }
}

/// `6.4104E-01` style: five significant digits and a signed two-digit
/// exponent.
pub fn format_sci(x: f64) -> String {
    let s = format!("{x:.4E}");
    match s.split_once('E') {
        Some((mantissa, exp)) => {
            let e: i32 = exp.parse().unwrap_or(0);
            let sign = if e < 0 { '-' } else { '+' };
            format!("{mantissa}E{sign}{:02}", e.abs())
        }
        None => s,
    }
}

fn format_rate(r: Option<f64>) -> String {
    r.map(|v| format!("{v:.4}")).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scientific_style() {
        assert_eq!(format_sci(0.64104), "6.4104E-01");
        assert_eq!(format_sci(1.2599), "1.2599E+00");
        assert_eq!(format_sci(1.8337e-4), "1.8337E-04");
        assert_eq!(format_sci(12345.0), "1.2345E+04");
    }

    #[test]
    fn empty_table_is_header_only() {
        let t = ConvergenceTable::from_errors("", "a", "b", &[], &[], &[]);
        assert_eq!(t.to_csv(), "level,elements,error_plain,rate_plain,error_post,rate_post\n");
    }

    #[test]
    fn single_row_has_no_rates() {
        let t = ConvergenceTable::from_errors("", "a", "b", &[4], &[0.5], &[0.1]);
        assert_eq!(t.to_csv().lines().nth(1).unwrap(), "8x4,32,5.0000E-01,,1.0000E-01,");
    }

    #[test]
    fn halving_gives_rate_one() {
        let t = ConvergenceTable::from_errors("", "a", "b", &[4, 8], &[1.0, 0.5], &[1.0, 0.25]);
        assert_eq!(t.rows[1].rate_plain, Some(1.0));
        assert_eq!(t.rows[1].rate_post, Some(2.0));
    }
}
