//! CSV tables with a commented key=value header, the JSON manifest and
//! optional SVG heat maps.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::hex;

pub type Row = Vec<String>;

/// Shortest representation that parses back to the same value.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

pub fn nums(xs: &[f64]) -> Row {
    xs.iter().map(|&x| num(x)).collect()
}

#[derive(Debug, Clone)]
pub struct TableSpec {
    pub name: &'static str,
    pub columns: Vec<&'static str>,
    /// (x column, y column, value column) for a heat map.
    pub plot: Option<(&'static str, &'static str, &'static str)>,
}

impl TableSpec {
    pub fn new(name: &'static str, columns: &[&'static str]) -> Self {
        Self { name, columns: columns.to_vec(), plot: None }
    }

    pub fn with_plot(mut self, x: &'static str, y: &'static str, v: &'static str) -> Self {
        self.plot = Some((x, y, v));
        self
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FileEntry {
    pub name: String,
    pub rows: usize,
    pub sha256: String,
}

pub struct Header<'a> {
    pub command: &'a str,
    pub config_hash: &'a str,
    pub code_version: &'a str,
}

pub fn write_table(dir: &Path, spec: &TableSpec, rows: &[Row], h: &Header) -> std::io::Result<FileEntry> {
    let mut s = String::new();
    let _ = writeln!(s, "# command={}", h.command);
    let _ = writeln!(s, "# config_hash={}", h.config_hash);
    let _ = writeln!(s, "# code_version={}", h.code_version);
    let _ = writeln!(s, "# table={}", spec.name);
    let _ = writeln!(s, "# rows={}", rows.len());
    let _ = writeln!(s, "{}", spec.columns.join(","));
    for r in rows {
        debug_assert_eq!(r.len(), spec.columns.len(), "{}", spec.name);
        let _ = writeln!(s, "{}", r.iter().map(|c| csv_cell(c)).collect::<Vec<_>>().join(","));
    }
    let name = format!("{}.csv", spec.name);
    write_atomic(&dir.join(&name), s.as_bytes())?;
    Ok(FileEntry { name, rows: rows.len(), sha256: hex(&Sha256::digest(s.as_bytes())) })
}

fn csv_cell(c: &str) -> String {
    if c.contains([',', '"', '\n']) {
        format!("\"{}\"", c.replace('"', "\"\""))
    } else {
        c.to_string()
    }
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(tmp, path)
}

#[cfg(test)]
/// Key=value header lines of a table written by [`write_table`].
pub fn read_header(text: &str) -> Vec<(String, String)> {
    text.lines()
        .map_while(|l| l.strip_prefix("# "))
        .filter_map(|l| l.split_once('=').map(|(k, v)| (k.to_string(), v.to_string())))
        .collect()
}

/// Heat map of one column over two others, cells placed on the sorted
/// unique coordinates. Non-numeric values are drawn grey.
pub fn heat_map_svg(spec: &TableSpec, rows: &[Row]) -> Option<String> {
    let (xc, yc, vc) = spec.plot?;
    let col = |name: &str| spec.columns.iter().position(|c| *c == name);
    let (xi, yi, vi) = (col(xc)?, col(yc)?, col(vc)?);
    let parse = |r: &Row, i: usize| -> f64 {
        match r[i].as_str() {
            "true" => 1.0,
            "false" => 0.0,
            s => s.parse().unwrap_or(f64::NAN),
        }
    };
    let uniq = |i: usize| {
        let mut v: Vec<f64> = rows.iter().map(|r| parse(r, i)).filter(|x| x.is_finite()).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    };
    let (xs, ys) = (uniq(xi), uniq(yi));
    if xs.is_empty() || ys.is_empty() {
        return None;
    }
    let vals: Vec<f64> = rows.iter().map(|r| parse(r, vi)).filter(|x| x.is_finite()).collect();
    let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (w, h, m) = (640.0, 480.0, 60.0);
    let (cw, ch) = ((w - 2.0 * m) / xs.len() as f64, (h - 2.0 * m) / ys.len() as f64);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    for r in rows {
        let (x, y, v) = (parse(r, xi), parse(r, yi), parse(r, vi));
        let (Some(i), Some(j)) = (xs.iter().position(|&a| a == x), ys.iter().position(|&a| a == y)) else {
            continue;
        };
        let fill = if v.is_finite() {
            let t = if hi > lo { (v - lo) / (hi - lo) } else { 0.5 };
            let c = |a: f64, b: f64| (a + (b - a) * t).round() as u8;
            format!("#{:02x}{:02x}{:02x}", c(68.0, 253.0), c(1.0, 231.0), c(84.0, 37.0))
        } else {
            "#999999".to_string()
        };
        let px = m + i as f64 * cw;
        let py = h - m - (j + 1) as f64 * ch;
        let _ = writeln!(s, r#"<rect x="{px:.2}" y="{py:.2}" width="{:.2}" height="{:.2}" fill="{fill}"/>"#, cw + 0.05, ch + 0.05);
    }
    let _ = writeln!(s, r#"<rect x="{m}" y="{m}" width="{}" height="{}" fill="none" stroke="black"/>"#, w - 2.0 * m, h - 2.0 * m);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-size="14">{xc}</text>"#, w / 2.0, h - 20.0);
    let _ = writeln!(s, r#"<text x="18" y="{}" text-anchor="middle" font-size="14" transform="rotate(-90 18 {})">{yc}</text>"#, h / 2.0, h / 2.0);
    let _ = writeln!(s, r#"<text x="{}" y="30" text-anchor="middle" font-size="14">{vc} [{lo:.4e}, {hi:.4e}]</text>"#, w / 2.0);
    for (k, v) in [(0usize, xs[0]), (xs.len() - 1, xs[xs.len() - 1])] {
        let _ = writeln!(s, r#"<text x="{:.1}" y="{}" text-anchor="middle" font-size="10">{v:.4e}</text>"#, m + (k as f64 + 0.5) * cw, h - m + 14.0);
    }
    for (k, v) in [(0usize, ys[0]), (ys.len() - 1, ys[ys.len() - 1])] {
        let _ = writeln!(s, r#"<text x="{}" y="{:.1}" text-anchor="end" font-size="10">{v:.3e}</text>"#, m - 4.0, h - m - (k as f64 + 0.5) * ch);
    }
    s.push_str("</svg>\n");
    Some(s)
}
