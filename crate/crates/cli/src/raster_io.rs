//! Raster text files and binary PGM heatmaps.
//!
//! Raster file layout: `key=value` header lines (`category`, `origin_x`,
//! `origin_y`, `cell`, `width`, `height`), a line `values`, then `height`
//! rows of space-separated values, bottom row first.

use anyhow::{anyhow, bail, Context, Result};
use sppa_core::{GridSpec, Raster};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PgmDepth {
    Eight,
    Sixteen,
}

impl PgmDepth {
    pub fn maxval(self) -> u32 {
        match self {
            PgmDepth::Eight => 255,
            PgmDepth::Sixteen => 65535,
        }
    }
}

impl std::str::FromStr for PgmDepth {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "pgm8" => Ok(PgmDepth::Eight),
            "pgm16" => Ok(PgmDepth::Sixteen),
            _ => Err(format!("unknown mode `{s}` (expected pgm8 or pgm16)")),
        }
    }
}

pub fn render_raster(r: &Raster, category_name: &str) -> String {
    let g = r.grid;
    let mut s = format!(
        "category={category_name}\norigin_x={}\norigin_y={}\ncell={}\nwidth={}\nheight={}\nvalues\n",
        g.x0, g.y0, g.cell, g.width, g.height
    );
    for row in r.values.chunks(g.width) {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        s.push_str(&line.join(" "));
        s.push('\n');
    }
    s
}

/// Parse a raster file, returning the raster (category index 0) and its category name.
pub fn parse_raster(text: &str) -> Result<(Raster, String)> {
    let mut lines = text.lines().enumerate();
    let mut fields = std::collections::HashMap::new();
    for (i, line) in lines.by_ref() {
        let line = line.trim();
        if line == "values" {
            break;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("line {}: expected key=value", i + 1))?;
        fields.insert(k.to_string(), v.to_string());
    }
    let get = |k: &str| fields.get(k).ok_or_else(|| anyhow!("raster header is missing `{k}`"));
    let num = |k: &str| -> Result<f64> { get(k)?.parse().with_context(|| format!("invalid `{k}`")) };
    let int = |k: &str| -> Result<usize> { get(k)?.parse().with_context(|| format!("invalid `{k}`")) };
    let grid = GridSpec {
        x0: num("origin_x")?,
        y0: num("origin_y")?,
        cell: num("cell")?,
        width: int("width")?,
        height: int("height")?,
    };
    grid.validate()?;
    let mut values = Vec::with_capacity(grid.len());
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        for tok in line.split_whitespace() {
            let v: f64 = tok.parse().with_context(|| format!("line {}: invalid value `{tok}`", i + 1))?;
            if !v.is_finite() || v < 0.0 {
                bail!("line {}: raster values must be finite and nonnegative", i + 1);
            }
            values.push(v);
        }
    }
    if values.len() != grid.len() {
        bail!("raster has {} values, header declares {}", values.len(), grid.len());
    }
    let name = get("category")?.clone();
    Ok((
        Raster {
            grid,
            values,
            category: 0,
        },
        name,
    ))
}

/// Linear scale of `[min, max]` onto `[0, maxval]`; a constant raster maps to zero.
pub fn scale_params(r: &Raster, depth: PgmDepth) -> (f64, f64, f64) {
    let (lo, hi) = (r.min(), r.max());
    let scale = if hi > lo { depth.maxval() as f64 / (hi - lo) } else { 0.0 };
    (lo, hi, scale)
}

/// Binary `P5` image, top row = largest y. 16-bit samples are big-endian.
pub fn encode_pgm(r: &Raster, depth: PgmDepth) -> Vec<u8> {
    let g = r.grid;
    let maxval = depth.maxval();
    let (lo, _, scale) = scale_params(r, depth);
    let mut out = format!("P5\n{} {}\n{}\n", g.width, g.height, maxval).into_bytes();
    for row in (0..g.height).rev() {
        for col in 0..g.width {
            let v = ((r.get(col, row) - lo) * scale).round().clamp(0.0, maxval as f64) as u32;
            match depth {
                PgmDepth::Eight => out.push(v as u8),
                PgmDepth::Sixteen => out.extend_from_slice(&(v as u16).to_be_bytes()),
            }
        }
    }
    out
}

pub fn render_sidecar(r: &Raster, category_name: &str, depth: PgmDepth) -> String {
    let (lo, hi, scale) = scale_params(r, depth);
    let g = r.grid;
    format!(
        "category={category_name}\norigin_x={}\norigin_y={}\ncell={}\nwidth={}\nheight={}\nmin={lo}\nmax={hi}\nmaxval={}\nscale={scale}\n",
        g.x0,
        g.y0,
        g.cell,
        g.width,
        g.height,
        depth.maxval()
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raster(width: usize, height: usize, values: Vec<f64>) -> Raster {
        Raster {
            grid: GridSpec {
                x0: 0.0,
                y0: 0.0,
                cell: 1.0,
                width,
                height,
            },
            values,
            category: 0,
        }
    }

    #[test]
    fn endpoints_map_to_zero_and_max() {
        let r = raster(2, 1, vec![0.0, 1.0]);
        let img = encode_pgm(&r, PgmDepth::Eight);
        assert_eq!(img, b"P5\n2 1\n255\n\x00\xff");
        let img16 = encode_pgm(&r, PgmDepth::Sixteen);
        assert_eq!(&img16[..13], b"P5\n2 1\n65535\n");
        assert_eq!(&img16[13..], &[0, 0, 0xff, 0xff]);
    }

    #[test]
    fn constant_raster_is_black() {
        let r = raster(3, 2, vec![0.7; 6]);
        let img = encode_pgm(&r, PgmDepth::Eight);
        assert!(img.ends_with(&[0u8; 6]));
        assert!(render_sidecar(&r, "lake", PgmDepth::Eight).contains("scale=0\n"));
    }

    #[test]
    fn top_row_is_largest_y() {
        // bottom row (row 0) holds the maximum
        let r = raster(1, 2, vec![5.0, 1.0]);
        let img = encode_pgm(&r, PgmDepth::Eight);
        assert_eq!(&img[img.len() - 2..], &[0, 255]);
    }

    #[test]
    fn raster_text_round_trip() {
        let r = raster(2, 2, vec![0.1, 0.25, 1e-300, 3.0]);
        let (back, name) = parse_raster(&render_raster(&r, "bay")).unwrap();
        assert_eq!(back, r);
        assert_eq!(name, "bay");
        assert!(parse_raster("category=a\nwidth=1\nvalues\n1\n").is_err());
    }
}
