//! Field dumps, 16-bit graymaps and atomic file writes.
//!
//! A dump starts with `ROTBEC-FIELD v1 dim=<d> n=<n1,..> L=<L1,..>`, which
//! may be followed by further `key=value` tokens (readers ignore them). The
//! text form continues with one `re,im` row per grid point in row-major
//! order; the binary form stores little-endian `f64` pairs and keeps the
//! header in a sidecar `<file>.hdr`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex;

use crate::error::LatticeError;
use crate::lattice::{Field, Grid};
use crate::real::Real;

const MAGIC: &str = "ROTBEC-FIELD";
const VERSION: &str = "v1";

type IoResult<T> = std::result::Result<T, LatticeError>;

/// Writes `bytes` to a temporary sibling and renames it over `path`.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

fn join<T: Real>(xs: &[T]) -> String {
    xs.iter().map(|x| format!("{}", x.as_f64())).collect::<Vec<_>>().join(",")
}

/// Header line for a field on `grid`, with extra `key=value` tokens.
pub fn field_header<T: Real>(grid: &Grid<T>, extra: &[(&str, String)]) -> String {
    let n = grid.points().iter().map(|p| p.to_string()).collect::<Vec<_>>().join(",");
    let mut line = format!("{MAGIC} {VERSION} dim={} n={n} L={}", grid.dim(), join(grid.half_width()));
    for (k, v) in extra {
        line.push_str(&format!(" {k}={v}"));
    }
    line
}

/// Grid described by a header line.
pub fn parse_header<T: Real>(line: &str) -> IoResult<Grid<T>> {
    let bad = |m: &str| LatticeError::Format(m.to_string());
    let mut tokens = line.split_whitespace();
    if tokens.next() != Some(MAGIC) {
        return Err(bad("missing magic"));
    }
    if tokens.next() != Some(VERSION) {
        return Err(bad("unsupported version"));
    }
    let (mut dim, mut n, mut l) = (None, None, None);
    for t in tokens {
        let Some((k, v)) = t.split_once('=') else {
            return Err(bad("token without '='"));
        };
        match k {
            "dim" => dim = Some(v.parse::<usize>().map_err(|_| bad("dim"))?),
            "n" => {
                n = Some(
                    v.split(',')
                        .map(|s| s.parse::<usize>())
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(|_| bad("n"))?,
                )
            }
            "L" => {
                l = Some(
                    v.split(',')
                        .map(|s| s.parse::<f64>().map(T::lit))
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(|_| bad("L"))?,
                )
            }
            _ => {}
        }
    }
    let (dim, n, l) = (dim.ok_or(bad("dim"))?, n.ok_or(bad("n"))?, l.ok_or(bad("L"))?);
    if n.len() != dim || l.len() != dim {
        return Err(bad("axis count does not match dim"));
    }
    Grid::new(&l, &n)
}

/// Text dump: header followed by `re,im` rows.
pub fn field_to_text<T: Real>(phi: &Field<T>, extra: &[(&str, String)]) -> String {
    let mut s = field_header(phi.grid(), extra);
    s.push('\n');
    for v in phi.values() {
        s.push_str(&format!("{:e},{:e}\n", v.re.as_f64(), v.im.as_f64()));
    }
    s
}

pub fn field_from_text<T: Real>(text: &str) -> IoResult<Field<T>> {
    let mut lines = text.lines();
    let header = lines.next().ok_or(LatticeError::Format("empty dump".into()))?;
    let grid = Arc::new(parse_header::<T>(header)?);
    let mut values = Vec::with_capacity(grid.len());
    for line in lines.filter(|l| !l.trim().is_empty()) {
        let (re, im) = line.split_once(',').ok_or(LatticeError::Format(format!("bad row {line:?}")))?;
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map(T::lit)
                .map_err(|_| LatticeError::Format(format!("bad number {s:?}")))
        };
        values.push(Complex::new(parse(re)?, parse(im)?));
    }
    Field::new(grid, values)
}

pub fn write_field_text<T: Real>(path: &Path, phi: &Field<T>, extra: &[(&str, String)]) -> IoResult<()> {
    atomic_write(path, field_to_text(phi, extra).as_bytes())?;
    Ok(())
}

pub fn read_field_text<T: Real>(path: &Path) -> IoResult<Field<T>> {
    field_from_text(&fs::read_to_string(path)?)
}

/// Sidecar header path of a binary dump.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".hdr");
    PathBuf::from(s)
}

pub fn write_field_binary<T: Real>(path: &Path, phi: &Field<T>, extra: &[(&str, String)]) -> IoResult<()> {
    let mut bytes = Vec::with_capacity(phi.values().len() * 16);
    for v in phi.values() {
        bytes.extend_from_slice(&v.re.as_f64().to_le_bytes());
        bytes.extend_from_slice(&v.im.as_f64().to_le_bytes());
    }
    atomic_write(path, &bytes)?;
    let header = field_header(phi.grid(), extra) + "\n";
    atomic_write(&sidecar_path(path), header.as_bytes())?;
    Ok(())
}

pub fn read_field_binary<T: Real>(path: &Path) -> IoResult<Field<T>> {
    let header = fs::read_to_string(sidecar_path(path))?;
    let grid = Arc::new(parse_header::<T>(header.lines().next().unwrap_or(""))?);
    let bytes = fs::read(path)?;
    if bytes.len() != grid.len() * 16 {
        return Err(LatticeError::Length {
            expected: grid.len(),
            found: bytes.len() / 16,
        });
    }
    let values = bytes
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().unwrap());
            let im = f64::from_le_bytes(c[8..].try_into().unwrap());
            Complex::new(T::lit(re), T::lit(im))
        })
        .collect();
    Field::new(grid, values)
}

/// Binary 16-bit portable graymap; `pixels` row-major, top row first.
pub fn pgm16(width: usize, height: usize, pixels: &[u16], comment: Option<&str>) -> Vec<u8> {
    assert_eq!(pixels.len(), width * height, "pixel count");
    let mut out = Vec::with_capacity(pixels.len() * 2 + 64);
    out.extend_from_slice(b"P5\n");
    if let Some(c) = comment {
        for line in c.lines() {
            out.extend_from_slice(format!("# {line}\n").as_bytes());
        }
    }
    out.extend_from_slice(format!("{width} {height}\n65535\n").as_bytes());
    for p in pixels {
        out.extend_from_slice(&p.to_be_bytes());
    }
    out
}

/// Pixels of a 2D plane, `y` increasing upwards.
fn plane_pixels<T: Real>(phi: &Field<T>, f: impl Fn(Complex<T>) -> u16) -> (usize, usize, Vec<u16>) {
    let grid = phi.grid();
    let (nx, ny) = (grid.points()[0], grid.points()[1]);
    let vals = phi.values();
    let mut px = Vec::with_capacity(nx * ny);
    for j in (0..ny).rev() {
        for i in 0..nx {
            // row-major with the last axis fastest
            px.push(f(vals[i * ny + j]));
        }
    }
    (nx, ny, px)
}

/// Density scaled so that its maximum is white.
pub fn density_image<T: Real>(plane: &Field<T>) -> (usize, usize, Vec<u16>) {
    let peak = plane.values().iter().fold(T::zero(), |m, v| m.max(v.norm_sqr()));
    let scale = if peak > T::zero() { T::lit(65535.0) / peak } else { T::zero() };
    plane_pixels(plane, |v| (v.norm_sqr() * scale).round().as_f64().clamp(0.0, 65535.0) as u16)
}

/// Phase mapped from `[−π, π]` onto the full gray range.
pub fn phase_image<T: Real>(plane: &Field<T>) -> (usize, usize, Vec<u16>) {
    plane_pixels(plane, |v| {
        let t = (v.arg().as_f64() + std::f64::consts::PI) / (2.0 * std::f64::consts::PI);
        (t * 65535.0).round().clamp(0.0, 65535.0) as u16
    })
}
