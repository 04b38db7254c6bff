//! File formats: IDX3 images, numeric CSV, the PCAE matrix container, PGM
//! grids and `key=value` text.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::dataset::Dataset;
use crate::error::{FormatError, Result};
use crate::matrix::Matrix;

const IDX3_MAGIC: u32 = 0x0000_0803;
pub const PCAE_MAGIC: &[u8; 4] = b"PCAE";
pub const PCAE_VERSION: u32 = 1;
const PCAE_HEADER: u64 = 4 + 4 + 8 + 8;

/// Reads an IDX3 (`ubyte`) image file. Pixels are scaled to `[0, 1]` and each
/// image becomes one column.
pub fn read_idx_images(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    parse_idx_images(&bytes, &path.display().to_string())
}

pub fn parse_idx_images(bytes: &[u8], tag: &str) -> Result<Dataset> {
    if bytes.len() < 4 {
        return Err(FormatError::IdxTruncated { expected: 16, found: bytes.len() }.into());
    }
    let be = |i: usize| u32::from_be_bytes(bytes[i..i + 4].try_into().unwrap());
    let magic = be(0);
    if magic != IDX3_MAGIC {
        return Err(FormatError::IdxMagic(magic).into());
    }
    if bytes.len() < 16 {
        return Err(FormatError::IdxTruncated { expected: 16, found: bytes.len() }.into());
    }
    let (count, height, width) = (be(4), be(8), be(12));
    let pixels = (height as usize)
        .checked_mul(width as usize)
        .and_then(|p| p.checked_mul(count as usize).map(|total| (p, total)))
        .and_then(|(p, total)| total.checked_add(16).map(|t| (p, t)));
    let Some((dim, expected)) = pixels else {
        return Err(FormatError::IdxOverflow(count, height, width).into());
    };
    if bytes.len() < expected {
        return Err(FormatError::IdxTruncated { expected, found: bytes.len() }.into());
    }
    let count = count as usize;
    let data = &bytes[16..expected];
    let y = Matrix::from_fn(dim, count, |i, j| data[j * dim + i] as f64 / 255.0);
    Dataset::new(y, tag)?.with_image_shape(height as usize, width as usize)
}

/// How a CSV maps onto observations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Orientation {
    /// Each CSV row is one observation.
    #[default]
    RowsAreObservations,
    /// Each CSV column is one observation.
    ColumnsAreObservations,
}

/// Parses a headerless numeric CSV into an `n x N` matrix of observations.
pub fn read_csv(path: impl AsRef<Path>, orientation: Orientation) -> Result<Matrix> {
    let text = fs::read_to_string(path)?;
    parse_csv(&text, orientation)
}

pub fn parse_csv(text: &str, orientation: Orientation) -> Result<Matrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        let mut row = Vec::with_capacity(record.len());
        for (c, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| FormatError::CsvNumber {
                row: r + 1,
                col: c + 1,
                text: cell.to_string(),
            })?;
            if !v.is_finite() {
                return Err(FormatError::NonFinite { row: r + 1, col: c + 1 }.into());
            }
            row.push(v);
        }
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(FormatError::CsvRagged {
                    row: r + 1,
                    expected: first.len(),
                    found: row.len(),
                }
                .into());
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(FormatError::CsvEmpty.into());
    }
    let m = Matrix::from_rows(&rows)?;
    Ok(match orientation {
        Orientation::RowsAreObservations => m.transpose(),
        Orientation::ColumnsAreObservations => m,
    })
}

/// Formats an `n x N` observation matrix as CSV. Values use the shortest
/// representation that parses back to the same `f64`.
pub fn format_csv(y: &Matrix, orientation: Orientation) -> String {
    let m = match orientation {
        Orientation::RowsAreObservations => y.transpose(),
        Orientation::ColumnsAreObservations => y.clone(),
    };
    let mut out = String::new();
    for i in 0..m.rows() {
        let cells: Vec<String> = m.row(i).iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn write_csv(path: impl AsRef<Path>, y: &Matrix, orientation: Orientation) -> Result<()> {
    fs::write(path, format_csv(y, orientation))?;
    Ok(())
}

/// Encodes a matrix in the PCAE container.
pub fn encode_matrix(m: &Matrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(PCAE_HEADER as usize + 8 * m.as_slice().len());
    out.extend_from_slice(PCAE_MAGIC);
    out.extend_from_slice(&PCAE_VERSION.to_le_bytes());
    out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.cols() as u64).to_le_bytes());
    for v in m.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_matrix(bytes: &[u8]) -> Result<Matrix> {
    let found = bytes.len() as u64;
    if bytes.len() < 4 {
        return Err(FormatError::PcaeTruncated { expected: PCAE_HEADER, found }.into());
    }
    let magic: [u8; 4] = bytes[..4].try_into().unwrap();
    if &magic != PCAE_MAGIC {
        return Err(FormatError::PcaeMagic(magic).into());
    }
    if bytes.len() < 8 {
        return Err(FormatError::PcaeTruncated { expected: PCAE_HEADER, found }.into());
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != PCAE_VERSION {
        return Err(FormatError::PcaeVersion(version).into());
    }
    if found < PCAE_HEADER {
        return Err(FormatError::PcaeTruncated { expected: PCAE_HEADER, found }.into());
    }
    let rows = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let cols = u64::from_le_bytes(bytes[16..24].try_into().unwrap());
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(8))
        .and_then(|n| n.checked_add(PCAE_HEADER))
        .filter(|_| usize::try_from(rows).is_ok() && usize::try_from(cols).is_ok())
        .ok_or(FormatError::PcaeOverflow(rows, cols))?;
    if found < expected {
        return Err(FormatError::PcaeTruncated { expected, found }.into());
    }
    if found > expected {
        return Err(FormatError::PcaeTrailing(found - expected).into());
    }
    let (rows, cols) = (rows as usize, cols as usize);
    let mut data = Vec::with_capacity(rows * cols);
    for (k, chunk) in bytes[PCAE_HEADER as usize..].chunks_exact(8).enumerate() {
        let v = f64::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(FormatError::NonFinite { row: k / cols.max(1), col: k % cols.max(1) }.into());
        }
        data.push(v);
    }
    Matrix::from_vec(rows, cols, data)
}

pub fn write_matrix(path: impl AsRef<Path>, m: &Matrix) -> Result<()> {
    fs::write(path, encode_matrix(m))?;
    Ok(())
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<Matrix> {
    decode_matrix(&fs::read(path)?)
}

/// Renders each column of `vectors` as a `height x width` tile in a binary
/// PGM (P5) grid with `grid_cols` tiles per row. Every tile is stretched
/// independently so its minimum maps to 0 and its maximum to 255; constant
/// tiles are drawn mid-grey.
pub fn render_pgm_grid(vectors: &Matrix, shape: (usize, usize), grid_cols: usize) -> Result<Vec<u8>> {
    let (height, width) = shape;
    if vectors.cols() == 0 || grid_cols == 0 || height == 0 || width == 0 {
        return Err(crate::Error::Empty("render_pgm_grid"));
    }
    if height * width != vectors.rows() {
        return Err(crate::Error::InvalidArgument(format!(
            "tile shape {height}x{width} does not match vector length {}",
            vectors.rows()
        )));
    }
    let grid_rows = vectors.cols().div_ceil(grid_cols);
    let (img_w, img_h) = (grid_cols * width, grid_rows * height);
    let mut pixels = vec![0u8; img_w * img_h];
    for k in 0..vectors.cols() {
        let col = vectors.column(k);
        let tile = tile_bytes(&col);
        let (top, left) = ((k / grid_cols) * height, (k % grid_cols) * width);
        for r in 0..height {
            let start = (top + r) * img_w + left;
            pixels[start..start + width].copy_from_slice(&tile[r * width..(r + 1) * width]);
        }
    }
    let mut out = format!("P5\n{img_w} {img_h}\n255\n").into_bytes();
    out.extend_from_slice(&pixels);
    Ok(out)
}

fn tile_bytes(values: &[f64]) -> Vec<u8> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return vec![128; values.len()];
    }
    values
        .iter()
        .map(|v| ((v - lo) / (hi - lo) * 255.0).round().clamp(0.0, 255.0) as u8)
        .collect()
}

pub fn write_pgm_grid(path: impl AsRef<Path>, vectors: &Matrix, shape: (usize, usize), grid_cols: usize) -> Result<()> {
    fs::write(path, render_pgm_grid(vectors, shape, grid_cols)?)?;
    Ok(())
}

/// Writes `key=value` lines in the given order.
pub fn write_key_values(path: impl AsRef<Path>, pairs: &[(String, String)]) -> Result<()> {
    let mut f = fs::File::create(path)?;
    for (k, v) in pairs {
        writeln!(f, "{k}={v}")?;
    }
    Ok(())
}

/// Parses `key=value` lines, skipping blanks and `#` comments.
pub fn parse_key_values(text: &str) -> Vec<(String, String)> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect()
}

/// Loads observations from a file, picking the reader by its leading bytes:
/// IDX3 images, a PCAE matrix (`n x N`, one observation per column), or CSV.
pub fn read_dataset(path: impl AsRef<Path>, orientation: Orientation) -> Result<Dataset> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    let tag = path.display().to_string();
    if bytes.starts_with(&[0, 0, 8]) {
        return parse_idx_images(&bytes, &tag);
    }
    if bytes.starts_with(PCAE_MAGIC) {
        return Dataset::new(decode_matrix(&bytes)?, tag);
    }
    let text = String::from_utf8(bytes)
        .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
    Dataset::new(parse_csv(&text, orientation)?, tag)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use proptest::prelude::*;

    fn idx_bytes(count: u32, h: u32, w: u32, pixels: &[u8]) -> Vec<u8> {
        let mut b = Vec::new();
        for v in [IDX3_MAGIC, count, h, w] {
            b.extend_from_slice(&v.to_be_bytes());
        }
        b.extend_from_slice(pixels);
        b
    }

    #[test]
    fn idx_two_images() {
        let mut px = vec![0u8; 2 * 28 * 28];
        px[0] = 255;
        px[28 * 28 + 5] = 51;
        let d = parse_idx_images(&idx_bytes(2, 28, 28, &px), "t").unwrap();
        assert_eq!(d.observations().shape(), (784, 2));
        assert_eq!(d.image_shape(), Some((28, 28)));
        assert_eq!(d.observations()[(0, 0)], 1.0);
        assert_eq!(d.observations()[(5, 1)], 0.2);
        assert!(d.observations().as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn idx_errors() {
        let mut labels = idx_bytes(1, 2, 2, &[0; 4]);
        labels[3] = 0x01;
        let err = parse_idx_images(&labels, "t").unwrap_err();
        assert!(err.to_string().contains("not an image IDX file"));

        let short = idx_bytes(2, 2, 2, &[0; 5]);
        assert!(matches!(
            parse_idx_images(&short, "t"),
            Err(Error::Format(FormatError::IdxTruncated { expected: 24, found: 21 }))
        ));
        assert!(matches!(
            parse_idx_images(&idx_bytes(2, 2, 2, &[])[..10], "t"),
            Err(Error::Format(FormatError::IdxTruncated { .. }))
        ));
        if usize::BITS == 64 {
            let huge = idx_bytes(u32::MAX, u32::MAX, u32::MAX, &[]);
            assert!(matches!(
                parse_idx_images(&huge, "t"),
                Err(Error::Format(FormatError::IdxOverflow(..)))
            ));
        }
    }

    #[test]
    fn csv_orientation() {
        let m = parse_csv("1,2,3\n4,5,6\n", Orientation::RowsAreObservations).unwrap();
        assert_eq!(m.shape(), (3, 2));
        assert_eq!(m.column(1), vec![4.0, 5.0, 6.0]);
        let m = parse_csv("1,2,3\n4,5,6\n", Orientation::ColumnsAreObservations).unwrap();
        assert_eq!(m.shape(), (2, 3));
        assert_eq!(m.column(2), vec![3.0, 6.0]);
    }

    #[test]
    fn csv_errors() {
        assert!(matches!(
            parse_csv("1,2\n3\n", Orientation::RowsAreObservations),
            Err(Error::Format(FormatError::CsvRagged { row: 2, expected: 2, found: 1 }))
        ));
        match parse_csv("1,2\n3,abc\n", Orientation::RowsAreObservations) {
            Err(Error::Format(FormatError::CsvNumber { row, col, text })) => {
                assert_eq!((row, col, text.as_str()), (2, 2, "abc"));
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_csv("", Orientation::RowsAreObservations),
            Err(Error::Format(FormatError::CsvEmpty))
        ));
        assert!(matches!(
            parse_csv("1,NaN\n", Orientation::RowsAreObservations),
            Err(Error::Format(FormatError::NonFinite { row: 1, col: 2 }))
        ));
    }

    #[test]
    fn pcae_roundtrip_and_layout() {
        let m = Matrix::from_rows(&[[1.0, 2.0, 3.0], [4.0, 5.0, 6.5]]).unwrap();
        let b = encode_matrix(&m);
        assert_eq!(&b[..4], b"PCAE");
        assert_eq!(b.len(), 24 + 6 * 8);
        assert_eq!(u64::from_le_bytes(b[8..16].try_into().unwrap()), 2);
        assert_eq!(f64::from_le_bytes(b[24..32].try_into().unwrap()), 1.0);
        assert_eq!(f64::from_le_bytes(b[32..40].try_into().unwrap()), 2.0);
        assert_eq!(decode_matrix(&b).unwrap(), m);
    }

    #[test]
    fn pcae_errors() {
        let good = encode_matrix(&Matrix::identity(2));
        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(matches!(decode_matrix(&bad), Err(Error::Format(FormatError::PcaeMagic(_)))));
        let mut bad = good.clone();
        bad[4] = 2;
        assert!(matches!(decode_matrix(&bad), Err(Error::Format(FormatError::PcaeVersion(2)))));
        assert!(matches!(
            decode_matrix(&good[..good.len() - 1]),
            Err(Error::Format(FormatError::PcaeTruncated { .. }))
        ));
        assert!(matches!(
            decode_matrix(&good[..10]),
            Err(Error::Format(FormatError::PcaeTruncated { .. }))
        ));
        let mut long = good.clone();
        long.push(0);
        assert!(matches!(decode_matrix(&long), Err(Error::Format(FormatError::PcaeTrailing(1)))));
        let mut huge = good[..24].to_vec();
        huge[8..16].copy_from_slice(&u64::MAX.to_le_bytes());
        assert!(matches!(decode_matrix(&huge), Err(Error::Format(FormatError::PcaeOverflow(..)))));
    }

    #[test]
    fn pgm_affine_mapping() {
        let v = Matrix::column_vector(&[0.0, 1.0, 2.0, 3.0]);
        let b = render_pgm_grid(&v, (2, 2), 1).unwrap();
        let header = b"P5\n2 2\n255\n";
        assert_eq!(&b[..header.len()], header);
        assert_eq!(&b[header.len()..], &[0, 85, 170, 255]);

        let c = Matrix::column_vector(&[7.0; 4]);
        let b = render_pgm_grid(&c, (2, 2), 1).unwrap();
        assert_eq!(&b[header.len()..], &[128; 4]);
    }

    #[test]
    fn pgm_grid_dimensions() {
        let v = Matrix::from_fn(784, 16, |i, j| (i * (j + 1)) as f64);
        let b = render_pgm_grid(&v, (28, 28), 4).unwrap();
        let header = b"P5\n112 112\n255\n";
        assert_eq!(&b[..header.len()], header);
        assert_eq!(b.len(), header.len() + 112 * 112);
        let body = &b[header.len()..];
        // tile (row 1, col 2) is column 6; its last pixel is its maximum
        assert_eq!(body[(28 + 27) * 112 + 2 * 28 + 27], 255);
        assert!(render_pgm_grid(&v, (28, 27), 4).is_err());
    }

    #[test]
    fn key_values_roundtrip() {
        let text = "# c\na=1\n\nb = x=y\n";
        assert_eq!(
            parse_key_values(text),
            vec![("a".into(), "1".into()), ("b".into(), "x=y".into())]
        );
    }

    proptest! {
        #[test]
        fn pcae_roundtrip(rows in 0usize..6, cols in 0usize..6, seed in any::<u64>()) {
            let mut rng = crate::matrix::RandomSource::new(seed);
            let m = Matrix::from_fn(rows, cols, |_, _| rng.normal() * 1e3);
            prop_assert_eq!(decode_matrix(&encode_matrix(&m)).unwrap(), m);
        }

        #[test]
        fn csv_roundtrip(rows in 1usize..6, cols in 1usize..6, seed in any::<u64>()) {
            let mut rng = crate::matrix::RandomSource::new(seed);
            let m = Matrix::from_fn(rows, cols, |_, _| rng.normal() * 1e3);
            for o in [Orientation::RowsAreObservations, Orientation::ColumnsAreObservations] {
                prop_assert_eq!(parse_csv(&format_csv(&m, o), o).unwrap(), m.clone());
            }
        }
    }
}
