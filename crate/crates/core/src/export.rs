//! Raster exports (PGM/PPM) and compact mask serialization.

use crate::geometry::Grid;

/// Binary PGM (P5). Row 0 of the grid is the bottom of the image so the
/// picture reads with +y up.
pub fn write_pgm(pixels: &Grid<u8>) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", pixels.cols(), pixels.rows()).into_bytes();
    for row in (0..pixels.rows()).rev() {
        let start = row * pixels.cols();
        out.extend_from_slice(&pixels.as_slice()[start..start + pixels.cols()]);
    }
    out
}

/// Binary PPM (P6), same orientation as [`write_pgm`].
pub fn write_ppm(pixels: &Grid<[u8; 3]>) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", pixels.cols(), pixels.rows()).into_bytes();
    for row in (0..pixels.rows()).rev() {
        let start = row * pixels.cols();
        for px in &pixels.as_slice()[start..start + pixels.cols()] {
            out.extend_from_slice(px);
        }
    }
    out
}

/// Serializes a boolean mask as `{rows, cols, data: ["#..#", ...]}` with `#`
/// for `true`.
pub(crate) mod mask_rows {
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::geometry::Grid;

    #[derive(Serialize, Deserialize)]
    struct Repr {
        rows: usize,
        cols: usize,
        data: Vec<String>,
    }

    pub fn serialize<S: Serializer>(grid: &Grid<bool>, s: S) -> Result<S::Ok, S::Error> {
        let data = grid
            .as_slice()
            .chunks(grid.cols().max(1))
            .map(|row| row.iter().map(|&b| if b { '#' } else { '.' }).collect())
            .collect();
        Repr {
            rows: grid.rows(),
            cols: grid.cols(),
            data,
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Grid<bool>, D::Error> {
        let repr = Repr::deserialize(d)?;
        if repr.data.len() != repr.rows {
            return Err(D::Error::custom("mask row count mismatch"));
        }
        let mut cells = Vec::with_capacity(repr.rows * repr.cols);
        for line in &repr.data {
            if line.chars().count() != repr.cols {
                return Err(D::Error::custom("mask column count mismatch"));
            }
            for ch in line.chars() {
                match ch {
                    '#' => cells.push(true),
                    '.' => cells.push(false),
                    other => return Err(D::Error::custom(format!("bad mask char {other:?}"))),
                }
            }
        }
        Grid::from_vec(repr.rows, repr.cols, cells).ok_or_else(|| D::Error::custom("mask size mismatch"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::GridIndex;

    #[test]
    fn pgm_header_and_flip() {
        let mut g = Grid::filled(2, 3, 0u8);
        g[GridIndex::new(0, 0)] = 255;
        let bytes = write_pgm(&g);
        let header = b"P5\n3 2\n255\n";
        assert_eq!(&bytes[..header.len()], header);
        // Bottom grid row is written last.
        assert_eq!(&bytes[header.len()..], &[0, 0, 0, 255, 0, 0]);
    }
}
