//! Separable 2D orthonormal Daubechies wavelets on `N x N` images.
//!
//! Images and coefficient arrays are stored column-major (`index = row + col * N`).
//! Coefficients use the pyramid layout: after `S` levels the top-left
//! `N/2^S` square holds `LL_S`, and level `s` contributes three detail bands
//! of side `h = N/2^s`:
//!
//! | band | rows      | cols      |
//! |------|-----------|-----------|
//! | LH   | `0..h`    | `h..2h`   |
//! | HL   | `h..2h`   | `0..h`    |
//! | HH   | `h..2h`   | `h..2h`   |
//!
//! Each level filters the columns of the current `LL` block and then its rows,
//! with periodic extension. The filter is the 4-tap Daubechies scaling filter
//! with two vanishing moments:
//!
//! ```text
//! h = [1+√3, 3+√3, 3−√3, 1−√3] / (4√2),    g[k] = (−1)^k h[3−k]
//! ```

use crate::error::{Error, Result};
use crate::linop::LinearOperator;

const SQRT3: f64 = 1.732_050_807_568_877_2;
const NORM: f64 = 4.0 * std::f64::consts::SQRT_2;

/// Lowpass analysis taps.
pub const DB4_LOWPASS: [f64; 4] = [
    (1.0 + SQRT3) / NORM,
    (3.0 + SQRT3) / NORM,
    (3.0 - SQRT3) / NORM,
    (1.0 - SQRT3) / NORM,
];

/// Highpass analysis taps, the quadrature mirror of [`DB4_LOWPASS`].
pub const DB4_HIGHPASS: [f64; 4] = [
    DB4_LOWPASS[3],
    -DB4_LOWPASS[2],
    DB4_LOWPASS[1],
    -DB4_LOWPASS[0],
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Band {
    LL,
    LH,
    HL,
    HH,
}

pub const DETAIL_BANDS: [Band; 3] = [Band::LH, Band::HL, Band::HH];

/// A subband: `LL` exists only at the coarsest level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Subband {
    pub level: usize,
    pub band: Band,
}

/// Where a coefficient lives: its subband and its position inside it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Location {
    pub subband: Subband,
    pub row: usize,
    pub col: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WaveletLayout {
    side: usize,
    levels: usize,
}

impl WaveletLayout {
    pub fn new(side: usize, levels: usize) -> Result<Self> {
        if side < 2 || !side.is_power_of_two() {
            return Err(Error::InvalidShape(format!(
                "image side {side} is not a power of two >= 2"
            )));
        }
        let max = side.trailing_zeros() as usize;
        if levels == 0 || levels > max {
            return Err(Error::InvalidShape(format!(
                "{levels} levels requested, side {side} allows 1..={max}"
            )));
        }
        Ok(Self { side, levels })
    }

    /// `log2(N) - 4` clamped to `[3, log2(N)]`, so `LL_S` is 16x16 once `N >= 128`.
    pub fn default_levels(side: usize) -> usize {
        let max = side.trailing_zeros() as usize;
        max.saturating_sub(4).max(3).min(max).max(1)
    }

    pub fn with_default_levels(side: usize) -> Result<Self> {
        Self::new(side, Self::default_levels(side))
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    /// Number of coefficients, `N^2`.
    pub fn len(&self) -> usize {
        self.side * self.side
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Side of each band at `level`; level `S` is also the side of `LL_S`.
    pub fn band_side(&self, level: usize) -> usize {
        self.side >> level
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row + col * self.side
    }

    fn origin(&self, subband: Subband) -> (usize, usize) {
        let h = self.band_side(subband.level);
        match subband.band {
            Band::LL => (0, 0),
            Band::LH => (0, h),
            Band::HL => (h, 0),
            Band::HH => (h, h),
        }
    }

    pub fn ll(&self) -> Subband {
        Subband {
            level: self.levels,
            band: Band::LL,
        }
    }

    /// All subbands from coarse to fine: `LL_S, LH_S, HL_S, HH_S, ..., HH_1`.
    pub fn subbands(&self) -> Vec<Subband> {
        let mut out = vec![self.ll()];
        for level in (1..=self.levels).rev() {
            out.extend(DETAIL_BANDS.iter().map(|&band| Subband { level, band }));
        }
        out
    }

    /// Vectorized indices of `subband`, scanning its columns in order.
    pub fn indices(&self, subband: Subband) -> Vec<usize> {
        let h = self.band_side(subband.level);
        let (r0, c0) = self.origin(subband);
        (0..h)
            .flat_map(|c| (0..h).map(move |r| (r, c)))
            .map(|(r, c)| self.index(r0 + r, c0 + c))
            .collect()
    }

    /// Indices of the three detail bands at `level`.
    pub fn detail_indices(&self, level: usize) -> Vec<usize> {
        DETAIL_BANDS
            .iter()
            .flat_map(|&band| self.indices(Subband { level, band }))
            .collect()
    }

    pub fn locate(&self, i: usize) -> Result<Location> {
        if i >= self.len() {
            return Err(Error::Domain(format!(
                "coefficient index {i} out of range for {} coefficients",
                self.len()
            )));
        }
        let (row, col) = (i % self.side, i / self.side);
        let coarse = self.band_side(self.levels);
        let span = row.max(col);
        if span < coarse {
            return Ok(Location {
                subband: self.ll(),
                row,
                col,
            });
        }
        // `h <= span < 2h` identifies the level whose bands have side `h`.
        let h = 1usize << (usize::BITS - 1 - span.leading_zeros());
        let level = (self.side / h).trailing_zeros() as usize;
        let band = match (row >= h, col >= h) {
            (false, true) => Band::LH,
            (true, false) => Band::HL,
            _ => Band::HH,
        };
        let subband = Subband { level, band };
        let (r0, c0) = self.origin(subband);
        Ok(Location {
            subband,
            row: row - r0,
            col: col - c0,
        })
    }

    /// The four children of a detail coefficient at level `s >= 2`: positions
    /// `(2r, 2c), (2r, 2c+1), (2r+1, 2c), (2r+1, 2c+1)` of the same band at
    /// level `s - 1`. Level-1 and `LL_S` coefficients have none.
    pub fn children(&self, i: usize) -> Result<Vec<usize>> {
        let loc = self.locate(i)?;
        if loc.subband.band == Band::LL || loc.subband.level == 1 {
            return Ok(Vec::new());
        }
        let child = Subband {
            level: loc.subband.level - 1,
            band: loc.subband.band,
        };
        let (r0, c0) = self.origin(child);
        let (r, c) = (2 * loc.row, 2 * loc.col);
        Ok(vec![
            self.index(r0 + r, c0 + c),
            self.index(r0 + r, c0 + c + 1),
            self.index(r0 + r + 1, c0 + c),
            self.index(r0 + r + 1, c0 + c + 1),
        ])
    }

    /// Parent of a detail coefficient below level `S`.
    pub fn parent(&self, i: usize) -> Result<Option<usize>> {
        let loc = self.locate(i)?;
        if loc.subband.band == Band::LL || loc.subband.level == self.levels {
            return Ok(None);
        }
        let parent = Subband {
            level: loc.subband.level + 1,
            band: loc.subband.band,
        };
        let (r0, c0) = self.origin(parent);
        Ok(Some(self.index(r0 + loc.row / 2, c0 + loc.col / 2)))
    }

    fn check_len(&self, what: &str, len: usize) -> Result<()> {
        if len != self.len() {
            return Err(Error::InvalidShape(format!(
                "{what} has {len} entries, layout expects {}",
                self.len()
            )));
        }
        Ok(())
    }
}

fn analyze_1d(src: &[f64], dst: &mut [f64]) {
    let len = src.len();
    let half = len / 2;
    for i in 0..half {
        let (mut a, mut d) = (0.0, 0.0);
        for k in 0..4 {
            let v = src[(2 * i + k) % len];
            a += DB4_LOWPASS[k] * v;
            d += DB4_HIGHPASS[k] * v;
        }
        dst[i] = a;
        dst[half + i] = d;
    }
}

fn synthesize_1d(src: &[f64], dst: &mut [f64]) {
    let len = src.len();
    let half = len / 2;
    dst.fill(0.0);
    for i in 0..half {
        let (a, d) = (src[i], src[half + i]);
        for k in 0..4 {
            dst[(2 * i + k) % len] += DB4_LOWPASS[k] * a + DB4_HIGHPASS[k] * d;
        }
    }
}

/// One analysis level on the top-left `len x len` block of a column-major array.
fn analyze_level(data: &mut [f64], side: usize, len: usize, scratch: &mut Vec<f64>) {
    let half = len / 2;
    let mut column = vec![0.0; len];
    for c in 0..len {
        let col = &mut data[c * side..c * side + len];
        column.copy_from_slice(col);
        analyze_1d(&column, col);
    }
    // Rows are filtered a whole column at a time to keep memory access contiguous.
    scratch.clear();
    for c in 0..len {
        scratch.extend_from_slice(&data[c * side..c * side + len]);
    }
    for i in 0..half {
        let (lo, hi) = (i, half + i);
        data[lo * side..lo * side + len].fill(0.0);
        data[hi * side..hi * side + len].fill(0.0);
        for k in 0..4 {
            let src = &scratch[((2 * i + k) % len) * len..][..len];
            for (r, &v) in src.iter().enumerate() {
                data[lo * side + r] += DB4_LOWPASS[k] * v;
                data[hi * side + r] += DB4_HIGHPASS[k] * v;
            }
        }
    }
}

/// Exact transpose of [`analyze_level`].
fn synthesize_level(data: &mut [f64], side: usize, len: usize, scratch: &mut Vec<f64>) {
    let half = len / 2;
    scratch.clear();
    for c in 0..len {
        scratch.extend_from_slice(&data[c * side..c * side + len]);
    }
    for c in 0..len {
        data[c * side..c * side + len].fill(0.0);
    }
    for i in 0..half {
        let lo = &scratch[i * len..][..len];
        let hi = &scratch[(half + i) * len..][..len];
        for k in 0..4 {
            let dst = ((2 * i + k) % len) * side;
            for r in 0..len {
                data[dst + r] += DB4_LOWPASS[k] * lo[r] + DB4_HIGHPASS[k] * hi[r];
            }
        }
    }
    let mut column = vec![0.0; len];
    for c in 0..len {
        let col = &mut data[c * side..c * side + len];
        column.copy_from_slice(col);
        synthesize_1d(&column, col);
    }
}

/// Forward transform of a column-major `N x N` image into pyramid coefficients.
pub fn dwt2(layout: &WaveletLayout, image: &[f64]) -> Result<Vec<f64>> {
    layout.check_len("image", image.len())?;
    let mut out = image.to_vec();
    dwt2_in_place(layout, &mut out);
    Ok(out)
}

/// Inverse of [`dwt2`].
pub fn idwt2(layout: &WaveletLayout, coeffs: &[f64]) -> Result<Vec<f64>> {
    layout.check_len("coefficient vector", coeffs.len())?;
    let mut out = coeffs.to_vec();
    idwt2_in_place(layout, &mut out);
    Ok(out)
}

fn dwt2_in_place(layout: &WaveletLayout, data: &mut [f64]) {
    let mut scratch = Vec::with_capacity(layout.len());
    for level in 1..=layout.levels {
        analyze_level(data, layout.side, layout.side >> (level - 1), &mut scratch);
    }
}

fn idwt2_in_place(layout: &WaveletLayout, data: &mut [f64]) {
    let mut scratch = Vec::with_capacity(layout.len());
    for level in (1..=layout.levels).rev() {
        synthesize_level(data, layout.side, layout.side >> (level - 1), &mut scratch);
    }
}

/// The synthesis operator `Psi`: coefficients to image. Its adjoint is the analysis.
#[derive(Debug, Clone, Copy)]
pub struct WaveletSynthesis {
    layout: WaveletLayout,
}

pub fn wavelet_synthesis_op(layout: WaveletLayout) -> WaveletSynthesis {
    WaveletSynthesis { layout }
}

impl WaveletSynthesis {
    pub fn layout(&self) -> &WaveletLayout {
        &self.layout
    }
}

impl LinearOperator for WaveletSynthesis {
    fn rows(&self) -> usize {
        self.layout.len()
    }
    fn cols(&self) -> usize {
        self.layout.len()
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        assert_eq!(x.len(), self.layout.len(), "wavelet synthesis input length");
        out.copy_from_slice(x);
        idwt2_in_place(&self.layout, out);
    }
    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        assert_eq!(y.len(), self.layout.len(), "wavelet analysis input length");
        out.copy_from_slice(y);
        dwt2_in_place(&self.layout, out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    fn random_image(len: usize, seed_value: u64) -> Vec<f64> {
        let mut rng = seed::rng_from_seed(seed_value);
        (0..len).map(|_| seed::uniform_unit(&mut rng) * 2.0 - 1.0).collect()
    }

    fn norm(v: &[f64]) -> f64 {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    #[test]
    fn filters_are_orthonormal() {
        let h = DB4_LOWPASS;
        let g = DB4_HIGHPASS;
        let dot = |a: &[f64; 4], b: &[f64; 4]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        assert!((dot(&h, &h) - 1.0).abs() < 1e-15);
        assert!((dot(&g, &g) - 1.0).abs() < 1e-15);
        assert!(dot(&h, &g).abs() < 1e-15);
        assert!((h[0] * h[2] + h[1] * h[3]).abs() < 1e-15);
        assert!((h.iter().sum::<f64>() - std::f64::consts::SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn layout_rejects_bad_shapes() {
        assert!(WaveletLayout::new(12, 1).is_err());
        assert!(WaveletLayout::new(8, 4).is_err());
        assert!(WaveletLayout::new(8, 0).is_err());
        assert!(WaveletLayout::new(1, 1).is_err());
        let layout = WaveletLayout::new(8, 2).unwrap();
        assert!(dwt2(&layout, &[0.0; 63]).is_err());
        assert!(idwt2(&layout, &[0.0; 65]).is_err());
    }

    #[test]
    fn default_levels() {
        assert_eq!(WaveletLayout::default_levels(2), 1);
        assert_eq!(WaveletLayout::default_levels(4), 2);
        assert_eq!(WaveletLayout::default_levels(8), 3);
        assert_eq!(WaveletLayout::default_levels(64), 3);
        assert_eq!(WaveletLayout::default_levels(128), 3);
        assert_eq!(WaveletLayout::default_levels(256), 4);
        assert_eq!(WaveletLayout::default_levels(1024), 6);
    }

    #[test]
    fn subbands_partition_indices() {
        for (side, levels) in [(8, 1), (8, 3), (16, 2), (64, 4)] {
            let layout = WaveletLayout::new(side, levels).unwrap();
            let mut seen = vec![0u8; layout.len()];
            for sb in layout.subbands() {
                let idx = layout.indices(sb);
                assert_eq!(idx.len(), layout.band_side(sb.level).pow(2));
                for i in idx {
                    seen[i] += 1;
                    assert_eq!(layout.locate(i).unwrap().subband, sb);
                }
            }
            assert!(seen.iter().all(|&c| c == 1));
        }
    }

    #[test]
    fn children_of_coarse_lh_at_eight() {
        let layout = WaveletLayout::new(8, 2).unwrap();
        // LH_2 starts at (row 0, col 2); LH_1 at (row 0, col 4).
        let parent = layout.index(0, 2);
        let want = vec![
            layout.index(0, 4),
            layout.index(0, 5),
            layout.index(1, 4),
            layout.index(1, 5),
        ];
        assert_eq!(layout.children(parent).unwrap(), want);
        assert_eq!(want, vec![32, 40, 33, 41]);
        for &c in &want {
            assert_eq!(layout.parent(c).unwrap(), Some(parent));
        }
    }

    #[test]
    fn finest_level_and_ll_have_no_children() {
        let layout = WaveletLayout::new(16, 3).unwrap();
        for i in layout.detail_indices(1) {
            assert!(layout.children(i).unwrap().is_empty());
        }
        for i in layout.indices(layout.ll()) {
            assert!(layout.children(i).unwrap().is_empty());
        }
        assert!(matches!(layout.children(256), Err(Error::Domain(_))));
    }

    #[test]
    fn children_partition_each_finer_band() {
        let layout = WaveletLayout::new(32, 4).unwrap();
        for level in 2..=4 {
            for band in DETAIL_BANDS {
                let mut got: Vec<usize> = layout
                    .indices(Subband { level, band })
                    .into_iter()
                    .flat_map(|p| layout.children(p).unwrap())
                    .collect();
                let total = got.len();
                got.sort_unstable();
                got.dedup();
                assert_eq!(got.len(), total, "children sets overlap");
                let mut want = layout.indices(Subband { level: level - 1, band });
                want.sort_unstable();
                assert_eq!(got, want);
            }
        }
    }

    #[test]
    fn constant_image_lands_in_ll() {
        let side = 16;
        let c = 3.5;
        let full = WaveletLayout::new(side, 4).unwrap();
        let coeffs = dwt2(&full, &vec![c; side * side]).unwrap();
        assert!((coeffs[0] - c * side as f64).abs() < 1e-10);
        assert!(coeffs[1..].iter().all(|v| v.abs() < 1e-10));

        let partial = WaveletLayout::new(side, 2).unwrap();
        let coeffs = dwt2(&partial, &vec![c; side * side]).unwrap();
        let ll: Vec<usize> = partial.indices(partial.ll());
        for i in 0..coeffs.len() {
            if ll.contains(&i) {
                assert!((coeffs[i] - c * 4.0).abs() < 1e-10);
            } else {
                assert!(coeffs[i].abs() < 1e-10);
            }
        }
    }

    #[test]
    fn parseval_on_eight_by_eight() {
        let layout = WaveletLayout::new(8, 3).unwrap();
        let img = random_image(64, 21);
        let coeffs = dwt2(&layout, &img).unwrap();
        assert!((norm(&coeffs) - norm(&img)).abs() < 1e-10);
    }

    #[test]
    fn zero_and_unit_coefficients() {
        let layout = WaveletLayout::new(16, 3).unwrap();
        assert!(idwt2(&layout, &[0.0; 256]).unwrap().iter().all(|&v| v == 0.0));
        let mut e = vec![0.0; 256];
        e[layout.index(1, 1)] = 1.0;
        let img = idwt2(&layout, &e).unwrap();
        assert!((norm(&img) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reconstruction_grid() {
        for side in [8usize, 16, 64, 256] {
            for levels in 1..=side.trailing_zeros() as usize {
                let layout = WaveletLayout::new(side, levels).unwrap();
                let img = random_image(layout.len(), (side * 31 + levels) as u64);
                let coeffs = dwt2(&layout, &img).unwrap();
                assert!((norm(&coeffs) - norm(&img)).abs() < 1e-10 * norm(&img).max(1.0));
                let back = idwt2(&layout, &coeffs).unwrap();
                let err = img.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                assert!(err < 1e-10, "side={side} levels={levels} err={err}");
                let again = dwt2(&layout, &idwt2(&layout, &img).unwrap()).unwrap();
                let err = img.iter().zip(&again).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                assert!(err < 1e-10);
            }
        }
    }
}
