//! Seeded test signals with known wavelet structure.

use crate::error::{Error, Result};
use crate::seed::{rng_from_seed, uniform_below, uniform_unit};
use crate::wavelet::{Band, WaveletLayout};

/// Coefficients supported on all of `LL_S` plus detail nodes forming valid
/// quadtrees rooted at level `S`, `k` nonzeros in total. Magnitudes are
/// uniform in `[1, 3]` with random signs.
pub fn planted_tree_coefficients(layout: &WaveletLayout, k: usize, seed: u64) -> Result<Vec<f64>> {
    let ll = layout.indices(layout.ll());
    if k < ll.len() || k > layout.len() {
        return Err(Error::Domain(format!(
            "sparsity {k} must cover LL ({}) and fit in {}",
            ll.len(),
            layout.len()
        )));
    }
    let mut rng = rng_from_seed(seed);
    let mut x = vec![0.0; layout.len()];
    let amplitude = |rng: &mut _| {
        let mag = 1.0 + 2.0 * uniform_unit(rng);
        if uniform_below(rng, 2) == 0 { mag } else { -mag }
    };
    for &i in &ll {
        x[i] = amplitude(&mut rng);
    }
    // frontier: unused roots plus children of chosen nodes
    let mut frontier = layout.detail_indices(layout.levels());
    for _ in ll.len()..k {
        if frontier.is_empty() {
            return Err(Error::Domain(format!("no quadtree of size {k} fits the layout")));
        }
        let pick = frontier.swap_remove(uniform_below(&mut rng, frontier.len() as u64) as usize);
        x[pick] = amplitude(&mut rng);
        frontier.extend(layout.children(pick)?);
    }
    Ok(x)
}

/// True when every nonzero detail coefficient below level `S` has a nonzero parent.
pub fn is_tree_supported(layout: &WaveletLayout, x: &[f64]) -> Result<bool> {
    for (i, &v) in x.iter().enumerate() {
        if v == 0.0 {
            continue;
        }
        let loc = layout.locate(i)?;
        if loc.subband.band == Band::LL || loc.subband.level == layout.levels() {
            continue;
        }
        match layout.parent(i)? {
            Some(p) if x[p] != 0.0 => {}
            _ => return Ok(false),
        }
    }
    Ok(true)
}
