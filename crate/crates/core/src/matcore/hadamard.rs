use crate::error::{Error, Result};

pub fn next_power_of_two(n: usize) -> usize {
    n.max(1).next_power_of_two()
}

/// In-place unnormalized Walsh-Hadamard butterfly in natural (Sylvester)
/// order. The length must be a power of two.
pub fn fwht_in_place(x: &mut [f64]) -> Result<()> {
    let n = x.len();
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::InvalidInput(format!(
            "Hadamard transform length {n} is not a power of two"
        )));
    }
    let mut h = 1;
    while h < n {
        for block in x.chunks_exact_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (u, v) = (*a, *b);
                *a = u + v;
                *b = u - v;
            }
        }
        h *= 2;
    }
    Ok(())
}

/// Walsh-Hadamard transform of `x`. With `normalized` the result is scaled by
/// `1/√n`, which makes the transform orthogonal and self-inverse.
pub fn fwht(x: &[f64], normalized: bool) -> Result<Vec<f64>> {
    let mut out = x.to_vec();
    fwht_in_place(&mut out)?;
    if normalized {
        let scale = 1.0 / (out.len() as f64).sqrt();
        out.iter_mut().for_each(|v| *v *= scale);
    }
    Ok(out)
}
