//! Sinusoidal embeddings for the time-horizon input.

/// Embeds an integer horizon into `dim` values: the first half sines, the
/// second half cosines, at geometrically spaced frequencies
/// `1 / max_period^(2i/dim)` for `i = 0 .. dim/2 - 1`.
pub fn sinusoidal_embed(h: u32, dim: usize, max_period: f64) -> Vec<f64> {
    let mut out = vec![0.0; dim];
    sinusoidal_embed_into(h, max_period, &mut out);
    out
}

/// Writes the embedding of `h` into `out` (whose length fixes `dim`).
pub fn sinusoidal_embed_into(h: u32, max_period: f64, out: &mut [f64]) {
    let dim = out.len();
    assert!(dim >= 2 && dim.is_multiple_of(2), "embedding dim must be even");
    let half = dim / 2;
    let t = h as f64;
    for i in 0..half {
        let freq = max_period.powf(-2.0 * i as f64 / dim as f64);
        let angle = t * freq;
        out[i] = angle.sin();
        out[half + i] = angle.cos();
    }
}

/// Precomputed embeddings for horizons `0..=max_h`.
#[derive(Debug, Clone)]
pub struct EmbedTable {
    dim: usize,
    max_period: f64,
    rows: Vec<f64>,
}

impl EmbedTable {
    pub fn new(max_h: u32, dim: usize, max_period: f64) -> EmbedTable {
        let mut rows = Vec::with_capacity((max_h as usize + 1) * dim);
        for h in 0..=max_h {
            let mut row = vec![0.0; dim];
            sinusoidal_embed_into(h, max_period, &mut row);
            rows.extend_from_slice(&row);
        }
        EmbedTable {
            dim,
            max_period,
            rows,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Embedding row for `h`; horizons beyond the table are computed on the
    /// fly into `fallback`.
    pub fn get<'a>(&'a self, h: u32, fallback: &'a mut Vec<f64>) -> &'a [f64] {
        let idx = h as usize;
        if (idx + 1) * self.dim <= self.rows.len() {
            &self.rows[idx * self.dim..(idx + 1) * self.dim]
        } else {
            fallback.resize(self.dim, 0.0);
            sinusoidal_embed_into(h, self.max_period, fallback);
            fallback
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_horizon_gives_zero_sines_unit_cosines() {
        let e = sinusoidal_embed(0, 32, 50.0);
        assert!(e[..16].iter().all(|&v| v == 0.0));
        assert!(e[16..].iter().all(|&v| v == 1.0));
    }

    #[test]
    fn components_are_bounded() {
        for h in 0..200 {
            let e = sinusoidal_embed(h, 32, 50.0);
            assert!(e.iter().all(|v| (-1.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn nearby_horizons_differ() {
        let a = sinusoidal_embed(1, 32, 50.0);
        let b = sinusoidal_embed(2, 32, 50.0);
        let dist: f64 = a
            .iter()
            .zip(&b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt();
        assert!(dist > 0.0);
    }

    #[test]
    fn first_frequency_is_unit() {
        // i = 0 has frequency 1, so component 0 is sin(h).
        let e = sinusoidal_embed(3, 32, 50.0);
        assert!((e[0] - (3.0f64).sin()).abs() < 1e-15);
        assert!((e[16] - (3.0f64).cos()).abs() < 1e-15);
    }

    #[test]
    fn table_matches_direct_evaluation() {
        let table = EmbedTable::new(50, 32, 50.0);
        let mut fallback = Vec::new();
        for h in [0u32, 1, 7, 50, 77] {
            let direct = sinusoidal_embed(h, 32, 50.0);
            assert_eq!(table.get(h, &mut fallback), &direct[..]);
        }
    }
}
