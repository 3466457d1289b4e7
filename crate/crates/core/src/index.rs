// Uniform-grid spatial index for fixed-radius candidate queries in R^1..R^3.
//
// Cells are axis-aligned cubes of side `cell`. A query with radius r visits
// every cell overlapping the box [p - r, p + r]; callers apply the exact
// distance predicate to the returned candidates.

use std::collections::HashMap;

type CellKey = [i64; 3];

#[derive(Debug, Clone)]
pub(crate) struct GridIndex {
    dim: usize,
    cell: f64,
    cells: HashMap<CellKey, Vec<u32>>,
}

impl GridIndex {
    /// Returns `None` when the dimension is unsupported (callers fall back to
    /// a linear scan).
    pub(crate) fn new(dim: usize, cell: f64) -> Option<Self> {
        if !(1..=3).contains(&dim) || !(cell.is_finite() && cell > 0.0) {
            return None;
        }
        Some(Self {
            dim,
            cell,
            cells: HashMap::new(),
        })
    }

    pub(crate) fn build(
        dim: usize,
        cell: f64,
        coords: &[f64],
        ids: impl IntoIterator<Item = usize>,
    ) -> Option<Self> {
        let mut grid = Self::new(dim, cell)?;
        for id in ids {
            grid.insert(id, &coords[id * dim..(id + 1) * dim]);
        }
        Some(grid)
    }

    fn key(&self, p: &[f64]) -> CellKey {
        let mut k = [0i64; 3];
        for (slot, &x) in k.iter_mut().zip(p) {
            *slot = (x / self.cell).floor() as i64;
        }
        k
    }

    pub(crate) fn insert(&mut self, id: usize, p: &[f64]) {
        let k = self.key(p);
        self.cells.entry(k).or_default().push(id as u32);
    }

    /// Calls `f` for every stored id whose cell overlaps the query box.
    pub(crate) fn for_each_candidate<F: FnMut(usize)>(&self, p: &[f64], radius: f64, mut f: F) {
        let pad = radius * (1.0 + 1e-9) + 1e-12;
        let mut lo = [0i64; 3];
        let mut hi = [0i64; 3];
        for d in 0..self.dim {
            lo[d] = ((p[d] - pad) / self.cell).floor() as i64;
            hi[d] = ((p[d] + pad) / self.cell).floor() as i64;
        }
        let span: i64 = (0..self.dim).map(|d| hi[d] - lo[d] + 1).product();
        if span as usize > 4 * self.cells.len() + 64 {
            // query box larger than the occupied grid: scan occupied cells instead
            for (k, ids) in &self.cells {
                if (0..self.dim).all(|d| k[d] >= lo[d] && k[d] <= hi[d]) {
                    for &id in ids {
                        f(id as usize);
                    }
                }
            }
            return;
        }
        let mut k = [0i64; 3];
        let (zlo, zhi) = if self.dim == 3 { (lo[2], hi[2]) } else { (0, 0) };
        let (ylo, yhi) = if self.dim >= 2 { (lo[1], hi[1]) } else { (0, 0) };
        for x in lo[0]..=hi[0] {
            k[0] = x;
            for y in ylo..=yhi {
                k[1] = y;
                for z in zlo..=zhi {
                    k[2] = z;
                    if let Some(ids) = self.cells.get(&k) {
                        for &id in ids {
                            f(id as usize);
                        }
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn candidates_cover_true_neighbors() {
        let coords: Vec<f64> = (0..50).flat_map(|i| [i as f64 * 0.37, (i * 7 % 11) as f64 * 0.5]).collect();
        let grid = GridIndex::build(2, 1.0, &coords, 0..50).unwrap();
        for i in 0..50 {
            let p = &coords[2 * i..2 * i + 2];
            let mut got = Vec::new();
            grid.for_each_candidate(p, 1.3, |j| got.push(j));
            for j in 0..50 {
                let q = &coords[2 * j..2 * j + 2];
                let d = ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt();
                if d < 1.3 {
                    assert!(got.contains(&j), "missing {j} near {i}");
                }
            }
        }
    }

    #[test]
    fn rejects_high_dimension() {
        assert!(GridIndex::new(4, 1.0).is_none());
    }
}
