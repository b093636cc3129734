//! Exact radius search over 3-D points using a uniform hash grid.

use std::collections::HashMap;

use nalgebra::Vector3;

type Cell = (i64, i64, i64);

#[derive(Debug, Clone)]
pub struct GridIndex {
    cell_size: f64,
    cells: HashMap<Cell, Vec<usize>>,
    len: usize,
}

impl GridIndex {
    pub fn new(cell_size: f64) -> Self {
        assert!(cell_size > 0.0 && cell_size.is_finite());
        GridIndex {
            cell_size,
            cells: HashMap::new(),
            len: 0,
        }
    }

    fn cell_of(&self, p: &Vector3<f64>) -> Cell {
        (
            (p.x / self.cell_size).floor() as i64,
            (p.y / self.cell_size).floor() as i64,
            (p.z / self.cell_size).floor() as i64,
        )
    }

    pub fn insert(&mut self, slot: usize, position: Vector3<f64>) {
        let c = self.cell_of(&position);
        self.cells.entry(c).or_default().push(slot);
        self.len += 1;
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Slots whose position lies within `radius` (inclusive) of `center`,
    /// in ascending slot order. `position_of` resolves a slot to its point.
    pub fn within<F>(&self, center: &Vector3<f64>, radius: f64, position_of: F) -> Vec<usize>
    where
        F: Fn(usize) -> Vector3<f64>,
    {
        if self.len == 0 || !(radius >= 0.0) {
            return Vec::new();
        }
        let lo = self.cell_of(&center.add_scalar(-radius));
        let hi = self.cell_of(&center.add_scalar(radius));
        let span = ((hi.0 - lo.0 + 1) * (hi.1 - lo.1 + 1) * (hi.2 - lo.2 + 1)) as usize;
        let mut out = Vec::new();
        let mut check = |slots: &Vec<usize>| {
            for &s in slots {
                if (position_of(s) - center).norm() <= radius {
                    out.push(s);
                }
            }
        };
        if span > self.cells.len() {
            // Large radius relative to occupancy: walk occupied cells instead.
            for slots in self.cells.values() {
                check(slots);
            }
        } else {
            for x in lo.0..=hi.0 {
                for y in lo.1..=hi.1 {
                    for z in lo.2..=hi.2 {
                        if let Some(slots) = self.cells.get(&(x, y, z)) {
                            check(slots);
                        }
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }
}
