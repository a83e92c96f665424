//! Host-side representations of the grid operators.
//!
//! Grids are square with a one-cell Dirichlet ghost ring: a level with
//! interior extent `n` stores `(n+2) x (n+2)` values, first index
//! fastest, matching the buffer layout. Stencil coefficients carry nine
//! entries per point; interpolation weights carry eight per coarse
//! point, anchored the way the restriction gather reads them.

/// 9-point stencil directions around a point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dir {
    Sw = 0,
    S = 1,
    Se = 2,
    W = 3,
    O = 4,
    E = 5,
    Nw = 6,
    N = 7,
    Ne = 8,
}

pub const DIRS: [Dir; 9] = [
    Dir::Sw,
    Dir::S,
    Dir::Se,
    Dir::W,
    Dir::O,
    Dir::E,
    Dir::Nw,
    Dir::N,
    Dir::Ne,
];

impl Dir {
    pub fn offset(self) -> (i64, i64) {
        match self {
            Dir::Sw => (-1, -1),
            Dir::S => (0, -1),
            Dir::Se => (1, -1),
            Dir::W => (-1, 0),
            Dir::O => (0, 0),
            Dir::E => (1, 0),
            Dir::Nw => (-1, 1),
            Dir::N => (0, 1),
            Dir::Ne => (1, 1),
        }
    }

    pub fn opposite(self) -> Dir {
        match self {
            Dir::Sw => Dir::Ne,
            Dir::S => Dir::N,
            Dir::Se => Dir::Nw,
            Dir::W => Dir::E,
            Dir::O => Dir::O,
            Dir::E => Dir::W,
            Dir::Nw => Dir::Se,
            Dir::N => Dir::S,
            Dir::Ne => Dir::Sw,
        }
    }

    pub fn from_offset(dx: i64, dy: i64) -> Option<Dir> {
        DIRS.iter().copied().find(|d| d.offset() == (dx, dy))
    }
}

/// Interpolation weight slots, in the order the corpus sources declare
/// the named constants (values 1..8).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IDir {
    Lne = 0,
    La = 1,
    Lnw = 2,
    Lr = 3,
    Ll = 4,
    Lse = 5,
    Lb = 6,
    Lsw = 7,
}

/// Variable-coefficient 9-point operator on a padded square grid.
#[derive(Debug, Clone)]
pub struct StencilOperator {
    /// Interior extent per dimension.
    pub n: usize,
    /// Shape (1:n+2, 1:n+2, 1:9), first index fastest.
    pub coef: Vec<f64>,
}

impl StencilOperator {
    pub fn zeros(n: usize) -> StencilOperator {
        let np = n + 2;
        StencilOperator {
            n,
            coef: vec![0.0; np * np * 9],
        }
    }

    pub fn padded(&self) -> usize {
        self.n + 2
    }

    fn idx(&self, i: usize, j: usize, d: Dir) -> usize {
        let np = self.padded();
        (i - 1) + (j - 1) * np + (d as usize) * np * np
    }

    /// Coefficient at padded 1-based point (i, j).
    pub fn at(&self, i: usize, j: usize, d: Dir) -> f64 {
        self.coef[self.idx(i, j, d)]
    }

    pub fn at_mut(&mut self, i: usize, j: usize, d: Dir) -> &mut f64 {
        let k = self.idx(i, j, d);
        &mut self.coef[k]
    }

    pub fn interior(&self) -> std::ops::RangeInclusive<usize> {
        2..=self.n + 1
    }

    /// Apply the operator to a padded field (interior only; the ghost
    /// ring of the result stays zero).
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let np = self.padded();
        let mut out = vec![0.0; np * np];
        for j in self.interior() {
            for i in self.interior() {
                let mut s = 0.0;
                for d in DIRS {
                    let (dx, dy) = d.offset();
                    let (x, y) = ((i as i64 + dx) as usize, (j as i64 + dy) as usize);
                    s += self.at(i, j, d) * u[(x - 1) + (y - 1) * np];
                }
                out[(i - 1) + (j - 1) * np] = s;
            }
        }
        out
    }

    /// Largest violation of coefficient symmetry
    /// `coef(p, dir) - coef(p + dir, opposite(dir))` over the interior.
    pub fn symmetry_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for j in self.interior() {
            for i in self.interior() {
                for d in DIRS {
                    let (dx, dy) = d.offset();
                    let (x, y) = (i as i64 + dx, j as i64 + dy);
                    if x < 2 || y < 2 || x > (self.n + 1) as i64 || y > (self.n + 1) as i64 {
                        continue;
                    }
                    let a = self.at(i, j, d);
                    let b = self.at(x as usize, y as usize, d.opposite());
                    worst = worst.max((a - b).abs());
                }
            }
        }
        worst
    }

    /// Dense row-major matrix over the interior unknowns, ordered grid
    /// row by grid row like the coarse-solve packing.
    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.n;
        let m = n * n;
        let mut a = vec![0.0; m * m];
        for j in self.interior() {
            for i in self.interior() {
                let row = (j - 2) * n + (i - 2);
                for d in DIRS {
                    let (dx, dy) = d.offset();
                    let (x, y) = (i as i64 + dx, j as i64 + dy);
                    if x < 2 || y < 2 || x > (n + 1) as i64 || y > (n + 1) as i64 {
                        continue;
                    }
                    let col = (y as usize - 2) * n + (x as usize - 2);
                    a[row * m + col] += self.at(i, j, d);
                }
            }
        }
        a
    }
}

/// Interpolation weights between a coarse grid (interior `nc`) and the
/// next finer one. Entry `(cx, cy, slot)` holds the weight between the
/// coarse point anchored at padded coords `(cx, cy)` and one fine
/// neighbor; see [`weight_between`] for the anchoring.
#[derive(Debug, Clone)]
pub struct InterpStencil {
    pub nc: usize,
    /// Shape (1:nc+2, 1:nc+2, 1:8), first index fastest.
    pub w: Vec<f64>,
}

impl InterpStencil {
    pub fn zeros(nc: usize) -> InterpStencil {
        let np = nc + 2;
        InterpStencil {
            nc,
            w: vec![0.0; np * np * 8],
        }
    }

    pub fn padded(&self) -> usize {
        self.nc + 2
    }

    fn idx(&self, cx: usize, cy: usize, s: IDir) -> usize {
        let np = self.padded();
        (cx - 1) + (cy - 1) * np + (s as usize) * np * np
    }

    pub fn at(&self, cx: usize, cy: usize, s: IDir) -> f64 {
        self.w[self.idx(cx, cy, s)]
    }

    pub fn at_mut(&mut self, cx: usize, cy: usize, s: IDir) -> &mut f64 {
        let k = self.idx(cx, cy, s);
        &mut self.w[k]
    }
}

/// Interpolation weight between coarse point `(cx, cy)` and fine point
/// `(fx, fy)`, both padded 1-based coordinates. Coarse `(cx, cy)` sits
/// at fine `(2cx-1, 2cy-1)`; the weight is nonzero only on the 3x3
/// fine patch around it, with the slots anchored exactly as the
/// restriction gather reads them.
pub fn weight_between(ci: &InterpStencil, cx: i64, cy: i64, fx: i64, fy: i64) -> f64 {
    let dx = fx - (2 * cx - 1);
    let dy = fy - (2 * cy - 1);
    let np = ci.padded() as i64;
    let get = |x: i64, y: i64, s: IDir| -> f64 {
        if x < 1 || y < 1 || x > np || y > np {
            return 0.0;
        }
        ci.at(x as usize, y as usize, s)
    };
    match (dx, dy) {
        (0, 0) => 1.0,
        (-1, 0) => get(cx, cy, IDir::Lr),
        (1, 0) => get(cx + 1, cy, IDir::Ll),
        (0, -1) => get(cx, cy, IDir::La),
        (0, 1) => get(cx, cy + 1, IDir::Lb),
        (-1, -1) => get(cx, cy, IDir::Lne),
        (1, -1) => get(cx + 1, cy, IDir::Lnw),
        (-1, 1) => get(cx, cy + 1, IDir::Lse),
        (1, 1) => get(cx + 1, cy + 1, IDir::Lsw),
        _ => 0.0,
    }
}

/// Coarse points with nonzero interpolation weight onto fine point
/// `(fx, fy)`: one per axis when coincident, two otherwise.
pub fn coarse_parents(fx: i64, fy: i64) -> Vec<(i64, i64)> {
    let per_axis = |f: i64| -> Vec<i64> {
        if f % 2 == 1 {
            vec![(f + 1) / 2]
        } else {
            vec![f / 2, f / 2 + 1]
        }
    };
    let mut out = Vec::with_capacity(4);
    for cx in per_axis(fx) {
        for cy in per_axis(fy) {
            out.push((cx, cy));
        }
    }
    out
}
