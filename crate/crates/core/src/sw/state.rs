use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{InitialCondition, ModelParams};

/// Interior extent of the grid. Arrays are stored row-major over
/// `(0..=ny+1) x (0..=nx+1)`, with `k` (the x index) varying fastest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
}

impl Grid {
    pub fn new(nx: usize, ny: usize) -> Self {
        Self { nx, ny }
    }

    pub fn row_stride(&self) -> usize {
        self.nx + 2
    }

    pub fn rows(&self) -> usize {
        self.ny + 2
    }

    /// Number of elements including the ghost ring.
    pub fn size(&self) -> usize {
        self.rows() * self.row_stride()
    }

    pub fn interior(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn idx(&self, j: usize, k: usize) -> usize {
        j * self.row_stride() + k
    }

    pub fn is_interior(&self, j: usize, k: usize) -> bool {
        (1..=self.ny).contains(&j) && (1..=self.nx).contains(&k)
    }
}

/// Prognostic fields of the model, all of shape `grid.size()`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShallowWaterState {
    pub grid: Grid,
    pub eta: Vec<f32>,
    pub u: Vec<f32>,
    pub v: Vec<f32>,
    pub h: Vec<f32>,
    pub h0: Vec<f32>,
    pub wet: Vec<i32>,
}

impl ShallowWaterState {
    /// Lake at rest over a flat bottom of depth `depth`, ghost ring dry.
    pub fn at_rest(grid: Grid, depth: f32) -> Self {
        let n = grid.size();
        let mut wet = vec![1; n];
        for j in 0..grid.rows() {
            for k in 0..grid.row_stride() {
                if !grid.is_interior(j, k) {
                    wet[grid.idx(j, k)] = 0;
                }
            }
        }
        let h0 = vec![depth; n];
        let eta = vec![0.0; n];
        let h = h0.iter().zip(&eta).map(|(a, b)| a + b).collect();
        Self { grid, eta, u: vec![0.0; n], v: vec![0.0; n], h, h0, wet }
    }

    /// Builds the initial state described by `params.init`.
    ///
    /// The `Pulse` case reproduces the initialisation of the corpus main
    /// program exactly, including its integer arithmetic.
    pub fn initial(params: &ModelParams) -> Self {
        let grid = Grid::new(params.nx, params.ny);
        let mut s = Self::at_rest(grid, 10.0);
        match params.init {
            InitialCondition::Rest => {}
            InitialCondition::Pulse => {
                let nsx = ((params.nx * 2236) / 10000).max(1);
                let nsy = ((params.ny * 2236) / 10000).max(1);
                let js = (params.ny - nsy.min(params.ny)) / 2 + 1;
                let ks = (params.nx - nsx.min(params.nx)) / 2 + 1;
                for j in js..js + nsy {
                    for k in ks..ks + nsx {
                        s.eta[grid.idx(j, k)] = 1.0;
                    }
                }
            }
            InitialCondition::Hump { height } => {
                let (j, k) = (params.ny.div_ceil(2), params.nx.div_ceil(2));
                s.eta[grid.idx(j, k)] = height;
            }
            InitialCondition::Random { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                for j in 1..=grid.ny {
                    for k in 1..=grid.nx {
                        let i = grid.idx(j, k);
                        s.h0[i] = rng.gen_range(5.0..15.0);
                        s.eta[i] = rng.gen_range(-0.5..0.5);
                        s.u[i] = rng.gen_range(-0.1..0.1);
                        s.v[i] = rng.gen_range(-0.1..0.1);
                    }
                }
            }
        }
        for i in 0..grid.size() {
            s.h[i] = s.h0[i] + s.eta[i];
        }
        s
    }

    /// Sum of elevation over the interior, accumulated in double precision.
    pub fn total_elevation(&self) -> f64 {
        interior_sum(self.grid, &self.eta)
    }

    pub fn max_depth(&self) -> f32 {
        let g = self.grid;
        let mut m = 0.0f32;
        for j in 1..=g.ny {
            for k in 1..=g.nx {
                let i = g.idx(j, k);
                if self.wet[i] == 1 && self.h[i] > m {
                    m = self.h[i];
                }
            }
        }
        m
    }

    pub fn all_finite(&self) -> bool {
        [&self.eta, &self.u, &self.v, &self.h]
            .iter()
            .all(|f| f.iter().all(|x| x.is_finite()))
    }
}

pub(crate) fn interior_sum(grid: Grid, field: &[f32]) -> f64 {
    let mut s = 0.0f64;
    for j in 1..=grid.ny {
        for k in 1..=grid.nx {
            s += field[grid.idx(j, k)] as f64;
        }
    }
    s
}
