use crate::data::{CombinedDataset, IvCounts, Study};

/// Dataset flattened for the sampler's inner loops.
pub(crate) struct Design {
    pub ivs: IvCounts,
    pub n: usize,
    pub study: Vec<Study>,
    /// Row-major genotype matrices: `[z1 | z3]` for X1, `[z2 | z3]` for X2.
    pub z: [Vec<f64>; 2],
    pub p: [usize; 2],
    /// Observed exposures; NaN placeholders on study-B rows.
    pub x_obs: [Vec<f64>; 2],
    pub y: [Vec<f64>; 2],
    /// Row indices of study-B rows, in row order (slot order of `x_imputed`).
    pub b_rows: Vec<usize>,
    pub n_study: [usize; 2],
    /// `Z'Z` per exposure block and study, row-major `p x p`.
    pub gram: [[Vec<f64>; 2]; 2],
}

impl Design {
    pub fn new(data: &CombinedDataset) -> Self {
        let ivs = data.ivs;
        let n = data.len();
        let p = [ivs.l + ivs.m, ivs.k + ivs.m];
        let mut z = [Vec::with_capacity(n * p[0]), Vec::with_capacity(n * p[1])];
        let mut x_obs = [Vec::with_capacity(n), Vec::with_capacity(n)];
        let mut y = [Vec::with_capacity(n), Vec::with_capacity(n)];
        let mut study = Vec::with_capacity(n);
        let mut b_rows = Vec::new();
        let mut n_study = [0; 2];
        for (i, row) in data.rows.iter().enumerate() {
            let as_f64 = |g: &u8| f64::from(*g);
            z[0].extend(row.z1.iter().chain(&row.z3).map(as_f64));
            z[1].extend(row.z2.iter().chain(&row.z3).map(as_f64));
            x_obs[0].push(row.x1.unwrap_or(f64::NAN));
            x_obs[1].push(row.x2.unwrap_or(f64::NAN));
            y[0].push(row.y1);
            y[1].push(row.y2);
            study.push(row.study);
            n_study[row.study.index()] += 1;
            if row.study == Study::B {
                b_rows.push(i);
            }
        }
        let gram = std::array::from_fn(|e| {
            std::array::from_fn(|k| {
                let pe = p[e];
                let mut g = vec![0.0; pe * pe];
                for i in (0..n).filter(|&i| study[i].index() == k) {
                    let zr = &z[e][i * pe..(i + 1) * pe];
                    for r in 0..pe {
                        if zr[r] == 0.0 {
                            continue;
                        }
                        for c in 0..pe {
                            g[r * pe + c] += zr[r] * zr[c];
                        }
                    }
                }
                g
            })
        });
        Design {
            ivs,
            n,
            study,
            z,
            p,
            x_obs,
            y,
            b_rows,
            n_study,
            gram,
        }
    }
}
