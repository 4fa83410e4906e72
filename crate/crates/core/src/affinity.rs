//! Inter-superpoint affinity: softmax-normalized edge weights combining
//! embedding similarity with a small perceptron over the centroid
//! displacement, plus the affinity-weighted embedding update.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geom::{self, Vec3};
use crate::sparse::SparseMat;
use crate::spgraph::SuperpointGraph;

pub const DEFAULT_HIDDEN: usize = 8;

/// Two-layer perceptron R^3 -> R^h -> R with rectifier nonlinearity.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub w1: Vec<[f64; 3]>, // h rows
    pub b1: Vec<f64>,      // h
    pub w2: Vec<f64>,      // h
    pub b2: f64,
}

impl Mlp {
    pub fn hidden(&self) -> usize {
        self.w1.len()
    }

    pub fn eval(&self, x: Vec3) -> f64 {
        let mut out = self.b2;
        for (row, (&b, &w)) in self.w1.iter().zip(self.b1.iter().zip(&self.w2)) {
            let a = (geom::dot(*row, x) + b).max(0.0);
            out += w * a;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AffinityParams {
    pub phi: Vec<Vec<f64>>, // d x d
    pub psi: Vec<Vec<f64>>,
    pub rho: Vec<Vec<f64>>,
    pub gamma: Mlp,
}

fn identity(d: usize) -> Vec<Vec<f64>> {
    (0..d)
        .map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

impl AffinityParams {
    /// Untrained defaults: identity projections and a seed-fixed perceptron
    /// with small weights whose output sits near 1.
    pub fn identity_default(d: usize, hidden: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut small = || rng.gen_range(-0.01..0.01);
        let w1 = (0..hidden).map(|_| [small(), small(), small()]).collect();
        let b1 = (0..hidden).map(|_| small()).collect();
        let w2 = (0..hidden).map(|_| small()).collect();
        AffinityParams {
            phi: identity(d),
            psi: identity(d),
            rho: identity(d),
            gamma: Mlp {
                w1,
                b1,
                w2,
                b2: 1.0,
            },
        }
    }

    pub fn dim(&self) -> usize {
        self.phi.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        for (name, m) in [("phi", &self.phi), ("psi", &self.psi), ("rho", &self.rho)] {
            if m.len() != d || m.iter().any(|r| r.len() != d) {
                return Err(Error::Dimension(format!("{name} is not {d}x{d}")));
            }
            if m.iter().flatten().any(|x| !x.is_finite()) {
                return Err(Error::Validation(format!("non-finite entry in {name}")));
            }
        }
        let h = self.gamma.hidden();
        if self.gamma.b1.len() != h || self.gamma.w2.len() != h {
            return Err(Error::Dimension("perceptron layer shapes disagree".into()));
        }
        Ok(())
    }

    /// Text format: header `d h`, then phi, psi, rho row-major, then the
    /// perceptron weights (w1 rows, b1, w2, b2).
    pub fn save(&self, path: &Path) -> Result<()> {
        let d = self.dim();
        let h = self.gamma.hidden();
        let mut s = String::new();
        let _ = writeln!(s, "{d} {h}");
        for m in [&self.phi, &self.psi, &self.rho] {
            for row in m {
                let line: Vec<String> = row.iter().map(|x| x.to_string()).collect();
                let _ = writeln!(s, "{}", line.join(" "));
            }
        }
        for row in &self.gamma.w1 {
            let _ = writeln!(s, "{} {} {}", row[0], row[1], row[2]);
        }
        let join = |v: &[f64]| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(" ")
        };
        let _ = writeln!(s, "{}", join(&self.gamma.b1));
        let _ = writeln!(s, "{}", join(&self.gamma.w2));
        let _ = writeln!(s, "{}", self.gamma.b2);
        fs::write(path, s).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let mut floats = |n: usize, want: usize| -> Result<Vec<f64>> {
            let (ln, line) = lines
                .next()
                .ok_or_else(|| Error::parse(path, n, "unexpected end of params file"))?;
            let row: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::parse(path, ln + 1, "bad float"))?;
            if row.len() != want {
                return Err(Error::parse(
                    path,
                    ln + 1,
                    format!("expected {want} values, got {}", row.len()),
                ));
            }
            Ok(row)
        };
        let header = floats(1, 2)?;
        let d = header[0] as usize;
        let h = header[1] as usize;
        let matrix = |floats: &mut dyn FnMut(usize, usize) -> Result<Vec<f64>>| -> Result<Vec<Vec<f64>>> {
            (0..d).map(|_| floats(0, d)).collect()
        };
        let phi = matrix(&mut floats)?;
        let psi = matrix(&mut floats)?;
        let rho = matrix(&mut floats)?;
        let w1: Vec<[f64; 3]> = (0..h)
            .map(|_| floats(0, 3).map(|r| [r[0], r[1], r[2]]))
            .collect::<Result<_>>()?;
        let b1 = floats(0, h)?;
        let w2 = floats(0, h)?;
        let b2 = floats(0, 1)?[0];
        let params = AffinityParams {
            phi,
            psi,
            rho,
            gamma: Mlp { w1, b1, w2, b2 },
        };
        params.validate()?;
        Ok(params)
    }
}

/// Sparse |V| x |V| affinity; each non-isolated row sums to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityMatrix {
    pub mat: SparseMat,
}

impl AffinityMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.mat.get(i, j)
    }
}

fn matvec(m: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    m.iter()
        .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Row-softmax of embedding-similarity times displacement-perceptron logits
/// over each node's neighborhood. Rows with no neighbors stay all-zero.
pub fn compute_affinity(
    embeddings: &[Vec<f64>],
    graph: &SuperpointGraph,
    centroids: &[Vec3],
    params: &AffinityParams,
) -> Result<AffinityMatrix> {
    params.validate()?;
    let v = graph.num_nodes;
    let d = params.dim();
    if embeddings.len() != v || centroids.len() != v {
        return Err(Error::Dimension(format!(
            "expected {v} embedding/centroid rows"
        )));
    }
    if embeddings.iter().any(|r| r.len() != d) {
        return Err(Error::Dimension(format!("embeddings must have width {d}")));
    }

    let phi_x: Vec<Vec<f64>> = embeddings.iter().map(|x| matvec(&params.phi, x)).collect();
    let psi_x: Vec<Vec<f64>> = embeddings.iter().map(|x| matvec(&params.psi, x)).collect();

    let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(v);
    for i in 0..v {
        let neigh = graph.neighbors(i);
        if neigh.is_empty() {
            rows.push(Vec::new());
            continue;
        }
        let logits: Vec<f64> = neigh
            .iter()
            .map(|&j| {
                dot(&phi_x[i], &psi_x[j]) * params.gamma.eval(geom::sub(centroids[i], centroids[j]))
            })
            .collect();
        // max-subtraction keeps the softmax finite for any finite logits
        let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|&l| (l - m).exp()).collect();
        let z: f64 = exps.iter().sum();
        rows.push(
            neigh
                .iter()
                .zip(&exps)
                .map(|(&j, &e)| (j, e / z))
                .collect(),
        );
    }
    Ok(AffinityMatrix {
        mat: SparseMat::from_rows(v, rows)?,
    })
}

/// Affinity-weighted neighborhood aggregation with a residual term:
/// each row becomes `sum_j A_ij * rho(X_j) + X_i`.
pub fn update_embeddings(
    embeddings: &[Vec<f64>],
    affinity: &AffinityMatrix,
    params: &AffinityParams,
) -> Result<Vec<Vec<f64>>> {
    params.validate()?;
    let d = params.dim();
    if embeddings.iter().any(|r| r.len() != d) {
        return Err(Error::Dimension(format!("embeddings must have width {d}")));
    }
    if affinity.mat.n() != embeddings.len() {
        return Err(Error::Dimension("affinity size mismatch".into()));
    }
    let rho_x: Vec<Vec<f64>> = embeddings.iter().map(|x| matvec(&params.rho, x)).collect();
    let mut out = embeddings.to_vec();
    for i in 0..embeddings.len() {
        for &(j, a) in affinity.mat.row(i) {
            for c in 0..d {
                out[i][c] += a * rho_x[j][c];
            }
        }
    }
    Ok(out)
}
