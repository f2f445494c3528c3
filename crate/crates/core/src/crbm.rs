//! CRBM parameters and exact evaluation by enumeration over visible states.
//!
//! The hidden sum factorizes, so `log p(y|x) = bᵀy + Σ_j softplus(W_j y + V_j x + c_j) - log Z(x)`.
//! Only the visible space `{0,1}^(k+n)` is enumerated; `m` is unrestricted.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::bitspace::check_width;
use crate::distributions::{ConditionalTable, Dist};
use crate::error::{Error, Result};
use crate::numeric::{log_normalize, sigmoid, softplus};

/// Parameters of a CRBM with `k` inputs, `n` outputs and `m` hidden units.
///
/// `W` is `m x n` and `V` is `m x k`, both row-major, so row `j` holds the
/// weights of hidden unit `j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrbmParams {
    pub k: usize,
    pub n: usize,
    pub m: usize,
    #[serde(rename = "W")]
    pub w: Vec<f64>,
    #[serde(rename = "V")]
    pub v: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

impl CrbmParams {
    pub fn new(
        k: usize,
        n: usize,
        m: usize,
        w: Vec<f64>,
        v: Vec<f64>,
        b: Vec<f64>,
        c: Vec<f64>,
    ) -> Result<Self> {
        let p = Self {
            k,
            n,
            m,
            w,
            v,
            b,
            c,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn zeros(k: usize, n: usize, m: usize) -> Self {
        Self {
            k,
            n,
            m,
            w: vec![0.0; m * n],
            v: vec![0.0; m * k],
            b: vec![0.0; n],
            c: vec![0.0; m],
        }
    }

    /// Independent `N(0, scale^2)` entries.
    pub fn random<R: Rng + ?Sized>(k: usize, n: usize, m: usize, scale: f64, rng: &mut R) -> Self {
        let mut p = Self::zeros(k, n, m);
        let draw = p.to_vec().len();
        let theta: Vec<f64> = (0..draw)
            .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
            .collect();
        p.set_from_vec(&theta).expect("length matches");
        p
    }

    /// Checks shapes and finiteness (useful after deserialization).
    pub fn validate(&self) -> Result<()> {
        let (k, n, m) = (self.k, self.n, self.m);
        let shapes = [
            ("W", self.w.len(), m * n),
            ("V", self.v.len(), m * k),
            ("b", self.b.len(), n),
            ("c", self.c.len(), m),
        ];
        for (name, got, want) in shapes {
            if got != want {
                return Err(Error::ShapeMismatch(format!(
                    "{name} has {got} entries, expected {want}"
                )));
            }
        }
        if n == 0 {
            return Err(Error::InvalidWidth(0));
        }
        if !self.to_vec().iter().all(|t| t.is_finite()) {
            return Err(Error::ShapeMismatch("non-finite parameter".into()));
        }
        Ok(())
    }

    pub fn num_params(&self) -> usize {
        self.m * (self.n + self.k) + self.n + self.m
    }

    /// Flattened parameters in the order `W, V, b, c`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        out.extend(&self.w);
        out.extend(&self.v);
        out.extend(&self.b);
        out.extend(&self.c);
        out
    }

    pub fn set_from_vec(&mut self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.num_params() {
            return Err(Error::ShapeMismatch(format!(
                "{} parameters, expected {}",
                theta.len(),
                self.num_params()
            )));
        }
        let (wn, vn, n) = (self.w.len(), self.v.len(), self.n);
        self.w.copy_from_slice(&theta[..wn]);
        self.v.copy_from_slice(&theta[wn..wn + vn]);
        self.b.copy_from_slice(&theta[wn + vn..wn + vn + n]);
        self.c.copy_from_slice(&theta[wn + vn + n..]);
        Ok(())
    }

    pub fn w_row(&self, j: usize) -> &[f64] {
        &self.w[j * self.n..(j + 1) * self.n]
    }

    pub fn v_row(&self, j: usize) -> &[f64] {
        &self.v[j * self.k..(j + 1) * self.k]
    }

    pub fn append_hidden_unit(&self, w_out: &[f64], w_in: &[f64], bias: f64) -> Result<Self> {
        if w_out.len() != self.n || w_in.len() != self.k {
            return Err(Error::ShapeMismatch(format!(
                "unit weights ({}, {}) for n = {}, k = {}",
                w_out.len(),
                w_in.len(),
                self.n,
                self.k
            )));
        }
        let mut p = self.clone();
        p.w.extend_from_slice(w_out);
        p.v.extend_from_slice(w_in);
        p.c.push(bias);
        p.m += 1;
        Ok(p)
    }

    /// Appends a unit given weights on the joint visible vector (inputs first).
    pub fn append_visible_unit(&self, weights: &[f64], bias: f64) -> Result<Self> {
        if weights.len() != self.k + self.n {
            return Err(Error::ShapeMismatch(format!(
                "{} visible weights for k + n = {}",
                weights.len(),
                self.k + self.n
            )));
        }
        self.append_hidden_unit(&weights[self.k..], &weights[..self.k], bias)
    }

    pub fn remove_last_unit(&self) -> Option<Self> {
        if self.m == 0 {
            return None;
        }
        let mut p = self.clone();
        p.m -= 1;
        p.w.truncate(p.m * p.n);
        p.v.truncate(p.m * p.k);
        p.c.pop();
        Some(p)
    }

    /// The same weights read as an RBM on `k + n` visible units (inputs in the low bits).
    pub fn as_rbm(&self) -> Self {
        let width = self.k + self.n;
        let mut w = Vec::with_capacity(self.m * width);
        for j in 0..self.m {
            w.extend_from_slice(self.v_row(j));
            w.extend_from_slice(self.w_row(j));
        }
        let mut b = vec![0.0; self.k];
        b.extend_from_slice(&self.b);
        Self {
            k: 0,
            n: width,
            m: self.m,
            w,
            v: Vec::new(),
            b,
            c: self.c.clone(),
        }
    }

    /// Input contributions `V_j x + c_j`, indexed `[x][j]`.
    fn input_fields(&self) -> Vec<Vec<f64>> {
        (0..1usize << self.k)
            .map(|x| {
                (0..self.m)
                    .map(|j| self.c[j] + dot_bits(self.v_row(j), x))
                    .collect()
            })
            .collect()
    }

    /// Output contributions `W_j y`, indexed `[y][j]`, and `bᵀy`.
    fn output_fields(&self) -> (Vec<Vec<f64>>, Vec<f64>) {
        let size = 1usize << self.n;
        let fields = (0..size)
            .map(|y| (0..self.m).map(|j| dot_bits(self.w_row(j), y)).collect())
            .collect();
        let bias = (0..size).map(|y| dot_bits(&self.b, y)).collect();
        (fields, bias)
    }

    /// `log p(y|x)` for every input row.
    pub fn log_conditional(&self) -> Result<Vec<Vec<f64>>> {
        check_width(self.k + self.n)?;
        let inputs = self.input_fields();
        let (outputs, bias) = self.output_fields();
        Ok(inputs
            .iter()
            .map(|hx| {
                let mut row: Vec<f64> = outputs
                    .iter()
                    .zip(&bias)
                    .map(|(wy, by)| {
                        by + hx.iter().zip(wy).map(|(a, b)| softplus(a + b)).sum::<f64>()
                    })
                    .collect();
                log_normalize(&mut row);
                row
            })
            .collect())
    }

    pub fn eval_conditional(&self) -> Result<ConditionalTable> {
        let rows = self
            .log_conditional()?
            .into_iter()
            .map(|row| Dist::from_weights(self.n, row.into_iter().map(f64::exp).collect()))
            .collect::<Result<Vec<_>>>()?;
        ConditionalTable::new(self.k, self.n, rows)
    }

    /// Visible distribution of the RBM (`k = 0`).
    pub fn eval_joint_rbm(&self) -> Result<Dist> {
        if self.k != 0 {
            return Err(Error::ShapeMismatch(format!(
                "expected k = 0, got {}",
                self.k
            )));
        }
        let row = self.log_conditional()?.pop().expect("one row");
        Dist::from_log_weights(self.n, &row)
    }

    /// Most likely hidden state for every visible state `x | y << k`.
    pub fn inference_map(&self) -> Result<InferenceMap> {
        check_width(self.k + self.n)?;
        if self.m >= usize::BITS as usize {
            return Err(Error::CapExceeded {
                width: self.m,
                cap: usize::BITS as usize - 1,
            });
        }
        let inputs = self.input_fields();
        let (outputs, _) = self.output_fields();
        let size = 1usize << (self.k + self.n);
        let mut hidden = vec![0usize; size];
        let mut ties = vec![false; size];
        for (y, wy) in outputs.iter().enumerate() {
            for (x, hx) in inputs.iter().enumerate() {
                let v = x | (y << self.k);
                for j in 0..self.m {
                    let pre = hx[j] + wy[j];
                    if pre > 0.0 {
                        hidden[v] |= 1 << j;
                    } else if pre == 0.0 {
                        ties[v] = true;
                    }
                }
            }
        }
        Ok(InferenceMap {
            k: self.k,
            n: self.n,
            m: self.m,
            hidden,
            ties,
        })
    }

    /// Jacobian of `θ ↦ p(y|x)`; row `x * 2^n + y`, columns ordered `W, V, b, c`.
    pub fn conditional_jacobian(&self) -> Result<DMatrix<f64>> {
        let logp = self.log_conditional()?;
        let inputs = self.input_fields();
        let (outputs, _) = self.output_fields();
        let (k, n, m) = (self.k, self.n, self.m);
        let ny = 1usize << n;
        let cols = self.num_params();
        let (v_off, b_off, c_off) = (m * n, m * n + m * k, m * n + m * k + n);
        let mut jac = DMatrix::zeros((1usize << k) * ny, cols);
        let mut g = vec![0.0; cols];
        let mut mean = vec![0.0; cols];
        for (x, hx) in inputs.iter().enumerate() {
            let probs: Vec<f64> = logp[x].iter().map(|l| l.exp()).collect();
            let mut grads = Vec::with_capacity(ny);
            mean.iter_mut().for_each(|v| *v = 0.0);
            for (y, wy) in outputs.iter().enumerate() {
                g.iter_mut().for_each(|v| *v = 0.0);
                for j in 0..m {
                    let s = sigmoid(hx[j] + wy[j]);
                    for i in 0..n {
                        if y >> i & 1 == 1 {
                            g[j * n + i] = s;
                        }
                    }
                    for l in 0..k {
                        if x >> l & 1 == 1 {
                            g[v_off + j * k + l] = s;
                        }
                    }
                    g[c_off + j] = s;
                }
                for i in 0..n {
                    g[b_off + i] = (y >> i & 1) as f64;
                }
                for (acc, gi) in mean.iter_mut().zip(&g) {
                    *acc += probs[y] * gi;
                }
                grads.push(g.clone());
            }
            for (y, gy) in grads.iter().enumerate() {
                let row = x * ny + y;
                for col in 0..cols {
                    jac[(row, col)] = probs[y] * (gy[col] - mean[col]);
                }
            }
        }
        Ok(jac)
    }
}

/// `Σ_i a_i s_i` for the bits `s_i` of `state`.
pub fn dot_bits(a: &[f64], state: usize) -> f64 {
    a.iter()
        .enumerate()
        .filter(|(i, _)| state >> i & 1 == 1)
        .map(|(_, v)| v)
        .sum()
}

/// Hidden states maximizing `zᵀ(Vx + Wy + c)` for each visible state.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InferenceMap {
    pub k: usize,
    pub n: usize,
    pub m: usize,
    /// Bitmask of active hidden units, indexed by visible state `x | y << k`.
    pub hidden: Vec<usize>,
    /// Set where some pre-activation is exactly zero; the unit is then reported off.
    pub ties: Vec<bool>,
}

impl InferenceMap {
    pub fn any_tie(&self) -> bool {
        self.ties.iter().any(|&t| t)
    }
}
