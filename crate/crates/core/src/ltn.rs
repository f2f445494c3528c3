//! Two-layer linear threshold networks and their embedding into CRBMs.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::bitspace::check_width;
use crate::crbm::{dot_bits, CrbmParams};
use crate::distributions::{tv_row_distance, ConditionalTable, Dist};
use crate::error::{Error, Result};
use crate::numeric::sigmoid;

/// Largest shared scale `t` tried by the embeddings.
pub const SCALE_CAP: f64 = 1_073_741_824.0;
/// Bias shift used to break exact ties.
pub const GENERIC_NUDGE: f64 = 1e-9;

/// `x ↦ hs(Wᵀ hs(Vx + c) + b)`, with `W` stored `m × n` like a CRBM.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdNet {
    pub k: usize,
    pub m: usize,
    pub n: usize,
    #[serde(rename = "V")]
    pub v: Vec<f64>,
    pub c: Vec<f64>,
    #[serde(rename = "W")]
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

fn heaviside(value: f64, layer: usize, unit: usize) -> Result<bool> {
    if value == 0.0 {
        Err(Error::TieEncountered { layer, unit })
    } else {
        Ok(value > 0.0)
    }
}

impl ThresholdNet {
    pub fn new(
        k: usize,
        m: usize,
        n: usize,
        v: Vec<f64>,
        c: Vec<f64>,
        w: Vec<f64>,
        b: Vec<f64>,
    ) -> Result<Self> {
        let net = Self {
            k,
            m,
            n,
            v,
            c,
            w,
            b,
        };
        net.validate()?;
        Ok(net)
    }

    pub fn validate(&self) -> Result<()> {
        let shapes = [
            (self.v.len(), self.m * self.k, "V"),
            (self.c.len(), self.m, "c"),
            (self.w.len(), self.m * self.n, "W"),
            (self.b.len(), self.n, "b"),
        ];
        for (got, want, name) in shapes {
            if got != want {
                return Err(Error::ShapeMismatch(format!(
                    "{name} has {got} entries, expected {want}"
                )));
            }
        }
        let all = self.v.iter().chain(&self.c).chain(&self.w).chain(&self.b);
        if all.clone().any(|x| !x.is_finite()) {
            return Err(Error::ShapeMismatch("non-finite weight".into()));
        }
        check_width(self.k + self.n)
    }

    /// Standard-normal weights, nudged until no pre-activation vanishes.
    pub fn random<R: Rng + ?Sized>(k: usize, m: usize, n: usize, rng: &mut R) -> Self {
        let mut draw =
            |len: usize| -> Vec<f64> { (0..len).map(|_| rng.sample(StandardNormal)).collect() };
        let net = Self {
            k,
            m,
            n,
            v: draw(m * k),
            c: draw(m),
            w: draw(m * n),
            b: draw(n),
        };
        net.make_generic()
    }

    fn v_row(&self, j: usize) -> &[f64] {
        &self.v[j * self.k..(j + 1) * self.k]
    }

    fn first_layer(&self, x: usize) -> Vec<f64> {
        (0..self.m)
            .map(|j| dot_bits(self.v_row(j), x) + self.c[j])
            .collect()
    }

    fn second_layer(&self, z: usize) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                self.b[i]
                    + (0..self.m)
                        .filter(|j| z >> j & 1 == 1)
                        .map(|j| self.w[j * self.n + i])
                        .sum::<f64>()
            })
            .collect()
    }

    /// Hidden pattern `hs(Vx + c)` as a bitmask.
    pub fn hidden(&self, x: usize) -> Result<usize> {
        self.first_layer(x)
            .into_iter()
            .enumerate()
            .try_fold(0, |z, (j, a)| Ok(z | (heaviside(a, 1, j)? as usize) << j))
    }

    /// Output logits `Wᵀz + b`.
    pub fn output_logits(&self, z: usize) -> Vec<f64> {
        self.second_layer(z)
    }

    pub fn first_layer_generic(&self) -> bool {
        (0..1usize << self.k).all(|x| self.first_layer(x).iter().all(|&a| a != 0.0))
    }

    pub fn is_generic(&self) -> bool {
        (0..1usize << self.k).all(|x| self.first_layer(x).iter().all(|&a| a != 0.0))
            && (0..1usize << self.m).all(|z| self.second_layer(z).iter().all(|&a| a != 0.0))
    }

    /// Shift every bias that meets a zero pre-activation by [`GENERIC_NUDGE`].
    pub fn make_generic(&self) -> Self {
        let mut net = self.clone();
        for _ in 0..8 {
            let mut changed = false;
            for j in 0..net.m {
                if (0..1usize << net.k).any(|x| net.first_layer(x)[j] == 0.0) {
                    net.c[j] += GENERIC_NUDGE;
                    changed = true;
                }
            }
            for i in 0..net.n {
                if (0..1usize << net.m).any(|z| net.second_layer(z)[i] == 0.0) {
                    net.b[i] += GENERIC_NUDGE;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        net
    }

    /// Smallest `|V_j x + c_j|` over all inputs and units.
    pub fn first_layer_gap(&self) -> f64 {
        (0..1usize << self.k)
            .flat_map(|x| self.first_layer(x))
            .map(f64::abs)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn truth_table(&self) -> Result<Vec<usize>> {
        (0..1usize << self.k).map(|x| ltn_eval(self, x)).collect()
    }
}

pub fn ltn_eval(net: &ThresholdNet, x: usize) -> Result<usize> {
    let z = net.hidden(x)?;
    net.output_logits(z)
        .into_iter()
        .enumerate()
        .try_fold(0, |y, (i, a)| Ok(y | (heaviside(a, 2, i)? as usize) << i))
}

/// Unit `i` fires when at least `i` inputs are on; the output alternates over them.
pub fn parity_net(k: usize) -> Result<ThresholdNet> {
    if k == 0 {
        return Err(Error::InvalidWidth(0));
    }
    let v = vec![2.0; k * k];
    let c = (1..=k).map(|i| -(2.0 * i as f64 - 1.0)).collect();
    let w = (1..=k)
        .map(|i| if i % 2 == 1 { 2.0 } else { -2.0 })
        .collect();
    ThresholdNet::new(k, k, 1, v, c, w, vec![-1.0])
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub t: f64,
    pub tv: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub params: CrbmParams,
    pub alpha: f64,
    pub t: f64,
    pub tv: f64,
    pub trace: Vec<TracePoint>,
}

fn scaled(net: &ThresholdNet, first: f64, second: f64) -> CrbmParams {
    let mul = |xs: &[f64], s: f64| xs.iter().map(|x| x * s).collect::<Vec<_>>();
    CrbmParams {
        k: net.k,
        n: net.n,
        m: net.m,
        w: mul(&net.w, second),
        v: mul(&net.v, first),
        b: mul(&net.b, second),
        c: mul(&net.c, first),
    }
}

/// `(1 + 2 max_j ‖W_j‖₁) / gap`: keeps `hs(Vx + c)` the hidden argmax for any `y`.
pub fn first_layer_scale(net: &ThresholdNet) -> f64 {
    let wmax = (0..net.m)
        .map(|j| {
            net.w[j * net.n..(j + 1) * net.n]
                .iter()
                .map(|v| v.abs())
                .sum::<f64>()
        })
        .fold(0.0, f64::max);
    (1.0 + 2.0 * wmax) / net.first_layer_gap()
}

fn doubling<F>(target: &ConditionalTable, eps: f64, alpha: f64, build: F) -> Result<Embedding>
where
    F: Fn(f64) -> CrbmParams,
{
    let mut trace = Vec::new();
    let mut t = 1.0;
    loop {
        let params = build(t);
        let tv = tv_row_distance(target, &params.eval_conditional()?)?;
        trace.push(TracePoint { t, tv });
        if tv <= eps {
            return Ok(Embedding {
                params,
                alpha,
                t,
                tv,
                trace,
            });
        }
        t *= 2.0;
        if t > SCALE_CAP {
            return Err(Error::ScaleCapExceeded(t));
        }
    }
}

/// CRBM whose conditionals approach the net's deterministic map within `eps`.
pub fn embed_ltn_in_crbm(net: &ThresholdNet, eps: f64) -> Result<Embedding> {
    net.validate()?;
    if !net.is_generic() {
        return Err(Error::NotGeneric);
    }
    let target = ConditionalTable::deterministic(net.k, net.n, &net.truth_table()?)?;
    let alpha = if net.m == 0 {
        1.0
    } else {
        first_layer_scale(net)
    };
    doubling(&target, eps, alpha, |t| scaled(net, t * alpha, t))
}

/// Rows `Π_i Bernoulli(σ(Wᵀz* + b)_i)` with `z* = hs(Vx + c)`.
pub fn sigmoid_output_table(net: &ThresholdNet) -> Result<ConditionalTable> {
    let rows = (0..1usize << net.k)
        .map(|x| {
            let logits = net.output_logits(net.hidden(x)?);
            let probs = (0..1usize << net.n)
                .map(|y| {
                    logits
                        .iter()
                        .enumerate()
                        .map(|(i, &a)| {
                            if y >> i & 1 == 1 {
                                sigmoid(a)
                            } else {
                                sigmoid(-a)
                            }
                        })
                        .product()
                })
                .collect();
            Dist::from_weights(net.n, probs)
        })
        .collect::<Result<Vec<_>>>()?;
    ConditionalTable::new(net.k, net.n, rows)
}

/// Scale only the first layer so the hidden posterior concentrates on `z*`.
pub fn embed_sigmoid_output(net: &ThresholdNet, eps: f64) -> Result<Embedding> {
    net.validate()?;
    if !net.first_layer_generic() {
        return Err(Error::NotGeneric);
    }
    let target = sigmoid_output_table(net)?;
    let alpha = if net.m == 0 {
        1.0
    } else {
        first_layer_scale(net)
    };
    doubling(&target, eps, alpha, |t| scaled(net, t * alpha, 1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum FixedPoint {
    Satisfied,
    Violated { x: usize },
    Tie { x: usize, layer: usize, unit: usize },
}

impl FixedPoint {
    pub fn is_satisfied(&self) -> bool {
        matches!(self, FixedPoint::Satisfied)
    }
}

/// Whether `f(x) = hs(Wᵀ hs(W f(x) + Vx + c) + b)` for every input.
pub fn check_deter_fixed_point(p: &CrbmParams, f: &[usize]) -> Result<FixedPoint> {
    p.validate()?;
    check_width(p.k + p.n)?;
    if f.len() != 1 << p.k {
        return Err(Error::ShapeMismatch(format!(
            "{} outputs for k = {}",
            f.len(),
            p.k
        )));
    }
    for (x, &y) in f.iter().enumerate() {
        if y >> p.n != 0 {
            return Err(Error::StateOutOfRange {
                index: y,
                width: p.n,
            });
        }
        let mut z = 0usize;
        for j in 0..p.m {
            let a = dot_bits(p.w_row(j), y) + dot_bits(p.v_row(j), x) + p.c[j];
            match heaviside(a, 1, j) {
                Ok(on) => z |= (on as usize) << j,
                Err(_) => {
                    return Ok(FixedPoint::Tie {
                        x,
                        layer: 1,
                        unit: j,
                    })
                }
            }
        }
        let mut back = 0usize;
        for i in 0..p.n {
            let a = p.b[i]
                + (0..p.m)
                    .filter(|j| z >> j & 1 == 1)
                    .map(|j| p.w[j * p.n + i])
                    .sum::<f64>();
            match heaviside(a, 2, i) {
                Ok(on) => back |= (on as usize) << i,
                Err(_) => {
                    return Ok(FixedPoint::Tie {
                        x,
                        layer: 2,
                        unit: i,
                    })
                }
            }
        }
        if back != y {
            return Ok(FixedPoint::Violated { x });
        }
    }
    Ok(FixedPoint::Satisfied)
}
