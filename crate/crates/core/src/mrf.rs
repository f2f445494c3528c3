//! Binary Markov random fields and their compilation into (C)RBM weights.
//!
//! Faces are bitmasks over `[N]`; bit `i` is variable `i`. A face's monomial
//! is `Π_{i∈A} x_i`, and a table over `{0,1}^N` is converted to its monomial
//! coefficients by Möbius inversion.

use std::cmp::Reverse;

use serde::{Deserialize, Serialize};

use crate::bitspace::check_width;
use crate::crbm::{dot_bits, CrbmParams};
use crate::distributions::{hadamard, ConditionalTable, Dist};
use crate::error::{Error, Result};
use crate::numeric::softplus;

/// Largest `t` tried when bracketing the Younes coefficient.
pub const YOUNES_T_MAX: f64 = 1e3;
const BISECTION_STEPS: usize = 200;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct ComplexSpec {
    n: usize,
    faces: Vec<Vec<usize>>,
}

/// Downward-closed family of subsets of `[N]`, always containing `∅`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ComplexSpec", into = "ComplexSpec")]
pub struct SimplicialComplex {
    n: usize,
    faces: Vec<usize>,
}

fn face_key(face: usize) -> (Reverse<u32>, Vec<usize>) {
    (Reverse(face.count_ones()), members(face))
}

fn members(face: usize) -> Vec<usize> {
    (0..usize::BITS as usize)
        .filter(|i| face >> i & 1 == 1)
        .collect()
}

fn mask_of(n: usize, face: &[usize]) -> Result<usize> {
    face.iter().try_fold(0usize, |m, &i| {
        if i >= n {
            Err(Error::NotSimplicialComplex(format!(
                "index {i} outside [{n}]"
            )))
        } else {
            Ok(m | 1 << i)
        }
    })
}

impl SimplicialComplex {
    /// Validates downward closure of an explicit face list.
    pub fn new(n: usize, faces: &[usize]) -> Result<Self> {
        check_width(n)?;
        let mut fs: Vec<usize> = faces.to_vec();
        if fs.iter().any(|&f| f >> n != 0) {
            return Err(Error::NotSimplicialComplex(
                "face outside the ground set".into(),
            ));
        }
        fs.sort_by_key(|&f| face_key(f));
        fs.dedup();
        if !fs.contains(&0) {
            return Err(Error::NotSimplicialComplex("missing the empty face".into()));
        }
        for &f in &fs {
            for i in members(f) {
                if !fs.contains(&(f & !(1 << i))) {
                    return Err(Error::NotSimplicialComplex(format!(
                        "{:?} present without {:?}",
                        members(f),
                        members(f & !(1 << i))
                    )));
                }
            }
        }
        Ok(Self { n, faces: fs })
    }

    /// Downward closure of the given generators.
    pub fn from_generators(n: usize, generators: &[usize]) -> Result<Self> {
        check_width(n)?;
        let mut faces = vec![0usize];
        for &g in generators {
            if g >> n != 0 {
                return Err(Error::NotSimplicialComplex(
                    "face outside the ground set".into(),
                ));
            }
            // all submasks of g
            let mut s = g;
            loop {
                faces.push(s);
                if s == 0 {
                    break;
                }
                s = (s - 1) & g;
            }
        }
        faces.sort_unstable();
        faces.dedup();
        Self::new(n, &faces)
    }

    pub fn full(n: usize) -> Result<Self> {
        check_width(n)?;
        Self::from_generators(n, &[(1 << n) - 1])
    }

    pub fn singletons(n: usize) -> Result<Self> {
        Self::from_generators(n, &(0..n).map(|i| 1 << i).collect::<Vec<_>>())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Faces in decreasing cardinality, ties by ascending index set.
    pub fn faces(&self) -> &[usize] {
        &self.faces
    }

    pub fn contains(&self, face: usize) -> bool {
        self.faces.contains(&face)
    }

    pub fn is_subcomplex_of(&self, other: &SimplicialComplex) -> bool {
        self.n == other.n && self.faces.iter().all(|&f| other.contains(f))
    }
}

impl TryFrom<ComplexSpec> for SimplicialComplex {
    type Error = Error;
    fn try_from(spec: ComplexSpec) -> Result<Self> {
        let gens = spec
            .faces
            .iter()
            .map(|f| mask_of(spec.n, f))
            .collect::<Result<Vec<_>>>()?;
        Self::from_generators(spec.n, &gens)
    }
}

impl From<SimplicialComplex> for ComplexSpec {
    fn from(c: SimplicialComplex) -> Self {
        ComplexSpec {
            n: c.n,
            faces: c.faces.iter().map(|&f| members(f)).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FaceValue {
    pub face: Vec<usize>,
    pub value: f64,
}

/// `p(x) ∝ exp(Σ_A θ_A Π_{i∈A} x_i)` over the faces of a complex.
#[derive(Clone, Debug, PartialEq)]
pub struct MrfModel {
    complex: SimplicialComplex,
    /// Dense coefficient table indexed by face mask; zero off the complex.
    theta: Vec<f64>,
}

impl MrfModel {
    pub fn new(complex: SimplicialComplex, values: &[(usize, f64)]) -> Result<Self> {
        let mut theta = vec![0.0; 1 << complex.n];
        for &(face, v) in values {
            if !complex.contains(face) {
                return Err(Error::NotSubcomplex);
            }
            if !v.is_finite() {
                return Err(Error::ShapeMismatch(format!(
                    "non-finite θ on {:?}",
                    members(face)
                )));
            }
            theta[face] += v;
        }
        Ok(Self { complex, theta })
    }

    pub fn from_face_values(complex: SimplicialComplex, values: &[FaceValue]) -> Result<Self> {
        let pairs = values
            .iter()
            .map(|fv| Ok((mask_of(complex.n, &fv.face)?, fv.value)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(complex, &pairs)
    }

    pub fn complex(&self) -> &SimplicialComplex {
        &self.complex
    }

    pub fn theta(&self, face: usize) -> f64 {
        self.theta.get(face).copied().unwrap_or(0.0)
    }

    pub fn face_values(&self) -> Vec<FaceValue> {
        self.complex
            .faces
            .iter()
            .map(|&f| FaceValue {
                face: members(f),
                value: self.theta[f],
            })
            .collect()
    }

    /// Unnormalized log-density on every state.
    pub fn log_weights(&self) -> Vec<f64> {
        zeta(&self.theta)
    }
}

/// Monomial coefficients of a table: `J_B = Σ_{C⊆B} (-1)^{|B∖C|} f(C)`.
pub fn mobius(table: &[f64]) -> Vec<f64> {
    let mut out = table.to_vec();
    let mut bit = 1;
    while bit < out.len() {
        for mask in 0..out.len() {
            if mask & bit != 0 {
                out[mask] -= out[mask ^ bit];
            }
        }
        bit <<= 1;
    }
    out
}

/// Inverse of [`mobius`]: `f(x) = Σ_{B⊆x} J_B`.
pub fn zeta(coeffs: &[f64]) -> Vec<f64> {
    let mut out = coeffs.to_vec();
    let mut bit = 1;
    while bit < out.len() {
        for mask in 0..out.len() {
            if mask & bit != 0 {
                out[mask] += out[mask ^ bit];
            }
        }
        bit <<= 1;
    }
    out
}

pub fn mrf_distribution(model: &MrfModel) -> Result<Dist> {
    check_width(model.complex.n)?;
    Dist::from_log_weights(model.complex.n, &model.log_weights())
}

/// One softplus unit whose top monomial coefficient equals `rho`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct YounesSolution {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub epsilon: i8,
    pub t: f64,
    /// Monomial coefficients of `x ↦ softplus(w·x + b)` over `{0,1}^N`.
    pub coefficients: Vec<f64>,
}

fn base_direction(n: usize, epsilon: i8) -> (Vec<f64>, f64) {
    let mut w = vec![1.0; n];
    let mut b = -(n as f64 - 0.5);
    if epsilon < 0 {
        w[n - 1] = -1.0;
        b += 1.0;
    }
    (w, b)
}

fn softplus_coefficients(w: &[f64], b: f64) -> Vec<f64> {
    let table: Vec<f64> = (0..1usize << w.len())
        .map(|x| softplus(dot_bits(w, x) + b))
        .collect();
    mobius(&table)
}

pub fn younes_solve(rho: f64, n: usize) -> Result<YounesSolution> {
    if n == 0 {
        return Err(Error::InvalidWidth(0));
    }
    check_width(n)?;
    let epsilon: i8 = if rho >= 0.0 { 1 } else { -1 };
    let (w0, b0) = base_direction(n, epsilon);
    let top = (1usize << n) - 1;
    let at = |t: f64| {
        let w: Vec<f64> = w0.iter().map(|v| v * t).collect();
        let c = softplus_coefficients(&w, b0 * t);
        (w, c)
    };
    // signed gap: positive once the bracket has been passed
    let gap = |t: f64| epsilon as f64 * (at(t).1[top] - rho);
    let t = if rho == 0.0 {
        0.0
    } else {
        let mut lo = 0.0;
        let mut hi = 1.0;
        while gap(hi) < 0.0 {
            lo = hi;
            hi *= 2.0;
            if hi > YOUNES_T_MAX {
                return Err(Error::NoBracket {
                    rho,
                    t_max: YOUNES_T_MAX,
                });
            }
        }
        for _ in 0..BISECTION_STEPS {
            let mid = 0.5 * (lo + hi);
            if gap(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let (weights, coefficients) = at(t);
    Ok(YounesSolution {
        weights,
        bias: b0 * t,
        epsilon,
        t,
        coefficients,
    })
}

/// Faces that need a hidden unit when `keep` is absorbed elsewhere.
pub fn units_needed(complex: &SimplicialComplex, keep: &SimplicialComplex) -> Vec<usize> {
    complex
        .faces
        .iter()
        .copied()
        .filter(|&f| f.count_ones() > 1 && !keep.contains(f))
        .collect()
}

/// RBM plus the correction model `p'` on the kept faces.
#[derive(Clone, Debug, PartialEq)]
pub struct MrfCompilation {
    pub params: CrbmParams,
    pub correction: MrfModel,
    /// Faces that received a unit, in processing order.
    pub unit_faces: Vec<usize>,
}

/// Cancel every face outside `keep` with one hidden unit, largest faces first.
///
/// Singletons go to visible biases; the remaining kept faces go to the
/// correction, signed so that `p ∗ p'` is the RBM's visible distribution.
pub fn compile_mrf_to_rbm(model: &MrfModel, keep: &SimplicialComplex) -> Result<MrfCompilation> {
    let n = model.complex.n;
    if !keep.is_subcomplex_of(&model.complex) {
        return Err(Error::NotSubcomplex);
    }
    let order = units_needed(&model.complex, keep);
    let mut log_table = model.log_weights();
    let mut residue = model.theta.clone();
    let mut params = CrbmParams::zeros(0, n, 0);
    for &face in &order {
        let idx = members(face);
        let sol = younes_solve(residue[face], idx.len())?;
        let mut weights = vec![0.0; n];
        for (j, &i) in idx.iter().enumerate() {
            weights[i] = sol.weights[j];
        }
        params = params.append_hidden_unit(&weights, &[], sol.bias)?;
        for (x, v) in log_table.iter_mut().enumerate() {
            *v -= softplus(dot_bits(&weights, x) + sol.bias);
        }
        residue = mobius(&log_table);
    }
    if params.m != order.len() {
        return Err(Error::BudgetMismatch {
            expected: order.len(),
            used: params.m,
        });
    }
    params.b = (0..n).map(|i| residue[1 << i]).collect();
    let kept: Vec<(usize, f64)> = keep
        .faces
        .iter()
        .filter(|f| f.count_ones() > 1)
        .map(|&f| (f, -residue[f]))
        .collect();
    let correction = MrfModel::new(keep.clone(), &kept)?;
    Ok(MrfCompilation {
        params,
        correction,
        unit_faces: order,
    })
}

/// TV between `p ∗ p'` and the compiled RBM.
pub fn compilation_tv(model: &MrfModel, compiled: &MrfCompilation) -> Result<f64> {
    let lhs = hadamard(
        &mrf_distribution(model)?,
        &mrf_distribution(&compiled.correction)?,
    )?;
    Ok(0.5 * lhs.l1_distance(&compiled.params.eval_joint_rbm()?)?)
}

/// All subsets of the input coordinates `[k]`.
pub fn input_faces(n_total: usize, k: usize) -> Result<SimplicialComplex> {
    if k > n_total {
        return Err(Error::WidthMismatch {
            left: k,
            right: n_total,
        });
    }
    SimplicialComplex::from_generators(n_total, &[(1 << k) - 1])
}

/// Hidden units needed for the conditionals of an MRF on `k + n` variables.
pub fn conditional_budget(complex: &SimplicialComplex, k: usize) -> Result<usize> {
    Ok(units_needed(complex, &input_faces(complex.n, k)?).len())
}

/// CRBM whose conditionals `p(y|x)` equal those of the MRF on inputs `[k]`.
pub fn compile_conditional_mrf(model: &MrfModel, k: usize) -> Result<CrbmParams> {
    let total = model.complex.n;
    let keep = input_faces(total, k)?;
    let keep = SimplicialComplex::new(
        total,
        &keep
            .faces
            .iter()
            .copied()
            .filter(|&f| model.complex.contains(f))
            .collect::<Vec<_>>(),
    )?;
    let joint = compile_mrf_to_rbm(model, &keep)?.params;
    let n = total - k;
    let mut out = CrbmParams::zeros(k, n, 0);
    for j in 0..joint.m {
        let row = joint.w_row(j);
        out = out.append_hidden_unit(&row[k..], &row[..k], joint.c[j])?;
    }
    out.b = joint.b[k..].to_vec();
    Ok(out)
}

pub fn conditional_tv(model: &MrfModel, k: usize, params: &CrbmParams) -> Result<f64> {
    let target = crate::distributions::conditional_of_joint(&mrf_distribution(model)?, k)?;
    crate::distributions::tv_row_distance(&target, &params.eval_conditional()?)
}

/// Joint MRF on `k + n` variables whose conditional at input `x` is the
/// member of `E_J` with coefficients `thetas[x]` (faces of `J` on `[n]`).
pub fn product_family_model(
    k: usize,
    j: &SimplicialComplex,
    thetas: &[Vec<(usize, f64)>],
) -> Result<MrfModel> {
    let n = j.n;
    if thetas.len() != 1 << k {
        return Err(Error::ShapeMismatch(format!(
            "{} rows for k = {k}",
            thetas.len()
        )));
    }
    let total = k + n;
    check_width(total)?;
    // per output face, the Möbius expansion over the inputs
    let mut values = Vec::new();
    let mut gens = Vec::new();
    for &c in &j.faces {
        let table: Vec<f64> = thetas
            .iter()
            .map(|row| row.iter().filter(|(f, _)| *f == c).map(|(_, v)| v).sum())
            .collect();
        if thetas.iter().flatten().any(|(f, _)| !j.contains(*f)) {
            return Err(Error::NotSubcomplex);
        }
        for (b, v) in mobius(&table).into_iter().enumerate() {
            let face = b | c << k;
            gens.push(face);
            if v != 0.0 {
                values.push((face, v));
            }
        }
    }
    MrfModel::new(SimplicialComplex::from_generators(total, &gens)?, &values)
}

/// Conditional table of the family `x ↦ E_J(thetas[x])`.
pub fn product_family_table(
    k: usize,
    j: &SimplicialComplex,
    thetas: &[Vec<(usize, f64)>],
) -> Result<ConditionalTable> {
    let rows = thetas
        .iter()
        .map(|row| mrf_distribution(&MrfModel::new(j.clone(), row)?))
        .collect::<Result<Vec<_>>>()?;
    ConditionalTable::new(k, j.n, rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn binom(n: usize, k: usize) -> f64 {
        (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
    }

    /// Top coefficient through the binomial sum (valid for symmetric weights).
    fn top_symmetric(n: usize, w: f64, b: f64) -> f64 {
        (0..=n)
            .map(|k| {
                let sign = if (n - k).is_multiple_of(2) { 1.0 } else { -1.0 };
                sign * binom(n, k) * softplus(k as f64 * w + b)
            })
            .sum()
    }

    /// Direct inclusion-exclusion, independent of the in-place transform.
    fn top_direct(table: &[f64]) -> f64 {
        let top = table.len() - 1;
        let full = top.count_ones();
        (0..table.len())
            .map(|c: usize| {
                let sign = if (full - c.count_ones()).is_multiple_of(2) {
                    1.0
                } else {
                    -1.0
                };
                sign * table[c]
            })
            .sum()
    }

    #[test]
    fn complex_validation() {
        assert!(SimplicialComplex::new(2, &[0, 1, 2, 3]).is_ok());
        assert!(matches!(
            SimplicialComplex::new(2, &[0, 3]),
            Err(Error::NotSimplicialComplex(_))
        ));
        assert!(matches!(
            SimplicialComplex::new(2, &[1]),
            Err(Error::NotSimplicialComplex(_))
        ));
        let c = SimplicialComplex::full(3).unwrap();
        assert_eq!(c.faces()[0], 7);
        assert_eq!(&c.faces()[1..4], &[3, 5, 6]);
        let json = serde_json::to_string(&c).unwrap();
        let back: SimplicialComplex = serde_json::from_str(&json).unwrap();
        assert_eq!(back, c);
        let gens: SimplicialComplex =
            serde_json::from_str(r#"{"n":3,"faces":[[0,1],[2]]}"#).unwrap();
        assert_eq!(gens.faces().len(), 5);
    }

    #[test]
    fn distribution_examples() {
        let zero = MrfModel::new(SimplicialComplex::full(3).unwrap(), &[]).unwrap();
        let u = mrf_distribution(&zero).unwrap();
        assert!(u.probs().iter().all(|p| (p - 0.125).abs() < 1e-15));

        let logits = [0.3, -1.2, 2.0];
        let single = MrfModel::new(
            SimplicialComplex::singletons(3).unwrap(),
            &[(1, logits[0]), (2, logits[1]), (4, logits[2])],
        )
        .unwrap();
        let p = mrf_distribution(&single).unwrap();
        for x in 0..8 {
            let prod: f64 = (0..3)
                .map(|i| {
                    let s = 1.0 / (1.0 + (-logits[i]).exp());
                    if x >> i & 1 == 1 {
                        s
                    } else {
                        1.0 - s
                    }
                })
                .product();
            assert!((p.get(x) - prod).abs() < 1e-14);
        }

        let cubic = MrfModel::new(SimplicialComplex::full(3).unwrap(), &[(7, 2.0)]).unwrap();
        let p = mrf_distribution(&cubic).unwrap();
        let z = 7.0 + 2f64.exp();
        assert!((p.get(7) - 2f64.exp() / z).abs() < 1e-14);
        assert!((p.get(3) - 1.0 / z).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn mobius_round_trip(table in proptest::collection::vec(-5.0f64..5.0, 16)) {
            let back = zeta(&mobius(&table));
            for (a, b) in back.iter().zip(&table) {
                prop_assert!((a - b).abs() < 1e-12);
            }
            prop_assert!((mobius(&table)[15] - top_direct(&table)).abs() < 1e-12);
        }
    }

    #[test]
    fn younes_examples() {
        let zero = younes_solve(0.0, 3).unwrap();
        assert_eq!(zero.t, 0.0);
        assert!(zero.coefficients[1..].iter().all(|c| c.abs() < 1e-15));

        // N = 1: softplus(w + b) - softplus(b) directly
        for rho in [0.7, -1.3, 4.0] {
            let s = younes_solve(rho, 1).unwrap();
            let direct = softplus(s.weights[0] + s.bias) - softplus(s.bias);
            assert!((direct - rho).abs() < 1e-10);
        }

        let s = younes_solve(2.0, 3).unwrap();
        assert!((top_symmetric(3, s.weights[0], s.bias) - 2.0).abs() < 1e-10);
        assert_eq!(s.epsilon, 1);
    }

    #[test]
    fn younes_residuals() {
        for n in 1..=5 {
            for rho in [-6.0, -1.0, -0.01, 0.01, 0.5, 3.0, 20.0] {
                let s = younes_solve(rho, n).unwrap();
                let table: Vec<f64> = (0..1usize << n)
                    .map(|x| softplus(dot_bits(&s.weights, x) + s.bias))
                    .collect();
                assert!((top_direct(&table) - rho).abs() < 1e-10, "n={n} rho={rho}");
                assert_eq!(s.epsilon, if rho >= 0.0 { 1 } else { -1 });
                // forward evaluation of the coefficients reproduces the table
                for (a, b) in zeta(&s.coefficients).iter().zip(&table) {
                    assert!((a - b).abs() < 1e-12);
                }
            }
        }
        assert!(matches!(younes_solve(1e4, 2), Err(Error::NoBracket { .. })));
    }

    #[test]
    fn compile_examples() {
        let single = MrfModel::new(
            SimplicialComplex::singletons(3).unwrap(),
            &[(1, 0.4), (4, -0.9)],
        )
        .unwrap();
        let out = compile_mrf_to_rbm(&single, &SimplicialComplex::new(3, &[0]).unwrap()).unwrap();
        assert_eq!(out.params.m, 0);
        let tv = 0.5
            * out
                .params
                .eval_joint_rbm()
                .unwrap()
                .l1_distance(&mrf_distribution(&single).unwrap())
                .unwrap();
        assert!(tv < 1e-14);

        let empty = SimplicialComplex::new(2, &[0]).unwrap();
        let pair = MrfModel::new(SimplicialComplex::full(2).unwrap(), &[(3, 1.5)]).unwrap();
        let out = compile_mrf_to_rbm(&pair, &empty).unwrap();
        assert_eq!(out.params.m, 1);
        assert!(compilation_tv(&pair, &out).unwrap() < 1e-6);

        let empty = SimplicialComplex::new(3, &[0]).unwrap();
        let full = MrfModel::new(
            SimplicialComplex::full(3).unwrap(),
            &[(3, 1.0), (5, -0.5), (6, 0.8), (7, -1.7), (2, 0.3)],
        )
        .unwrap();
        let out = compile_mrf_to_rbm(&full, &empty).unwrap();
        assert_eq!(out.params.m, 4);
        assert_eq!(out.unit_faces, vec![7, 3, 5, 6]);
        assert!(compilation_tv(&full, &out).unwrap() < 1e-6);
    }

    #[test]
    fn compile_random_models() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for draw in 0..20 {
            let n = 2 + draw % 3;
            let complex = SimplicialComplex::full(n).unwrap();
            let values: Vec<(usize, f64)> = complex
                .faces()
                .iter()
                .map(|&f| (f, rng.random_range(-2.0..2.0)))
                .collect();
            let model = MrfModel::new(complex.clone(), &values).unwrap();
            // keep one pair face when there is one to keep
            let keep = if draw % 2 == 0 {
                SimplicialComplex::new(n, &[0]).unwrap()
            } else {
                SimplicialComplex::from_generators(n, &[3]).unwrap()
            };
            let out = compile_mrf_to_rbm(&model, &keep).unwrap();
            assert_eq!(out.params.m, units_needed(&complex, &keep).len());
            assert!(compilation_tv(&model, &out).unwrap() < 1e-6, "draw {draw}");
        }
    }

    #[test]
    fn keep_must_be_subcomplex() {
        let model = MrfModel::new(SimplicialComplex::singletons(2).unwrap(), &[]).unwrap();
        let keep = SimplicialComplex::full(2).unwrap();
        assert_eq!(
            compile_mrf_to_rbm(&model, &keep).unwrap_err(),
            Error::NotSubcomplex
        );
    }

    #[test]
    fn conditional_examples() {
        // inputs and output singletons only: product conditionals, no units
        let c = SimplicialComplex::from_generators(4, &[3, 4, 8]).unwrap();
        let model = MrfModel::new(c.clone(), &[(3, 1.0), (4, 0.5), (8, -0.2)]).unwrap();
        let p = compile_conditional_mrf(&model, 2).unwrap();
        assert_eq!(p.m, 0);
        assert!(conditional_tv(&model, 2, &p).unwrap() < 1e-12);

        let full = SimplicialComplex::full(3).unwrap();
        assert_eq!(conditional_budget(&full, 1).unwrap(), 4);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let values: Vec<(usize, f64)> = full
            .faces()
            .iter()
            .map(|&f| (f, rng.random_range(-2.0..2.0)))
            .collect();
        let model = MrfModel::new(full, &values).unwrap();
        let p = compile_conditional_mrf(&model, 1).unwrap();
        assert_eq!(p.m, 4);
        assert!(conditional_tv(&model, 1, &p).unwrap() < 1e-6);
    }

    #[test]
    fn product_family_instance() {
        let j = SimplicialComplex::full(2).unwrap();
        let thetas = vec![
            vec![(1, 0.5), (2, -1.0), (3, 2.0)],
            vec![(1, -0.7), (2, 0.3), (3, -1.1)],
        ];
        let model = product_family_model(1, &j, &thetas).unwrap();
        let budget = conditional_budget(model.complex(), 1).unwrap();
        assert_eq!(budget, 2 * (j.faces().len() - 1) - 2);
        let p = compile_conditional_mrf(&model, 1).unwrap();
        assert_eq!(p.m, 4);
        let target = product_family_table(1, &j, &thetas).unwrap();
        let tv =
            crate::distributions::tv_row_distance(&target, &p.eval_conditional().unwrap()).unwrap();
        assert!(tv < 1e-6);
    }
}
