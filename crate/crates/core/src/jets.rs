//! Truncated multivariate Taylor polynomials ("jets").
//!
//! A [`Jet`] of order `k` in `n` variables stores every Taylor coefficient
//! `∂^α f(p) / α!` with `|α| ≤ k`, in graded lexicographic order. Arithmetic
//! truncates at `k`, so polynomial inputs of degree `≤ k` are carried exactly.
//! Jets are the only source of derivatives in the frame engine; finite
//! differences are kept for the independent oracle.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};

pub const MAX_VARS: usize = 8;
pub const MAX_ORDER: usize = 8;

/// Multi-index bookkeeping shared by all jets of one `(nvars, order)` shape.
pub struct Layout {
    nvars: usize,
    order: usize,
    exps: Vec<Vec<u8>>,
    /// `degree_start[d]` is the first index of total degree `d`; one extra
    /// entry holds the total length.
    degree_start: Vec<usize>,
    index: HashMap<Vec<u8>, usize>,
    products: Vec<(u32, u32, u32)>,
    /// Per variable: (source, target, factor) for `∂/∂x_v`.
    derivs: Vec<Vec<(u32, u32, f64)>>,
}

impl Layout {
    fn build(nvars: usize, order: usize) -> Layout {
        let mut exps = Vec::new();
        let mut degree_start = Vec::with_capacity(order + 2);
        for d in 0..=order {
            degree_start.push(exps.len());
            let mut cur = vec![0u8; nvars];
            push_degree(&mut exps, &mut cur, 0, d);
        }
        degree_start.push(exps.len());
        let index: HashMap<Vec<u8>, usize> =
            exps.iter().enumerate().map(|(i, e)| (e.clone(), i)).collect();

        let degree = |i: usize| exps[i].iter().map(|&x| x as usize).sum::<usize>();
        let mut products = Vec::new();
        for i in 0..exps.len() {
            let di = degree(i);
            for j in 0..degree_start[order - di + 1] {
                let sum: Vec<u8> = exps[i].iter().zip(&exps[j]).map(|(a, b)| a + b).collect();
                products.push((i as u32, j as u32, index[&sum] as u32));
            }
        }

        let mut derivs = vec![Vec::new(); nvars];
        for (src, e) in exps.iter().enumerate() {
            for (v, dv) in derivs.iter_mut().enumerate() {
                if e[v] > 0 {
                    let mut lower = e.clone();
                    lower[v] -= 1;
                    if let Some(&dst) = index.get(&lower) {
                        dv.push((src as u32, dst as u32, e[v] as f64));
                    }
                }
            }
        }

        Layout {
            nvars,
            order,
            exps,
            degree_start,
            index,
            products,
            derivs,
        }
    }

    pub fn len(&self) -> usize {
        self.exps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exps.is_empty()
    }

    pub fn exponents(&self) -> &[Vec<u8>] {
        &self.exps
    }

    /// Number of coefficients of total degree `≤ order`.
    pub fn len_up_to(&self, order: usize) -> usize {
        self.degree_start[order.min(self.order) + 1]
    }
}

fn push_degree(out: &mut Vec<Vec<u8>>, cur: &mut Vec<u8>, var: usize, remaining: usize) {
    if var + 1 == cur.len() {
        cur[var] = remaining as u8;
        out.push(cur.clone());
        cur[var] = 0;
        return;
    }
    if cur.is_empty() {
        return;
    }
    for k in (0..=remaining).rev() {
        cur[var] = k as u8;
        push_degree(out, cur, var + 1, remaining - k);
    }
    cur[var] = 0;
}

/// Number of multi-indices of total degree `≤ order` in `nvars` variables.
pub fn num_coeffs(nvars: usize, order: usize) -> usize {
    // C(nvars + order, order)
    let mut c: usize = 1;
    for i in 1..=order {
        c = c * (nvars + i) / i;
    }
    c
}

pub fn layout(nvars: usize, order: usize) -> Result<Arc<Layout>> {
    if nvars == 0 || nvars > MAX_VARS || order > MAX_ORDER {
        return Err(Error::Shape(format!(
            "jet shape nvars={nvars}, order={order} outside 1..={MAX_VARS} x 0..={MAX_ORDER}"
        )));
    }
    static LAYOUTS: OnceLock<Mutex<HashMap<(usize, usize), Arc<Layout>>>> = OnceLock::new();
    let table = LAYOUTS.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(l) = table.lock().unwrap().get(&(nvars, order)) {
        return Ok(l.clone());
    }
    // Built outside the lock; a racing builder just produces an equal layout.
    let built = Arc::new(Layout::build(nvars, order));
    Ok(table
        .lock()
        .unwrap()
        .entry((nvars, order))
        .or_insert(built)
        .clone())
}

#[derive(Clone)]
pub struct Jet {
    layout: Arc<Layout>,
    coeffs: Vec<f64>,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Jet")
            .field("nvars", &self.layout.nvars)
            .field("order", &self.layout.order)
            .field("coeffs", &self.coeffs)
            .finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum JetOp {
    Add,
    Sub,
    Mul,
    Scale(f64),
    Reciprocal,
    Exp,
    Log,
}

/// Checked jet arithmetic. Binary operations need equal shapes; `Reciprocal`
/// and `Log` need a nonzero / positive constant term. Unary operations ignore
/// `b`.
pub fn jet_arith(a: &Jet, b: Option<&Jet>, op: JetOp) -> Result<Jet> {
    let other = || b.ok_or_else(|| Error::Shape("binary jet operation without second operand".into()));
    match op {
        JetOp::Add => {
            let b = other()?;
            a.check_shape(b)?;
            Ok(a + b)
        }
        JetOp::Sub => {
            let b = other()?;
            a.check_shape(b)?;
            Ok(a - b)
        }
        JetOp::Mul => {
            let b = other()?;
            a.check_shape(b)?;
            Ok(a * b)
        }
        JetOp::Scale(s) => Ok(a * s),
        JetOp::Reciprocal => a.recip(),
        JetOp::Exp => Ok(a.exp()),
        JetOp::Log => a.ln(),
    }
}

impl Jet {
    pub fn zeros(nvars: usize, order: usize) -> Result<Jet> {
        let layout = layout(nvars, order)?;
        let coeffs = vec![0.0; layout.len()];
        Ok(Jet { layout, coeffs })
    }

    pub fn constant(nvars: usize, order: usize, value: f64) -> Result<Jet> {
        let mut j = Jet::zeros(nvars, order)?;
        j.coeffs[0] = value;
        Ok(j)
    }

    /// The coordinate function `x_var` expanded around `x_var = value`.
    pub fn variable(nvars: usize, order: usize, var: usize, value: f64) -> Result<Jet> {
        if var >= nvars {
            return Err(Error::Shape(format!("variable {var} out of range for {nvars} variables")));
        }
        let mut j = Jet::constant(nvars, order, value)?;
        if order >= 1 {
            // degree-1 monomials follow the constant, x_0 first
            j.coeffs[1 + var] = 1.0;
        }
        Ok(j)
    }

    /// Coordinate jets for every variable at `point`.
    pub fn variables(point: &[f64], order: usize) -> Result<Vec<Jet>> {
        (0..point.len())
            .map(|i| Jet::variable(point.len(), order, i, point[i]))
            .collect()
    }

    pub fn from_coeffs(nvars: usize, order: usize, coeffs: Vec<f64>) -> Result<Jet> {
        let layout = layout(nvars, order)?;
        if coeffs.len() != layout.len() {
            return Err(Error::Shape(format!(
                "expected {} coefficients, got {}",
                layout.len(),
                coeffs.len()
            )));
        }
        Ok(Jet { layout, coeffs })
    }

    /// Same shape as `self`, constant value.
    pub fn constant_like(&self, value: f64) -> Jet {
        let mut coeffs = vec![0.0; self.coeffs.len()];
        coeffs[0] = value;
        Jet {
            layout: self.layout.clone(),
            coeffs,
        }
    }

    pub fn nvars(&self) -> usize {
        self.layout.nvars
    }

    pub fn order(&self) -> usize {
        self.layout.order
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn exponents(&self) -> &[Vec<u8>] {
        self.layout.exponents()
    }

    pub fn same_shape(&self, other: &Jet) -> bool {
        self.layout.nvars == other.layout.nvars && self.layout.order == other.layout.order
    }

    fn check_shape(&self, other: &Jet) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "({}, {}) vs ({}, {})",
                self.nvars(),
                self.order(),
                other.nvars(),
                other.order()
            )))
        }
    }

    /// Taylor coefficient of the monomial `x^exps`; zero above the order.
    pub fn coeff(&self, exps: &[u8]) -> f64 {
        self.layout.index.get(exps).map_or(0.0, |&i| self.coeffs[i])
    }

    /// The partial derivative `∂^exps f` at the expansion point.
    pub fn partial(&self, exps: &[u8]) -> f64 {
        let fact: f64 = exps.iter().map(|&e| factorial(e as usize)).product();
        self.coeff(exps) * fact
    }

    /// Drop every coefficient above `order`.
    pub fn truncate(&self, order: usize) -> Jet {
        if order >= self.order() {
            return self.clone();
        }
        let layout = layout(self.nvars(), order).expect("smaller layout is valid");
        let coeffs = self.coeffs[..layout.len()].to_vec();
        Jet { layout, coeffs }
    }

    /// `∂f/∂x_var` as a jet of one order less.
    pub fn derivative(&self, var: usize) -> Result<Jet> {
        if self.order() == 0 {
            return Err(Error::OrderExhausted {
                required: 1,
                available: 0,
            });
        }
        let mut out = Jet::zeros(self.nvars(), self.order() - 1)?;
        let limit = out.coeffs.len();
        for &(src, dst, factor) in &self.layout.derivs[var] {
            let dst = dst as usize;
            if dst < limit {
                out.coeffs[dst] += factor * self.coeffs[src as usize];
            }
        }
        Ok(out)
    }

    /// `g(self)` given the Taylor coefficients `series[k] = g^(k)(v)/k!` of `g`
    /// at `v = self.value()`.
    pub fn compose(&self, series: &[f64]) -> Jet {
        let mut h = self.clone();
        h.coeffs[0] = 0.0;
        let mut out = self.constant_like(series.first().copied().unwrap_or(0.0));
        let mut power = self.constant_like(1.0);
        for &s in series.iter().take(self.order() + 1).skip(1) {
            power = &power * &h;
            out.axpy(s, &power);
        }
        out
    }

    pub fn exp(&self) -> Jet {
        let e = self.value().exp();
        let series: Vec<f64> = (0..=self.order()).map(|k| e / factorial(k)).collect();
        self.compose(&series)
    }

    pub fn ln(&self) -> Result<Jet> {
        let v = self.value();
        if !(v > 0.0) {
            return Err(Error::Domain(format!("log of jet with constant term {v}")));
        }
        let series: Vec<f64> = (0..=self.order())
            .map(|k| match k {
                0 => v.ln(),
                _ => {
                    let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                    sign / (k as f64 * v.powi(k as i32))
                }
            })
            .collect();
        Ok(self.compose(&series))
    }

    pub fn recip(&self) -> Result<Jet> {
        let v = self.value();
        if v == 0.0 || !v.is_finite() {
            return Err(Error::Domain(format!("reciprocal of jet with constant term {v}")));
        }
        let series: Vec<f64> = (0..=self.order())
            .map(|k| {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                sign / v.powi(k as i32 + 1)
            })
            .collect();
        Ok(self.compose(&series))
    }

    pub fn sin(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        let cycle = [s, c, -s, -c];
        let series: Vec<f64> = (0..=self.order()).map(|k| cycle[k % 4] / factorial(k)).collect();
        self.compose(&series)
    }

    pub fn cos(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        let cycle = [c, -s, -c, s];
        let series: Vec<f64> = (0..=self.order()).map(|k| cycle[k % 4] / factorial(k)).collect();
        self.compose(&series)
    }

    pub fn div(&self, other: &Jet) -> Result<Jet> {
        self.check_shape(other)?;
        Ok(self * &other.recip()?)
    }

    /// `self += s * other`
    pub fn axpy(&mut self, s: f64, other: &Jet) {
        debug_assert!(self.same_shape(other));
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += s * b;
        }
    }

    /// `self += a * b`, truncated to the shape of `self`.
    pub fn add_product(&mut self, a: &Jet, b: &Jet) {
        assert!(a.same_shape(b) && self.same_shape(a), "jet shape mismatch in product");
        for &(i, j, k) in &self.layout.products {
            self.coeffs[k as usize] += a.coeffs[i as usize] * b.coeffs[j as usize];
        }
    }

    pub fn max_abs_diff(&self, other: &Jet) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|a| a.abs()).fold(0.0, f64::max)
    }
}

pub fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

macro_rules! binop {
    ($tr:ident, $method:ident, $assign:tt) => {
        impl $tr<&Jet> for &Jet {
            type Output = Jet;
            fn $method(self, rhs: &Jet) -> Jet {
                assert!(self.same_shape(rhs), "jet shape mismatch");
                let coeffs = self
                    .coeffs
                    .iter()
                    .zip(&rhs.coeffs)
                    .map(|(a, b)| a $assign b)
                    .collect();
                Jet { layout: self.layout.clone(), coeffs }
            }
        }
        impl $tr<Jet> for Jet {
            type Output = Jet;
            fn $method(self, rhs: Jet) -> Jet {
                (&self).$method(&rhs)
            }
        }
        impl $tr<&Jet> for Jet {
            type Output = Jet;
            fn $method(self, rhs: &Jet) -> Jet {
                (&self).$method(rhs)
            }
        }
    };
}

binop!(Add, add, +);
binop!(Sub, sub, -);

impl Mul<&Jet> for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        let mut out = self.constant_like(0.0);
        out.add_product(self, rhs);
        out
    }
}

impl Mul<Jet> for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        &self * &rhs
    }
}

impl Mul<&Jet> for Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        &self * rhs
    }
}

impl Mul<f64> for &Jet {
    type Output = Jet;
    fn mul(self, s: f64) -> Jet {
        Jet {
            layout: self.layout.clone(),
            coeffs: self.coeffs.iter().map(|a| a * s).collect(),
        }
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(mut self, s: f64) -> Jet {
        self.coeffs.iter_mut().for_each(|a| *a *= s);
        self
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, s: f64) -> Jet {
        self.coeffs[0] += s;
        self
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self * -1.0
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self * -1.0
    }
}

impl AddAssign<&Jet> for Jet {
    fn add_assign(&mut self, rhs: &Jet) {
        self.axpy(1.0, rhs);
    }
}

impl SubAssign<&Jet> for Jet {
    fn sub_assign(&mut self, rhs: &Jet) {
        self.axpy(-1.0, rhs);
    }
}

type FieldFn = dyn Fn(&[Jet]) -> Result<Jet> + Send + Sync;

/// A smooth function on a chart, evaluated by composing jet operations on the
/// coordinate jets.
#[derive(Clone)]
pub struct ScalarField {
    nvars: usize,
    eval: Arc<FieldFn>,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ScalarField({} vars)", self.nvars)
    }
}

impl ScalarField {
    pub fn new<F>(nvars: usize, f: F) -> Self
    where
        F: Fn(&[Jet]) -> Result<Jet> + Send + Sync + 'static,
    {
        ScalarField {
            nvars,
            eval: Arc::new(f),
        }
    }

    pub fn constant(nvars: usize, c: f64) -> Self {
        ScalarField::new(nvars, move |x| Ok(x[0].constant_like(c)))
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn eval_vars(&self, vars: &[Jet]) -> Result<Jet> {
        if vars.len() != self.nvars {
            return Err(Error::Shape(format!(
                "field expects {} variables, got {}",
                self.nvars,
                vars.len()
            )));
        }
        (self.eval)(vars)
    }

    pub fn jet(&self, point: &[f64], order: usize) -> Result<Jet> {
        self.eval_vars(&Jet::variables(point, order)?)
    }

    pub fn value(&self, point: &[f64]) -> Result<f64> {
        Ok(self.jet(point, 0)?.value())
    }
}

/// Taylor jet in `t` of `f(t) = c1·e^{at} + c2·e^{−at}` at `t0`.
pub fn eval_f_jet(c1: f64, c2: f64, a: f64, t0: f64, order: usize) -> Result<Jet> {
    if c1 < 0.0 || c2 < 0.0 || !(a > 0.0) {
        return Err(Error::Domain(format!(
            "f needs c1, c2 >= 0 and a > 0 (got c1={c1}, c2={c2}, a={a})"
        )));
    }
    if c1 + c2 == 0.0 {
        return Err(Error::DegenerateField(
            "c1 = c2 = 0 makes f vanish identically, log f undefined".into(),
        ));
    }
    Jet::from_coeffs(1, order, f_series(c1, c2, a, t0, order))
}

/// `f^(k)(t0)/k!` for `k = 0..=order`.
pub fn f_series(c1: f64, c2: f64, a: f64, t0: f64, order: usize) -> Vec<f64> {
    let ep = c1 * (a * t0).exp();
    let em = c2 * (-a * t0).exp();
    (0..=order)
        .map(|k| {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            a.powi(k as i32) * (ep + sign * em) / factorial(k)
        })
        .collect()
}

/// Gauss–Jordan inverse of a square matrix of jets, pivoting on the constant
/// terms. `m[r][c]`.
pub fn invert_jet_matrix(m: &[Vec<Jet>]) -> Result<Vec<Vec<Jet>>> {
    let n = m.len();
    let mut a: Vec<Vec<Jet>> = m.to_vec();
    let proto = &m[0][0];
    let mut inv: Vec<Vec<Jet>> = (0..n)
        .map(|r| (0..n).map(|c| proto.constant_like(if r == c { 1.0 } else { 0.0 })).collect())
        .collect();
    let scale = m
        .iter()
        .flat_map(|row| row.iter().map(|j| j.value().abs()))
        .fold(0.0, f64::max);
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| a[x][col].value().abs().total_cmp(&a[y][col].value().abs()))
            .unwrap();
        if a[pivot][col].value().abs() <= 1e-14 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::Geometry("singular frame matrix".into()));
        }
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let p_inv = a[col][col].recip()?;
        for c in 0..n {
            a[col][c] = &a[col][c] * &p_inv;
            inv[col][c] = &inv[col][c] * &p_inv;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let factor = a[r][col].clone();
            if factor.max_abs() == 0.0 {
                continue;
            }
            for c in 0..n {
                let t = &factor * &a[col][c];
                a[r][c] -= &t;
                let t = &factor * &inv[col][c];
                inv[r][c] -= &t;
            }
        }
    }
    Ok(inv)
}

/// Solve the (consistent, possibly overdetermined) system `A x = b` for jets
/// through the normal equations `AᵀA x = Aᵀb`.
pub fn solve_jet_least_squares(a: &[Vec<Jet>], b: &[Jet]) -> Result<Vec<Jet>> {
    let rows = a.len();
    let cols = a[0].len();
    let zero = b[0].constant_like(0.0);
    let mut ata = vec![vec![zero.clone(); cols]; cols];
    let mut atb = vec![zero.clone(); cols];
    for i in 0..cols {
        for j in 0..cols {
            for r in 0..rows {
                ata[i][j].add_product(&a[r][i], &a[r][j]);
            }
        }
        for r in 0..rows {
            atb[i].add_product(&a[r][i], &b[r]);
        }
    }
    let inv = invert_jet_matrix(&ata)?;
    Ok((0..cols)
        .map(|i| {
            let mut x = zero.clone();
            for j in 0..cols {
                x.add_product(&inv[i][j], &atb[j]);
            }
            x
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(1e-300)
    }

    #[test]
    fn layout_sizes_match_binomials() {
        for nvars in 1..=5 {
            for order in 0..=6 {
                assert_eq!(layout(nvars, order).unwrap().len(), num_coeffs(nvars, order));
            }
        }
        assert_eq!(num_coeffs(5, 5), 252);
    }

    #[test]
    fn truncation_is_a_prefix() {
        let big = layout(3, 5).unwrap();
        let small = layout(3, 3).unwrap();
        assert_eq!(&big.exponents()[..small.len()], small.exponents());
    }

    #[test]
    fn exp_log_roundtrip() {
        // constant term 2.0, order 3
        let x = Jet::variables(&[0.0, 0.0], 3).unwrap();
        let j = (&x[0] * &x[1]) + (&x[0] * 0.5) + x[1].clone() + 2.0;
        assert_eq!(j.value(), 2.0);
        let back = j.ln().unwrap().exp();
        assert!(back.max_abs_diff(&j) < 1e-14);
    }

    #[test]
    fn f_times_its_mirror_is_constant() {
        // e^{t} · e^{−t} = 1
        let t = Jet::variable(1, 2, 0, 0.0).unwrap();
        let f = t.compose(&f_series(1.0, 0.0, 1.0, 0.0, 2));
        let g = t.compose(&f_series(0.0, 1.0, 1.0, 0.0, 2));
        let fg = &f * &g;
        assert!((fg.value() - 1.0).abs() < 1e-15);
        assert!(fg.coeffs()[1].abs() < 1e-15);
        assert!(fg.coeffs()[2].abs() < 1e-15);
    }

    #[test]
    fn eval_f_examples() {
        let j = eval_f_jet(1.0, 1.0, 1.0, 0.0, 2).unwrap();
        assert_eq!(j.partial(&[0]), 2.0);
        assert_eq!(j.partial(&[1]), 0.0);
        assert_eq!(j.partial(&[2]), 2.0);
        let j = eval_f_jet(1.0, 0.0, 2.0, 0.0, 1).unwrap();
        assert_eq!(j.partial(&[0]), 1.0);
        assert_eq!(j.partial(&[1]), 2.0);
    }

    #[test]
    fn f_solves_its_ode() {
        for &(c1, c2, a, t0) in &[(1.0, 1.0, 1.0, 0.3), (0.5, 2.0, 1.7, -1.1), (0.0, 3.0, 0.4, 2.0)] {
            let j = eval_f_jet(c1, c2, a, t0, 2).unwrap();
            let r = j.partial(&[2]) - a * a * j.partial(&[0]);
            assert!(r.abs() <= 1e-12 * j.partial(&[0]).abs());
        }
    }

    #[test]
    fn f_degenerate_and_domain_errors() {
        assert!(matches!(
            eval_f_jet(0.0, 0.0, 1.0, 0.0, 2),
            Err(Error::DegenerateField(_))
        ));
        assert!(matches!(eval_f_jet(1.0, 1.0, 0.0, 0.0, 2), Err(Error::Domain(_))));
    }

    #[test]
    fn log_phi_identity() {
        // (log f)'' + ((log f)')² = a²
        for &(c1, c2, a) in &[(1.0, 1.0, 1.0), (2.0, 0.3, 1.5), (0.0, 1.0, 2.0)] {
            for k in 0..7 {
                let t0 = -1.5 + 0.5 * k as f64;
                let t = Jet::variable(1, 2, 0, t0).unwrap();
                let f = t.compose(&f_series(c1, c2, a, t0, 2));
                let phi = f.ln().unwrap();
                let lhs = phi.partial(&[2]) + phi.partial(&[1]).powi(2);
                assert!(close(lhs, a * a, 1e-12), "{lhs} vs {}", a * a);
            }
        }
    }

    #[test]
    fn arith_errors() {
        let x = Jet::variable(2, 2, 0, 0.0).unwrap();
        assert!(matches!(x.recip(), Err(Error::Domain(_))));
        assert!(matches!(x.ln(), Err(Error::Domain(_))));
        let y = Jet::variable(2, 3, 0, 1.0).unwrap();
        assert!(matches!(jet_arith(&x, Some(&y), JetOp::Add), Err(Error::Shape(_))));
        assert!(matches!(jet_arith(&y, None, JetOp::Reciprocal), Ok(_)));
        let z = jet_arith(&y, Some(&y), JetOp::Mul).unwrap();
        assert_eq!(z.partial(&[2, 0]), 2.0);
        let s = jet_arith(&y, None, JetOp::Scale(3.0)).unwrap();
        assert_eq!(s.value(), 3.0);
    }

    #[test]
    fn polynomials_are_exact() {
        // (1 + x + 2y)^3 at order 3 is carried without truncation
        let v = Jet::variables(&[0.0, 0.0], 3).unwrap();
        let p = (v[0].clone() + &(&v[1] * 2.0)) + 1.0;
        let p3 = &(&p * &p) * &p;
        assert_eq!(p3.coeff(&[0, 0]), 1.0);
        assert_eq!(p3.coeff(&[1, 0]), 3.0);
        assert_eq!(p3.coeff(&[0, 1]), 6.0);
        assert_eq!(p3.coeff(&[1, 1]), 12.0);
        assert_eq!(p3.coeff(&[0, 3]), 8.0);
        assert_eq!(p3.coeff(&[2, 1]), 6.0);
    }

    #[test]
    fn derivative_lowers_order() {
        let v = Jet::variables(&[0.5, 1.0], 4).unwrap();
        let f = (&v[0] * &v[1]).sin();
        let d = f.derivative(0).unwrap();
        assert_eq!(d.order(), 3);
        // ∂x sin(xy) = y cos(xy)
        assert!((d.value() - 1.0 * (0.5f64).cos()).abs() < 1e-15);
        let c = Jet::constant(2, 0, 1.0).unwrap();
        assert!(matches!(c.derivative(0), Err(Error::OrderExhausted { .. })));
    }

    #[test]
    fn matrix_inverse_of_jets() {
        let v = Jet::variables(&[0.2, -0.4], 3).unwrap();
        let m = vec![
            vec![v[0].exp(), v[1].clone()],
            vec![v[0].sin(), v[1].cos() + 1.0],
        ];
        let inv = invert_jet_matrix(&m).unwrap();
        for r in 0..2 {
            for c in 0..2 {
                let mut s = v[0].constant_like(0.0);
                for k in 0..2 {
                    s.add_product(&m[r][k], &inv[k][c]);
                }
                let target = v[0].constant_like(if r == c { 1.0 } else { 0.0 });
                assert!(s.max_abs_diff(&target) < 1e-13);
            }
        }
    }

    #[test]
    fn scalar_field_order_restriction() {
        let f = ScalarField::new(2, |x| Ok((&x[0] * &x[1]).exp() * x[1].cos()));
        let p = [0.3, 0.7];
        let hi = f.jet(&p, 4).unwrap();
        let lo = f.jet(&p, 3).unwrap();
        assert!(hi.truncate(3).max_abs_diff(&lo) < 1e-15);
        assert_eq!(f.jet(&p, 0).unwrap().value(), f.value(&p).unwrap());
    }
}
