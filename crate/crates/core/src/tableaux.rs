//! Explicit Runge-Kutta pairs with embedded error estimators.
//!
//! A [`ButcherTableau`] stores the stage matrix `a`, the main weights `b`, the
//! embedded weights `b_hat` and the abscissae `c`. The embedded weights carry
//! one extra entry for the first-same-as-last (FSAL) stage
//! `f(t + dt, u_next)`; that entry is nonzero exactly for FSAL pairs.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_complex::Complex64;
use thiserror::Error;

/// Tolerance used for the structural invariants (row sums, weight sums).
pub const STRUCTURE_TOL: f64 = 1e-13;
/// Tolerance below which an order-condition residual counts as satisfied.
pub const ORDER_TOL: f64 = 1e-12;

/// Environment variable pointing to a directory with coefficient files.
pub const COEFF_DIR_ENV: &str = "RKCTL_COEFFICIENTS";

#[derive(Debug, Error)]
pub enum TableauError {
    #[error("unknown method `{0}`")]
    UnknownMethod(String),
    #[error("coefficients for {method} not found (looked for {path})")]
    CoefficientsUnavailable { method: Method, path: PathBuf },
    #[error("tableau `{name}` failed validation: {reason}")]
    Integrity { name: String, reason: String },
    #[error("coefficient file {path}: {reason}")]
    Parse { path: String, reason: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// The named methods shipped with the library.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// Bogacki-Shampine 3(2) pair, three stages, FSAL.
    Bs3_3F,
    /// Third-order five-stage pair optimized for spectral element CFD, FSAL.
    Rdpk3_5F,
    /// Fourth-order nine-stage pair optimized for spectral element CFD, FSAL.
    Rdpk4_9F,
    /// Third-order four-stage SSP method with a second-order embedded pair.
    Ssp3_4,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::Bs3_3F,
        Method::Rdpk3_5F,
        Method::Rdpk4_9F,
        Method::Ssp3_4,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Bs3_3F => "BS3_3F",
            Method::Rdpk3_5F => "RDPK3_5F",
            Method::Rdpk4_9F => "RDPK4_9F",
            Method::Ssp3_4 => "SSP3_4",
        }
    }

    /// Number of stages `s`.
    pub fn stages(self) -> usize {
        match self {
            Method::Bs3_3F => 3,
            Method::Rdpk3_5F => 5,
            Method::Rdpk4_9F => 9,
            Method::Ssp3_4 => 4,
        }
    }

    pub fn fsal(self) -> bool {
        !matches!(self, Method::Ssp3_4)
    }

    pub fn order(self) -> usize {
        match self {
            Method::Rdpk4_9F => 4,
            _ => 3,
        }
    }

    /// PID parameters (β₁, β₂, β₃) tuned for the method.
    pub fn default_beta(self) -> [f64; 3] {
        match self {
            Method::Bs3_3F => [0.60, -0.20, 0.00],
            Method::Rdpk3_5F => [0.70, -0.23, 0.00],
            Method::Rdpk4_9F => [0.38, -0.18, 0.01],
            Method::Ssp3_4 => [0.55, -0.27, 0.05],
        }
    }

    fn file_stem(self) -> &'static str {
        match self {
            Method::Bs3_3F => "bs3_3f",
            Method::Rdpk3_5F => "rdpk3_5f",
            Method::Rdpk4_9F => "rdpk4_9f",
            Method::Ssp3_4 => "ssp3_4",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = TableauError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_uppercase().replace('-', "_");
        Method::ALL
            .into_iter()
            .find(|m| m.name() == key)
            .ok_or_else(|| TableauError::UnknownMethod(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ButcherTableau {
    pub name: String,
    /// Strictly lower-triangular `s × s` stage matrix, row-major.
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    /// Embedded weights, length `s + 1`; the last entry multiplies the FSAL stage.
    pub b_hat: Vec<f64>,
    pub c: Vec<f64>,
    pub order_q: usize,
    pub order_q_hat: usize,
    pub fsal: bool,
}

/// Highest order whose rooted-tree conditions hold, for the main and the
/// embedded weights, together with the raw residuals.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderReport {
    pub main_order: usize,
    pub embedded_order: usize,
    /// Residuals of the eight conditions (orders 1, 2, 3, 3, 4, 4, 4, 4).
    pub main_residuals: [f64; 8],
    pub embedded_residuals: [f64; 8],
}

impl ButcherTableau {
    pub fn stages(&self) -> usize {
        self.b.len()
    }

    /// Checks structure, weight sums and that the declared orders are attained.
    pub fn validate(&self) -> Result<OrderReport, TableauError> {
        let fail = |reason: String| TableauError::Integrity {
            name: self.name.clone(),
            reason,
        };
        let s = self.stages();
        if s == 0 || s > 16 {
            return Err(fail(format!("stage count {s} outside 1..=16")));
        }
        if self.a.len() != s || self.a.iter().any(|row| row.len() != s) {
            return Err(fail("stage matrix is not s × s".into()));
        }
        if self.c.len() != s || self.b_hat.len() != s + 1 {
            return Err(fail("c must have s entries and bhat s + 1".into()));
        }
        for (i, row) in self.a.iter().enumerate() {
            if row[i..].iter().any(|&x| x != 0.0) {
                return Err(fail(format!("row {i} of A is not strictly lower triangular")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - self.c[i]).abs() > STRUCTURE_TOL {
                return Err(fail(format!("c[{i}] = {} differs from row sum {sum}", self.c[i])));
            }
        }
        let sum_b: f64 = self.b.iter().sum();
        let sum_bh: f64 = self.b_hat.iter().sum();
        if (sum_b - 1.0).abs() > STRUCTURE_TOL || (sum_bh - 1.0).abs() > STRUCTURE_TOL {
            return Err(fail(format!("weights sum to {sum_b} and {sum_bh}")));
        }
        if self.fsal != (self.b_hat[s] != 0.0) {
            return Err(fail("fsal flag disagrees with the last embedded weight".into()));
        }
        if self.order_q == 0 || self.order_q > 4 || self.order_q_hat + 1 != self.order_q {
            return Err(fail(format!(
                "orders ({}, {}) not supported",
                self.order_q, self.order_q_hat
            )));
        }
        let report = validate_order(self);
        if report.main_order < self.order_q || report.embedded_order < self.order_q_hat {
            return Err(fail(format!(
                "declared orders ({}, {}) but conditions give ({}, {})",
                self.order_q, self.order_q_hat, report.main_order, report.embedded_order
            )));
        }
        Ok(report)
    }

    /// Coefficients `bᵀ A^{k-1} 𝟙` for `k = 1..=s` of the stability polynomial.
    pub fn stability_coefficients(&self) -> Vec<f64> {
        let s = self.stages();
        let mut v = vec![1.0; s];
        let mut out = Vec::with_capacity(s);
        for _ in 0..s {
            out.push(dot(&self.b, &v));
            v = mat_vec(&self.a, &v);
        }
        out
    }

    /// The stability function `R(z)` of the main method.
    pub fn stability_function(&self, z: Complex64) -> Complex64 {
        eval_stability_polynomial(&self.stability_coefficients(), z)
    }

    /// New right-hand side evaluations per accepted step.
    ///
    /// FSAL pairs pay for `f(t + dt, u_next)` but reuse it as the next first
    /// stage, so both kinds of pair cost `s` evaluations per step.
    pub fn effective_stage_count(&self) -> f64 {
        self.stages() as f64
    }

    /// The embedded pair as a standalone method (with the FSAL stage appended).
    pub fn embedded_method(&self) -> ButcherTableau {
        let (a, c) = self.extended_stages();
        let s1 = a.len();
        ButcherTableau {
            name: format!("{}-embedded", self.name),
            a,
            b: self.b_hat.clone(),
            b_hat: {
                let mut v = self.b_hat.clone();
                v.push(0.0);
                v
            },
            c,
            order_q: self.order_q_hat,
            order_q_hat: self.order_q_hat.saturating_sub(1),
            fsal: false,
        }
        .trim_trailing_stage(s1)
    }

    fn trim_trailing_stage(mut self, s1: usize) -> Self {
        // A non-FSAL pair has a zero last embedded weight, so the appended
        // stage is dead weight.
        if s1 > 1 && self.b[s1 - 1] == 0.0 {
            self.a.pop();
            for row in &mut self.a {
                row.pop();
            }
            self.b.pop();
            self.c.pop();
            self.b_hat.pop();
            self.b_hat.pop();
            self.b_hat.push(0.0);
        }
        self
    }

    /// Stage matrix and abscissae with the FSAL stage appended as row `s + 1`.
    fn extended_stages(&self) -> (Vec<Vec<f64>>, Vec<f64>) {
        let s = self.stages();
        let mut a: Vec<Vec<f64>> = self
            .a
            .iter()
            .map(|row| {
                let mut r = row.clone();
                r.push(0.0);
                r
            })
            .collect();
        let mut last = self.b.clone();
        last.push(0.0);
        a.push(last);
        let mut c = self.c.clone();
        c.push(1.0);
        debug_assert_eq!(a.len(), s + 1);
        (a, c)
    }

    /// Parses the labeled-block coefficient format.
    pub fn parse(name: &str, text: &str) -> Result<ButcherTableau, TableauError> {
        parse_coefficients(name, text)
    }

    /// Loads and validates a coefficient file.
    pub fn from_file(path: &Path) -> Result<ButcherTableau, TableauError> {
        let text = fs::read_to_string(path).map_err(|source| TableauError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let name = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("tableau")
            .to_string();
        let tab = parse_coefficients(&name, &text).map_err(|e| match e {
            TableauError::Parse { reason, .. } => TableauError::Parse {
                path: path.display().to_string(),
                reason,
            },
            other => other,
        })?;
        tab.validate()?;
        Ok(tab)
    }

    /// Serializes to the labeled-block format with 17 significant digits.
    pub fn to_coefficient_text(&self) -> String {
        let num = |x: f64| format!("{x:.16e}");
        let row = |v: &[f64]| v.iter().map(|&x| num(x)).collect::<Vec<_>>().join(" ");
        let mut out = format!("# {}\nA\n", self.name);
        for r in &self.a {
            out.push_str(&row(r));
            out.push('\n');
        }
        out.push_str(&format!("b\n{}\n", row(&self.b)));
        out.push_str(&format!("bhat\n{}\n", row(&self.b_hat)));
        out.push_str(&format!("c\n{}\n", row(&self.c)));
        out.push_str(&format!(
            "order\n{}\norder_hat\n{}\nfsal\n{}\n",
            self.order_q, self.order_q_hat, self.fsal
        ));
        out
    }
}

/// Evaluates `1 + Σ coeffs[k-1] z^k` by Horner's rule.
pub fn eval_stability_polynomial(coeffs: &[f64], z: Complex64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for &ck in coeffs.iter().rev() {
        acc = (acc + ck) * z;
    }
    acc + 1.0
}

/// Evaluates the rooted-tree order conditions up to order four.
pub fn validate_order(t: &ButcherTableau) -> OrderReport {
    let main_residuals = order_residuals(&t.a, &t.b);
    let (a_ext, _) = t.extended_stages();
    let embedded_residuals = order_residuals(&a_ext, &t.b_hat);
    OrderReport {
        main_order: attained_order(&main_residuals),
        embedded_order: attained_order(&embedded_residuals),
        main_residuals,
        embedded_residuals,
    }
}

pub fn stability_function(t: &ButcherTableau, z: Complex64) -> Complex64 {
    t.stability_function(z)
}

pub fn effective_stage_count(t: &ButcherTableau) -> f64 {
    t.effective_stage_count()
}

fn order_residuals(a: &[Vec<f64>], b: &[f64]) -> [f64; 8] {
    let c: Vec<f64> = a.iter().map(|row| row.iter().sum()).collect();
    let c2: Vec<f64> = c.iter().map(|x| x * x).collect();
    let c3: Vec<f64> = c.iter().map(|x| x * x * x).collect();
    let ac = mat_vec(a, &c);
    let ac2 = mat_vec(a, &c2);
    let aac = mat_vec(a, &ac);
    let cac: Vec<f64> = c.iter().zip(&ac).map(|(x, y)| x * y).collect();
    let ones = vec![1.0; b.len()];
    [
        dot(b, &ones) - 1.0,
        dot(b, &c) - 0.5,
        dot(b, &c2) - 1.0 / 3.0,
        dot(b, &ac) - 1.0 / 6.0,
        dot(b, &c3) - 0.25,
        dot(b, &cac) - 0.125,
        dot(b, &ac2) - 1.0 / 12.0,
        dot(b, &aac) - 1.0 / 24.0,
    ]
}

fn attained_order(res: &[f64; 8]) -> usize {
    const LAST_INDEX_OF_ORDER: [usize; 4] = [0, 1, 3, 7];
    let mut order = 0;
    let mut start = 0;
    for (k, &end) in LAST_INDEX_OF_ORDER.iter().enumerate() {
        if res[start..=end].iter().all(|r| r.abs() < ORDER_TOL) {
            order = k + 1;
            start = end + 1;
        } else {
            break;
        }
    }
    order
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

fn mat_vec(a: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    a.iter().map(|row| dot(row, v)).collect()
}

/// Returns the named method.
///
/// The Bogacki-Shampine and SSP pairs are compiled in. The optimized RDPK
/// pairs are read from `<dir>/rdpk3_5f.txt` and `<dir>/rdpk4_9f.txt`, where
/// `<dir>` is `$RKCTL_COEFFICIENTS` or the crate's `coefficients/` directory.
pub fn builtin(method: Method) -> Result<ButcherTableau, TableauError> {
    let tab = match method {
        Method::Bs3_3F => bs3(),
        Method::Ssp3_4 => ssp3_4(),
        Method::Rdpk3_5F | Method::Rdpk4_9F => {
            let path = coefficient_dir().join(format!("{}.txt", method.file_stem()));
            if !path.exists() {
                return Err(TableauError::CoefficientsUnavailable { method, path });
            }
            let mut tab = ButcherTableau::from_file(&path)?;
            if tab.stages() != method.stages()
                || tab.fsal != method.fsal()
                || tab.order_q != method.order()
            {
                return Err(TableauError::Integrity {
                    name: method.name().into(),
                    reason: format!("{} does not describe {method}", path.display()),
                });
            }
            tab.name = method.name().to_string();
            tab
        }
    };
    tab.validate()?;
    Ok(tab)
}

pub fn coefficient_dir() -> PathBuf {
    std::env::var_os(COEFF_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("coefficients"))
}

fn bs3() -> ButcherTableau {
    ButcherTableau {
        name: Method::Bs3_3F.name().into(),
        a: vec![
            vec![0.0, 0.0, 0.0],
            vec![0.5, 0.0, 0.0],
            vec![0.0, 0.75, 0.0],
        ],
        b: vec![2.0 / 9.0, 1.0 / 3.0, 4.0 / 9.0],
        b_hat: vec![7.0 / 24.0, 0.25, 1.0 / 3.0, 0.125],
        c: vec![0.0, 0.5, 0.75],
        order_q: 3,
        order_q_hat: 2,
        fsal: true,
    }
}

fn ssp3_4() -> ButcherTableau {
    let sixth = 1.0 / 6.0;
    let third = 1.0 / 3.0;
    ButcherTableau {
        name: Method::Ssp3_4.name().into(),
        a: vec![
            vec![0.0, 0.0, 0.0, 0.0],
            vec![0.5, 0.0, 0.0, 0.0],
            vec![0.5, 0.5, 0.0, 0.0],
            vec![sixth, sixth, sixth, 0.0],
        ],
        b: vec![sixth, sixth, sixth, 0.5],
        // Embedded solution built from the first three stages only.
        b_hat: vec![third, third, third, 0.0, 0.0],
        c: vec![0.0, 0.5, 1.0, 0.5],
        order_q: 3,
        order_q_hat: 2,
        fsal: false,
    }
}

#[derive(PartialEq)]
enum Block {
    A,
    B,
    BHat,
    C,
    Order,
    OrderHat,
    Fsal,
}

fn parse_coefficients(name: &str, text: &str) -> Result<ButcherTableau, TableauError> {
    let err = |reason: String| TableauError::Parse {
        path: name.to_string(),
        reason,
    };
    let mut a: Vec<Vec<f64>> = Vec::new();
    let mut b = Vec::new();
    let mut b_hat = Vec::new();
    let mut c = Vec::new();
    let mut order = None;
    let mut order_hat = None;
    let mut fsal = None;
    let mut block: Option<Block> = None;

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let label = match line {
            "A" => Some(Block::A),
            "b" => Some(Block::B),
            "bhat" => Some(Block::BHat),
            "c" => Some(Block::C),
            "order" => Some(Block::Order),
            "order_hat" => Some(Block::OrderHat),
            "fsal" => Some(Block::Fsal),
            _ => None,
        };
        if label.is_some() {
            block = label;
            continue;
        }
        let Some(current) = &block else {
            return Err(err(format!("line {}: data before any block label", lineno + 1)));
        };
        match current {
            Block::Fsal => {
                fsal = Some(match line {
                    "true" | "1" => true,
                    "false" | "0" => false,
                    other => return Err(err(format!("line {}: bad fsal `{other}`", lineno + 1))),
                })
            }
            Block::Order | Block::OrderHat => {
                let v: usize = line
                    .parse()
                    .map_err(|_| err(format!("line {}: bad order `{line}`", lineno + 1)))?;
                if *current == Block::Order {
                    order = Some(v);
                } else {
                    order_hat = Some(v);
                }
            }
            _ => {
                let nums = line
                    .split_whitespace()
                    .map(|tok| {
                        tok.parse::<f64>()
                            .map_err(|_| err(format!("line {}: bad number `{tok}`", lineno + 1)))
                    })
                    .collect::<Result<Vec<f64>, _>>()?;
                match current {
                    Block::A => a.push(nums),
                    Block::B => b.extend(nums),
                    Block::BHat => b_hat.extend(nums),
                    Block::C => c.extend(nums),
                    _ => unreachable!(),
                }
            }
        }
    }

    let order_q = order.ok_or_else(|| err("missing `order` block".into()))?;
    let order_q_hat = order_hat.ok_or_else(|| err("missing `order_hat` block".into()))?;
    let s = b.len();
    if b_hat.len() == s {
        b_hat.push(0.0);
    }
    let fsal = fsal.unwrap_or(b_hat.last().is_some_and(|&x| x != 0.0));
    Ok(ButcherTableau {
        name: name.to_string(),
        a,
        b,
        b_hat,
        c,
        order_q,
        order_q_hat,
        fsal,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn forward_euler() -> ButcherTableau {
        ButcherTableau {
            name: "euler".into(),
            a: vec![vec![0.0]],
            b: vec![1.0],
            b_hat: vec![1.0, 0.0],
            c: vec![0.0],
            order_q: 1,
            order_q_hat: 0,
            fsal: false,
        }
    }

    #[test]
    fn bs3_is_fsal_and_consistent() {
        let t = builtin(Method::Bs3_3F).unwrap();
        assert!(t.fsal);
        assert_abs_diff_eq!(t.b.iter().sum::<f64>(), 1.0, epsilon = 1e-15);
        let r = validate_order(&t);
        assert_eq!((r.main_order, r.embedded_order), (3, 2));
    }

    #[test]
    fn ssp3_4_shape() {
        let t = builtin(Method::Ssp3_4).unwrap();
        assert_eq!(t.order_q, 3);
        assert_eq!(t.stages(), 4);
        assert!(!t.fsal);
        let r = validate_order(&t);
        assert_eq!((r.main_order, r.embedded_order), (3, 2));
    }

    #[test]
    fn forward_euler_is_first_order() {
        assert_eq!(validate_order(&forward_euler()).main_order, 1);
    }

    #[test]
    fn perturbed_weight_drops_to_order_zero() {
        let mut t = builtin(Method::Bs3_3F).unwrap();
        t.b[0] += 1e-3;
        assert_eq!(validate_order(&t).main_order, 0);
        assert!(matches!(t.validate(), Err(TableauError::Integrity { .. })));
    }

    #[test]
    fn stability_polynomial_of_bs3() {
        let t = builtin(Method::Bs3_3F).unwrap();
        let coeffs = t.stability_coefficients();
        let expected = [1.0, 0.5, 1.0 / 6.0];
        for (c, e) in coeffs.iter().zip(expected) {
            assert_abs_diff_eq!(*c, e, epsilon = 1e-15);
        }
        assert_eq!(t.stability_function(Complex64::new(0.0, 0.0)), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn effective_stage_counts() {
        assert_eq!(builtin(Method::Bs3_3F).unwrap().effective_stage_count(), 3.0);
        assert_eq!(builtin(Method::Ssp3_4).unwrap().effective_stage_count(), 4.0);
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!(matches!(
            "RK4".parse::<Method>(),
            Err(TableauError::UnknownMethod(_))
        ));
    }

    #[test]
    fn missing_rdpk_file_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        std::env::set_var(COEFF_DIR_ENV, dir.path());
        let res = builtin(Method::Rdpk3_5F);
        std::env::remove_var(COEFF_DIR_ENV);
        assert!(matches!(
            res,
            Err(TableauError::CoefficientsUnavailable { .. })
        ));
    }

    #[test]
    fn embedded_method_has_embedded_order() {
        for m in [Method::Bs3_3F, Method::Ssp3_4] {
            let e = builtin(m).unwrap().embedded_method();
            let r = validate_order(&e);
            assert_eq!(r.main_order, 2, "{m}");
        }
        assert_eq!(builtin(Method::Bs3_3F).unwrap().embedded_method().stages(), 4);
        assert_eq!(builtin(Method::Ssp3_4).unwrap().embedded_method().stages(), 4);
    }

    #[test]
    fn coefficient_text_round_trips() {
        for m in [Method::Bs3_3F, Method::Ssp3_4] {
            let t = builtin(m).unwrap();
            let back = ButcherTableau::parse(&t.name, &t.to_coefficient_text()).unwrap();
            assert_eq!(back, t);
        }
    }

    #[test]
    fn parse_rejects_garbage() {
        assert!(ButcherTableau::parse("x", "0.5 0.5\n").is_err());
        assert!(ButcherTableau::parse("x", "b\n1 zz\n").is_err());
        assert!(ButcherTableau::parse("x", "b\n1\nbhat\n1 0\nc\n0\nA\n0\n").is_err());
    }
}
