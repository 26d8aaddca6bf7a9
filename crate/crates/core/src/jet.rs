//! Truncated multivariate Taylor arithmetic in the four chart coordinates.
//!
//! A [`Jet`] stores the Taylor coefficients (derivative / mu!) of a smooth
//! function at a point, truncated at a total degree `order <= MAX_ORDER`.
//! All differentiation in the crate happens through this type: tensor
//! components are jets, and taking a partial derivative is a coefficient
//! shift rather than a symbolic operation.

use std::sync::OnceLock;
use thiserror::Error;

/// Number of chart coordinates (x1, x2, y1, y2).
pub const NVARS: usize = 4;
/// Largest supported truncation order.
pub const MAX_ORDER: usize = 6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum JetError {
    #[error("domain error in {func}: argument value {value}")]
    Domain { func: &'static str, value: f64 },
    #[error("jet order exhausted (needed a derivative of an order-0 jet)")]
    OrderExhausted,
    #[error("requested order {0} exceeds maximum {MAX_ORDER}")]
    OrderTooLarge(usize),
    #[error("singular matrix value part")]
    Singular,
}

struct Tables {
    /// Multi-indices sorted by total degree, then lexicographically.
    /// Jets of order `k` use the prefix of length `count[k]`.
    idx: Vec<[u8; NVARS]>,
    /// Number of multi-indices of total degree `<= k`.
    count: [usize; MAX_ORDER + 1],
    /// Dense position lookup, `u16::MAX` marks degree overflow.
    pos: Vec<u16>,
}

const POS_DIM: usize = MAX_ORDER + 1;

fn pos_key(m: &[u8; NVARS]) -> Option<usize> {
    let (a, b, c, d) = (m[0] as usize, m[1] as usize, m[2] as usize, m[3] as usize);
    if a + b + c + d > MAX_ORDER {
        return None;
    }
    Some(((a * POS_DIM + b) * POS_DIM + c) * POS_DIM + d)
}

fn tables() -> &'static Tables {
    static TABLES: OnceLock<Tables> = OnceLock::new();
    TABLES.get_or_init(|| {
        let mut idx = Vec::new();
        let mut count = [0usize; MAX_ORDER + 1];
        for deg in 0..=MAX_ORDER {
            for a in (0..=deg).rev() {
                for b in (0..=deg - a).rev() {
                    for c in (0..=deg - a - b).rev() {
                        let d = deg - a - b - c;
                        idx.push([a as u8, b as u8, c as u8, d as u8]);
                    }
                }
            }
            count[deg] = idx.len();
        }
        let mut pos = vec![u16::MAX; POS_DIM * POS_DIM * POS_DIM * POS_DIM];
        for (i, m) in idx.iter().enumerate() {
            pos[pos_key(m).unwrap()] = i as u16;
        }
        Tables { idx, count, pos }
    })
}

fn ncoeffs(order: usize) -> usize {
    tables().count[order]
}

/// Truncated Taylor expansion at a point: `f(p + h) = sum c_mu h^mu`.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    order: usize,
    c: Vec<f64>,
}

impl Jet {
    pub fn constant(order: usize, v: f64) -> Jet {
        assert!(order <= MAX_ORDER);
        let mut c = vec![0.0; ncoeffs(order)];
        c[0] = v;
        Jet { order, c }
    }

    pub fn zero(order: usize) -> Jet {
        Jet::constant(order, 0.0)
    }

    /// Jet of the coordinate function `var` (0-based) with value `v`.
    pub fn variable(order: usize, var: usize, v: f64) -> Jet {
        assert!(var < NVARS);
        let mut j = Jet::constant(order, v);
        if order >= 1 {
            let mut m = [0u8; NVARS];
            m[var] = 1;
            let p = tables().pos[pos_key(&m).unwrap()] as usize;
            j.c[p] = 1.0;
        }
        j
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    /// Taylor coefficient for the multi-index `m` (zero beyond truncation).
    pub fn coeff(&self, m: [u8; NVARS]) -> f64 {
        match pos_key(&m) {
            Some(k) => {
                let p = tables().pos[k];
                if p == u16::MAX {
                    return 0.0;
                }
                let p = p as usize;
                if p < self.c.len() {
                    self.c[p]
                } else {
                    0.0
                }
            }
            None => 0.0,
        }
    }

    pub fn truncate(&self, order: usize) -> Jet {
        assert!(order <= self.order);
        Jet {
            order,
            c: self.c[..ncoeffs(order)].to_vec(),
        }
    }

    fn harmonized(&self, other: &Jet) -> usize {
        self.order.min(other.order)
    }

    pub fn add(&self, other: &Jet) -> Jet {
        let order = self.harmonized(other);
        let n = ncoeffs(order);
        let mut c = vec![0.0; n];
        for i in 0..n {
            c[i] = self.c[i] + other.c[i];
        }
        Jet { order, c }
    }

    pub fn sub(&self, other: &Jet) -> Jet {
        let order = self.harmonized(other);
        let n = ncoeffs(order);
        let mut c = vec![0.0; n];
        for i in 0..n {
            c[i] = self.c[i] - other.c[i];
        }
        Jet { order, c }
    }

    pub fn neg(&self) -> Jet {
        Jet {
            order: self.order,
            c: self.c.iter().map(|v| -v).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Jet {
        Jet {
            order: self.order,
            c: self.c.iter().map(|v| s * v).collect(),
        }
    }

    pub fn add_scalar(&self, s: f64) -> Jet {
        let mut r = self.clone();
        r.c[0] += s;
        r
    }

    /// Product truncated at the common order (exact truncation of the
    /// full product).
    pub fn mul(&self, other: &Jet) -> Jet {
        let order = self.harmonized(other);
        let t = tables();
        let n = ncoeffs(order);
        let mut c = vec![0.0; n];
        for i in 0..n.min(self.c.len()) {
            let ai = self.c[i];
            if ai == 0.0 {
                continue;
            }
            let mi = t.idx[i];
            let di = (mi[0] + mi[1] + mi[2] + mi[3]) as usize;
            let jmax = t.count[order - di].min(other.c.len());
            for j in 0..jmax {
                let bj = other.c[j];
                if bj == 0.0 {
                    continue;
                }
                let mj = t.idx[j];
                let m = [mi[0] + mj[0], mi[1] + mj[1], mi[2] + mj[2], mi[3] + mj[3]];
                let p = t.pos[pos_key(&m).unwrap()] as usize;
                c[p] += ai * bj;
            }
        }
        Jet { order, c }
    }

    /// Partial derivative with respect to coordinate `var`; drops one order.
    pub fn deriv(&self, var: usize) -> Result<Jet, JetError> {
        if self.order == 0 {
            return Err(JetError::OrderExhausted);
        }
        let order = self.order - 1;
        let t = tables();
        let n = ncoeffs(order);
        let mut c = vec![0.0; n];
        for (p, cp) in c.iter_mut().enumerate() {
            let mut m = t.idx[p];
            m[var] += 1;
            let src = t.pos[pos_key(&m).unwrap()] as usize;
            *cp = self.c[src] * m[var] as f64;
        }
        Ok(Jet { order, c })
    }

    /// Composition with a univariate function given by its Taylor
    /// coefficients `outer[k] = f^(k)(u0)/k!` at `u0 = self.value()`.
    fn compose(&self, outer: &[f64]) -> Jet {
        let order = self.order;
        let mut w = self.clone();
        w.c[0] = 0.0;
        let mut r = Jet::constant(order, outer[order.min(outer.len() - 1)]);
        for k in (0..order.min(outer.len() - 1)).rev() {
            r = r.mul(&w).add_scalar(outer[k]);
        }
        if order == 0 {
            r = Jet::constant(0, outer[0]);
        }
        r
    }

    pub fn recip(&self) -> Result<Jet, JetError> {
        let u0 = self.value();
        if u0 == 0.0 {
            return Err(JetError::Domain {
                func: "recip",
                value: u0,
            });
        }
        let mut outer = vec![0.0; self.order + 1];
        let mut t = 1.0 / u0;
        for o in outer.iter_mut() {
            *o = t;
            t *= -1.0 / u0;
        }
        Ok(self.compose(&outer))
    }

    pub fn div(&self, other: &Jet) -> Result<Jet, JetError> {
        Ok(self.mul(&other.recip()?))
    }

    pub fn exp(&self) -> Jet {
        let u0 = self.value();
        let e = u0.exp();
        let mut outer = vec![0.0; self.order + 1];
        let mut fact = 1.0;
        for (k, o) in outer.iter_mut().enumerate() {
            if k > 0 {
                fact *= k as f64;
            }
            *o = e / fact;
        }
        self.compose(&outer)
    }

    pub fn ln(&self) -> Result<Jet, JetError> {
        let u0 = self.value();
        if u0 <= 0.0 {
            return Err(JetError::Domain {
                func: "log",
                value: u0,
            });
        }
        let mut outer = vec![0.0; self.order + 1];
        outer[0] = u0.ln();
        for (k, o) in outer.iter_mut().enumerate().skip(1) {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            *o = sign / (k as f64 * u0.powi(k as i32));
        }
        Ok(self.compose(&outer))
    }

    pub fn sqrt(&self) -> Result<Jet, JetError> {
        let u0 = self.value();
        if u0 <= 0.0 {
            return Err(JetError::Domain {
                func: "sqrt",
                value: u0,
            });
        }
        Ok(self.powf_unchecked(0.5))
    }

    pub fn sin(&self) -> Jet {
        let u0 = self.value();
        let (s, c) = u0.sin_cos();
        let cycle = [s, c, -s, -c];
        let mut outer = vec![0.0; self.order + 1];
        let mut fact = 1.0;
        for (k, o) in outer.iter_mut().enumerate() {
            if k > 0 {
                fact *= k as f64;
            }
            *o = cycle[k % 4] / fact;
        }
        self.compose(&outer)
    }

    pub fn cos(&self) -> Jet {
        let u0 = self.value();
        let (s, c) = u0.sin_cos();
        let cycle = [c, -s, -c, s];
        let mut outer = vec![0.0; self.order + 1];
        let mut fact = 1.0;
        for (k, o) in outer.iter_mut().enumerate() {
            if k > 0 {
                fact *= k as f64;
            }
            *o = cycle[k % 4] / fact;
        }
        self.compose(&outer)
    }

    pub fn powi(&self, n: i64) -> Result<Jet, JetError> {
        if n < 0 {
            return self.recip()?.powi(-n);
        }
        let mut r = Jet::constant(self.order, 1.0);
        let mut base = self.clone();
        let mut n = n as u64;
        while n > 0 {
            if n & 1 == 1 {
                r = r.mul(&base);
            }
            base = base.mul(&base);
            n >>= 1;
        }
        Ok(r)
    }

    /// General real power; requires a positive value part.
    pub fn powf(&self, e: f64) -> Result<Jet, JetError> {
        let u0 = self.value();
        if u0 <= 0.0 {
            return Err(JetError::Domain {
                func: "pow",
                value: u0,
            });
        }
        Ok(self.powf_unchecked(e))
    }

    fn powf_unchecked(&self, e: f64) -> Jet {
        let u0 = self.value();
        let v = u0.powf(e);
        let mut outer = vec![0.0; self.order + 1];
        let mut binom = 1.0;
        for (k, o) in outer.iter_mut().enumerate() {
            if k > 0 {
                binom *= (e - (k as f64 - 1.0)) / k as f64;
            }
            *o = v * binom / u0.powi(k as i32);
        }
        self.compose(&outer)
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.c.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// All multi-indices of this jet paired with coefficients.
    pub fn coeffs(&self) -> impl Iterator<Item = ([u8; NVARS], f64)> + '_ {
        let t = tables();
        self.c.iter().enumerate().map(move |(i, &v)| (t.idx[i], v))
    }
}

/// Inverse of a 4x4 matrix of jets by Gaussian elimination with partial
/// pivoting on the value parts. `m * m^{-1} = I` holds exactly to the
/// truncation order (up to floating round-off).
pub fn invert4(m: &[[Jet; 4]; 4]) -> Result<[[Jet; 4]; 4], JetError> {
    let order = m.iter().flatten().map(Jet::order).min().unwrap();
    let mut a: Vec<Vec<Jet>> = (0..4)
        .map(|i| (0..4).map(|j| m[i][j].truncate(order)).collect())
        .collect();
    let mut inv: Vec<Vec<Jet>> = (0..4)
        .map(|i| {
            (0..4)
                .map(|j| Jet::constant(order, if i == j { 1.0 } else { 0.0 }))
                .collect()
        })
        .collect();
    for col in 0..4 {
        let piv = (col..4)
            .max_by(|&r, &s| {
                a[r][col]
                    .value()
                    .abs()
                    .partial_cmp(&a[s][col].value().abs())
                    .unwrap()
            })
            .unwrap();
        if a[piv][col].value().abs() < 1e-300 {
            return Err(JetError::Singular);
        }
        a.swap(col, piv);
        inv.swap(col, piv);
        let pinv = a[col][col].recip().map_err(|_| JetError::Singular)?;
        for j in 0..4 {
            a[col][j] = a[col][j].mul(&pinv);
            inv[col][j] = inv[col][j].mul(&pinv);
        }
        for r in 0..4 {
            if r == col {
                continue;
            }
            let f = a[r][col].clone();
            if f.max_abs_coeff() == 0.0 {
                continue;
            }
            for j in 0..4 {
                a[r][j] = a[r][j].sub(&f.mul(&a[col][j]));
                inv[r][j] = inv[r][j].sub(&f.mul(&inv[col][j]));
            }
        }
    }
    let mut out: [[Jet; 4]; 4] = std::array::from_fn(|_| std::array::from_fn(|_| Jet::zero(order)));
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = inv[i][j].clone();
        }
    }
    Ok(out)
}
