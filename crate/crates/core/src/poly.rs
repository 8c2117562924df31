//! Dense univariate polynomials over a [`Scalar`] field, with exact real
//! root isolation for rational coefficients.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::scalar::Scalar;

/// Coefficients in increasing degree; no trailing zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly<S> {
    coeffs: Vec<S>,
}

impl<S: Scalar> Poly<S> {
    pub fn new(mut coeffs: Vec<S>) -> Self {
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        Poly { coeffs }
    }

    pub fn zero() -> Self {
        Poly { coeffs: Vec::new() }
    }

    pub fn constant(c: S) -> Self {
        Poly::new(vec![c])
    }

    /// `x - root`
    pub fn linear_root(root: S) -> Self {
        Poly::new(vec![-root, S::one()])
    }

    pub fn coeffs(&self) -> &[S] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree; the zero polynomial reports `None`.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn leading(&self) -> Option<&S> {
        self.coeffs.last()
    }

    pub fn coeff(&self, k: usize) -> S {
        self.coeffs.get(k).cloned().unwrap_or_else(S::zero)
    }

    pub fn eval(&self, x: &S) -> S {
        let mut acc = S::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc * x.clone() + c.clone();
        }
        acc
    }

    pub fn derivative(&self) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, c)| c.clone() * S::from_i64(k as i64))
            .collect();
        Poly::new(coeffs)
    }

    pub fn scale(&self, s: &S) -> Self {
        Poly::new(self.coeffs.iter().map(|c| c.clone() * s.clone()).collect())
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        Poly::new((0..n).map(|k| self.coeff(k) + other.coeff(k)).collect())
    }

    pub fn sub(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        Poly::new((0..n).map(|k| self.coeff(k) - other.coeff(k)).collect())
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Poly::zero();
        }
        let mut out = vec![S::zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] = out[i + j].clone() + a.clone() * b.clone();
            }
        }
        Poly::new(out)
    }

    /// Multiplies by `x^k`.
    pub fn shift(&self, k: usize) -> Self {
        if self.is_zero() {
            return Poly::zero();
        }
        let mut coeffs = vec![S::zero(); k];
        coeffs.extend(self.coeffs.iter().cloned());
        Poly::new(coeffs)
    }

    /// Euclidean division. Panics on a zero divisor.
    pub fn div_rem(&self, divisor: &Self) -> (Self, Self) {
        let dd = divisor.degree().expect("division by zero polynomial");
        let lead = divisor.coeffs[dd].clone();
        let mut rem = self.coeffs.clone();
        let Some(nd) = self.degree() else {
            return (Poly::zero(), Poly::zero());
        };
        if nd < dd {
            return (Poly::zero(), self.clone());
        }
        let mut quot = vec![S::zero(); nd - dd + 1];
        for k in (0..=nd - dd).rev() {
            let c = rem[k + dd].clone() / lead.clone();
            if !c.is_zero() {
                for (j, d) in divisor.coeffs.iter().enumerate() {
                    rem[k + j] = rem[k + j].clone() - c.clone() * d.clone();
                }
            }
            quot[k] = c;
        }
        rem.truncate(dd);
        (Poly::new(quot), Poly::new(rem))
    }

    pub fn monic(&self) -> Self {
        match self.leading() {
            Some(l) => {
                let inv = S::one() / l.clone();
                self.scale(&inv)
            }
            None => Poly::zero(),
        }
    }

    /// Monic greatest common divisor.
    pub fn gcd(&self, other: &Self) -> Self {
        let mut a = self.clone();
        let mut b = other.clone();
        while !b.is_zero() {
            let (_, r) = a.div_rem(&b);
            a = b;
            b = r.monic();
        }
        a.monic()
    }
}

impl Poly<f64> {
    /// Converts exactly to rational coefficients.
    pub fn to_rational(&self) -> Option<Poly<BigRational>> {
        let coeffs = self
            .coeffs
            .iter()
            .map(|c| BigRational::from_float(*c))
            .collect::<Option<Vec<_>>>()?;
        Some(Poly::new(coeffs))
    }
}

impl<S: Scalar> Poly<S> {
    pub fn to_f64(&self) -> Poly<f64> {
        Poly::new(self.coeffs.iter().map(Scalar::to_f64).collect())
    }
}

/// A real root of a rational polynomial, isolated in `(lo, hi]` and
/// refined to double precision.
#[derive(Debug, Clone)]
pub struct RealRoot {
    pub value: f64,
    pub multiplicity: usize,
    pub lo: BigRational,
    pub hi: BigRational,
    /// Set when the root was hit exactly by a probe point.
    pub exact: Option<BigRational>,
}

/// Integer polynomial with coefficients in increasing degree, used for
/// root isolation: pseudo-remainder sequences avoid rational
/// normalization, and dyadic evaluation needs only shifts and products.
#[derive(Debug, Clone, PartialEq)]
struct ZPoly(Vec<BigInt>);

impl ZPoly {
    fn from_rational(p: &Poly<BigRational>) -> ZPoly {
        let lcm = p
            .coeffs()
            .iter()
            .fold(BigInt::one(), |l, c| num_integer::Integer::lcm(&l, c.denom()));
        let ints = p.coeffs().iter().map(|c| c.numer() * (&lcm / c.denom())).collect();
        ZPoly(ints).primitive()
    }

    fn trim(mut self) -> ZPoly {
        while self.0.last().is_some_and(Zero::is_zero) {
            self.0.pop();
        }
        self
    }

    /// Divides by the positive content; signs are kept.
    fn primitive(self) -> ZPoly {
        let z = self.trim();
        let g = z.0.iter().fold(BigInt::zero(), |g, c| num_integer::Integer::gcd(&g, c));
        if g.is_zero() || g.is_one() {
            return z;
        }
        ZPoly(z.0.into_iter().map(|c| c / &g).collect())
    }

    fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    fn degree(&self) -> usize {
        self.0.len().saturating_sub(1)
    }

    fn lead(&self) -> &BigInt {
        self.0.last().expect("nonzero polynomial")
    }

    fn derivative(&self) -> ZPoly {
        ZPoly(self.0.iter().enumerate().skip(1).map(|(i, c)| c * BigInt::from(i)).collect()).primitive()
    }

    /// `lead(b)^{deg a − deg b + 1} a = q b + r`.
    fn pseudo_divrem(&self, b: &ZPoly) -> (ZPoly, ZPoly) {
        let (da, db) = (self.degree(), b.degree());
        if self.is_zero() || da < db {
            return (ZPoly(Vec::new()), self.clone());
        }
        let lb = b.lead().clone();
        let mut r = self.0.clone();
        let mut q = vec![BigInt::zero(); da - db + 1];
        for k in (0..=da - db).rev() {
            let c = r[k + db].clone();
            for x in r.iter_mut() {
                *x *= &lb;
            }
            for x in q.iter_mut() {
                *x *= &lb;
            }
            if !c.is_zero() {
                for (j, d) in b.0.iter().enumerate() {
                    r[k + j] -= &c * d;
                }
                q[k] += c;
            }
        }
        r.truncate(db);
        (ZPoly(q).trim(), ZPoly(r).trim())
    }

    /// Primitive polynomial with the same roots and sign behaviour as the
    /// Euclidean remainder `rem(self, b)` times a positive factor.
    fn signed_rem(&self, b: &ZPoly) -> ZPoly {
        let (_, r) = self.pseudo_divrem(b);
        let exponent = self.degree() - b.degree() + 1;
        let flip = b.lead().is_negative() && exponent % 2 == 1;
        let r = r.primitive();
        if flip {
            r.neg()
        } else {
            r
        }
    }

    fn neg(self) -> ZPoly {
        ZPoly(self.0.into_iter().map(|c| -c).collect())
    }

    fn gcd(&self, other: &ZPoly) -> ZPoly {
        let mut a = self.clone().primitive();
        let mut b = other.clone().primitive();
        while !b.is_zero() {
            let r = a.signed_rem(&b);
            a = b;
            b = r;
        }
        a
    }

    /// Exact quotient up to a constant factor.
    fn div_exact(&self, b: &ZPoly) -> ZPoly {
        self.pseudo_divrem(b).0.primitive()
    }

    /// Sign of `p(m / 2^k)`.
    fn sign_at(&self, x: &Dyadic) -> i8 {
        let d = self.degree();
        let mut acc = self.lead().clone();
        for i in (0..d).rev() {
            acc = acc * &x.m + (&self.0[i] << (x.k as usize * (d - i)));
        }
        sign_int(&acc)
    }
}

fn sign_int(x: &BigInt) -> i8 {
    if x.is_zero() {
        0
    } else if x.is_positive() {
        1
    } else {
        -1
    }
}

/// The number `m / 2^k`.
#[derive(Debug, Clone, PartialEq)]
struct Dyadic {
    m: BigInt,
    k: u32,
}

impl Dyadic {
    fn to_rational(&self) -> BigRational {
        BigRational::new(self.m.clone(), BigInt::one() << self.k as usize)
    }

    fn to_f64(&self) -> f64 {
        Scalar::to_f64(&self.to_rational())
    }

    fn aligned(&self, k: u32) -> BigInt {
        &self.m << (k - self.k) as usize
    }

    fn midpoint(a: &Dyadic, b: &Dyadic) -> Dyadic {
        let k = a.k.max(b.k);
        Dyadic { m: a.aligned(k) + b.aligned(k), k: k + 1 }
    }

    /// `a + (b − a)·j/2^s`.
    fn between(a: &Dyadic, b: &Dyadic, j: BigInt, s: u32) -> Dyadic {
        let k = a.k.max(b.k) + s;
        let (am, bm) = (a.aligned(k - s), b.aligned(k - s));
        Dyadic { m: (am.clone() << s as usize) + (bm - am) * j, k }
    }
}

/// Sturm chain `p, p', −rem(p, p'), …` up to positive factors.
fn sturm_chain_z(p: &ZPoly) -> Vec<ZPoly> {
    let mut chain = vec![p.clone()];
    if p.degree() == 0 {
        return chain;
    }
    chain.push(p.derivative());
    loop {
        let n = chain.len();
        let r = chain[n - 2].signed_rem(&chain[n - 1]);
        if r.is_zero() {
            break;
        }
        chain.push(r.neg());
    }
    chain
}

fn sign_changes_z(chain: &[ZPoly], x: &Dyadic) -> usize {
    let mut count = 0;
    let mut last = 0i8;
    for p in chain {
        let s = p.sign_at(x);
        if s != 0 {
            if last != 0 && s != last {
                count += 1;
            }
            last = s;
        }
    }
    count
}

fn count_roots_z(chain: &[ZPoly], lo: &Dyadic, hi: &Dyadic) -> usize {
    sign_changes_z(chain, lo).saturating_sub(sign_changes_z(chain, hi))
}

/// Sturm chain of a rational polynomial, each member scaled by a positive
/// constant.
pub fn sturm_chain(p: &Poly<BigRational>) -> Vec<Poly<BigRational>> {
    sturm_chain_z(&ZPoly::from_rational(p))
        .into_iter()
        .map(|z| Poly::new(z.0.into_iter().map(BigRational::from_integer).collect()))
        .collect()
}

/// Cauchy bound: every root satisfies `|x| < bound`.
pub fn cauchy_bound(p: &Poly<BigRational>) -> BigRational {
    let lead = p.leading().expect("nonzero polynomial").abs();
    let max = p
        .coeffs()
        .iter()
        .take(p.coeffs().len() - 1)
        .map(|c| c.abs() / lead.clone())
        .fold(BigRational::zero(), |a, b| if b > a { b } else { a });
    max + BigRational::one()
}

/// Power of two above every root's magnitude.
fn dyadic_bound(p: &ZPoly) -> Dyadic {
    let max = p.0.iter().take(p.degree()).map(|c| c.abs()).max().unwrap_or_default();
    let ratio = max / p.lead().abs() + BigInt::from(2);
    Dyadic { m: BigInt::one() << ratio.bits() as usize, k: 0 }
}

/// A probe in `(a, b)` that is not a root of `p`: the midpoint, or else
/// `a + (b − a)(1/2 + 2^{−s})` for growing s.
fn off_root(p: &ZPoly, a: &Dyadic, b: &Dyadic) -> Dyadic {
    let mid = Dyadic::midpoint(a, b);
    if p.sign_at(&mid) != 0 {
        return mid;
    }
    (2..)
        .map(|s| Dyadic::between(a, b, (BigInt::one() << (s - 1) as usize) + 1, s))
        .find(|x| p.sign_at(x) != 0)
        .expect("finitely many roots")
}

/// All real roots of `p` with multiplicities, in increasing order. Values
/// are refined by exact bisection until every point of the isolating
/// interval rounds to the same double.
pub fn real_roots(p: &Poly<BigRational>) -> Vec<RealRoot> {
    match p.degree() {
        None | Some(0) => return Vec::new(),
        _ => {}
    }
    let zp = ZPoly::from_rational(p);
    let g = zp.gcd(&zp.derivative());
    let squarefree = if g.degree() == 0 { zp.clone() } else { zp.div_exact(&g) };
    let chain = sturm_chain_z(&squarefree);
    let hi = dyadic_bound(&squarefree);
    let lo = Dyadic { m: -hi.m.clone(), k: 0 };

    let mut intervals = Vec::new();
    let mut stack = vec![(lo, hi)];
    while let Some((a, b)) = stack.pop() {
        match count_roots_z(&chain, &a, &b) {
            0 => {}
            1 => intervals.push((a, b)),
            _ => {
                let m = off_root(&squarefree, &a, &b);
                stack.push((a, m.clone()));
                stack.push((m, b));
            }
        }
    }
    intervals.sort_by(|x, y| x.0.to_rational().cmp(&y.0.to_rational()));

    // Chain of repeated gcds for multiplicities.
    let mut gcd_chains: Vec<Vec<ZPoly>> = Vec::new();
    let mut g = g;
    while g.degree() > 0 {
        gcd_chains.push(sturm_chain_z(&g));
        g = g.gcd(&g.derivative());
    }

    intervals
        .into_iter()
        .map(|(a, b)| {
            let multiplicity = 1 + gcd_chains.iter().filter(|c| count_roots_z(c, &a, &b) > 0).count();
            refine(&squarefree, a, b, multiplicity)
        })
        .collect()
}

fn refine(p: &ZPoly, mut a: Dyadic, mut b: Dyadic, multiplicity: usize) -> RealRoot {
    let (lo, hi) = (a.to_rational(), b.to_rational());
    let exact = |x: Dyadic| RealRoot {
        value: x.to_f64(),
        multiplicity,
        lo: lo.clone(),
        hi: hi.clone(),
        exact: Some(x.to_rational()),
    };
    let sa = p.sign_at(&a);
    if p.sign_at(&b) == 0 {
        return exact(b);
    }
    for _ in 0..4000 {
        if a.to_f64() == b.to_f64() {
            break;
        }
        let m = Dyadic::midpoint(&a, &b);
        let sm = p.sign_at(&m);
        if sm == 0 {
            return exact(m);
        }
        if sm == sa {
            a = m;
        } else {
            b = m;
        }
    }
    RealRoot { value: Dyadic::midpoint(&a, &b).to_f64(), multiplicity, lo, hi, exact: None }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::ratio(n, d)
    }

    fn from_roots(roots: &[BigRational]) -> Poly<BigRational> {
        roots
            .iter()
            .fold(Poly::constant(q(1, 1)), |acc, r| acc.mul(&Poly::linear_root(r.clone())))
    }

    #[test]
    fn division_and_gcd() {
        let a = from_roots(&[q(1, 1), q(2, 1), q(-1, 3)]);
        let b = from_roots(&[q(2, 1), q(5, 1)]);
        let (qt, r) = a.div_rem(&b);
        assert_eq!(qt.mul(&b).add(&r), a);
        assert_eq!(a.gcd(&b), Poly::linear_root(q(2, 1)));
    }

    #[test]
    fn isolates_rational_and_irrational_roots() {
        // (x - 1)(x - 4)(x^2 - 2)
        let p = from_roots(&[q(1, 1), q(4, 1)]).mul(&Poly::new(vec![q(-2, 1), q(0, 1), q(1, 1)]));
        let roots = real_roots(&p);
        let vals: Vec<f64> = roots.iter().map(|r| r.value).collect();
        let s2 = 2f64.sqrt();
        assert_eq!(vals.len(), 4);
        assert_eq!(vals[0], -s2);
        assert_eq!(vals[1], 1.0);
        assert_eq!(vals[2], s2);
        assert_eq!(vals[3], 4.0);
    }

    #[test]
    fn multiplicities() {
        let p = from_roots(&[q(1, 2), q(1, 2), q(1, 2), q(-3, 1), q(7, 5), q(7, 5)]);
        let roots = real_roots(&p);
        let got: Vec<(f64, usize)> = roots.iter().map(|r| (r.value, r.multiplicity)).collect();
        assert_eq!(got, vec![(-3.0, 1), (0.5, 3), (1.4, 2)]);
    }

    #[test]
    fn separates_nearly_equal_roots() {
        let eps = q(1, 1_000_000_000_000);
        let p = from_roots(&[q(1, 3), q(1, 3) + eps.clone()]);
        let roots = real_roots(&p);
        assert_eq!(roots.len(), 2);
        assert!((roots[1].value - roots[0].value - 1e-12).abs() < 2e-16);
    }

    #[test]
    fn no_real_roots() {
        let p = Poly::new(vec![q(1, 1), q(0, 1), q(1, 1)]);
        assert!(real_roots(&p).is_empty());
    }
}
