//! Link matrices: Hermitian forms that vanish identically on the monomial
//! manifold `{X(V) : V ∈ ℂᴺ}`, encoding the algebraic dependencies among
//! the entries of `X`.
//!
//! Five families, with 1-based load-bus tuples:
//!
//! 1. `(a,b,c,d)`: `(v_a v̄_b)* (v_c v̄_d) = (v_d v̄_b)* (v_c v̄_a)`
//! 2. `(a,b,c)`:   `v̄_a (v_b v̄_c) = v̄_c (v_b v̄_a)`
//! 3. `(a,b)`:     `Re(v_a v̄_b) = Re(v_b v̄_a)`
//! 4. `(a)`:       `2|v_a|² = 2 Re(v_a v̄_a)`
//! 5. `(a)`:       `Im(v_a v̄_a) = 0`

use std::collections::{BTreeMap, HashSet};

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::CatalogError;
use crate::linalg::CMatrix;
use crate::quadratics::{
    constant_index, linear_index, monomial_dim, monomial_vector, product_index, FormJson, FormLabel, MonomialVector,
    QuadraticForm,
};
use crate::scalar::Scalar;

/// Annihilation tolerance relative to `1 + ‖X‖²`.
pub const ANNIHILATION_TOL: f64 = 1e-9;

const DEFAULT_SEED: u64 = 0x6c69_6e6b;

#[derive(Debug, Clone, PartialEq)]
pub struct Link<T: Scalar> {
    pub family: u8,
    /// 1-based load-bus tuple.
    pub indices: Vec<usize>,
    /// Position in the unpruned enumeration.
    pub raw_index: usize,
    /// Nonzero entries `(row, col, value)`, each position listed once.
    pub entries: Vec<(usize, usize, Complex<T>)>,
}

impl<T: Scalar> Link<T> {
    fn from_accumulated(family: u8, indices: Vec<usize>, raw_index: usize, acc: BTreeMap<(usize, usize), Complex<i32>>) -> Self {
        let entries = acc
            .into_iter()
            .filter(|(_, v)| v.re != 0 || v.im != 0)
            .map(|((i, j), v)| (i, j, Complex::new(T::c(v.re as f64), T::c(v.im as f64))))
            .collect();
        Link { family, indices, raw_index, entries }
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn label(&self) -> FormLabel {
        FormLabel::Link { family: self.family, indices: self.indices.clone() }
    }

    pub fn to_dense(&self, dim: usize) -> CMatrix<T> {
        let mut m = CMatrix::zeros(dim, dim);
        for &(i, j, v) in &self.entries {
            m[(i, j)] += v;
        }
        m
    }

    pub fn to_form(&self, dim: usize) -> QuadraticForm<T> {
        QuadraticForm::new(self.label(), self.to_dense(dim))
    }

    /// `X* Q X` evaluated from the triplets.
    pub fn evaluate(&self, x: &MonomialVector<T>) -> T {
        let mut acc = Complex::new(T::zero(), T::zero());
        for &(i, j, v) in &self.entries {
            acc += x.entries[i].conj() * v * x.entries[j];
        }
        acc.re
    }

    /// Largest `|Q_ij - conj(Q_ji)|` over the stored entries.
    pub fn hermitian_defect(&self) -> T {
        let lookup: BTreeMap<(usize, usize), Complex<T>> = self.entries.iter().map(|&(i, j, v)| ((i, j), v)).collect();
        let zero = Complex::new(T::zero(), T::zero());
        self.entries.iter().fold(T::zero(), |worst, &(i, j, v)| {
            let mirror = lookup.get(&(j, i)).copied().unwrap_or(zero);
            worst.max((v - mirror.conj()).norm_sqr().sqrt())
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkCatalog<T: Scalar> {
    pub n: usize,
    pub links: Vec<Link<T>>,
    pub raw_count: usize,
    pub pruned: bool,
}

/// Raw catalog size `N⁴ + N³ + N² + 2N`.
pub fn raw_link_count(n: usize) -> usize {
    n.pow(4) + n.pow(3) + n * n + 2 * n
}

/// Adds `+s` at `(p, q)` and `(q, p)`; the diagonal receives `2s` when
/// `p == q`.
fn add_pair(acc: &mut BTreeMap<(usize, usize), Complex<i32>>, p: usize, q: usize, s: Complex<i32>) {
    *acc.entry((p, q)).or_default() += s;
    *acc.entry((q, p)).or_default() += s.conj();
}

/// Enumerates all five families in a fixed order (family, then tuple in
/// lexicographic order).
pub fn enumerate_links<T: Scalar>(n: usize) -> LinkCatalog<T> {
    let one = Complex::new(1, 0);
    let idx = |a: usize, b: usize| product_index(n, a, b);
    let lin = |a: usize| linear_index(n, a);
    let last = constant_index(n);
    let mut links = Vec::with_capacity(raw_link_count(n));
    let mut push = |family: u8, tuple: &[usize], acc| {
        let raw = links.len();
        links.push(Link::from_accumulated(family, tuple.iter().map(|t| t + 1).collect(), raw, acc));
    };
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    let mut acc = BTreeMap::new();
                    add_pair(&mut acc, idx(a, b), idx(c, d), one);
                    add_pair(&mut acc, idx(d, b), idx(c, a), -one);
                    push(1, &[a, b, c, d], acc);
                }
            }
        }
    }
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                let mut acc = BTreeMap::new();
                add_pair(&mut acc, lin(a), idx(b, c), one);
                add_pair(&mut acc, lin(c), idx(b, a), -one);
                push(2, &[a, b, c], acc);
            }
        }
    }
    for a in 0..n {
        for b in 0..n {
            let mut acc = BTreeMap::new();
            add_pair(&mut acc, last, idx(a, b), one);
            add_pair(&mut acc, last, idx(b, a), -one);
            push(3, &[a, b], acc);
        }
    }
    for a in 0..n {
        let mut acc = BTreeMap::new();
        add_pair(&mut acc, last, idx(a, a), -one);
        *acc.entry((lin(a), lin(a))).or_default() += Complex::new(2, 0);
        push(4, &[a], acc);
    }
    for a in 0..n {
        let mut acc = BTreeMap::new();
        *acc.entry((last, idx(a, a))).or_default() += Complex::new(0, 1);
        *acc.entry((idx(a, a), last)).or_default() += Complex::new(0, -1);
        push(5, &[a], acc);
    }
    LinkCatalog { n, raw_count: links.len(), links, pruned: false }
}

/// Real coordinates of a Hermitian link (upper triangle, real and
/// imaginary parts) for rank computations.
fn coordinates<T: Scalar>(link: &Link<T>) -> BTreeMap<(usize, usize, bool), f64> {
    let mut out = BTreeMap::new();
    for &(i, j, v) in &link.entries {
        if i <= j {
            let re = v.re.to_f64_lossy();
            let im = v.im.to_f64_lossy();
            if re != 0.0 {
                out.insert((i, j, false), re);
            }
            if im != 0.0 && i != j {
                out.insert((i, j, true), im);
            }
        }
    }
    out
}

type SparseVec = BTreeMap<(usize, usize, bool), f64>;

fn sparse_dot(a: &SparseVec, b: &SparseVec) -> f64 {
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    small.iter().filter_map(|(k, x)| large.get(k).map(|y| x * y)).sum()
}

/// Incremental orthogonal basis; `insert` reports whether the vector added
/// a new direction.
#[derive(Default)]
struct SpanBasis {
    basis: Vec<SparseVec>,
}

impl SpanBasis {
    fn insert(&mut self, v: SparseVec) -> bool {
        let norm0 = sparse_dot(&v, &v).sqrt();
        if norm0 == 0.0 {
            return false;
        }
        let mut r = v;
        // Two Gram-Schmidt passes keep the residual orthogonal to working
        // precision.
        for _ in 0..2 {
            for q in &self.basis {
                let coef = sparse_dot(q, &r);
                if coef != 0.0 {
                    for (k, x) in q {
                        *r.entry(*k).or_insert(0.0) -= coef * x;
                    }
                }
            }
        }
        r.retain(|_, x| x.abs() > 1e-14);
        let norm = sparse_dot(&r, &r).sqrt();
        if norm <= 1e-9 * norm0 {
            return false;
        }
        r.values_mut().for_each(|x| *x /= norm);
        self.basis.push(r);
        true
    }
}

/// Dimension of the real span of the catalog's matrices.
pub fn span_rank<T: Scalar>(catalog: &LinkCatalog<T>) -> usize {
    let mut basis = SpanBasis::default();
    catalog.links.iter().filter(|l| basis.insert(coordinates(l))).count()
}

/// Removes zero links, duplicates and negations of earlier links, and links
/// in the span of the links already kept. The span is unchanged and every
/// kept link records its raw position.
pub fn prune<T: Scalar>(catalog: &LinkCatalog<T>) -> LinkCatalog<T> {
    let mut seen: HashSet<Vec<(usize, usize, i64, i64)>> = HashSet::new();
    let mut basis = SpanBasis::default();
    let key = |l: &Link<T>, sign: f64| -> Vec<(usize, usize, i64, i64)> {
        l.entries
            .iter()
            .map(|&(i, j, v)| {
                let q = |x: T| (sign * x.to_f64_lossy() * 1e9).round() as i64;
                (i, j, q(v.re), q(v.im))
            })
            .collect()
    };
    let links = catalog
        .links
        .iter()
        .filter(|l| {
            if l.is_zero() {
                return false;
            }
            if seen.contains(&key(l, 1.0)) || seen.contains(&key(l, -1.0)) {
                return false;
            }
            seen.insert(key(l, 1.0));
            basis.insert(coordinates(l))
        })
        .cloned()
        .collect();
    LinkCatalog { n: catalog.n, links, raw_count: catalog.raw_count, pruned: true }
}

/// Worst normalized residual `|X* Q X| / (1 + ‖X‖²)` per family.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnihilationReport {
    pub trials: usize,
    pub worst_by_family: Vec<(u8, f64)>,
}

impl AnnihilationReport {
    pub fn worst(&self) -> f64 {
        self.worst_by_family.iter().map(|(_, r)| *r).fold(0.0, f64::max)
    }
}

pub fn verify_annihilation<T: Scalar>(catalog: &LinkCatalog<T>, trials: usize) -> Result<AnnihilationReport, CatalogError> {
    let mut rng = ChaCha8Rng::seed_from_u64(DEFAULT_SEED);
    verify_annihilation_with(catalog, trials, &mut rng)
}

/// Evaluates every link on `trials` random voltage vectors with standard
/// complex Gaussian entries.
pub fn verify_annihilation_with<T: Scalar, R: Rng>(
    catalog: &LinkCatalog<T>,
    trials: usize,
    rng: &mut R,
) -> Result<AnnihilationReport, CatalogError> {
    if trials == 0 {
        return Err(CatalogError::NoTrials);
    }
    let tol = T::c(ANNIHILATION_TOL);
    for link in &catalog.links {
        if link.hermitian_defect() > tol {
            return Err(CatalogError::NotHermitian { family: link.family, indices: link.indices.clone() });
        }
    }
    let mut worst: BTreeMap<u8, f64> = catalog.links.iter().map(|l| (l.family, 0.0)).collect();
    for _ in 0..trials {
        let v: Vec<Complex<T>> = (0..catalog.n)
            .map(|_| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex::new(T::c(re), T::c(im))
            })
            .collect();
        let x = monomial_vector(&v);
        let scale = T::one() + x.norm_squared();
        for link in &catalog.links {
            let r = link.evaluate(&x).abs();
            if r > tol * scale {
                return Err(CatalogError::NotAnnihilating {
                    family: link.family,
                    indices: link.indices.clone(),
                    residual: r.to_f64_lossy(),
                    allowed: (tol * scale).to_f64_lossy(),
                });
            }
            let w = worst.entry(link.family).or_insert(0.0);
            *w = w.max((r / scale).to_f64_lossy());
        }
    }
    Ok(AnnihilationReport { trials, worst_by_family: worst.into_iter().collect() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkJson {
    pub family: u8,
    pub indices: Vec<usize>,
    pub raw_index: usize,
    #[serde(flatten)]
    pub form: FormJson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogJson {
    pub n: usize,
    pub raw_count: usize,
    pub pruned: bool,
    pub count_by_family: BTreeMap<u8, usize>,
    pub links: Vec<LinkJson>,
}

impl<T: Scalar> LinkCatalog<T> {
    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn dim(&self) -> usize {
        monomial_dim(self.n)
    }

    pub fn count_by_family(&self) -> BTreeMap<u8, usize> {
        let mut out: BTreeMap<u8, usize> = (1..=5).map(|f| (f, 0)).collect();
        for l in &self.links {
            *out.entry(l.family).or_default() += 1;
        }
        out
    }

    /// Finds a link by family and 1-based tuple.
    pub fn find(&self, family: u8, indices: &[usize]) -> Option<&Link<T>> {
        self.links.iter().find(|l| l.family == family && l.indices == indices)
    }

    /// Catalog with every matrix negated (multipliers absorb the sign).
    pub fn negated(&self) -> Self {
        let mut out = self.clone();
        for l in &mut out.links {
            for e in &mut l.entries {
                e.2 = -e.2;
            }
        }
        out
    }

    pub fn to_json(&self) -> CatalogJson {
        let dim = self.dim();
        CatalogJson {
            n: self.n,
            raw_count: self.raw_count,
            pruned: self.pruned,
            count_by_family: self.count_by_family(),
            links: self
                .links
                .iter()
                .map(|l| LinkJson {
                    family: l.family,
                    indices: l.indices.clone(),
                    raw_index: l.raw_index,
                    form: FormJson {
                        n: dim,
                        label: l.label().to_string(),
                        entries: l
                            .entries
                            .iter()
                            .map(|&(i, j, v)| crate::quadratics::EntryJson {
                                i,
                                j,
                                re: v.re.to_f64_lossy(),
                                im: v.im.to_f64_lossy(),
                            })
                            .collect(),
                    },
                })
                .collect(),
        }
    }
}
