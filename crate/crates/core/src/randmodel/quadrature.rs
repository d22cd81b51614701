//! Gauss rules and a breakpoint-aware integrator for standard normal expectations.

use nalgebra::{DMatrix, SymmetricEigen};

/// Nodes and weights from the Jacobi matrix of a family of orthogonal polynomials.
fn golub_welsch(diag: &[f64], off: &[f64], mu0: f64) -> (Vec<f64>, Vec<f64>) {
    let n = diag.len();
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        jac[(i, i)] = diag[i];
    }
    for (i, &b) in off.iter().enumerate() {
        jac[(i, i + 1)] = b;
        jac[(i + 1, i)] = b;
    }
    let eig = SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], mu0 * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// Gauss–Hermite rule for `E[f(H)]`, `H ~ N(0, 1)`; weights sum to one.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let off: Vec<f64> = (1..n).map(|i| (i as f64).sqrt()).collect();
        let (nodes, mut weights) = golub_welsch(&vec![0.0; n], &off, 1.0);
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        // symmetrize to remove eigen-solver noise
        let mut nodes = nodes;
        for i in 0..n / 2 {
            let j = n - 1 - i;
            let x = 0.5 * (nodes[j] - nodes[i]);
            let w = 0.5 * (weights[i] + weights[j]);
            nodes[i] = -x;
            nodes[j] = x;
            weights[i] = w;
            weights[j] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn expect(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let off: Vec<f64> = (1..n)
            .map(|i| {
                let i = i as f64;
                i / (4.0 * i * i - 1.0).sqrt()
            })
            .collect();
        let (nodes, weights) = golub_welsch(&vec![0.0; n], &off, 2.0);
        Self { nodes, weights }
    }

    /// Appends nodes and weights for `[a, b]` to `out`.
    pub fn push_interval(&self, a: f64, b: f64, out: &mut Vec<(f64, f64)>) {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            out.push((mid + half * x, half * w));
        }
    }
}

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[inline]
pub fn normal_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Composite Gauss–Legendre integration against the standard normal density.
///
/// The window `[-half_width, half_width]` is cut at caller-supplied
/// breakpoints and then into panels no wider than `panel`, so integrands that
/// are smooth between breakpoints are integrated to near machine precision.
#[derive(Debug, Clone)]
pub struct NormalRule {
    legendre: GaussLegendre,
    half_width: f64,
    panel: f64,
}

impl NormalRule {
    pub fn new(order: usize) -> Self {
        Self { legendre: GaussLegendre::new(order), half_width: 10.0, panel: 1.0 }
    }

    pub fn order(&self) -> usize {
        self.legendre.nodes.len()
    }

    /// Fills `out` with `(x, w)` pairs such that `sum w f(x) ~ E[f(H)]`.
    pub fn nodes_into(&self, breaks: &[f64], out: &mut Vec<(f64, f64)>) {
        out.clear();
        let l = self.half_width;
        let mut cuts: Vec<f64> = Vec::with_capacity(breaks.len() + 2);
        cuts.push(-l);
        cuts.extend(breaks.iter().copied().filter(|b| b.is_finite() && b.abs() < l));
        cuts.push(l);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
        for seg in cuts.windows(2) {
            let (a, b) = (seg[0], seg[1]);
            let pieces = ((b - a) / self.panel).ceil().max(1.0) as usize;
            let h = (b - a) / pieces as f64;
            for i in 0..pieces {
                let lo = a + h * i as f64;
                self.legendre.push_interval(lo, lo + h, out);
            }
        }
        for node in out.iter_mut() {
            node.1 *= normal_pdf(node.0);
        }
    }

    pub fn nodes(&self, breaks: &[f64]) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        self.nodes_into(breaks, &mut out);
        out
    }

    pub fn expect(&self, mut f: impl FnMut(f64) -> f64, breaks: &[f64]) -> f64 {
        let mut nodes = Vec::new();
        self.nodes_into(breaks, &mut nodes);
        nodes.iter().map(|&(x, w)| w * f(x)).sum()
    }

    /// `E[a(U) b(Y)]` for standard normals `(U, Y)` with correlation `r`.
    ///
    /// `a` is smooth between `a_breaks`, `b` between `b_breaks`.
    pub fn expect_pair(
        &self,
        a: impl Fn(f64) -> f64,
        a_breaks: &[f64],
        b: impl Fn(f64) -> f64,
        b_breaks: &[f64],
        r: f64,
    ) -> f64 {
        let r = r.clamp(-1.0, 1.0);
        let s2 = 1.0 - r * r;
        if s2 < 1e-12 {
            let sign = r.signum();
            let mut cuts = a_breaks.to_vec();
            cuts.extend(b_breaks.iter().map(|&y| sign * y));
            return self.expect(|u| a(u) * b(sign * u), &cuts);
        }
        let s = s2.sqrt();
        let mut outer_cuts = a_breaks.to_vec();
        if r.abs() > 1e-3 {
            outer_cuts.extend(b_breaks.iter().map(|&y| y / r));
        }
        let outer = self.nodes(&outer_cuts);
        let mut inner = Vec::new();
        let mut inner_cuts = vec![0.0; b_breaks.len()];
        let mut total = 0.0;
        for &(u, wu) in &outer {
            let au = a(u);
            if au == 0.0 {
                continue;
            }
            for (c, &y) in inner_cuts.iter_mut().zip(b_breaks) {
                *c = (y - r * u) / s;
            }
            self.nodes_into(&inner_cuts, &mut inner);
            let mean = r * u;
            let bu: f64 = inner.iter().map(|&(v, wv)| wv * b(mean + s * v)).sum();
            total += wu * au * bu;
        }
        total
    }
}
