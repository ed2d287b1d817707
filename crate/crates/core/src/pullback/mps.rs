//! Diagonal matrix-product states: rank-r sums of n-fold spinor products,
//! and the factored metric matvec that makes the pulled-back Kähler metric
//! affordable at large `n` and `r`.
//!
//! The state is `psi = sum_{k<r} phi_0^(k) (x) ... (x) phi_{n-1}^(k)` with
//! complex coordinates `z[(k n + i) d + s] = phi_i^(k)[s]`. The complex
//! Gram matrix of the holomorphic Jacobian realifies to the real Kähler
//! metric, so every metric operation here runs in complex arithmetic and is
//! exposed through `[Re; Im]`-stacked real views.

use nalgebra::{DMatrix, DVector, Vector3};
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{complexify_vec, realify_mat, realify_vec};
use crate::C64;

use super::Immersion;

fn c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

#[derive(Debug, Clone)]
pub struct DiagonalMps {
    /// Number of sites (spins).
    pub n: usize,
    /// Schmidt rank (number of product branches).
    pub r: usize,
    /// Site dimension, `2j + 1`.
    pub d: usize,
    /// Complex coordinates, indexed by `(k * n + i) * d + s`.
    spinors: Vec<C64>,
}

impl DiagonalMps {
    pub fn new(n: usize, r: usize, d: usize, spinors: Vec<C64>) -> Result<Self> {
        if spinors.len() != n * r * d {
            return Err(Error::DimensionMismatch {
                context: "diagonal MPS coordinate count",
                expected: n * r * d,
                got: spinors.len(),
            });
        }
        Ok(Self { n, r, d, spinors })
    }

    /// Random state with unit-normed site spinors, which keeps the branch
    /// overlap products bounded by one at any `n`.
    pub fn random(n: usize, r: usize, d: usize, rng: &mut impl Rng) -> Self {
        let mut spinors = Vec::with_capacity(n * r * d);
        for _ in 0..n * r {
            let raw: Vec<C64> = (0..d)
                .map(|_| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
                .collect();
            let norm = raw.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            spinors.extend(raw.into_iter().map(|x| x / c(norm)));
        }
        Self { n, r, d, spinors }
    }

    /// Product of per-spin states aligned with the given Bloch vectors
    /// (spin-1/2, rank 1).
    pub fn from_bloch_vectors(dirs: &[Vector3<f64>]) -> Self {
        let n = dirs.len();
        let mut spinors = Vec::with_capacity(2 * n);
        for dir in dirs {
            let u = dir / dir.norm();
            let theta = u[2].clamp(-1.0, 1.0).acos();
            let phi = u[1].atan2(u[0]);
            spinors.push(c((theta / 2.0).cos()));
            spinors.push(C64::new(0.0, phi).exp() * c((theta / 2.0).sin()));
        }
        Self {
            n,
            r: 1,
            d: 2,
            spinors,
        }
    }

    #[inline]
    pub fn idx(&self, k: usize, i: usize, s: usize) -> usize {
        (k * self.n + i) * self.d + s
    }

    pub fn spinor(&self, k: usize, i: usize) -> &[C64] {
        let base = self.idx(k, i, 0);
        &self.spinors[base..base + self.d]
    }

    /// Complex coordinate count `n r d`.
    pub fn dim_c(&self) -> usize {
        self.n * self.r * self.d
    }

    /// Real coordinate count `2 n r d`.
    pub fn dim_xi(&self) -> usize {
        2 * self.dim_c()
    }

    pub fn coords(&self) -> DVector<C64> {
        DVector::from_column_slice(&self.spinors)
    }

    pub fn set_coords(&mut self, z: &DVector<C64>) {
        assert_eq!(z.len(), self.dim_c());
        self.spinors.copy_from_slice(z.as_slice());
    }

    pub fn with_coords(&self, z: &DVector<C64>) -> Self {
        let mut out = self.clone();
        out.set_coords(z);
        out
    }

    /// Dense Hilbert dimension `d^n`.
    pub fn dim_hilbert_c(&self) -> usize {
        self.d.pow(self.n as u32)
    }

    /// Assemble the dense state vector (use only for small `n`).
    pub fn assemble_dense(&self) -> DVector<C64> {
        let dim = self.dim_hilbert_c();
        let mut psi = DVector::<C64>::zeros(dim);
        for idx in 0..dim {
            let mut rem = idx;
            let mut digits = vec![0usize; self.n];
            for i in (0..self.n).rev() {
                digits[i] = rem % self.d;
                rem /= self.d;
            }
            let mut acc = C64::new(0.0, 0.0);
            for k in 0..self.r {
                let mut prod = c(1.0);
                for (i, &s) in digits.iter().enumerate() {
                    prod *= self.spinors[self.idx(k, i, s)];
                }
                acc += prod;
            }
            psi[idx] = acc;
        }
        psi
    }

    /// Per-site branch overlaps `o_i^{km} = <phi_i^(k) | phi_i^(m)>`.
    fn site_overlap(&self, i: usize, k: usize, m: usize) -> C64 {
        let a = self.spinor(k, i);
        let b = self.spinor(m, i);
        let mut acc = C64::new(0.0, 0.0);
        for s in 0..self.d {
            acc += a[s].conj() * b[s];
        }
        acc
    }

    /// Trace of the complex Gram matrix, `sum_{k,i} d prod_{l != i}
    /// o_l^{kk}`, O(r n d).
    pub fn gram_trace(&self) -> f64 {
        let mut acc = 0.0;
        for k in 0..self.r {
            let o: Vec<f64> = (0..self.n).map(|i| self.site_overlap(i, k, k).re).collect();
            let mut prefix = vec![1.0; self.n + 1];
            for i in 0..self.n {
                prefix[i + 1] = prefix[i] * o[i];
            }
            let mut suffix = vec![1.0; self.n + 1];
            for i in (0..self.n).rev() {
                suffix[i] = suffix[i + 1] * o[i];
            }
            for i in 0..self.n {
                acc += self.d as f64 * prefix[i] * suffix[i + 1];
            }
        }
        acc
    }

    /// `<psi|psi>` through branch overlaps, O(r^2 n d).
    pub fn norm_sq(&self) -> f64 {
        let mut acc = C64::new(0.0, 0.0);
        for k in 0..self.r {
            for m in 0..self.r {
                let mut prod = c(1.0);
                for i in 0..self.n {
                    prod *= self.site_overlap(i, k, m);
                }
                acc += prod;
            }
        }
        acc.re
    }

    /// Multiply every branch's site-0 spinor by `factor` (rescales `psi`
    /// linearly).
    pub fn scale_branches(&mut self, factor: f64) {
        for k in 0..self.r {
            for s in 0..self.d {
                let idx = self.idx(k, 0, s);
                self.spinors[idx] *= c(factor);
            }
        }
    }

    /// Rescale so `<psi|psi> = 1`.
    pub fn renormalize(&mut self) {
        let n = self.norm_sq().sqrt();
        if n > 0.0 && n.is_finite() {
            self.scale_branches(1.0 / n);
        }
    }

    /// Re-center the chart in the inter-site scale gauge: within each
    /// branch, redistribute the branch amplitude so every site spinor has
    /// the same norm. Pure gauge: the assembled state is unchanged, but
    /// the coordinates stay bounded along long stochastic runs (the scale
    /// gauge otherwise random-walks exponentially and starves the
    /// pseudo-inverse of its working directions).
    pub fn rebalance(&mut self) {
        for k in 0..self.r {
            let norms: Vec<f64> = (0..self.n)
                .map(|i| {
                    self.spinor(k, i)
                        .iter()
                        .map(|x| x.norm_sqr())
                        .sum::<f64>()
                        .sqrt()
                })
                .collect();
            if norms.iter().any(|&x| x == 0.0 || !x.is_finite()) {
                continue;
            }
            let log_mean = norms.iter().map(|x| x.ln()).sum::<f64>() / self.n as f64;
            let target = log_mean.exp();
            for (i, &norm) in norms.iter().enumerate() {
                let factor = c(target / norm);
                for s in 0..self.d {
                    let idx = self.idx(k, i, s);
                    self.spinors[idx] *= factor;
                }
            }
        }
    }

    /// Dense holomorphic Jacobian `Z = d psi / d z`, `d^n x (n r d)`. The
    /// oracle for the factored paths; use only for small `n`.
    pub fn jacobian_complex(&self) -> DMatrix<C64> {
        let dim = self.dim_hilbert_c();
        let cols = self.dim_c();
        let mut z = DMatrix::<C64>::zeros(dim, cols);
        for k in 0..self.r {
            for i in 0..self.n {
                for s in 0..self.d {
                    let col = self.idx(k, i, s);
                    for idx in 0..dim {
                        let mut rem = idx;
                        let mut digits = vec![0usize; self.n];
                        for ii in (0..self.n).rev() {
                            digits[ii] = rem % self.d;
                            rem /= self.d;
                        }
                        if digits[i] != s {
                            continue;
                        }
                        let mut prod = c(1.0);
                        for (ii, &ss) in digits.iter().enumerate() {
                            if ii != i {
                                prod *= self.spinors[self.idx(k, ii, ss)];
                            }
                        }
                        z[(idx, col)] = prod;
                    }
                }
            }
        }
        z
    }

    /// Dense complex Gram matrix `W = Z^H Z` assembled from the block
    /// structure (no `d^n` objects involved), O((n r d)^2 n).
    pub fn gram_dense(&self) -> DMatrix<C64> {
        let dim = self.dim_c();
        let mut w = DMatrix::<C64>::zeros(dim, dim);
        // per (k,m): full product and per-site-pair partial products
        for k in 0..self.r {
            for m in 0..self.r {
                let o: Vec<C64> = (0..self.n).map(|i| self.site_overlap(i, k, m)).collect();
                for i in 0..self.n {
                    for i2 in 0..self.n {
                        if i == i2 {
                            let mut prod = c(1.0);
                            for (l, &ov) in o.iter().enumerate() {
                                if l != i {
                                    prod *= ov;
                                }
                            }
                            for s in 0..self.d {
                                w[(self.idx(k, i, s), self.idx(m, i, s))] += prod;
                            }
                        } else {
                            let mut prod = c(1.0);
                            for (l, &ov) in o.iter().enumerate() {
                                if l != i && l != i2 {
                                    prod *= ov;
                                }
                            }
                            // row (i,k,s), column (i2,m,s2):
                            // prod * phi_i^(m)[s] * conj(phi_i2^(k)[s2])
                            for s in 0..self.d {
                                for s2 in 0..self.d {
                                    w[(self.idx(k, i, s), self.idx(m, i2, s2))] += prod
                                        * self.spinors[self.idx(m, i, s)]
                                        * self.spinors[self.idx(k, i2, s2)].conj();
                                }
                            }
                        }
                    }
                }
            }
        }
        w
    }

    /// Factored metric matvec `W c` using per-site overlaps and
    /// division-free prefix/suffix partial products; `Theta(r^2 n d)`
    /// complex multiplications and `Theta(n)` workspace.
    pub fn gram_matvec(&self, cvec: &DVector<C64>) -> DVector<C64> {
        self.gram_matvec_counted(cvec).0
    }

    /// Same as [`Self::gram_matvec`], also returning the number of complex
    /// multiplications performed (the instrumentation behind the cost
    /// scaling checks).
    pub fn gram_matvec_counted(&self, cvec: &DVector<C64>) -> (DVector<C64>, u64) {
        self.gram_matvec_mixed_counted(self, cvec)
    }

    /// Mixed-state Gram matvec `Z(self)^H Z(ket) c`, the `self` state
    /// supplying the bra side. With `ket = self` this is the metric matvec;
    /// with a ket displaced along a tangent direction it isolates the
    /// holomorphic derivative of the Gram matrix, which is what the Itô
    /// drift correction contracts (the antiholomorphic part belongs to the
    /// bra and must not be differenced).
    pub fn gram_matvec_mixed_counted(
        &self,
        ket: &DiagonalMps,
        cvec: &DVector<C64>,
    ) -> (DVector<C64>, u64) {
        assert_eq!(cvec.len(), self.dim_c(), "tangent coordinate count");
        assert!(
            self.n == ket.n && self.r == ket.r && self.d == ket.d,
            "bra and ket must share the chart shape"
        );
        let n = self.n;
        let d = self.d;
        let mut out = DVector::<C64>::zeros(self.dim_c());
        let mut mults: u64 = 0;

        // workspace reused across (k, m) pairs
        let mut overlap = vec![C64::new(0.0, 0.0); n];
        let mut proj = vec![C64::new(0.0, 0.0); n];
        let mut prefix = vec![C64::new(0.0, 0.0); n + 1];
        let mut suffix = vec![C64::new(0.0, 0.0); n + 1];
        let mut lhole = vec![C64::new(0.0, 0.0); n + 1]; // lhole[i+1] covers sites 0..=i
        let mut rhole = vec![C64::new(0.0, 0.0); n + 1]; // rhole[i] covers sites i..n-1

        for k in 0..self.r {
            for m in 0..self.r {
                // o_i = <bra phi_i^(k)|ket phi_i^(m)>, t_i = <bra phi_i^(k)|c_i^(m)>
                for i in 0..n {
                    let a = self.spinor(k, i);
                    let b = ket.spinor(m, i);
                    let mut o = C64::new(0.0, 0.0);
                    let mut t = C64::new(0.0, 0.0);
                    let base = (m * n + i) * d;
                    for s in 0..d {
                        let ac = a[s].conj();
                        o += ac * b[s];
                        t += ac * cvec[base + s];
                        mults += 2;
                    }
                    overlap[i] = o;
                    proj[i] = t;
                }
                // prefix[i] = prod_{l<i} o_l, suffix[i] = prod_{l>i-1..}
                prefix[0] = c(1.0);
                for i in 0..n {
                    prefix[i + 1] = prefix[i] * overlap[i];
                    mults += 1;
                }
                suffix[n] = c(1.0);
                for i in (0..n).rev() {
                    suffix[i] = suffix[i + 1] * overlap[i];
                    mults += 1;
                }
                // one-hole sums: lhole[i+1] = sum_{l<=i} (prod_{l'<=i, l'!=l} o) t_l
                lhole[0] = C64::new(0.0, 0.0);
                for i in 0..n {
                    lhole[i + 1] = lhole[i] * overlap[i] + prefix[i] * proj[i];
                    mults += 2;
                }
                rhole[n] = C64::new(0.0, 0.0);
                for i in (0..n).rev() {
                    rhole[i] = rhole[i + 1] * overlap[i] + suffix[i + 1] * proj[i];
                    mults += 2;
                }
                // accumulate: out[(k,i,s)] += A_i c[(m,i,s)] + B_i ket phi_i^(m)[s]
                for i in 0..n {
                    let full = prefix[i] * suffix[i + 1];
                    let cross = lhole[i] * suffix[i + 1] + prefix[i] * rhole[i + 1];
                    mults += 3;
                    let out_base = (k * n + i) * d;
                    let c_base = (m * n + i) * d;
                    for s in 0..d {
                        out[out_base + s] +=
                            full * cvec[c_base + s] + cross * ket.spinor(m, i)[s];
                        mults += 2;
                    }
                }
            }
        }
        (out, mults)
    }

    /// Real-coordinate metric matvec `g_K v` on `[Re; Im]`-stacked views.
    pub fn factored_matvec(&self, v: &DVector<f64>) -> DVector<f64> {
        realify_vec(&self.gram_matvec(&complexify_vec(v)))
    }

    /// Re-decompose a two-site state in Schmidt-canonical form: branches
    /// become the singular pairs of the site matrix, orthogonal within
    /// each site and ordered by weight. Pure re-parametrization (the
    /// assembled state is unchanged up to roundoff); it undoes the
    /// ill-conditioned nearly-cancelling branch configurations that long
    /// stochastic runs drift into. Branch weights are floored at a tiny
    /// fraction of the leading weight so a collapsed branch can re-inflate.
    pub fn canonicalize_two_site(&mut self) {
        assert_eq!(self.n, 2, "canonical form implemented for two sites");
        assert!(self.r <= self.d, "rank exceeds the two-site Schmidt bound");
        let psi = self.assemble_dense();
        let m = DMatrix::<C64>::from_fn(self.d, self.d, |s, t| psi[s * self.d + t]);
        let svd = nalgebra::SVD::new(m, true, true);
        let u = svd.u.as_ref().expect("requested U");
        let v_t = svd.v_t.as_ref().expect("requested V^H");
        let sigma_max = svd.singular_values[0].max(1e-300);
        for k in 0..self.r {
            let sigma = svd.singular_values[k].max(1e-8 * sigma_max);
            let w = sigma.sqrt();
            for s in 0..self.d {
                let i0 = self.idx(k, 0, s);
                self.spinors[i0] = u[(s, k)] * c(w);
                let i1 = self.idx(k, 1, s);
                self.spinors[i1] = v_t[(k, s)] * c(w);
            }
        }
    }

    /// Per-spin unit Bloch vectors of a rank-1 spin-1/2 state.
    pub fn bloch_vectors(&self) -> Result<Vec<Vector3<f64>>> {
        if self.r != 1 {
            return Err(Error::RankNotOne(self.r));
        }
        assert_eq!(self.d, 2, "Bloch vectors are defined for spin-1/2 sites");
        let mut out = Vec::with_capacity(self.n);
        for i in 0..self.n {
            let phi = self.spinor(0, i);
            let nrm = phi[0].norm_sqr() + phi[1].norm_sqr();
            let x = 2.0 * (phi[0].conj() * phi[1]).re / nrm;
            let y = 2.0 * (phi[0].conj() * phi[1]).im / nrm;
            let z = (phi[0].norm_sqr() - phi[1].norm_sqr()) / nrm;
            out.push(Vector3::new(x, y, z));
        }
        Ok(out)
    }
}

/// Real-coordinate immersion view of a diagonal MPS (dense; the oracle for
/// the complex fast paths).
pub struct MpsImmersion {
    pub template: DiagonalMps,
}

impl Immersion for MpsImmersion {
    fn dim_xi(&self) -> usize {
        self.template.dim_xi()
    }
    fn dim_hilbert(&self) -> usize {
        2 * self.template.dim_hilbert_c()
    }
    fn eval(&self, xi: &DVector<f64>) -> DVector<f64> {
        let state = self.template.with_coords(&complexify_vec(xi));
        realify_vec(&state.assemble_dense())
    }
    fn jacobian(&self, xi: &DVector<f64>) -> DMatrix<f64> {
        let state = self.template.with_coords(&complexify_vec(xi));
        realify_mat(&state.jacobian_complex())
    }
}
