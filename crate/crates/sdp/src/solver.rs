//! Homogeneous self-dual interior-point method.
//!
//! Internally every problem is brought to the inequality form
//!
//! ```text
//! minimize cᵀx  subject to  Gx + s = h,  Ax = b,  s ∈ K
//! ```
//!
//! where `K` is a product of a nonnegative orthant and Hermitian PSD cones.
//! Each iteration solves the embedded Newton system twice through the
//! normal equations `H = Gᵀ (WᵀW)⁻¹ G`, with `W` the Nesterov-Todd scaling.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::SdpError;
use crate::hermitian::{hermitian_eigen, HermitianMatrix};
use crate::problem::{
    ConicProblem, ConicSolution, Field, Iterate, LinearExpr, LinearTerm, Sense, SolveStatus, SolverSettings,
    VarKind, Variable,
};
use crate::{CMat, C64};

const ONE: C64 = C64 { re: 1.0, im: 0.0 };
const I: C64 = C64 { re: 0.0, im: 1.0 };
/// Smallest `κ` (the embedding starts at `τ = κ = 1`) that can back an
/// infeasibility certificate.
const CERT_KAPPA_MIN: f64 = 1e-6;

// ---------------------------------------------------------------------------
// Coordinates of matrix blocks
// ---------------------------------------------------------------------------

/// One basis element of the Hermitian coordinate system: a sum of at most
/// two `coef · e_r e_cᵀ` entries.
#[derive(Clone, Copy, Debug)]
struct Elem {
    len: usize,
    e: [(C64, usize, usize); 2],
}

/// Complex basis: diagonal entries first, then `(re, im)` per `i < j`.
/// The real basis is the complex one without the imaginary elements.
fn basis(dim: usize, field: Field) -> Vec<Elem> {
    let mut out = Vec::with_capacity(dim * dim);
    for i in 0..dim {
        out.push(Elem { len: 1, e: [(ONE, i, i), (ONE, i, i)] });
    }
    for i in 0..dim {
        for j in (i + 1)..dim {
            out.push(Elem { len: 2, e: [(ONE, i, j), (ONE, j, i)] });
            if field == Field::Complex {
                out.push(Elem { len: 2, e: [(I, i, j), (-I, j, i)] });
            }
        }
    }
    out
}

/// Position of each basis element of `field` inside the complex basis.
fn complex_index(dim: usize, field: Field) -> Vec<usize> {
    match field {
        Field::Complex => (0..dim * dim).collect(),
        Field::Real => {
            let mut idx: Vec<usize> = (0..dim).collect();
            let mut k = 0;
            for i in 0..dim {
                for _ in (i + 1)..dim {
                    idx.push(dim + 2 * k);
                    k += 1;
                }
            }
            idx
        }
    }
}

pub(crate) fn coords_to_matrix(var: &Variable, coords: &[f64]) -> HermitianMatrix {
    match var.kind {
        VarKind::Psd { dim, field } => HermitianMatrix::symmetrize(assemble(dim, &basis(dim, field), coords)),
        _ => HermitianMatrix::from_diagonal(&[coords[0]]),
    }
}

fn assemble(dim: usize, basis: &[Elem], coords: &[f64]) -> CMat {
    let mut m = CMat::zeros(dim, dim);
    for (el, &v) in basis.iter().zip(coords) {
        for &(a, r, c) in &el.e[..el.len] {
            m[(r, c)] += a * v;
        }
    }
    m
}

/// `Re Tr(E_p M)` for every basis element.
fn project(basis: &[Elem], m: &CMat, out: &mut [f64], scale: f64) {
    for (el, o) in basis.iter().zip(out.iter_mut()) {
        let mut acc = 0.0;
        for &(a, r, c) in &el.e[..el.len] {
            acc += (a * m[(c, r)]).re;
        }
        *o += scale * acc;
    }
}

// ---------------------------------------------------------------------------
// Compiled problem
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
struct Member {
    offset: usize,
    coeff: f64,
    field: Field,
}

#[derive(Clone, Debug)]
struct Group {
    map: Option<CMat>,
    map_h: Option<CMat>,
    dim: usize,
    members: Vec<Member>,
}

#[derive(Clone, Debug)]
struct Cone {
    dim: usize,
    constant: CMat,
    groups: Vec<Group>,
    scalars: Vec<(usize, CMat)>,
}

#[derive(Clone, Debug)]
struct LpRow {
    coefs: Vec<(usize, f64)>,
    rhs: f64,
}

struct Compiled {
    n: usize,
    c: DVector<f64>,
    eq: DMatrix<f64>,
    b: DVector<f64>,
    lp: Vec<LpRow>,
    cones: Vec<Cone>,
    /// Index of the first LMI cone (matrix-variable cones come first).
    first_lmi: usize,
    degree: f64,
    bases: Vec<(usize, Field, Vec<Elem>)>,
}

impl Compiled {
    fn basis(&self, dim: usize, field: Field) -> &[Elem] {
        &self
            .bases
            .iter()
            .find(|(d, f, _)| *d == dim && *f == field)
            .expect("basis registered at compile time")
            .2
    }

    fn linear_coefs(problem: &ConicProblem, expr: &LinearExpr) -> Vec<(usize, f64)> {
        let mut dense: Vec<(usize, f64)> = Vec::new();
        for t in &expr.terms {
            match t {
                LinearTerm::Trace { var, mat } => {
                    let v = &problem.vars[var.0];
                    if let VarKind::Psd { dim, field } = v.kind {
                        let b = basis(dim, field);
                        let mut out = vec![0.0; b.len()];
                        project(&b, mat.as_matrix(), &mut out, 1.0);
                        for (p, val) in out.into_iter().enumerate() {
                            if val != 0.0 {
                                dense.push((v.offset + p, val));
                            }
                        }
                    }
                }
                LinearTerm::Scalar { var, coeff } => dense.push((problem.vars[var.0].offset, *coeff)),
            }
        }
        dense.sort_by_key(|e| e.0);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(dense.len());
        for (i, v) in dense {
            match merged.last_mut() {
                Some(last) if last.0 == i => last.1 += v,
                _ => merged.push((i, v)),
            }
        }
        merged
    }

    fn new(problem: &ConicProblem) -> Self {
        let n = problem.n_coords;
        let mut c = DVector::zeros(n);
        for (i, v) in Self::linear_coefs(problem, &problem.objective) {
            c[i] += v;
        }

        let mut bases: Vec<(usize, Field, Vec<Elem>)> = Vec::new();
        let mut register = |dim: usize, field: Field| {
            if !bases.iter().any(|(d, f, _)| *d == dim && *f == field) {
                bases.push((dim, field, basis(dim, field)));
            }
            if !bases.iter().any(|(d, f, _)| *d == dim && *f == Field::Complex) {
                bases.push((dim, Field::Complex, basis(dim, Field::Complex)));
            }
        };

        let mut lp = Vec::new();
        let mut cones = Vec::new();
        for v in &problem.vars {
            match v.kind {
                VarKind::NonNeg => lp.push(LpRow { coefs: vec![(v.offset, 1.0)], rhs: 0.0 }),
                VarKind::Psd { dim, field } => {
                    register(dim, field);
                    cones.push(Cone {
                        dim,
                        constant: CMat::zeros(dim, dim),
                        groups: vec![Group {
                            map: None,
                            map_h: None,
                            dim,
                            members: vec![Member { offset: v.offset, coeff: 1.0, field }],
                        }],
                        scalars: vec![],
                    });
                }
                VarKind::Free => {}
            }
        }
        let first_lmi = cones.len();
        for lmi in &problem.lmis {
            let mut groups = Vec::new();
            for g in &lmi.congruences {
                let mut members = Vec::new();
                let mut gdim = 0;
                for &(vid, coeff) in &g.members {
                    let v = &problem.vars[vid.0];
                    if let VarKind::Psd { dim, field } = v.kind {
                        register(dim, field);
                        gdim = dim;
                        members.push(Member { offset: v.offset, coeff, field });
                    }
                }
                if !members.is_empty() {
                    groups.push(Group { map: g.map.clone(), map_h: g.map.as_ref().map(|l| l.adjoint()), dim: gdim, members });
                }
            }
            let scalars = lmi
                .scalars
                .iter()
                .map(|(vid, d)| (problem.vars[vid.0].offset, d.as_matrix().clone()))
                .collect();
            cones.push(Cone { dim: lmi.dim(), constant: lmi.constant.as_matrix().clone(), groups, scalars });
        }

        let mut eq_rows = Vec::new();
        let mut b = Vec::new();
        for con in &problem.linear {
            let coefs = Self::linear_coefs(problem, &con.expr);
            match con.sense {
                Sense::GreaterEq => lp.push(LpRow { coefs, rhs: con.rhs }),
                Sense::Equal => {
                    eq_rows.push(coefs);
                    b.push(con.rhs);
                }
            }
        }
        let mut eq = DMatrix::zeros(eq_rows.len(), n);
        for (r, coefs) in eq_rows.iter().enumerate() {
            for &(i, v) in coefs {
                eq[(r, i)] += v;
            }
        }
        let degree = lp.len() as f64 + cones.iter().map(|c| c.dim as f64).sum::<f64>();
        Compiled { n, c, eq, b: DVector::from_vec(b), lp, cones, first_lmi, degree, bases }
    }

    fn zero_cone(&self) -> ConeVec {
        ConeVec {
            lp: DVector::zeros(self.lp.len()),
            psd: self.cones.iter().map(|c| CMat::zeros(c.dim, c.dim)).collect(),
        }
    }

    fn identity_cone(&self) -> ConeVec {
        ConeVec {
            lp: DVector::from_element(self.lp.len(), 1.0),
            psd: self.cones.iter().map(|c| CMat::identity(c.dim, c.dim)).collect(),
        }
    }

    fn h(&self) -> ConeVec {
        ConeVec {
            lp: DVector::from_iterator(self.lp.len(), self.lp.iter().map(|r| -r.rhs)),
            psd: self.cones.iter().map(|c| c.constant.clone()).collect(),
        }
    }

    /// `G x`, i.e. minus the linear part of every cone expression.
    fn g_apply(&self, x: &DVector<f64>) -> ConeVec {
        let lp = DVector::from_iterator(
            self.lp.len(),
            self.lp.iter().map(|r| -r.coefs.iter().map(|&(i, v)| v * x[i]).sum::<f64>()),
        );
        let psd = self
            .cones
            .iter()
            .map(|cone| {
                let mut acc = CMat::zeros(cone.dim, cone.dim);
                for g in &cone.groups {
                    let mut inner = CMat::zeros(g.dim, g.dim);
                    for m in &g.members {
                        let b = self.basis(g.dim, m.field);
                        inner += assemble(g.dim, b, &x.as_slice()[m.offset..m.offset + b.len()]) * C64::new(m.coeff, 0.0);
                    }
                    acc += match (&g.map, &g.map_h) {
                        (Some(l), Some(lh)) => sandwich(lh, &inner, l),
                        _ => inner,
                    };
                }
                for (j, d) in &cone.scalars {
                    acc += d * C64::new(x[*j], 0.0);
                }
                -acc
            })
            .collect();
        ConeVec { lp, psd }
    }

    /// `Gᵀ v`.
    fn gt_apply(&self, v: &ConeVec) -> DVector<f64> {
        let mut out = DVector::zeros(self.n);
        for (r, row) in self.lp.iter().enumerate() {
            for &(i, a) in &row.coefs {
                out[i] -= a * v.lp[r];
            }
        }
        for (cone, vm) in self.cones.iter().zip(&v.psd) {
            for g in &cone.groups {
                let m = match (&g.map, &g.map_h) {
                    (Some(l), Some(lh)) => sandwich(l, vm, lh),
                    _ => vm.clone(),
                };
                for mem in &g.members {
                    let b = self.basis(g.dim, mem.field);
                    project(b, &m, &mut out.as_mut_slice()[mem.offset..mem.offset + b.len()], -mem.coeff);
                }
            }
            for (j, d) in &cone.scalars {
                out[*j] -= herm_dot(d, vm);
            }
        }
        out
    }

    fn eq_apply(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.eq * x
    }

    fn eq_t_apply(&self, y: &DVector<f64>) -> DVector<f64> {
        self.eq.transpose() * y
    }

    /// Normal-equation matrix `Gᵀ (WᵀW)⁻¹ G`.
    fn schur(&self, w: &Scaling) -> DMatrix<f64> {
        let n = self.n;
        let mut h = DMatrix::<f64>::zeros(n, n);
        for (r, row) in self.lp.iter().enumerate() {
            let inv = 1.0 / (w.lp_w[r] * w.lp_w[r]);
            for &(i, a) in &row.coefs {
                for &(j, b) in &row.coefs {
                    h[(i, j)] += inv * a * b;
                }
            }
        }
        for (cone, sc) in self.cones.iter().zip(&w.psd) {
            let r = &sc.rr_inv;
            let mapped: Vec<(CMat, Option<&CMat>)> = cone
                .groups
                .iter()
                .map(|g| match (&g.map, &g.map_h) {
                    (Some(l), Some(lh)) => (cmul(l, r), Some(lh)),
                    _ => (r.clone(), None),
                })
                .collect();
            for t in 0..cone.groups.len() {
                let gt = &cone.groups[t];
                let bt = self.basis(gt.dim, Field::Complex);
                for u in t..cone.groups.len() {
                    let gu = &cone.groups[u];
                    let bu = self.basis(gu.dim, Field::Complex);
                    // P = L_t R L_uᴴ
                    let p = match mapped[u].1 {
                        Some(lh) => cmul(&mapped[t].0, lh),
                        None => mapped[t].0.clone(),
                    };
                    let k = pair_kernel(bt, bu, &p);
                    for mt in &gt.members {
                        let it = complex_index(gt.dim, mt.field);
                        for mu in &gu.members {
                            let iu = complex_index(gu.dim, mu.field);
                            let s = mt.coeff * mu.coeff;
                            for (a, &pa) in it.iter().enumerate() {
                                for (bb, &pb) in iu.iter().enumerate() {
                                    let val = s * k[(pa, pb)];
                                    h[(mt.offset + a, mu.offset + bb)] += val;
                                    if t != u {
                                        h[(mu.offset + bb, mt.offset + a)] += val;
                                    }
                                }
                            }
                        }
                    }
                }
                for (j, d) in &cone.scalars {
                    let rdr = sandwich(r, d, r);
                    let v = match (&gt.map, &gt.map_h) {
                        (Some(l), Some(lh)) => sandwich(l, &rdr, lh),
                        _ => rdr,
                    };
                    for mt in &gt.members {
                        let b = self.basis(gt.dim, mt.field);
                        let mut col = vec![0.0; b.len()];
                        project(b, &v, &mut col, mt.coeff);
                        for (a, val) in col.into_iter().enumerate() {
                            h[(mt.offset + a, *j)] += val;
                            h[(*j, mt.offset + a)] += val;
                        }
                    }
                }
            }
            let rdr: Vec<CMat> = cone.scalars.iter().map(|(_, d)| sandwich(r, d, r)).collect();
            for (j, dj) in &cone.scalars {
                for (bidx, (k, _)) in cone.scalars.iter().enumerate() {
                    h[(*j, *k)] += herm_dot(dj, &rdr[bidx]);
                }
            }
        }
        h
    }
}

/// Dense complex product on column-major storage; the generic operator is
/// slow for the tiny blocks used here.
fn cmul(a: &CMat, b: &CMat) -> CMat {
    let (n, k) = a.shape();
    let m = b.ncols();
    debug_assert_eq!(k, b.nrows());
    let mut out = CMat::zeros(n, m);
    let av = a.as_slice();
    let bv = b.as_slice();
    let ov = out.as_mut_slice();
    for j in 0..m {
        let col = &mut ov[j * n..(j + 1) * n];
        for p in 0..k {
            let bpj = bv[j * k + p];
            if bpj.re == 0.0 && bpj.im == 0.0 {
                continue;
            }
            let acol = &av[p * n..(p + 1) * n];
            for (o, x) in col.iter_mut().zip(acol) {
                o.re += x.re * bpj.re - x.im * bpj.im;
                o.im += x.re * bpj.im + x.im * bpj.re;
            }
        }
    }
    out
}

/// `A M B`.
fn sandwich(a: &CMat, m: &CMat, b: &CMat) -> CMat {
    cmul(&cmul(a, m), b)
}

/// `K[p, q] = Re Tr(E_p P E_q Pᴴ)` over complex bases.
fn pair_kernel(bt: &[Elem], bu: &[Elem], p: &CMat) -> DMatrix<f64> {
    let mut k = DMatrix::zeros(bt.len(), bu.len());
    for (i, ep) in bt.iter().enumerate() {
        for (j, eq) in bu.iter().enumerate() {
            let mut acc = 0.0;
            for &(a, r, c) in &ep.e[..ep.len] {
                for &(b, r2, c2) in &eq.e[..eq.len] {
                    acc += (a * b * p[(c, r2)] * p[(r, c2)].conj()).re;
                }
            }
            k[(i, j)] = acc;
        }
    }
    k
}

/// `Re Tr(A B)` for Hermitian `A`, `B`.
fn herm_dot(a: &CMat, b: &CMat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x * y.conj()).re).sum()
}

// ---------------------------------------------------------------------------
// Cone vectors and scaling
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
struct ConeVec {
    lp: DVector<f64>,
    psd: Vec<CMat>,
}

impl ConeVec {
    fn dot(&self, other: &ConeVec) -> f64 {
        self.lp.dot(&other.lp) + self.psd.iter().zip(&other.psd).map(|(a, b)| herm_dot(a, b)).sum::<f64>()
    }

    fn norm(&self) -> f64 {
        self.dot(self).max(0.0).sqrt()
    }

    fn axpy(&mut self, a: f64, other: &ConeVec) {
        self.lp.axpy(a, &other.lp, 1.0);
        for (m, o) in self.psd.iter_mut().zip(&other.psd) {
            *m += o * C64::new(a, 0.0);
        }
    }

    fn scaled(&self, a: f64) -> ConeVec {
        ConeVec { lp: &self.lp * a, psd: self.psd.iter().map(|m| m * C64::new(a, 0.0)).collect() }
    }

    fn sub(&self, other: &ConeVec) -> ConeVec {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    /// Largest `t` such that `-self + t e` touches the cone, i.e. the most
    /// negative eigenvalue of `self` negated.
    fn max_neg_eig(&self) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for v in self.lp.iter() {
            worst = worst.max(-v);
        }
        for m in &self.psd {
            if m.nrows() > 0 {
                let ev = hermitian_eigen(m).values;
                worst = worst.max(-ev[ev.len() - 1]);
            }
        }
        worst
    }

    fn add_identity(&mut self, t: f64) {
        self.lp.add_scalar_mut(t);
        for m in &mut self.psd {
            for i in 0..m.nrows() {
                m[(i, i)] += t;
            }
        }
    }
}

struct PsdScaling {
    r: CMat,
    rti: CMat,
    r_h: CMat,
    rti_h: CMat,
    /// `R Rᴴ`
    rr: CMat,
    /// `R⁻ᴴ R⁻¹`
    rr_inv: CMat,
    lambda: DVector<f64>,
}

impl PsdScaling {
    fn new(r: CMat, rti: CMat, lambda: DVector<f64>) -> Self {
        let r_h = r.adjoint();
        let rti_h = rti.adjoint();
        let rr = cmul(&r, &r_h);
        let rr_inv = cmul(&rti, &rti_h);
        PsdScaling { r, rti, r_h, rti_h, rr, rr_inv, lambda }
    }
}

struct Scaling {
    lp_w: DVector<f64>,
    lp_lambda: DVector<f64>,
    psd: Vec<PsdScaling>,
}

impl Scaling {
    fn identity(comp: &Compiled) -> Self {
        Scaling {
            lp_w: DVector::from_element(comp.lp.len(), 1.0),
            lp_lambda: DVector::from_element(comp.lp.len(), 1.0),
            psd: comp
                .cones
                .iter()
                .map(|c| {
                    PsdScaling::new(
                        CMat::identity(c.dim, c.dim),
                        CMat::identity(c.dim, c.dim),
                        DVector::from_element(c.dim, 1.0),
                    )
                })
                .collect(),
        }
    }

    /// Nesterov-Todd scaling point for interior `s`, `z`.
    fn nesterov_todd(s: &ConeVec, z: &ConeVec) -> Option<Self> {
        let mut lp_w = DVector::zeros(s.lp.len());
        let mut lp_lambda = DVector::zeros(s.lp.len());
        for i in 0..s.lp.len() {
            if !(s.lp[i] > 0.0 && z.lp[i] > 0.0) {
                return None;
            }
            lp_w[i] = (s.lp[i] / z.lp[i]).sqrt();
            lp_lambda[i] = (s.lp[i] * z.lp[i]).sqrt();
        }
        let mut psd = Vec::with_capacity(s.psd.len());
        for (sm, zm) in s.psd.iter().zip(&z.psd) {
            let n = sm.nrows();
            if n == 0 {
                psd.push(PsdScaling::new(CMat::zeros(0, 0), CMat::zeros(0, 0), DVector::zeros(0)));
                continue;
            }
            let l1 = Cholesky::new(hermitian_part(sm))?.l();
            let l2 = Cholesky::new(hermitian_part(zm))?.l();
            let svd = (l2.adjoint() * &l1).svd(true, true);
            let u = svd.u?;
            let v = svd.v_t?.adjoint();
            let lambda = svd.singular_values.clone();
            if lambda.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
                return None;
            }
            let mut scale = CMat::zeros(n, n);
            for i in 0..n {
                scale[(i, i)] = C64::new(1.0 / lambda[i].sqrt(), 0.0);
            }
            psd.push(PsdScaling::new(sandwich(&l1, &v, &scale), sandwich(&l2, &u, &scale), lambda));
        }
        Some(Scaling { lp_w, lp_lambda, psd })
    }

    /// `W v`
    fn w(&self, v: &ConeVec) -> ConeVec {
        ConeVec {
            lp: v.lp.component_mul(&self.lp_w),
            psd: self.psd.iter().zip(&v.psd).map(|(sc, m)| sandwich(&sc.r_h, m, &sc.r)).collect(),
        }
    }

    /// `Wᵀ v`
    fn wt(&self, v: &ConeVec) -> ConeVec {
        ConeVec {
            lp: v.lp.component_mul(&self.lp_w),
            psd: self.psd.iter().zip(&v.psd).map(|(sc, m)| sandwich(&sc.r, m, &sc.r_h)).collect(),
        }
    }

    /// `W⁻ᵀ v`
    fn winv_t(&self, v: &ConeVec) -> ConeVec {
        ConeVec {
            lp: v.lp.component_div(&self.lp_w),
            psd: self.psd.iter().zip(&v.psd).map(|(sc, m)| sandwich(&sc.rti_h, m, &sc.rti)).collect(),
        }
    }

    fn wtw(&self, v: &ConeVec) -> ConeVec {
        ConeVec {
            lp: v.lp.component_mul(&self.lp_w).component_mul(&self.lp_w),
            psd: self.psd.iter().zip(&v.psd).map(|(sc, m)| sandwich(&sc.rr, m, &sc.rr)).collect(),
        }
    }

    fn wtw_inv(&self, v: &ConeVec) -> ConeVec {
        ConeVec {
            lp: v.lp.component_div(&self.lp_w).component_div(&self.lp_w),
            psd: self.psd.iter().zip(&v.psd).map(|(sc, m)| sandwich(&sc.rr_inv, m, &sc.rr_inv)).collect(),
        }
    }

    /// `λ ∘ λ`
    fn lambda_sq(&self) -> ConeVec {
        ConeVec {
            lp: self.lp_lambda.component_mul(&self.lp_lambda),
            psd: self
                .psd
                .iter()
                .map(|sc| CMat::from_diagonal(&sc.lambda.map(|l| C64::new(l * l, 0.0))))
                .collect(),
        }
    }

    /// Solves `λ ∘ u = v` for `u`.
    fn lambda_solve(&self, v: &ConeVec) -> ConeVec {
        ConeVec {
            lp: v.lp.component_div(&self.lp_lambda),
            psd: self
                .psd
                .iter()
                .zip(&v.psd)
                .map(|(sc, m)| {
                    let n = m.nrows();
                    CMat::from_fn(n, n, |i, j| m[(i, j)] * (2.0 / (sc.lambda[i] + sc.lambda[j])))
                })
                .collect(),
        }
    }

    /// Largest step `α` with `λ + α v` still in the cone (scaled space).
    fn max_step(&self, v: &ConeVec) -> f64 {
        let mut min_ratio = f64::INFINITY;
        for i in 0..v.lp.len() {
            min_ratio = min_ratio.min(v.lp[i] / self.lp_lambda[i]);
        }
        for (sc, m) in self.psd.iter().zip(&v.psd) {
            let n = m.nrows();
            if n == 0 {
                continue;
            }
            let scaled = CMat::from_fn(n, n, |i, j| m[(i, j)] / (sc.lambda[i] * sc.lambda[j]).sqrt());
            let ev = hermitian_eigen(&scaled).values;
            min_ratio = min_ratio.min(ev[n - 1]);
        }
        if min_ratio < 0.0 {
            -1.0 / min_ratio
        } else {
            f64::INFINITY
        }
    }
}

fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// Symmetrized product `(AB + BA) / 2` (plain product on the orthant).
fn jordan(a: &ConeVec, b: &ConeVec) -> ConeVec {
    ConeVec {
        lp: a.lp.component_mul(&b.lp),
        psd: a.psd.iter().zip(&b.psd).map(|(x, y)| (cmul(x, y) + cmul(y, x)) * C64::new(0.5, 0.0)).collect(),
    }
}

// ---------------------------------------------------------------------------
// KKT solves
// ---------------------------------------------------------------------------

struct Kkt {
    chol: Cholesky<f64, Dyn>,
    /// `H⁻¹ Aᵀ`
    hinv_at: DMatrix<f64>,
    schur_eq: Option<Cholesky<f64, Dyn>>,
}

impl Kkt {
    fn factor(comp: &Compiled, w: &Scaling) -> Option<Self> {
        let mut h = comp.schur(w);
        let n = comp.n;
        // Symmetrize against rounding and fall back to a tiny ridge when a
        // free direction is not pinned down by any cone.
        let ht = h.transpose();
        h = (h + ht) * 0.5;
        let chol = match Cholesky::new(h.clone()) {
            Some(c) => c,
            None => {
                let scale = (0..n).map(|i| h[(i, i)].abs()).fold(1e-300, f64::max);
                for i in 0..n {
                    h[(i, i)] += 1e-13 * scale;
                }
                Cholesky::new(h)?
            }
        };
            let (hinv_at, schur_eq) = if comp.eq.nrows() > 0 {
            let hinv_at = chol.solve(&comp.eq.transpose());
            let s = &comp.eq * &hinv_at;
            (hinv_at, Some(Cholesky::new(s)?))
        } else {
            (DMatrix::zeros(n, 0), None)
        };
        Some(Kkt { chol, hinv_at, schur_eq })
    }

    fn solve_once(
        &self,
        comp: &Compiled,
        w: &Scaling,
        bx: &DVector<f64>,
        by: &DVector<f64>,
        bz: &ConeVec,
    ) -> (DVector<f64>, DVector<f64>, ConeVec) {
        let rhs1 = bx + comp.gt_apply(&w.wtw_inv(bz));
        let hinv_rhs = self.chol.solve(&rhs1);
        let (ux, uy) = match &self.schur_eq {
            Some(s) => {
                let uy = s.solve(&(&comp.eq * &hinv_rhs - by));
                let ux = &hinv_rhs - &self.hinv_at * &uy;
                (ux, uy)
            }
            None => (hinv_rhs, DVector::zeros(0)),
        };
        let uz = w.wtw_inv(&comp.g_apply(&ux).sub(bz));
        (ux, uy, uz)
    }

    /// Solves `[0 Aᵀ Gᵀ; A 0 0; G 0 −WᵀW] (ux, uy, uz) = (bx, by, bz)`.
    fn solve(
        &self,
        comp: &Compiled,
        w: &Scaling,
        bx: &DVector<f64>,
        by: &DVector<f64>,
        bz: &ConeVec,
        refinement: usize,
    ) -> (DVector<f64>, DVector<f64>, ConeVec) {
        let (mut ux, mut uy, mut uz) = self.solve_once(comp, w, bx, by, bz);
        let scale = bx.norm() + by.norm() + bz.norm();
        let mut prev = f64::INFINITY;
        // Refine while the residual is above rounding level and shrinking; the
        // normal equations lose accuracy near the boundary of the cone.
        for _ in 0..refinement {
            let rx = bx - comp.eq_t_apply(&uy) - comp.gt_apply(&uz);
            let ry = by - comp.eq_apply(&ux);
            let rz = bz.sub(&comp.g_apply(&ux).sub(&w.wtw(&uz)));
            let res = rx.norm() + ry.norm() + rz.norm();
            if res <= 1e-14 * scale || res >= 0.5 * prev {
                break;
            }
            prev = res;
            let (dx, dy, dz) = self.solve_once(comp, w, &rx, &ry, &rz);
            ux += dx;
            uy += dy;
            uz.axpy(1.0, &dz);
        }
        (ux, uy, uz)
    }
}

// ---------------------------------------------------------------------------
// Main loop
// ---------------------------------------------------------------------------

#[derive(Clone)]
struct Report {
    pres: f64,
    dres: f64,
    cert: f64,
    gap: f64,
    pcost: f64,
    dcost: f64,
}

pub(crate) fn solve(
    problem: &ConicProblem,
    settings: &SolverSettings,
    warm: Option<&Iterate>,
) -> Result<ConicSolution, SdpError> {
    let comp = Compiled::new(problem);
    let n = comp.n;
    let h = comp.h();
    let resx0 = comp.c.norm().max(1.0);
    let resy0 = comp.b.norm().max(1.0);
    let resz0 = h.norm().max(1.0);

    let (mut x, mut y, mut s, mut z, mut tau, mut kappa) = match warm {
        Some(it) => (
            DVector::from_column_slice(&it.x),
            DVector::from_column_slice(&it.y),
            ConeVec { lp: DVector::from_column_slice(&it.s_lp), psd: it.s_psd.clone() },
            ConeVec { lp: DVector::from_column_slice(&it.z_lp), psd: it.z_psd.clone() },
            1.0,
            it.kappa,
        ),
        None => {
            let (x, y, s, z) = initial_point(&comp, &h, settings).ok_or_else(|| {
                SdpError::InvalidProblem("normal equations are singular at the starting point".into())
            })?;
            (x, y, s, z, 1.0, 1.0)
        }
    };

    let mut iterations = 0;
    let mut last: Option<Report>;
    let mut status = SolveStatus::NumericalFailure;
    // Iterate with the smallest worst-case residual seen so far.
    let mut best: Option<(f64, Report, DVector<f64>, DVector<f64>, ConeVec, ConeVec, f64, f64)> = None;

    loop {
        // Residuals of the embedding.
        let aty = comp.eq_t_apply(&y);
        let gtz = comp.gt_apply(&z);
        let hrx = &aty + &gtz;
        let rx = &hrx + &comp.c * tau;
        let hry = comp.eq_apply(&x);
        let ry = &hry - &comp.b * tau;
        let mut hrz = comp.g_apply(&x);
        hrz.axpy(1.0, &s);
        let mut rz = hrz.clone();
        rz.axpy(-tau, &h);
        let cx = comp.c.dot(&x);
        let by = comp.b.dot(&y);
        let hz = h.dot(&z);
        let rt = kappa + cx + by + hz;

        let gap = s.dot(&z) / (tau * tau);
        let pcost = cx / tau;
        let dcost = -(by + hz) / tau;
        let pres = (ry.norm() / resy0).max(rz.norm() / resz0) / tau;
        let dres = rx.norm() / resx0 / tau;
        let relgap = if pcost < 0.0 {
            Some(gap / -pcost)
        } else if dcost > 0.0 {
            Some(gap / dcost)
        } else {
            None
        };
        let pinf = if hz + by < 0.0 { Some(hrx.norm() / resx0 / -(hz + by)) } else { None };
        let dinf = if cx < 0.0 {
            Some((hry.norm() / resy0).max(hrz.norm() / resz0) / -cx)
        } else {
            None
        };

        let report = Report { pres, dres, cert: f64::NAN, gap, pcost, dcost };
        if pres <= settings.feas_tol
            && dres <= settings.feas_tol
            && (gap <= settings.abs_tol || relgap.is_some_and(|r| r <= settings.rel_tol))
        {
            status = SolveStatus::Optimal;
            last = Some(report);
            break;
        }
        // A certificate needs κ to dominate; when τ and κ both vanish the
        // embedding has collapsed and the ratios are noise.
        let certifiable = kappa >= tau && kappa >= CERT_KAPPA_MIN;
        if let Some(pi) = pinf.filter(|v| certifiable && *v <= settings.feas_tol) {
            status = SolveStatus::Infeasible;
            last = Some(Report { cert: pi, ..report });
            break;
        }
        if let Some(di) = dinf.filter(|v| certifiable && *v <= settings.feas_tol) {
            status = SolveStatus::Unbounded;
            last = Some(Report { cert: di, ..report });
            break;
        }
        last = Some(Report { cert: pinf.or(dinf).unwrap_or(f64::NAN), ..report });
        let merit = pres.max(dres).max(relgap.unwrap_or(gap).min(gap));
        if merit.is_finite() && best.as_ref().is_none_or(|b| merit < b.0) {
            best = Some((merit, report.clone(), x.clone(), y.clone(), s.clone(), z.clone(), tau, kappa));
        }
        if iterations >= settings.max_iter {
            break;
        }

        let Some(w) = Scaling::nesterov_todd(&s, &z) else { break };
        let Some(kkt) = Kkt::factor(&comp, &w) else { break };
        let mu = (s.dot(&z) + tau * kappa) / (comp.degree + 1.0);
        let lambda_sq = w.lambda_sq();

        // (x1, y1, z1) solves K (x1, y1, z1) = (−c, b, h).
        let (x1, y1, z1) = kkt.solve(&comp, &w, &(-&comp.c), &comp.b, &h, settings.refinement_steps);
        let denom_base = comp.c.dot(&x1) + comp.b.dot(&y1) + h.dot(&z1);

        let newton = |eta: f64, rs: &ConeVec, rk: f64| {
            // λ ∘ (ds̃ + dz̃) = rs,  κ dτ + τ dκ = rk
            let ts = w.lambda_solve(rs);
            let wt_ts = w.wt(&ts);
            let bx = &rx * -eta;
            let byv = &ry * -eta;
            let mut bz = rz.scaled(-eta);
            bz.axpy(-1.0, &wt_ts);
            let (x0, y0, z0) = kkt.solve(&comp, &w, &bx, &byv, &bz, settings.refinement_steps);
            let rhs_t = -eta * rt - rk / tau;
            let dtau = (rhs_t - (comp.c.dot(&x0) + comp.b.dot(&y0) + h.dot(&z0))) / (denom_base - kappa / tau);
            let dx = x0 + &x1 * dtau;
            let dy = y0 + &y1 * dtau;
            let mut dz = z0;
            dz.axpy(dtau, &z1);
            // ds = Wᵀ ts − WᵀW dz
            let ds = wt_ts.sub(&w.wtw(&dz));
            let dkappa = (rk - kappa * dtau) / tau;
            (dx, dy, dz, ds, dtau, dkappa)
        };

        let step_len = |dz: &ConeVec, ds: &ConeVec, dtau: f64, dkappa: f64| {
            let mut a = w.max_step(&w.winv_t(ds)).min(w.max_step(&w.w(dz)));
            if dtau < 0.0 {
                a = a.min(-tau / dtau);
            }
            if dkappa < 0.0 {
                a = a.min(-kappa / dkappa);
            }
            a
        };

        // Predictor.
        let rs_aff = lambda_sq.scaled(-1.0);
        let (_, _, dz_a, ds_a, dtau_a, dkappa_a) = newton(1.0, &rs_aff, -tau * kappa);
        let alpha_a = step_len(&dz_a, &ds_a, dtau_a, dkappa_a).min(1.0);
        let sigma = (1.0 - alpha_a).clamp(0.0, 1.0).powi(3);

        // Corrector.
        let corr = jordan(&w.winv_t(&ds_a), &w.w(&dz_a));
        let mut rs = lambda_sq.scaled(-1.0);
        rs.axpy(sigma * mu, &comp.identity_cone());
        rs.axpy(-1.0, &corr);
        let rk = -tau * kappa + sigma * mu - dtau_a * dkappa_a;
        let (dx, dy, dz, ds, dtau, dkappa) = newton(1.0 - sigma, &rs, rk);
        let alpha_max = step_len(&dz, &ds, dtau, dkappa);
        let mut alpha = (settings.step_fraction * alpha_max).min(1.0);
        if !(alpha > 1e-14) {
            break;
        }

        // Backtrack if rounding pushes an iterate out of the cone.
        let mut accepted = false;
        for _ in 0..8 {
            let mut s_new = s.clone();
            s_new.axpy(alpha, &ds);
            let mut z_new = z.clone();
            z_new.axpy(alpha, &dz);
            if Scaling::nesterov_todd(&s_new, &z_new).is_some() {
                x.axpy(alpha, &dx, 1.0);
                y.axpy(alpha, &dy, 1.0);
                s = s_new;
                z = z_new;
                tau += alpha * dtau;
                kappa += alpha * dkappa;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        iterations += 1;
        if !accepted || !(tau > 0.0) || !(kappa > 0.0) {
            break;
        }
    }

    if status == SolveStatus::NumericalFailure {
        if let Some((merit, rep, bx, by, bs, bz, btau, bkappa)) = best {
            if merit <= settings.inaccurate_factor * settings.feas_tol.max(settings.rel_tol) {
                status = SolveStatus::NearOptimal;
                last = Some(rep);
                (x, y, s, z, tau, kappa) = (bx, by, bs, bz, btau, bkappa);
            }
        }
    }
    let report = last.expect("at least one residual evaluation");
    // Normalize: solution for optimal, certificate for infeasible/unbounded.
    let scale = match status {
        SolveStatus::Infeasible => {
            let t = -(comp.b.dot(&y) + h.dot(&z));
            1.0 / t
        }
        SolveStatus::Unbounded => 1.0 / -comp.c.dot(&x),
        _ => 1.0 / tau,
    };
    let xs = &x * scale;
    let lmi_duals = z.psd[comp.first_lmi..]
        .iter()
        .map(|m| HermitianMatrix::symmetrize(m * C64::new(scale, 0.0)))
        .collect();
    let iterate = Iterate {
        x: (&x / tau).as_slice().to_vec(),
        y: (&y / tau).as_slice().to_vec(),
        s_lp: (&s.lp / tau).as_slice().to_vec(),
        z_lp: (&z.lp / tau).as_slice().to_vec(),
        s_psd: s.psd.iter().map(|m| m / C64::new(tau, 0.0)).collect(),
        z_psd: z.psd.iter().map(|m| m / C64::new(tau, 0.0)).collect(),
        kappa: kappa / tau,
    };
    debug_assert_eq!(xs.len(), n);
    Ok(ConicSolution {
        status,
        objective: if matches!(status, SolveStatus::Optimal | SolveStatus::NearOptimal) { comp.c.dot(&xs) } else { report.pcost },
        dual_objective: report.dcost,
        primal_residual: report.pres,
        dual_residual: report.dres,
        certificate_residual: report.cert,
        gap: report.gap,
        iterations,
        values: xs.as_slice().to_vec(),
        vars: problem.vars.clone(),
        lmi_duals,
        iterate,
    })
}

fn initial_point(
    comp: &Compiled,
    h: &ConeVec,
    settings: &SolverSettings,
) -> Option<(DVector<f64>, DVector<f64>, ConeVec, ConeVec)> {
    let n = comp.n;
    let w = Scaling::identity(comp);
    let kkt = Kkt::factor(comp, &w)?;
    // Primal: minimize ‖Gx − h‖ s.t. Ax = b; s = h − Gx.
    let (x, _, zp) = kkt.solve(comp, &w, &DVector::zeros(n), &comp.b, h, settings.refinement_steps);
    let mut s = zp.scaled(-1.0);
    // Dual: minimize ‖z‖ s.t. Gᵀz + Aᵀy + c = 0.
    let (_, y, mut z) = kkt.solve(comp, &w, &(-&comp.c), &DVector::zeros(comp.eq.nrows()), &comp.zero_cone(), settings.refinement_steps);
    for v in [&mut s, &mut z] {
        let t = v.max_neg_eig();
        let nrm = v.norm();
        if t >= -1e-8 * nrm.max(1.0) {
            v.add_identity(1.0 + t);
        }
    }
    Some((x, y, s, z))
}
