//! Linear SDP reformulations of the primal (estimator) and dual (prior)
//! problems, written in SDPA sparse format for external solvers.
//!
//! SDPA problems read
//!
//! ```text
//! minimize  Σᵢ cᵢ xᵢ   subject to   Σᵢ Fᵢ xᵢ − F₀ ⪰ 0,
//! ```
//!
//! with free variables `x` and block-diagonal symmetric `Fᵢ`. All sign
//! constraints of the reformulations are implied by their linear matrix
//! inequalities, so no variable splitting is needed.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::dual::objective::Evaluation;
use crate::dual::{CovariancePair, ProblemInstance};
use crate::error::{Error, Result};
use crate::linalg::{psd_sqrt, sym_eig, PsdMatrix, SymmetricMatrix, ABS_FLOOR};

/// One nonzero of a constraint matrix: matrix `matrix` (0 for `F₀`), block
/// `block`, position `(i, j)` with `i ≤ j`; all indices 1-based.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdpEntry {
    pub matrix: usize,
    pub block: usize,
    pub i: usize,
    pub j: usize,
    pub value: f64,
}

/// An SDP in SDPA form.
#[derive(Debug, Clone, PartialEq)]
pub struct SdpProblem {
    /// Header lines including their leading `*` or `"`.
    pub comments: Vec<String>,
    /// Block dimensions; negative for diagonal blocks.
    pub block_sizes: Vec<i64>,
    /// Cost vector `c`.
    pub objective: Vec<f64>,
    /// Nonzeros ordered by matrix, block, row, column.
    pub entries: Vec<SdpEntry>,
}

impl SdpProblem {
    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    /// `cᵀ x`.
    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// The blocks of `Σᵢ Fᵢ xᵢ − F₀` as dense symmetric matrices.
    pub fn evaluate(&self, x: &[f64]) -> Result<Vec<DMatrix<f64>>> {
        if x.len() != self.num_vars() {
            return Err(crate::error::dim_mismatch("SDP point", self.num_vars(), x.len()));
        }
        let mut blocks: Vec<DMatrix<f64>> = self
            .block_sizes
            .iter()
            .map(|&s| DMatrix::zeros(s.unsigned_abs() as usize, s.unsigned_abs() as usize))
            .collect();
        for e in &self.entries {
            let coef = if e.matrix == 0 { -1.0 } else { x[e.matrix - 1] };
            let b = &mut blocks[e.block - 1];
            let (i, j) = (e.i - 1, e.j - 1);
            b[(i, j)] += coef * e.value;
            if i != j {
                b[(j, i)] += coef * e.value;
            }
        }
        Ok(blocks)
    }

    /// Smallest eigenvalue of every block of `Σᵢ Fᵢ xᵢ − F₀`.
    pub fn min_eigenvalues(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self
            .evaluate(x)?
            .into_iter()
            .map(|b| sym_eig(&SymmetricMatrix::symmetrized(b)).min())
            .collect())
    }

    /// SDPA sparse text.
    pub fn to_sdpa(&self) -> String {
        let mut out = String::new();
        for c in &self.comments {
            out.push_str(c);
            out.push('\n');
        }
        let _ = writeln!(out, "{}", self.num_vars());
        let _ = writeln!(out, "{}", self.block_sizes.len());
        let sizes: Vec<String> = self.block_sizes.iter().map(|s| s.to_string()).collect();
        let _ = writeln!(out, "{}", sizes.join(" "));
        let costs: Vec<String> = self.objective.iter().map(|&c| fmt_num(c)).collect();
        let _ = writeln!(out, "{}", costs.join(" "));
        for e in &self.entries {
            let _ = writeln!(out, "{} {} {} {} {}", e.matrix, e.block, e.i, e.j, fmt_num(e.value));
        }
        out
    }

    /// Parses SDPA sparse text.
    pub fn parse(text: &str) -> Result<Self> {
        let mut comments = Vec::new();
        let mut body = String::new();
        let mut in_header = true;
        for line in text.lines() {
            if in_header && (line.starts_with('*') || line.starts_with('"')) {
                comments.push(line.to_string());
                continue;
            }
            in_header = false;
            body.push_str(line);
            body.push('\n');
        }
        let cleaned: String = body
            .chars()
            .map(|c| if matches!(c, '{' | '}' | '(' | ')' | ',') { ' ' } else { c })
            .collect();
        let mut tokens = cleaned.split_whitespace();
        let mut next = |what: &str| {
            tokens
                .next()
                .ok_or_else(|| Error::Parse(format!("unexpected end of input reading {what}")))
        };
        let parse_usize = |t: &str, what: &str| {
            t.parse::<usize>()
                .map_err(|_| Error::Parse(format!("invalid {what}: {t:?}")))
        };
        let parse_f64 = |t: &str, what: &str| {
            t.parse::<f64>()
                .map_err(|_| Error::Parse(format!("invalid {what}: {t:?}")))
        };
        let m = parse_usize(next("variable count")?, "variable count")?;
        let nblocks = parse_usize(next("block count")?, "block count")?;
        let mut block_sizes = Vec::with_capacity(nblocks);
        for _ in 0..nblocks {
            let t = next("block size")?;
            let s = t
                .parse::<i64>()
                .map_err(|_| Error::Parse(format!("invalid block size: {t:?}")))?;
            if s == 0 {
                return Err(Error::Parse("block size must be nonzero".into()));
            }
            block_sizes.push(s);
        }
        let mut objective = Vec::with_capacity(m);
        for _ in 0..m {
            objective.push(parse_f64(next("cost")?, "cost")?);
        }
        let rest: Vec<&str> = tokens.collect();
        if !rest.len().is_multiple_of(5) {
            return Err(Error::Parse("trailing tokens do not form complete entries".into()));
        }
        let mut entries = Vec::with_capacity(rest.len() / 5);
        for chunk in rest.chunks(5) {
            let e = SdpEntry {
                matrix: parse_usize(chunk[0], "matrix number")?,
                block: parse_usize(chunk[1], "block number")?,
                i: parse_usize(chunk[2], "row")?,
                j: parse_usize(chunk[3], "column")?,
                value: parse_f64(chunk[4], "value")?,
            };
            if e.matrix > m || e.block == 0 || e.block > nblocks {
                return Err(Error::Parse(format!("entry references missing matrix or block: {chunk:?}")));
            }
            let size = block_sizes[e.block - 1];
            let dim = size.unsigned_abs() as usize;
            if e.i == 0 || e.j == 0 || e.i > dim || e.j > dim {
                return Err(Error::Parse(format!("entry outside its block: {chunk:?}")));
            }
            if size < 0 && e.i != e.j {
                return Err(Error::Parse(format!("off-diagonal entry in diagonal block: {chunk:?}")));
            }
            entries.push(e);
        }
        Ok(Self {
            comments,
            block_sizes,
            objective,
            entries,
        })
    }
}

/// Shortest round-trip decimal, switching to exponent notation for very
/// large or small magnitudes.
fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        "0".to_string()
    } else if (1e-6..1e15).contains(&x.abs()) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// Accumulates symmetric constraint matrices by their upper triangles.
struct Builder {
    block_sizes: Vec<i64>,
    cells: BTreeMap<(usize, usize, usize, usize), f64>,
}

impl Builder {
    fn new(block_sizes: Vec<i64>) -> Self {
        Self {
            block_sizes,
            cells: BTreeMap::new(),
        }
    }

    /// Adds `v` to entry `(i, j)` (0-based, either order) of block `block`
    /// (0-based) of matrix `matrix` (0 for `F₀`, else variable index + 1).
    fn add(&mut self, matrix: usize, block: usize, i: usize, j: usize, v: f64) {
        if v == 0.0 {
            return;
        }
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        debug_assert!(i < self.block_sizes[block].unsigned_abs() as usize);
        *self.cells.entry((matrix, block + 1, i + 1, j + 1)).or_insert(0.0) += v;
    }

    /// Adds the constant term `c` of the constraint, that is `F₀ −= c`.
    fn constant(&mut self, block: usize, i: usize, j: usize, c: f64) {
        self.add(0, block, i, j, -c);
    }

    fn finish(self, comments: Vec<String>, objective: Vec<f64>) -> SdpProblem {
        let entries = self
            .cells
            .into_iter()
            .filter(|(_, v)| *v != 0.0)
            .map(|((matrix, block, i, j), value)| SdpEntry {
                matrix,
                block,
                i,
                j,
                value,
            })
            .collect();
        SdpProblem {
            comments,
            block_sizes: self.block_sizes,
            objective,
            entries,
        }
    }
}

/// Indices of the upper triangle `(p, q)`, `p ≤ q`, row-major.
fn upper_pairs(d: usize) -> Vec<(usize, usize)> {
    (0..d).flat_map(|p| (p..d).map(move |q| (p, q))).collect()
}

/// Variable numbers (1-based) of a symmetric matrix variable stored by its
/// upper triangle starting after `offset` variables.
struct SymVar {
    offset: usize,
    dim: usize,
}

impl SymVar {
    fn len(&self) -> usize {
        self.dim * (self.dim + 1) / 2
    }

    fn pairs(&self) -> impl Iterator<Item = (usize, (usize, usize))> + '_ {
        upper_pairs(self.dim)
            .into_iter()
            .enumerate()
            .map(move |(k, pq)| (self.offset + k + 1, pq))
    }

    fn index(&self, p: usize, q: usize) -> usize {
        let (p, q) = if p <= q { (p, q) } else { (q, p) };
        let row_start: usize = (0..p).map(|r| self.dim - r).sum();
        self.offset + row_start + (q - p) + 1
    }

    /// Writes the symmetric matrix `m` into `x`.
    fn store(&self, m: &DMatrix<f64>, x: &mut [f64]) {
        for (var, (p, q)) in self.pairs() {
            x[var - 1] = m[(p, q)];
        }
    }
}

fn header(kind: &str, instance: &ProblemInstance, layout: &str) -> Vec<String> {
    vec![
        format!("* wmmse {kind} SDP"),
        format!("* instance sha256 {}", instance.fingerprint()),
        format!("* rho_x {} rho_w {}", fmt_num(instance.rho_x()), fmt_num(instance.rho_w())),
        format!("* variables {layout}"),
    ]
}

/// Lower Cholesky factor of a PSD matrix.
fn cholesky_factor(s: &PsdMatrix, what: &str) -> Result<DMatrix<f64>> {
    s.as_matrix()
        .clone()
        .cholesky()
        .map(|c| c.l())
        .ok_or_else(|| Error::NotPositiveDefinite(format!("{what} has no Cholesky factor")))
}

/// Primal SDP in `(A, γx, γw, Ux, Vx, Uw, Vw)`:
///
/// ```text
/// min γx(ρx² − Tr Σ̂x) + Tr Ux + γw(ρw² − Tr Σ̂w) + Tr Uw
/// s.t. [Ux, γx Sx; γx Sxᵀ, Vx] ⪰ 0,  [γx I − Vx, I − HᵀAᵀ; I − AH, I] ⪰ 0,
///      [Uw, γw Sw; γw Swᵀ, Vw] ⪰ 0,  [γw I − Vw, Aᵀ; A, I] ⪰ 0,
/// ```
///
/// where `S = Σ̂^{1/2}`, or `S = Λᵀ` for the lower Cholesky factor `Λ` of `Σ̂`
/// when `use_cholesky` is set.
///
/// Variables are numbered in this order: `A` row-major, `γx`, `γw`, then the
/// upper triangles (row-major) of `Ux`, `Vx`, `Uw`, `Vw`.
pub fn emit_primal_sdp(instance: &ProblemInstance, use_cholesky: bool) -> Result<SdpProblem> {
    let (n, m) = (instance.n(), instance.m());
    let h = instance.h();
    let (cov_x, cov_w) = (instance.nominal_x().cov(), instance.nominal_w().cov());
    let (sx, sw) = if use_cholesky {
        (
            cholesky_factor(cov_x, "nominal signal covariance")?.transpose(),
            cholesky_factor(cov_w, "nominal noise covariance")?.transpose(),
        )
    } else {
        (psd_sqrt(cov_x).into_inner(), psd_sqrt(cov_w).into_inner())
    };

    let a_var = |k: usize, l: usize| k * m + l + 1;
    let gx = n * m + 1;
    let gw = n * m + 2;
    let ux = SymVar { offset: n * m + 2, dim: n };
    let vx = SymVar { offset: ux.offset + ux.len(), dim: n };
    let uw = SymVar { offset: vx.offset + vx.len(), dim: m };
    let vw = SymVar { offset: uw.offset + uw.len(), dim: m };
    let nvars = vw.offset + vw.len();

    let mut b = Builder::new(vec![2 * n as i64, 2 * n as i64, 2 * m as i64, (m + n) as i64]);

    // Block 1: [Ux, γx Sx; γx Sxᵀ, Vx].
    for (var, (p, q)) in ux.pairs() {
        b.add(var, 0, p, q, 1.0);
    }
    for (var, (p, q)) in vx.pairs() {
        b.add(var, 0, n + p, n + q, 1.0);
    }
    for i in 0..n {
        for j in 0..n {
            b.add(gx, 0, i, n + j, sx[(i, j)]);
        }
    }

    // Block 2: [γx I − Vx, I − HᵀAᵀ; I − AH, I].
    for i in 0..n {
        b.add(gx, 1, i, i, 1.0);
        b.constant(1, i, n + i, 1.0);
        b.constant(1, n + i, n + i, 1.0);
    }
    for (var, (p, q)) in vx.pairs() {
        b.add(var, 1, p, q, -1.0);
    }
    for k in 0..n {
        for l in 0..m {
            // (HᵀAᵀ)_{ik} = Σ_l H_{li} A_{kl}.
            for i in 0..n {
                b.add(a_var(k, l), 1, i, n + k, -h[(l, i)]);
            }
        }
    }

    // Block 3: [Uw, γw Sw; γw Swᵀ, Vw].
    for (var, (p, q)) in uw.pairs() {
        b.add(var, 2, p, q, 1.0);
    }
    for (var, (p, q)) in vw.pairs() {
        b.add(var, 2, m + p, m + q, 1.0);
    }
    for i in 0..m {
        for j in 0..m {
            b.add(gw, 2, i, m + j, sw[(i, j)]);
        }
    }

    // Block 4: [γw I − Vw, Aᵀ; A, I].
    for l in 0..m {
        b.add(gw, 3, l, l, 1.0);
    }
    for (var, (p, q)) in vw.pairs() {
        b.add(var, 3, p, q, -1.0);
    }
    for k in 0..n {
        for l in 0..m {
            b.add(a_var(k, l), 3, l, m + k, 1.0);
        }
        b.constant(3, m + k, m + k, 1.0);
    }

    let mut c = vec![0.0; nvars];
    c[gx - 1] = instance.rho_x().powi(2) - cov_x.trace();
    c[gw - 1] = instance.rho_w().powi(2) - cov_w.trace();
    for p in 0..n {
        c[ux.index(p, p) - 1] = 1.0;
    }
    for p in 0..m {
        c[uw.index(p, p) - 1] = 1.0;
    }

    let kind = if use_cholesky { "primal (Cholesky factors)" } else { "primal" };
    let layout = format!(
        "A({n}x{m} row-major) gamma_x gamma_w Ux Vx Uw Vw (upper triangles row-major)"
    );
    Ok(b.finish(header(kind, instance, &layout), c))
}

/// Feasible point of [`emit_primal_sdp`] for sensitivity `a` and multipliers
/// with `γx I ≻ KᵀK` and `γw I ≻ AᵀA`: `V = γI − D` and `U = γ² S V⁻¹ Sᵀ`.
/// Its objective value equals the primal objective in `(A, γx, γw)`.
pub fn embed_primal_point(
    a: &DMatrix<f64>,
    gamma_x: f64,
    gamma_w: f64,
    instance: &ProblemInstance,
    use_cholesky: bool,
) -> Result<Vec<f64>> {
    let (n, m) = (instance.n(), instance.m());
    if a.nrows() != n || a.ncols() != m {
        return Err(crate::error::dim_mismatch("sensitivity matrix rows", n, a.nrows()));
    }
    let h = instance.h();
    let k = DMatrix::identity(n, n) - a * h;
    let block = |gamma: f64, d: DMatrix<f64>, cov: &PsdMatrix, what: &str| -> Result<_> {
        let dim = d.nrows();
        let v = DMatrix::identity(dim, dim) * gamma - d;
        let s = if use_cholesky {
            cholesky_factor(cov, what)?.transpose()
        } else {
            psd_sqrt(cov).into_inner()
        };
        let chol = v.clone().cholesky().ok_or(Error::OutOfDomain {
            gamma,
            bound: f64::NAN,
        })?;
        let u = &s * chol.solve(&s.transpose()) * (gamma * gamma);
        Ok((u, v))
    };
    let (u_x, v_x) = block(gamma_x, k.transpose() * &k, instance.nominal_x().cov(), "signal")?;
    let (u_w, v_w) = block(gamma_w, a.transpose() * a, instance.nominal_w().cov(), "noise")?;

    let ux = SymVar { offset: n * m + 2, dim: n };
    let vx = SymVar { offset: ux.offset + ux.len(), dim: n };
    let uw = SymVar { offset: vx.offset + vx.len(), dim: m };
    let vw = SymVar { offset: uw.offset + uw.len(), dim: m };
    let mut x = vec![0.0; vw.offset + vw.len()];
    for kk in 0..n {
        for l in 0..m {
            x[kk * m + l] = a[(kk, l)];
        }
    }
    x[n * m] = gamma_x;
    x[n * m + 1] = gamma_w;
    ux.store(&SymmetricMatrix::symmetrized(u_x).into_inner(), &mut x);
    vx.store(&v_x, &mut x);
    uw.store(&SymmetricMatrix::symmetrized(u_w).into_inner(), &mut x);
    vw.store(&v_w, &mut x);
    Ok(x)
}

struct DualLayout {
    sx: SymVar,
    sw: SymVar,
    vx: SymVar,
    vw: SymVar,
    u: SymVar,
}

impl DualLayout {
    fn new(n: usize, m: usize) -> Self {
        let sx = SymVar { offset: 0, dim: n };
        let sw = SymVar { offset: sx.len(), dim: m };
        let vx = SymVar { offset: sw.offset + sw.len(), dim: n };
        let vw = SymVar { offset: vx.offset + vx.len(), dim: m };
        let u = SymVar { offset: vw.offset + vw.len(), dim: n };
        Self { sx, sw, vx, vw, u }
    }

    fn nvars(&self) -> usize {
        self.u.offset + self.u.len()
    }
}

/// Adds `[R E R, V; V, I]` for the symmetric matrix variable `s` (with
/// `E = E_pq + E_qp`) and `v` into `block` of size `2d`.
fn add_sqrt_block(b: &mut Builder, block: usize, root: &DMatrix<f64>, s: &SymVar, v: &SymVar) {
    let d = s.dim;
    for (var, (p, q)) in s.pairs() {
        for i in 0..d {
            for j in i..d {
                let val = if p == q {
                    root[(i, p)] * root[(p, j)]
                } else {
                    root[(i, p)] * root[(q, j)] + root[(i, q)] * root[(p, j)]
                };
                b.add(var, block, i, j, val);
            }
        }
    }
    for (var, (p, q)) in v.pairs() {
        b.add(var, block, p, d + q, 1.0);
        if p != q {
            b.add(var, block, q, d + p, 1.0);
        }
    }
    for i in 0..d {
        b.constant(block, d + i, d + i, 1.0);
    }
}

/// Dual SDP in `(Σx, Σw, Vx, Vw, U)`:
///
/// ```text
/// max Tr Σx − Tr U
/// s.t. [Σ̂x^{1/2} Σx Σ̂x^{1/2}, Vx; Vx, I] ⪰ 0,  [Σ̂w^{1/2} Σw Σ̂w^{1/2}, Vw; Vw, I] ⪰ 0,
///      Tr[Σx + Σ̂x − 2Vx] ≤ ρx²,  Tr[Σw + Σ̂w − 2Vw] ≤ ρw²,
///      [U, Σx Hᵀ; H Σx, H Σx Hᵀ + Σw] ⪰ 0,
///      Σx ⪰ λ_min(Σ̂x) I,  Σw ⪰ λ_min(Σ̂w) I,  Vx ⪰ 0,  Vw ⪰ 0,
/// ```
///
/// written as the minimization of `−Tr Σx + Tr U`. The two trace
/// inequalities share one diagonal block. Variables are the upper triangles
/// (row-major) of `Σx`, `Σw`, `Vx`, `Vw`, `U` in this order.
pub fn emit_dual_sdp(instance: &ProblemInstance) -> Result<SdpProblem> {
    let (n, m) = (instance.n(), instance.m());
    let h = instance.h();
    let (bx, bw) = (instance.ball_x(), instance.ball_w());
    let w_eig = sym_eig(bw.nominal_cov().as_symmetric());
    if w_eig.min() <= ABS_FLOOR * w_eig.max().max(1.0) {
        return Err(Error::NotPositiveDefinite(
            "nominal noise covariance must be positive definite".into(),
        ));
    }
    let lay = DualLayout::new(n, m);
    let (ni, mi) = (n as i64, m as i64);
    let mut b = Builder::new(vec![2 * ni, 2 * mi, -2, ni + mi, ni, mi, ni, mi]);

    add_sqrt_block(&mut b, 0, bx.sqrt_cov().as_matrix(), &lay.sx, &lay.vx);
    add_sqrt_block(&mut b, 1, bw.sqrt_cov().as_matrix(), &lay.sw, &lay.vw);

    // Block 3: ρ² − Tr Σ − Tr Σ̂ + 2 Tr V ≥ 0 for both marginals.
    for (slot, ball, s, v) in [(0, bx, &lay.sx, &lay.vx), (1, bw, &lay.sw, &lay.vw)] {
        for p in 0..s.dim {
            b.add(s.index(p, p), 2, slot, slot, -1.0);
            b.add(v.index(p, p), 2, slot, slot, 2.0);
        }
        b.constant(2, slot, slot, ball.radius().powi(2) - ball.nominal_trace());
    }

    // Block 4: [U, Σx Hᵀ; H Σx, H Σx Hᵀ + Σw].
    for (var, (p, q)) in lay.u.pairs() {
        b.add(var, 3, p, q, 1.0);
    }
    for (var, (p, q)) in lay.sx.pairs() {
        let mut e = DMatrix::zeros(n, n);
        e[(p, q)] = 1.0;
        e[(q, p)] = 1.0;
        let eh = &e * h.transpose();
        let heh = h * &eh;
        for i in 0..n {
            for j in 0..m {
                b.add(var, 3, i, n + j, eh[(i, j)]);
            }
        }
        for i in 0..m {
            for j in i..m {
                b.add(var, 3, n + i, n + j, heh[(i, j)]);
            }
        }
    }
    for (var, (p, q)) in lay.sw.pairs() {
        b.add(var, 3, n + p, n + q, 1.0);
    }

    // Blocks 5–8: Σ ⪰ λ_min(Σ̂) I and V ⪰ 0.
    for (block, ball, s) in [(4, bx, &lay.sx), (5, bw, &lay.sw)] {
        for (var, (p, q)) in s.pairs() {
            b.add(var, block, p, q, 1.0);
        }
        for i in 0..s.dim {
            b.constant(block, i, i, -ball.lambda_min());
        }
    }
    for (block, v) in [(6, &lay.vx), (7, &lay.vw)] {
        for (var, (p, q)) in v.pairs() {
            b.add(var, block, p, q, 1.0);
        }
    }

    let mut c = vec![0.0; lay.nvars()];
    for p in 0..n {
        c[lay.sx.index(p, p) - 1] = -1.0;
        c[lay.u.index(p, p) - 1] = 1.0;
    }
    let layout = "Sigma_x Sigma_w Vx Vw U (upper triangles row-major)";
    Ok(b.finish(header("dual", instance, layout), c))
}

/// Point of [`emit_dual_sdp`] built from a covariance pair, with
/// `V = (Σ̂^{1/2} Σ Σ̂^{1/2})^{1/2}` and `U = Σx Hᵀ G⁻¹ H Σx`.
pub fn embed_dual_point(pair: &CovariancePair, instance: &ProblemInstance) -> Result<Vec<f64>> {
    let (n, m) = (instance.n(), instance.m());
    let h = instance.h();
    let eval = Evaluation::new(pair, h)?;
    let u = &eval.gain * h * pair.sigma_x.as_matrix();
    let cross = |root: &PsdMatrix, s: &PsdMatrix| {
        psd_sqrt(&PsdMatrix::from_psd_product(root.as_matrix() * s.as_matrix() * root.as_matrix()))
    };
    let v_x = cross(instance.ball_x().sqrt_cov(), &pair.sigma_x);
    let v_w = cross(instance.ball_w().sqrt_cov(), &pair.sigma_w);
    let lay = DualLayout::new(n, m);
    let mut x = vec![0.0; lay.nvars()];
    lay.sx.store(pair.sigma_x.as_matrix(), &mut x);
    lay.sw.store(pair.sigma_w.as_matrix(), &mut x);
    lay.vx.store(v_x.as_matrix(), &mut x);
    lay.vw.store(v_w.as_matrix(), &mut x);
    lay.u.store(&SymmetricMatrix::symmetrized(u).into_inner(), &mut x);
    Ok(x)
}
