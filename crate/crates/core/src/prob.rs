//! Finite-alphabet probability tables and information measures.
//!
//! Everything downstream is built from three dense types: [`FiniteDist`]
//! (a validated probability vector), [`FiniteKernel`] (a row-stochastic
//! conditional table with multi-dimensional conditioning and output), and
//! [`JointDist`] (a named-axis dense joint). All information quantities
//! are returned in nats; unit conversion is a presentation concern.

use thiserror::Error;

/// Tolerance for a distribution summing to one.
pub const DIST_MASS_TOL: f64 = 1e-12;
/// Tolerance for a joint's total mass.
pub const JOINT_MASS_TOL: f64 = 1e-10;
/// Hard cap on dense table sizes.
pub const MAX_TABLE_ENTRIES: usize = 100_000_000;

#[derive(Debug, Error)]
pub enum ProbError {
    #[error("negative probability {value} at index {index}")]
    NegativeEntry { index: usize, value: f64 },
    #[error("probabilities sum to {sum}, expected 1 within {tol}")]
    BadMass { sum: f64, tol: f64 },
    #[error("kernel row {row} sums to {sum}, expected 1 within {tol}")]
    NonStochasticRow { row: usize, sum: f64, tol: f64 },
    #[error("kernel row {row} has negative entry {value}")]
    NegativeRowEntry { row: usize, value: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("unknown axis `{0}`")]
    UnknownAxis(String),
    #[error("duplicate axis `{0}`")]
    DuplicateAxis(String),
    #[error("axis sets must be disjoint (axis `{0}` appears twice)")]
    OverlappingAxes(String),
    #[error("outcome has zero probability under the joint")]
    ZeroProbabilityOutcome,
    #[error("table would hold {entries} entries, cap is {cap}")]
    TooManyEntries { entries: usize, cap: usize },
    #[error("empty input: {0}")]
    EmptyInput(String),
}

pub type Result<T> = std::result::Result<T, ProbError>;

// ---------------------------------------------------------------------------
// Index helpers
// ---------------------------------------------------------------------------

/// Row-major strides for the given dimension sizes.
pub(crate) fn strides(sizes: &[usize]) -> Vec<usize> {
    let mut s = vec![1usize; sizes.len()];
    for i in (0..sizes.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * sizes[i + 1];
    }
    s
}

/// Flat row-major index of a multi-index.
pub(crate) fn flat_index(sizes: &[usize], idx: &[usize]) -> usize {
    debug_assert_eq!(sizes.len(), idx.len());
    let mut f = 0;
    for (i, &x) in idx.iter().enumerate() {
        debug_assert!(x < sizes[i]);
        f = f * sizes[i] + x;
    }
    f
}

/// Advances `idx` to the next multi-index in row-major order.
/// Returns false once the iteration wraps around.
pub(crate) fn next_index(sizes: &[usize], idx: &mut [usize]) -> bool {
    for i in (0..sizes.len()).rev() {
        idx[i] += 1;
        if idx[i] < sizes[i] {
            return true;
        }
        idx[i] = 0;
    }
    false
}

fn checked_product(sizes: &[usize]) -> Result<usize> {
    let mut p: usize = 1;
    for &s in sizes {
        p = p
            .checked_mul(s)
            .filter(|&p| p <= MAX_TABLE_ENTRIES)
            .ok_or(ProbError::TooManyEntries {
                entries: usize::MAX,
                cap: MAX_TABLE_ENTRIES,
            })?;
    }
    Ok(p)
}

// ---------------------------------------------------------------------------
// FiniteDist
// ---------------------------------------------------------------------------

/// A probability distribution over an indexed finite alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteDist {
    probs: Vec<f64>,
}

impl FiniteDist {
    /// Validates non-negativity and unit mass (within [`DIST_MASS_TOL`]).
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(ProbError::EmptyInput("distribution".into()));
        }
        for (i, &p) in probs.iter().enumerate() {
            if !(p >= 0.0) {
                return Err(ProbError::NegativeEntry { index: i, value: p });
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > DIST_MASS_TOL {
            return Err(ProbError::BadMass {
                sum,
                tol: DIST_MASS_TOL,
            });
        }
        Ok(Self { probs })
    }

    pub fn uniform(n: usize) -> Self {
        Self {
            probs: vec![1.0 / n as f64; n],
        }
    }

    pub fn point_mass(n: usize, at: usize) -> Self {
        let mut probs = vec![0.0; n];
        probs[at] = 1.0;
        Self { probs }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn prob(&self, i: usize) -> f64 {
        self.probs[i]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    /// Samples an index using one uniform draw.
    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> usize {
        sample_slice(&self.probs, rng)
    }
}

/// Samples an index proportionally to the (non-negative) weights in `w`.
pub(crate) fn sample_slice<R: rand::Rng + ?Sized>(w: &[f64], rng: &mut R) -> usize {
    let total: f64 = w.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    for (i, &p) in w.iter().enumerate() {
        u -= p;
        if u <= 0.0 {
            return i;
        }
    }
    // fall back for accumulated rounding error
    w.iter().rposition(|&p| p > 0.0).unwrap_or(w.len() - 1)
}

// ---------------------------------------------------------------------------
// FiniteKernel
// ---------------------------------------------------------------------------

/// A row-stochastic conditional probability table.
///
/// Conditioning and output are both multi-dimensional: the row for a
/// conditioning tuple is a distribution over the row-major flattening of
/// the output dimensions. A kernel with no conditioning dimensions is a
/// plain distribution with one row.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteKernel {
    cond_sizes: Vec<usize>,
    out_sizes: Vec<usize>,
    /// Row-major over (conditioning tuple, output tuple).
    probs: Vec<f64>,
}

impl FiniteKernel {
    pub fn new(cond_sizes: Vec<usize>, out_sizes: Vec<usize>, probs: Vec<f64>) -> Result<Self> {
        let rows = checked_product(&cond_sizes)?;
        let width = checked_product(&out_sizes)?;
        if width == 0 || rows == 0 {
            return Err(ProbError::EmptyInput("kernel with a zero-sized axis".into()));
        }
        if probs.len() != rows * width {
            return Err(ProbError::DimensionMismatch(format!(
                "kernel table has {} entries, expected {} rows x {} outputs",
                probs.len(),
                rows,
                width
            )));
        }
        for r in 0..rows {
            let row = &probs[r * width..(r + 1) * width];
            for &p in row {
                if !(p >= 0.0) {
                    return Err(ProbError::NegativeRowEntry { row: r, value: p });
                }
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > DIST_MASS_TOL {
                return Err(ProbError::NonStochasticRow {
                    row: r,
                    sum,
                    tol: DIST_MASS_TOL,
                });
            }
        }
        Ok(Self {
            cond_sizes,
            out_sizes,
            probs,
        })
    }

    /// Kernel with no conditioning: a single distribution.
    pub fn from_dist(dist: &FiniteDist) -> Self {
        Self {
            cond_sizes: vec![],
            out_sizes: vec![dist.len()],
            probs: dist.as_slice().to_vec(),
        }
    }

    /// Builds entries from a function of (conditioning tuple, output tuple).
    pub fn from_fn<F>(cond_sizes: Vec<usize>, out_sizes: Vec<usize>, mut f: F) -> Result<Self>
    where
        F: FnMut(&[usize], &[usize]) -> f64,
    {
        let rows = checked_product(&cond_sizes)?;
        let width = checked_product(&out_sizes)?;
        let mut probs = Vec::with_capacity(rows * width);
        let mut c = vec![0usize; cond_sizes.len()];
        loop {
            let mut o = vec![0usize; out_sizes.len()];
            loop {
                probs.push(f(&c, &o));
                if !next_index(&out_sizes, &mut o) {
                    break;
                }
            }
            if !next_index(&cond_sizes, &mut c) {
                break;
            }
        }
        Self::new(cond_sizes, out_sizes, probs)
    }

    pub fn cond_sizes(&self) -> &[usize] {
        &self.cond_sizes
    }

    pub fn out_sizes(&self) -> &[usize] {
        &self.out_sizes
    }

    pub fn n_rows(&self) -> usize {
        self.probs.len() / self.out_len()
    }

    pub fn out_len(&self) -> usize {
        self.out_sizes.iter().product()
    }

    /// Row for a flat conditioning index.
    pub fn row(&self, cond_flat: usize) -> &[f64] {
        let w = self.out_len();
        &self.probs[cond_flat * w..(cond_flat + 1) * w]
    }

    /// Probability of an output tuple given a conditioning tuple.
    pub fn prob(&self, cond: &[usize], out: &[usize]) -> f64 {
        let r = flat_index(&self.cond_sizes, cond);
        let o = flat_index(&self.out_sizes, out);
        self.row(r)[o]
    }

    pub fn prob_flat(&self, cond_flat: usize, out_flat: usize) -> f64 {
        self.row(cond_flat)[out_flat]
    }

    /// Sums out the output dimensions not listed in `keep` (in `keep` order).
    pub fn marginal_out(&self, keep: &[usize]) -> FiniteKernel {
        let kept_sizes: Vec<usize> = keep.iter().map(|&d| self.out_sizes[d]).collect();
        let kept_width: usize = kept_sizes.iter().product();
        let rows = self.n_rows();
        let mut probs = vec![0.0; rows * kept_width];
        let out_strides = strides(&self.out_sizes);
        let kept_strides = strides(&kept_sizes);
        let width = self.out_len();
        for r in 0..rows {
            let row = self.row(r);
            for (o_flat, &p) in row.iter().enumerate().take(width) {
                let mut k_flat = 0;
                for (k, &d) in keep.iter().enumerate() {
                    let coord = (o_flat / out_strides[d]) % self.out_sizes[d];
                    k_flat += coord * kept_strides[k];
                }
                probs[r * kept_width + k_flat] += p;
            }
        }
        FiniteKernel {
            cond_sizes: self.cond_sizes.clone(),
            out_sizes: kept_sizes,
            probs,
        }
    }

    /// Convex combination of two kernels with identical shapes.
    pub fn mix(a: &FiniteKernel, wa: f64, b: &FiniteKernel, wb: f64) -> Result<FiniteKernel> {
        if a.cond_sizes != b.cond_sizes || a.out_sizes != b.out_sizes {
            return Err(ProbError::DimensionMismatch(
                "mixed kernels must share conditioning and output shapes".into(),
            ));
        }
        let probs = a
            .probs
            .iter()
            .zip(&b.probs)
            .map(|(&x, &y)| wa * x + wb * y)
            .collect();
        FiniteKernel::new(a.cond_sizes.clone(), a.out_sizes.clone(), probs)
    }

    /// Samples an output tuple for the given conditioning tuple.
    pub fn sample_out<R: rand::Rng + ?Sized>(&self, cond: &[usize], rng: &mut R) -> Vec<usize> {
        let r = flat_index(&self.cond_sizes, cond);
        let flat = sample_slice(self.row(r), rng);
        let st = strides(&self.out_sizes);
        self.out_sizes
            .iter()
            .zip(&st)
            .map(|(&sz, &s)| (flat / s) % sz)
            .collect()
    }
}

// ---------------------------------------------------------------------------
// JointDist
// ---------------------------------------------------------------------------

/// A named axis of a joint distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub name: String,
    pub size: usize,
}

impl Axis {
    pub fn new(name: impl Into<String>, size: usize) -> Self {
        Self {
            name: name.into(),
            size,
        }
    }
}

/// One factor of a product joint: a kernel wired from existing axes
/// (`inputs`, matching the kernel's conditioning dimensions in order) to
/// fresh axes it introduces (`outputs`, matching its output dimensions).
pub struct Factor<'a> {
    pub kernel: &'a FiniteKernel,
    pub inputs: Vec<String>,
    pub outputs: Vec<Axis>,
}

impl<'a> Factor<'a> {
    pub fn new(kernel: &'a FiniteKernel, inputs: &[&str], outputs: &[(&str, usize)]) -> Self {
        Self {
            kernel,
            inputs: inputs.iter().map(|s| s.to_string()).collect(),
            outputs: outputs.iter().map(|&(n, s)| Axis::new(n, s)).collect(),
        }
    }
}

/// Dense joint distribution over named finite axes (row-major layout).
#[derive(Debug, Clone, PartialEq)]
pub struct JointDist {
    axes: Vec<Axis>,
    probs: Vec<f64>,
}

impl JointDist {
    pub fn new(axes: Vec<Axis>, probs: Vec<f64>) -> Result<Self> {
        let sizes: Vec<usize> = axes.iter().map(|a| a.size).collect();
        let n = checked_product(&sizes)?;
        if probs.len() != n {
            return Err(ProbError::DimensionMismatch(format!(
                "joint table has {} entries, axes imply {}",
                probs.len(),
                n
            )));
        }
        for i in 1..axes.len() {
            if axes[..i].iter().any(|a| a.name == axes[i].name) {
                return Err(ProbError::DuplicateAxis(axes[i].name.clone()));
            }
        }
        for (i, &p) in probs.iter().enumerate() {
            if !(p >= 0.0) {
                return Err(ProbError::NegativeEntry { index: i, value: p });
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > JOINT_MASS_TOL {
            return Err(ProbError::BadMass {
                sum,
                tol: JOINT_MASS_TOL,
            });
        }
        Ok(Self { axes, probs })
    }

    /// Builds the product joint of a factor chain.
    ///
    /// Each factor's inputs must reference axes introduced by earlier
    /// factors; each axis is introduced exactly once as an output.
    pub fn from_factors(factors: &[Factor]) -> Result<Self> {
        let mut axes: Vec<Axis> = Vec::new();
        let mut probs = vec![1.0];
        for factor in factors {
            // resolve input axis positions
            let mut input_pos = Vec::with_capacity(factor.inputs.len());
            for name in &factor.inputs {
                let pos = axes
                    .iter()
                    .position(|a| &a.name == name)
                    .ok_or_else(|| ProbError::UnknownAxis(name.clone()))?;
                input_pos.push(pos);
            }
            let cond_sizes: Vec<usize> = input_pos.iter().map(|&p| axes[p].size).collect();
            if cond_sizes != factor.kernel.cond_sizes() {
                return Err(ProbError::DimensionMismatch(format!(
                    "factor conditioning {:?} does not match wired axis sizes {:?}",
                    factor.kernel.cond_sizes(),
                    cond_sizes
                )));
            }
            let out_sizes: Vec<usize> = factor.outputs.iter().map(|a| a.size).collect();
            if out_sizes != factor.kernel.out_sizes() {
                return Err(ProbError::DimensionMismatch(format!(
                    "factor output {:?} does not match declared axes {:?}",
                    factor.kernel.out_sizes(),
                    out_sizes
                )));
            }
            for out in &factor.outputs {
                if axes.iter().any(|a| a.name == out.name) {
                    return Err(ProbError::DuplicateAxis(out.name.clone()));
                }
            }

            let old_sizes: Vec<usize> = axes.iter().map(|a| a.size) .collect();
            let old_n: usize = old_sizes.iter().product();
            let width: usize = out_sizes.iter().product();
            checked_product(&[old_n, width])?;
            let mut next = vec![0.0; old_n * width];
            let old_strides = strides(&old_sizes);
            for old_flat in 0..old_n {
                let p_old = probs[old_flat];
                if p_old == 0.0 {
                    continue;
                }
                let mut cond_flat = 0;
                for (&pos, &sz) in input_pos.iter().zip(factor.kernel.cond_sizes()) {
                    let coord = (old_flat / old_strides[pos]) % old_sizes[pos];
                    cond_flat = cond_flat * sz + coord;
                }
                let row = factor.kernel.row(cond_flat);
                let base = old_flat * width;
                for (o, &k) in row.iter().enumerate() {
                    next[base + o] = p_old * k;
                }
            }
            probs = next;
            axes.extend(factor.outputs.iter().cloned());
        }
        JointDist::new(axes, probs)
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.size).collect()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn total_mass(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn axis_position(&self, name: &str) -> Result<usize> {
        self.axes
            .iter()
            .position(|a| a.name == name)
            .ok_or_else(|| ProbError::UnknownAxis(name.to_string()))
    }

    pub fn prob(&self, idx: &[usize]) -> f64 {
        let sizes = self.sizes();
        self.probs[flat_index(&sizes, idx)]
    }

    /// Marginal onto the named axes, in the order given.
    pub fn marginal(&self, keep: &[&str]) -> Result<JointDist> {
        if keep.is_empty() {
            return Err(ProbError::EmptyInput("marginal axis set".into()));
        }
        let positions: Vec<usize> = keep
            .iter()
            .map(|n| self.axis_position(n))
            .collect::<Result<_>>()?;
        for (i, &p) in positions.iter().enumerate() {
            if positions[..i].contains(&p) {
                return Err(ProbError::DuplicateAxis(keep[i].to_string()));
            }
        }
        let src_sizes = self.sizes();
        let dst_axes: Vec<Axis> = positions.iter().map(|&p| self.axes[p].clone()).collect();
        let dst_sizes: Vec<usize> = dst_axes.iter().map(|a| a.size).collect();
        let dst_n: usize = dst_sizes.iter().product();
        let src_strides = strides(&src_sizes);
        let dst_strides = strides(&dst_sizes);
        let mut probs = vec![0.0; dst_n];
        for (flat, &p) in self.probs.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let mut d = 0;
            for (k, &pos) in positions.iter().enumerate() {
                let coord = (flat / src_strides[pos]) % src_sizes[pos];
                d += coord * dst_strides[k];
            }
            probs[d] += p;
        }
        Ok(JointDist {
            axes: dst_axes,
            probs,
        })
    }

    /// Mutual information I(A; B) in nats between two disjoint axis groups.
    pub fn mutual_information(&self, axes_a: &[&str], axes_b: &[&str]) -> Result<f64> {
        check_disjoint(&[axes_a, axes_b])?;
        let m = self.marginal(&concat(&[axes_a, axes_b]))?;
        let na = axes_a.len();
        let sizes = m.sizes();
        let (a_n, _) = split_counts(&sizes, na);
        let mut p_a = vec![0.0; a_n];
        let b_n = sizes[na..].iter().product::<usize>();
        let mut p_b = vec![0.0; b_n];
        for (flat, &p) in m.probs.iter().enumerate() {
            p_a[flat / b_n] += p;
            p_b[flat % b_n] += p;
        }
        let mut mi = 0.0;
        for (flat, &p) in m.probs.iter().enumerate() {
            if p > 0.0 {
                mi += p * (p / (p_a[flat / b_n] * p_b[flat % b_n])).ln();
            }
        }
        Ok(mi)
    }

    /// Conditional mutual information I(A; B | C) in nats.
    pub fn conditional_mutual_information(
        &self,
        axes_a: &[&str],
        axes_b: &[&str],
        axes_c: &[&str],
    ) -> Result<f64> {
        check_disjoint(&[axes_a, axes_b, axes_c])?;
        if axes_c.is_empty() {
            return self.mutual_information(axes_a, axes_b);
        }
        let m = self.marginal(&concat(&[axes_a, axes_b, axes_c]))?;
        let sizes = m.sizes();
        let na = axes_a.len();
        let nb = axes_b.len();
        let a_n: usize = sizes[..na].iter().product();
        let b_n: usize = sizes[na..na + nb].iter().product();
        let c_n: usize = sizes[na + nb..].iter().product();
        // I(A;B|C) = sum p(a,b,c) ln [ p(a,b,c) p(c) / (p(a,c) p(b,c)) ]
        let mut p_ac = vec![0.0; a_n * c_n];
        let mut p_bc = vec![0.0; b_n * c_n];
        let mut p_c = vec![0.0; c_n];
        for (flat, &p) in m.probs.iter().enumerate() {
            let c = flat % c_n;
            let ab = flat / c_n;
            let a = ab / b_n;
            let b = ab % b_n;
            p_ac[a * c_n + c] += p;
            p_bc[b * c_n + c] += p;
            p_c[c] += p;
        }
        let mut cmi = 0.0;
        for (flat, &p) in m.probs.iter().enumerate() {
            if p > 0.0 {
                let c = flat % c_n;
                let ab = flat / c_n;
                let a = ab / b_n;
                let b = ab % b_n;
                cmi += p * (p * p_c[c] / (p_ac[a * c_n + c] * p_bc[b * c_n + c])).ln();
            }
        }
        Ok(cmi)
    }

    /// Information density ln P(a,b) / (P(a) P(b)) in nats for one outcome.
    ///
    /// `outcome` indexes the axes of `axes_a` followed by `axes_b`. Outcomes
    /// with zero probability are rejected: a log of zero here signals an
    /// absolute-continuity violation, not a value.
    pub fn information_density(
        &self,
        axes_a: &[&str],
        axes_b: &[&str],
        outcome: &[usize],
    ) -> Result<f64> {
        check_disjoint(&[axes_a, axes_b])?;
        if outcome.len() != axes_a.len() + axes_b.len() {
            return Err(ProbError::DimensionMismatch(format!(
                "outcome has {} coordinates, axis groups have {}",
                outcome.len(),
                axes_a.len() + axes_b.len()
            )));
        }
        let m = self.marginal(&concat(&[axes_a, axes_b]))?;
        let sizes = m.sizes();
        let p_ab = m.prob(outcome);
        if p_ab <= 0.0 {
            return Err(ProbError::ZeroProbabilityOutcome);
        }
        let na = axes_a.len();
        let b_n: usize = sizes[na..].iter().product();
        let flat = flat_index(&sizes, outcome);
        let a_flat = flat / b_n;
        let b_flat = flat % b_n;
        let mut p_a = 0.0;
        let mut p_b = 0.0;
        for (f, &p) in m.probs.iter().enumerate() {
            if f / b_n == a_flat {
                p_a += p;
            }
            if f % b_n == b_flat {
                p_b += p;
            }
        }
        Ok((p_ab / (p_a * p_b)).ln())
    }
}

fn split_counts(sizes: &[usize], na: usize) -> (usize, usize) {
    (
        sizes[..na].iter().product(),
        sizes[na..].iter().product(),
    )
}

fn concat<'a>(groups: &[&[&'a str]]) -> Vec<&'a str> {
    groups.iter().flat_map(|g| g.iter().copied()).collect()
}

fn check_disjoint(groups: &[&[&str]]) -> Result<()> {
    let mut seen: Vec<&str> = Vec::new();
    for g in groups {
        for &name in *g {
            if seen.contains(&name) {
                return Err(ProbError::OverlappingAxes(name.to_string()));
            }
            seen.push(name);
        }
    }
    Ok(())
}

/// Binary entropy of `p` in nats, with 0 ln 0 = 0.
pub fn binary_entropy(p: f64) -> f64 {
    let q = 1.0 - p;
    let mut h = 0.0;
    if p > 0.0 {
        h -= p * p.ln();
    }
    if q > 0.0 {
        h -= q * q.ln();
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    const LN2: f64 = std::f64::consts::LN_2;

    fn bsc_joint(crossover: f64) -> JointDist {
        // uniform input through a binary symmetric channel
        let p = crossover;
        JointDist::new(
            vec![Axis::new("x", 2), Axis::new("y", 2)],
            vec![0.5 * (1.0 - p), 0.5 * p, 0.5 * p, 0.5 * (1.0 - p)],
        )
        .unwrap()
    }

    #[test]
    fn dist_validation() {
        assert!(FiniteDist::new(vec![0.5, 0.5]).is_ok());
        assert!(matches!(
            FiniteDist::new(vec![0.6, 0.5]),
            Err(ProbError::BadMass { .. })
        ));
        assert!(matches!(
            FiniteDist::new(vec![-0.1, 1.1]),
            Err(ProbError::NegativeEntry { index: 0, .. })
        ));
    }

    #[test]
    fn kernel_validation_names_offending_row() {
        let err = FiniteKernel::new(vec![2], vec![2], vec![0.5, 0.5, 0.4, 0.5]).unwrap_err();
        match err {
            ProbError::NonStochasticRow { row, .. } => assert_eq!(row, 1),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn kernel_marginal_out() {
        // P(y,z|x) with y = x, z uniform; marginal over z recovers identity
        let k = FiniteKernel::from_fn(vec![2], vec![2, 2], |c, o| {
            if o[0] == c[0] {
                0.5
            } else {
                0.0
            }
        })
        .unwrap();
        let m = k.marginal_out(&[0]);
        assert_eq!(m.out_sizes(), &[2]);
        assert!((m.prob(&[0], &[0]) - 1.0).abs() < 1e-15);
        assert!((m.prob(&[1], &[0]) - 0.0).abs() < 1e-15);
    }

    #[test]
    fn product_of_fair_bits_is_uniform() {
        let fair = FiniteDist::uniform(2);
        let k = FiniteKernel::from_dist(&fair);
        let j = JointDist::from_factors(&[
            Factor::new(&k, &[], &[("b0", 2)]),
            Factor::new(&k, &[], &[("b1", 2)]),
        ])
        .unwrap();
        for idx in 0..4 {
            assert!((j.probs()[idx] - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn point_mass_conditioning_kills_other_slice() {
        let pa = FiniteKernel::from_dist(&FiniteDist::point_mass(2, 0));
        let cond = FiniteKernel::from_fn(vec![2], vec![2], |c, o| {
            if c[0] == 0 {
                [0.3, 0.7][o[0]]
            } else {
                [0.9, 0.1][o[0]]
            }
        })
        .unwrap();
        let j = JointDist::from_factors(&[
            Factor::new(&pa, &[], &[("a", 2)]),
            Factor::new(&cond, &["a"], &[("b", 2)]),
        ])
        .unwrap();
        assert!((j.prob(&[0, 0]) - 0.3).abs() < 1e-15);
        assert!((j.prob(&[0, 1]) - 0.7).abs() < 1e-15);
        assert_eq!(j.prob(&[1, 0]), 0.0);
        assert_eq!(j.prob(&[1, 1]), 0.0);
    }

    /// Independent nested-loop oracle for a 5-factor binary chain.
    #[test]
    fn five_factor_chain_matches_nested_loop_oracle() {
        // chain: a -> (s_e, s) -> u -> x -> y with hand-written tables
        let p_a = [0.4, 0.6];
        let st = |a: usize, se: usize, s: usize| -> f64 {
            // correlated pair tilted by a
            let base = [[0.4, 0.1, 0.2, 0.3], [0.25, 0.25, 0.25, 0.25]];
            base[a][se * 2 + s]
        };
        let qu = |a: usize, se: usize, u: usize| -> f64 {
            let p1 = 0.2 + 0.3 * a as f64 + 0.2 * se as f64;
            if u == 1 {
                p1
            } else {
                1.0 - p1
            }
        };
        let qx = |u: usize, x: usize| if x == u { 0.9 } else { 0.1 };
        let ch = |x: usize, s: usize, y: usize| {
            let flip = 0.1 + 0.05 * s as f64;
            if y == x {
                1.0 - flip
            } else {
                flip
            }
        };

        let k_a = FiniteKernel::new(vec![], vec![2], p_a.to_vec()).unwrap();
        let k_st = FiniteKernel::from_fn(vec![2], vec![2, 2], |c, o| st(c[0], o[0], o[1])).unwrap();
        let k_u = FiniteKernel::from_fn(vec![2, 2], vec![2], |c, o| qu(c[0], c[1], o[0])).unwrap();
        let k_x = FiniteKernel::from_fn(vec![2], vec![2], |c, o| qx(c[0], o[0])).unwrap();
        let k_y = FiniteKernel::from_fn(vec![2, 2], vec![2], |c, o| ch(c[0], c[1], o[0])).unwrap();

        let j = JointDist::from_factors(&[
            Factor::new(&k_a, &[], &[("a", 2)]),
            Factor::new(&k_st, &["a"], &[("s_e", 2), ("s", 2)]),
            Factor::new(&k_u, &["a", "s_e"], &[("u", 2)]),
            Factor::new(&k_x, &["u"], &[("x", 2)]),
            Factor::new(&k_y, &["x", "s"], &[("y", 2)]),
        ])
        .unwrap();

        // oracle: direct product over every tuple
        for a in 0..2 {
            for se in 0..2 {
                for s in 0..2 {
                    for u in 0..2 {
                        for x in 0..2 {
                            for y in 0..2 {
                                let expect = p_a[a]
                                    * st(a, se, s)
                                    * qu(a, se, u)
                                    * qx(u, x)
                                    * ch(x, s, y);
                                let got = j.prob(&[a, se, s, u, x, y]);
                                assert!(
                                    (got - expect).abs() < 1e-12,
                                    "tuple ({a},{se},{s},{u},{x},{y}): {got} vs {expect}"
                                );
                            }
                        }
                    }
                }
            }
        }
        assert!((j.total_mass() - 1.0).abs() < 1e-10);

        // marginal onto (u, y) against brute-force summation
        let m = j.marginal(&["u", "y"]).unwrap();
        for u in 0..2 {
            for y in 0..2 {
                let mut expect = 0.0;
                for a in 0..2 {
                    for se in 0..2 {
                        for s in 0..2 {
                            for x in 0..2 {
                                expect += p_a[a]
                                    * st(a, se, s)
                                    * qu(a, se, u)
                                    * qx(u, x)
                                    * ch(x, s, y);
                            }
                        }
                    }
                }
                assert!((m.prob(&[u, y]) - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn factor_order_respecting_dag_gives_same_table() {
        // a -> u and a -> v are exchangeable factors
        let pa = FiniteKernel::new(vec![], vec![2], vec![0.3, 0.7]).unwrap();
        let ku = FiniteKernel::new(vec![2], vec![2], vec![0.8, 0.2, 0.4, 0.6]).unwrap();
        let kv = FiniteKernel::new(vec![2], vec![3], vec![0.1, 0.2, 0.7, 0.3, 0.3, 0.4]).unwrap();
        let j1 = JointDist::from_factors(&[
            Factor::new(&pa, &[], &[("a", 2)]),
            Factor::new(&ku, &["a"], &[("u", 2)]),
            Factor::new(&kv, &["a"], &[("v", 3)]),
        ])
        .unwrap();
        let j2 = JointDist::from_factors(&[
            Factor::new(&pa, &[], &[("a", 2)]),
            Factor::new(&kv, &["a"], &[("v", 3)]),
            Factor::new(&ku, &["a"], &[("u", 2)]),
        ])
        .unwrap();
        let j2_aligned = j2.marginal(&["a", "u", "v"]).unwrap();
        let j1_aligned = j1.marginal(&["a", "u", "v"]).unwrap();
        for (p, q) in j1_aligned.probs().iter().zip(j2_aligned.probs()) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn wiring_errors() {
        let pa = FiniteKernel::new(vec![], vec![2], vec![0.5, 0.5]).unwrap();
        let k = FiniteKernel::new(vec![2], vec![2], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let err = JointDist::from_factors(&[
            Factor::new(&pa, &[], &[("a", 2)]),
            Factor::new(&k, &["nope"], &[("b", 2)]),
        ])
        .unwrap_err();
        assert!(matches!(err, ProbError::UnknownAxis(_)));

        let err = JointDist::from_factors(&[
            Factor::new(&pa, &[], &[("a", 2)]),
            Factor::new(&k, &["a"], &[("a", 2)]),
        ])
        .unwrap_err();
        assert!(matches!(err, ProbError::DuplicateAxis(_)));
    }

    #[test]
    fn marginal_identity_and_projection() {
        let j = bsc_joint(0.1);
        let all = j.marginal(&["x", "y"]).unwrap();
        assert_eq!(all.probs(), j.probs());
        let px = j.marginal(&["x"]).unwrap();
        assert!((px.prob(&[0]) - 0.5).abs() < 1e-15);
        assert!((px.total_mass() - 1.0).abs() < 1e-12);
        assert!(j.marginal(&["zzz"]).is_err());
    }

    #[test]
    fn mi_independent_axes_is_zero() {
        let j = JointDist::new(
            vec![Axis::new("x", 2), Axis::new("y", 2)],
            vec![0.06, 0.14, 0.24, 0.56],
        )
        .unwrap();
        assert!(j.mutual_information(&["x"], &["y"]).unwrap().abs() < 1e-12);
    }

    #[test]
    fn mi_perfectly_correlated_fair_bit() {
        let j = JointDist::new(
            vec![Axis::new("x", 2), Axis::new("y", 2)],
            vec![0.5, 0.0, 0.0, 0.5],
        )
        .unwrap();
        assert!((j.mutual_information(&["x"], &["y"]).unwrap() - LN2).abs() < 1e-12);
    }

    #[test]
    fn mi_bsc_matches_binary_entropy_oracle() {
        let j = bsc_joint(0.1);
        let mi = j.mutual_information(&["x"], &["y"]).unwrap();
        let expect = LN2 - binary_entropy(0.1);
        assert!((mi - expect).abs() < 1e-9, "{mi} vs {expect}");
        // 1 - h2(0.1) in bits is about 0.5310 bits = 0.3681 nats
        assert!((mi - 0.368064) .abs() < 1e-4);
    }

    #[test]
    fn mi_rejects_overlap() {
        let j = bsc_joint(0.1);
        assert!(matches!(
            j.mutual_information(&["x"], &["x"]),
            Err(ProbError::OverlappingAxes(_))
        ));
    }

    #[test]
    fn cmi_reduces_to_mi_when_condition_independent() {
        // c independent of (a, b)
        let mut probs = Vec::new();
        let ab = [0.45, 0.05, 0.05, 0.45];
        for &p in &ab {
            for pc in [0.3, 0.7] {
                probs.push(p * pc);
            }
        }
        let j = JointDist::new(
            vec![Axis::new("a", 2), Axis::new("b", 2), Axis::new("c", 2)],
            probs,
        )
        .unwrap();
        let cmi = j
            .conditional_mutual_information(&["a"], &["b"], &["c"])
            .unwrap();
        let mi = j.mutual_information(&["a"], &["b"]).unwrap();
        assert!((cmi - mi).abs() < 1e-12);
    }

    #[test]
    fn cmi_on_self_condition_is_zero() {
        // I(A;B|A) is ill-posed for overlapping sets; model it with a copy axis
        let mut probs = vec![0.0; 8];
        // a2 is a literal copy of a; b noisy from a
        for a in 0..2 {
            for b in 0..2 {
                let pb = if b == a { 0.8 } else { 0.2 };
                probs[a * 4 + b * 2 + a] = 0.5 * pb;
            }
        }
        let j = JointDist::new(
            vec![Axis::new("a", 2), Axis::new("b", 2), Axis::new("a2", 2)],
            probs,
        )
        .unwrap();
        let cmi = j
            .conditional_mutual_information(&["a"], &["b"], &["a2"])
            .unwrap();
        assert!(cmi.abs() < 1e-12);
    }

    /// Slice-and-reweigh oracle: I(A;B|C) = sum_c P(c) I(A;B | C=c).
    #[test]
    fn cmi_matches_per_slice_oracle() {
        let raw = [
            0.02, 0.08, 0.11, 0.05, 0.07, 0.03, 0.09, 0.01, 0.06, 0.12, 0.04, 0.10, 0.05, 0.07,
            0.03, 0.07,
        ];
        let total: f64 = raw.iter().sum();
        let probs: Vec<f64> = raw.iter().map(|p| p / total).collect();
        let j = JointDist::new(
            vec![Axis::new("a", 2), Axis::new("b", 2), Axis::new("c", 4)],
            probs.clone(),
        )
        .unwrap();
        let cmi = j
            .conditional_mutual_information(&["a"], &["b"], &["c"])
            .unwrap();

        // oracle: slice on c, renormalize, weigh
        let mut oracle = 0.0;
        for c in 0..4 {
            let mut slice = [[0.0; 2]; 2];
            let mut pc = 0.0;
            for a in 0..2 {
                for b in 0..2 {
                    slice[a][b] = probs[a * 8 + b * 4 + c];
                    pc += slice[a][b];
                }
            }
            if pc == 0.0 {
                continue;
            }
            let pa: Vec<f64> = (0..2).map(|a| (slice[a][0] + slice[a][1]) / pc).collect();
            let pb: Vec<f64> = (0..2).map(|b| (slice[0][b] + slice[1][b]) / pc).collect();
            let mut mi_c = 0.0;
            for a in 0..2 {
                for b in 0..2 {
                    let p = slice[a][b] / pc;
                    if p > 0.0 {
                        mi_c += p * (p / (pa[a] * pb[b])).ln();
                    }
                }
            }
            oracle += pc * mi_c;
        }
        assert!((cmi - oracle).abs() < 1e-12, "{cmi} vs {oracle}");
    }

    #[test]
    fn density_independent_axes_is_zero_everywhere() {
        let j = JointDist::new(
            vec![Axis::new("x", 2), Axis::new("y", 2)],
            vec![0.06, 0.14, 0.24, 0.56],
        )
        .unwrap();
        for x in 0..2 {
            for y in 0..2 {
                let d = j.information_density(&["x"], &["y"], &[x, y]).unwrap();
                assert!(d.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn density_correlated_bit_and_bsc() {
        let j = JointDist::new(
            vec![Axis::new("x", 2), Axis::new("y", 2)],
            vec![0.5, 0.0, 0.0, 0.5],
        )
        .unwrap();
        let d = j.information_density(&["x"], &["y"], &[0, 0]).unwrap();
        assert!((d - LN2).abs() < 1e-12);
        assert!(matches!(
            j.information_density(&["x"], &["y"], &[0, 1]),
            Err(ProbError::ZeroProbabilityOutcome)
        ));

        // BSC(0.1), outcome (0,0): ln(P(y=0|x=0)/P(y=0)) = ln(0.9/0.5)
        let j = bsc_joint(0.1);
        let d = j.information_density(&["x"], &["y"], &[0, 0]).unwrap();
        assert!((d - (0.9f64 / 0.5).ln()).abs() < 1e-12);
        assert!((d - 0.5878).abs() < 1e-4);
    }

    /// Expectation of the information density equals mutual information.
    #[test]
    fn density_expectation_equals_mi() {
        let raw = [0.1, 0.25, 0.3, 0.05, 0.2, 0.1];
        let s: f64 = raw.iter().sum();
        let probs: Vec<f64> = raw.iter().map(|p| p / s).collect();
        let j = JointDist::new(vec![Axis::new("x", 3), Axis::new("y", 2)], probs).unwrap();
        let mi = j.mutual_information(&["x"], &["y"]).unwrap();
        let mut mean = 0.0;
        for x in 0..3 {
            for y in 0..2 {
                let p = j.prob(&[x, y]);
                if p > 0.0 {
                    mean += p * j.information_density(&["x"], &["y"], &[x, y]).unwrap();
                }
            }
        }
        assert!((mean - mi).abs() < 1e-9);
    }

    #[test]
    fn entries_cap_enforced() {
        let axes = vec![
            Axis::new("huge0", 100_000),
            Axis::new("huge1", 100_000),
            Axis::new("huge2", 100_000),
        ];
        assert!(matches!(
            JointDist::new(axes, vec![]),
            Err(ProbError::TooManyEntries { .. })
        ));
    }
}
