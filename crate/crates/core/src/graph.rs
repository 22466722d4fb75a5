//! Inter-agent communication structure and its spectral analysis.
//!
//! Everything downstream (bifurcation thresholds, opinion patterns,
//! centrality indices, cascade thresholds) is driven by the extremal
//! eigenvalues and eigenvectors of the adjacency structure, so this module
//! keeps the graph representation and the eigen-machinery in one place.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

use crate::error::{CoreError, Result};

/// Relative tolerance used for eigenvalue simplicity / isolation flags.
/// An eigenvalue counts as "simple" when its nearest neighbour (by real
/// part) is farther than `SIMPLICITY_RTOL * max(1, |lambda|)`.
pub const SIMPLICITY_RTOL: f64 = 1e-8;

/// Residual bound for accepting a computed eigenpair.
pub const EIGENPAIR_RESIDUAL: f64 = 1e-9;

/// Named graph families plus an escape hatch for explicit matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphKind {
    Path,
    Cycle,
    Star,
    Wheel,
    AllToAll,
    Custom,
}

impl GraphKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            GraphKind::Path => "path",
            GraphKind::Cycle => "cycle",
            GraphKind::Star => "star",
            GraphKind::Wheel => "wheel",
            GraphKind::AllToAll => "all_to_all",
            GraphKind::Custom => "custom",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "path" => Ok(GraphKind::Path),
            "cycle" => Ok(GraphKind::Cycle),
            "star" => Ok(GraphKind::Star),
            "wheel" => Ok(GraphKind::Wheel),
            "all_to_all" => Ok(GraphKind::AllToAll),
            "custom" => Ok(GraphKind::Custom),
            other => Err(CoreError::InvalidParameter(format!(
                "unknown graph kind `{other}`"
            ))),
        }
    }
}

/// Signed, weighted inter-agent coupling structure.
///
/// The diagonal is kept at zero: self-coupling lives in the model's
/// `alpha`/`beta` gains, not in the graph.
#[derive(Debug, Clone)]
pub struct AdjacencySpec {
    n_agents: usize,
    entries: DMatrix<f64>,
    signed: bool,
    symmetric: bool,
    kind: GraphKind,
}

impl AdjacencySpec {
    /// Builds one of the named unweighted families, scaled by `weight`.
    pub fn build(kind: GraphKind, n: usize, weight: f64) -> Result<Self> {
        if !weight.is_finite() {
            return Err(CoreError::InvalidParameter(
                "graph weight must be finite".into(),
            ));
        }
        let entries = match kind {
            GraphKind::Path => {
                require_n(kind, n, 2)?;
                let mut m = DMatrix::zeros(n, n);
                for i in 0..n - 1 {
                    m[(i, i + 1)] = weight;
                    m[(i + 1, i)] = weight;
                }
                m
            }
            GraphKind::Cycle => {
                require_n(kind, n, 3)?;
                let mut m = DMatrix::zeros(n, n);
                for i in 0..n {
                    let j = (i + 1) % n;
                    m[(i, j)] = weight;
                    m[(j, i)] = weight;
                }
                m
            }
            GraphKind::Star => {
                require_n(kind, n, 2)?;
                let mut m = DMatrix::zeros(n, n);
                for i in 1..n {
                    m[(0, i)] = weight;
                    m[(i, 0)] = weight;
                }
                m
            }
            GraphKind::Wheel => {
                // hub 0 plus a cycle on 1..n
                require_n(kind, n, 4)?;
                let mut m = DMatrix::zeros(n, n);
                let ring = n - 1;
                for i in 1..n {
                    m[(0, i)] = weight;
                    m[(i, 0)] = weight;
                }
                for r in 0..ring {
                    let a = 1 + r;
                    let b = 1 + (r + 1) % ring;
                    m[(a, b)] = weight;
                    m[(b, a)] = weight;
                }
                m
            }
            GraphKind::AllToAll => {
                require_n(kind, n, 2)?;
                let mut m = DMatrix::from_element(n, n, weight);
                for i in 0..n {
                    m[(i, i)] = 0.0;
                }
                m
            }
            GraphKind::Custom => {
                return Err(CoreError::InvalidParameter(
                    "custom graphs take an explicit matrix; use AdjacencySpec::custom".into(),
                ))
            }
        };
        Ok(Self::from_matrix(entries, kind))
    }

    /// Wraps an explicit square matrix. The diagonal must be zero.
    pub fn custom(entries: DMatrix<f64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(CoreError::DimensionMismatch(format!(
                "adjacency matrix must be square, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        if entries.is_empty() {
            return Err(CoreError::InvalidParameter(
                "adjacency matrix must have at least one agent".into(),
            ));
        }
        for i in 0..entries.nrows() {
            if entries[(i, i)] != 0.0 {
                return Err(CoreError::InvalidParameter(format!(
                    "adjacency diagonal must be zero (entry ({i},{i}) = {})",
                    entries[(i, i)]
                )));
            }
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::InvalidParameter(
                "adjacency entries must be finite".into(),
            ));
        }
        Ok(Self::from_matrix(entries, GraphKind::Custom))
    }

    fn from_matrix(entries: DMatrix<f64>, kind: GraphKind) -> Self {
        let signed = entries.iter().any(|&v| v < 0.0);
        // bit-exact symmetry check
        let symmetric = entries == entries.transpose();
        Self {
            n_agents: entries.nrows(),
            entries,
            signed,
            symmetric,
            kind,
        }
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn signed(&self) -> bool {
        self.signed
    }

    pub fn symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn kind(&self) -> GraphKind {
        self.kind
    }

    /// True iff every node reaches every node through nonzero entries.
    /// Edge signs are ignored; `a[(i,k)] != 0` is read as "k influences i",
    /// and reachability is checked in both edge directions.
    pub fn is_strongly_connected(&self) -> bool {
        let n = self.n_agents;
        if n == 1 {
            return true;
        }
        reaches_all(&self.entries, n) && reaches_all(&self.entries.transpose(), n)
    }

    /// Extremal (by real part) eigenvalues with unit right/left eigenvectors
    /// and the hypothesis flags used by the bifurcation analyses.
    pub fn spectral_extrema(&self) -> Result<SpectralSummary> {
        spectral_extrema(&self.entries)
    }
}

fn require_n(kind: GraphKind, n: usize, min: usize) -> Result<()> {
    if n < min {
        return Err(CoreError::InvalidParameter(format!(
            "{} graph needs at least {min} agents, got {n}",
            kind.as_str()
        )));
    }
    Ok(())
}

fn reaches_all(m: &DMatrix<f64>, n: usize) -> bool {
    // BFS from node 0 over nonzero entries of row i (neighbours k of i).
    let mut seen = vec![false; n];
    let mut queue = vec![0usize];
    seen[0] = true;
    while let Some(i) = queue.pop() {
        for k in 0..n {
            if !seen[k] && m[(i, k)] != 0.0 {
                seen[k] = true;
                queue.push(k);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// Extremal eigen-structure of an adjacency matrix.
///
/// Eigenvectors are stored only when the corresponding eigenvalue is real;
/// a complex extremal eigenvalue clears the realness flag and dependent
/// analyses refuse with a diagnostic.
#[derive(Debug, Clone)]
pub struct SpectralSummary {
    pub lambda_max: f64,
    pub lambda_min: f64,
    pub v_max: Option<DVector<f64>>,
    pub w_max: Option<DVector<f64>>,
    pub v_min: Option<DVector<f64>>,
    pub w_min: Option<DVector<f64>>,
    pub lambda_max_real: bool,
    pub lambda_min_real: bool,
    pub lambda_max_simple: bool,
    pub lambda_min_simple: bool,
    /// No other (distinct) eigenvalue shares the real part of `lambda_min`.
    pub lambda_min_real_part_isolated: bool,
    /// All entries of `v_max` strictly positive (after sign normalization).
    pub perron_positive: bool,
    /// Full spectrum, sorted by descending real part.
    pub eigenvalues: Vec<Complex<f64>>,
}

/// Dense QR eigensolve of a general real square matrix, packaged as the
/// extremal summary. Desk scale only: everything here is O(n^3).
pub fn spectral_extrema(a: &DMatrix<f64>) -> Result<SpectralSummary> {
    let n = a.nrows();
    if n != a.ncols() || n == 0 {
        return Err(CoreError::DimensionMismatch(
            "spectral analysis needs a nonempty square matrix".into(),
        ));
    }

    let mut eigenvalues: Vec<Complex<f64>> = crate::linalg::all_eigenvalues(a)?;
    eigenvalues.sort_by(|p, q| {
        q.re.partial_cmp(&p.re)
            .unwrap()
            .then(p.im.abs().partial_cmp(&q.im.abs()).unwrap())
    });

    let lam_max = pick_extremal(&eigenvalues, true);
    let lam_min = pick_extremal(&eigenvalues, false);

    let tol_max = SIMPLICITY_RTOL * lam_max.norm().max(1.0);
    let tol_min = SIMPLICITY_RTOL * lam_min.norm().max(1.0);

    let max_real = lam_max.im.abs() <= tol_max;
    let min_real = lam_min.im.abs() <= tol_min;

    let max_simple = is_simple(&eigenvalues, lam_max, tol_max);
    let min_simple = is_simple(&eigenvalues, lam_min, tol_min);
    let min_isolated = real_part_isolated(&eigenvalues, lam_min, tol_min);

    let mut v_max = None;
    let mut w_max = None;
    let mut v_min = None;
    let mut w_min = None;
    let mut perron = false;

    if max_real {
        let v = eigvec_for(a, lam_max.re);
        let w = eigvec_for(&a.transpose(), lam_max.re);
        if let (Some(mut v), Some(mut w)) = (v, w) {
            normalize_pair(&mut v, &mut w);
            // Perron orientation: flip so the dominant vector is nonnegative
            if v.sum() < 0.0 {
                v.neg_mut();
                w.neg_mut();
            }
            perron = v.iter().all(|&x| x > 1e-12);
            v_max = Some(v);
            w_max = Some(w);
        }
    }
    if min_real {
        let v = eigvec_for(a, lam_min.re);
        let w = eigvec_for(&a.transpose(), lam_min.re);
        if let (Some(mut v), Some(mut w)) = (v, w) {
            normalize_pair(&mut v, &mut w);
            v_min = Some(v);
            w_min = Some(w);
        }
    }

    Ok(SpectralSummary {
        lambda_max: lam_max.re,
        lambda_min: lam_min.re,
        v_max,
        w_max,
        v_min,
        w_min,
        lambda_max_real: max_real,
        lambda_min_real: min_real,
        lambda_max_simple: max_simple,
        lambda_min_simple: min_simple,
        lambda_min_real_part_isolated: min_isolated,
        perron_positive: perron,
        eigenvalues,
    })
}

fn pick_extremal(sorted: &[Complex<f64>], largest: bool) -> Complex<f64> {
    // `sorted` is descending by real part; ties prefer the smaller |Im|
    // so a real eigenvalue wins over a complex pair at the same real part.
    if largest {
        sorted[0]
    } else {
        let min_re = sorted.last().unwrap().re;
        let tol = SIMPLICITY_RTOL * min_re.abs().max(1.0);
        sorted
            .iter()
            .filter(|e| (e.re - min_re).abs() <= tol)
            .min_by(|p, q| p.im.abs().partial_cmp(&q.im.abs()).unwrap())
            .copied()
            .unwrap()
    }
}

fn is_simple(all: &[Complex<f64>], lam: Complex<f64>, tol: f64) -> bool {
    // Discard one copy of `lam` itself (the closest entry), then ask that
    // every remaining eigenvalue keeps a real-part distance above `tol`.
    let mut rest: Vec<Complex<f64>> = all.to_vec();
    let closest = rest
        .iter()
        .enumerate()
        .min_by(|(_, p), (_, q)| (*p - lam).norm().partial_cmp(&(*q - lam).norm()).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    rest.remove(closest);
    rest.iter().all(|mu| (mu.re - lam.re).abs() > tol)
}

fn real_part_isolated(all: &[Complex<f64>], lam: Complex<f64>, tol: f64) -> bool {
    // Eigenvalues numerically identical to `lam` do not count; any distinct
    // eigenvalue sharing its real part breaks isolation.
    all.iter()
        .filter(|mu| (**mu - lam).norm() > tol)
        .all(|mu| (mu.re - lam.re).abs() > tol)
}

/// Unit right eigenvector for a real eigenvalue, via the SVD null space of
/// `A - lambda I`. Returns `None` when the residual check fails.
fn eigvec_for(a: &DMatrix<f64>, lambda: f64) -> Option<DVector<f64>> {
    let n = a.nrows();
    let mut shifted = a.clone();
    for i in 0..n {
        shifted[(i, i)] -= lambda;
    }
    let svd = shifted.svd(false, true);
    let v_t = svd.v_t.as_ref()?;
    let idx = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|(_, p), (_, q)| p.partial_cmp(q).unwrap())
        .map(|(i, _)| i)?;
    let mut v = DVector::from_iterator(n, v_t.row(idx).iter().copied());
    let norm = v.norm();
    if norm == 0.0 {
        return None;
    }
    v /= norm;
    let residual = (a * &v - lambda * &v).norm();
    if residual > EIGENPAIR_RESIDUAL * a.amax().max(1.0) {
        return None;
    }
    Some(v)
}

/// Deterministic orientation: the right vector gets its largest-magnitude
/// entry positive, the left vector is flipped so <v, w> > 0.
fn normalize_pair(v: &mut DVector<f64>, w: &mut DVector<f64>) {
    let lead = v
        .iter()
        .enumerate()
        .max_by(|(_, p), (_, q)| p.abs().partial_cmp(&q.abs()).unwrap())
        .map(|(i, _)| i)
        .unwrap_or(0);
    if v[lead] < 0.0 {
        v.neg_mut();
    }
    if v.dot(w) < 0.0 {
        w.neg_mut();
    }
}

/// Two clusters {0,1} and {2,3,4}, gain -1 inside, -2 across: the signed
/// five-agent benchmark used across the test suites.
#[cfg(test)]
pub(crate) fn two_cluster_signed() -> AdjacencySpec {
    let mut m = DMatrix::zeros(5, 5);
    let clusters: [&[usize]; 2] = [&[0, 1], &[2, 3, 4]];
    for (p, cp) in clusters.iter().enumerate() {
        for &i in cp.iter() {
            for &k in cp.iter() {
                if i != k {
                    m[(i, k)] = -1.0;
                }
            }
            for (s, cs) in clusters.iter().enumerate() {
                if s != p {
                    for &k in cs.iter() {
                        m[(i, k)] = -2.0;
                    }
                }
            }
        }
    }
    AdjacencySpec::custom(m).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn approx_vec(v: &DVector<f64>, expected: &[f64], tol: f64) {
        // compare up to global sign
        let same: f64 = v.iter().zip(expected).map(|(a, b)| (a - b).abs()).sum();
        let flip: f64 = v.iter().zip(expected).map(|(a, b)| (a + b).abs()).sum();
        assert!(
            same.min(flip) < tol,
            "vector {:?} does not match {:?}",
            v.as_slice(),
            expected
        );
    }

    #[test]
    fn path_three_agents() {
        let g = AdjacencySpec::build(GraphKind::Path, 3, 1.0).unwrap();
        assert_eq!(g.entries().as_slice(), &[0., 1., 0., 1., 0., 1., 0., 1., 0.]);
        assert!(g.symmetric());
        assert!(!g.signed());
    }

    #[test]
    fn all_to_all_four_agents() {
        let g = AdjacencySpec::build(GraphKind::AllToAll, 4, 1.0).unwrap();
        for i in 0..4 {
            for k in 0..4 {
                let want = if i == k { 0.0 } else { 1.0 };
                assert_eq!(g.entries()[(i, k)], want);
            }
        }
    }

    #[test]
    fn family_size_validation() {
        assert!(AdjacencySpec::build(GraphKind::Path, 1, 1.0).is_err());
        assert!(AdjacencySpec::build(GraphKind::Cycle, 2, 1.0).is_err());
        assert!(AdjacencySpec::build(GraphKind::Wheel, 3, 1.0).is_err());
        assert!(AdjacencySpec::build(GraphKind::Star, 2, 1.0).is_ok());
    }

    #[test]
    fn custom_rejects_nonzero_diagonal() {
        let m = DMatrix::from_row_slice(2, 2, &[0.5, 1.0, 1.0, 0.0]);
        assert!(AdjacencySpec::custom(m).is_err());
    }

    #[test]
    fn signed_cluster_matrix_shape() {
        let g = super::two_cluster_signed();
        assert!(g.signed());
        assert!(g.symmetric());
        assert_eq!(g.entries()[(0, 1)], -1.0);
        assert_eq!(g.entries()[(0, 2)], -2.0);
        assert_eq!(g.entries()[(3, 4)], -1.0);
        assert!(g.is_strongly_connected());
    }

    #[test]
    fn connectivity_path_and_disjoint_edges() {
        let p3 = AdjacencySpec::build(GraphKind::Path, 3, 1.0).unwrap();
        assert!(p3.is_strongly_connected());

        // two disjoint edges on 4 nodes
        let mut m = DMatrix::zeros(4, 4);
        m[(0, 1)] = 1.0;
        m[(1, 0)] = 1.0;
        m[(2, 3)] = 1.0;
        m[(3, 2)] = 1.0;
        let g = AdjacencySpec::custom(m).unwrap();
        assert!(!g.is_strongly_connected());
    }

    #[test]
    fn directed_one_way_chain_is_not_strongly_connected() {
        let mut m = DMatrix::zeros(3, 3);
        m[(0, 1)] = 1.0;
        m[(1, 2)] = 1.0;
        let g = AdjacencySpec::custom(m).unwrap();
        assert!(!g.is_strongly_connected());
    }

    #[test]
    fn spectrum_path_three() {
        let g = AdjacencySpec::build(GraphKind::Path, 3, 1.0).unwrap();
        let s = g.spectral_extrema().unwrap();
        let r2 = 2f64.sqrt();
        assert_abs_diff_eq!(s.lambda_max, r2, epsilon = 1e-12);
        assert_abs_diff_eq!(s.lambda_min, -r2, epsilon = 1e-12);
        assert!(s.lambda_max_simple && s.lambda_min_simple);
        assert!(s.lambda_min_real_part_isolated);
        assert!(s.perron_positive);
        let expect = [0.5, -r2 / 2.0, 0.5];
        approx_vec(s.v_min.as_ref().unwrap(), &expect, 1e-9);
    }

    #[test]
    fn spectrum_all_to_all_and_even_cycle() {
        for n in [3usize, 5, 8] {
            let g = AdjacencySpec::build(GraphKind::AllToAll, n, 1.0).unwrap();
            let s = g.spectral_extrema().unwrap();
            assert_abs_diff_eq!(s.lambda_max, (n - 1) as f64, epsilon = 1e-10);
            assert_abs_diff_eq!(s.lambda_min, -1.0, epsilon = 1e-10);
            // -1 has multiplicity n-1: not simple
            assert!(!s.lambda_min_simple);
        }
        for n in [4usize, 6, 8] {
            let g = AdjacencySpec::build(GraphKind::Cycle, n, 1.0).unwrap();
            let s = g.spectral_extrema().unwrap();
            assert_abs_diff_eq!(s.lambda_max, 2.0, epsilon = 1e-10);
            assert_abs_diff_eq!(s.lambda_min, -2.0, epsilon = 1e-10);
            assert!(s.lambda_min_simple, "even cycle lambda_min is simple");
        }
    }

    #[test]
    fn odd_cycle_minimum() {
        let g = AdjacencySpec::build(GraphKind::Cycle, 5, 1.0).unwrap();
        let s = g.spectral_extrema().unwrap();
        let expected = 2.0 * (4.0 * std::f64::consts::PI / 5.0).cos();
        assert_abs_diff_eq!(s.lambda_min, expected, epsilon = 1e-10);
        // that value has multiplicity two on an odd cycle
        assert!(!s.lambda_min_simple);
    }

    #[test]
    fn eigenpair_residuals_and_orientation() {
        for (kind, n) in [
            (GraphKind::Path, 6),
            (GraphKind::Cycle, 6),
            (GraphKind::Star, 7),
            (GraphKind::Wheel, 8),
        ] {
            let g = AdjacencySpec::build(kind, n, 1.0).unwrap();
            let a = g.entries();
            let s = g.spectral_extrema().unwrap();
            for (lam, v) in [
                (s.lambda_max, s.v_max.as_ref().unwrap()),
                (s.lambda_min, s.v_min.as_ref().unwrap()),
            ] {
                assert_abs_diff_eq!(v.norm(), 1.0, epsilon = 1e-12);
                assert!((a * v - lam * v).norm() < 1e-9);
            }
            for (lam, w) in [
                (s.lambda_max, s.w_max.as_ref().unwrap()),
                (s.lambda_min, s.w_min.as_ref().unwrap()),
            ] {
                assert!((a.transpose() * w - lam * w).norm() < 1e-9);
            }
            assert!(s.v_min.as_ref().unwrap().dot(s.w_min.as_ref().unwrap()) > 0.0);
            assert!(s.perron_positive);
            // symmetric graphs: left equals right up to sign normalization,
            // and the two extremal right vectors are orthogonal
            assert!((s.v_max.as_ref().unwrap() - s.w_max.as_ref().unwrap()).norm() < 1e-9);
            assert!(
                s.v_max
                    .as_ref()
                    .unwrap()
                    .dot(s.v_min.as_ref().unwrap())
                    .abs()
                    < 1e-9
            );
            // hence v_min has mixed signs
            let vmin = s.v_min.as_ref().unwrap();
            assert!(vmin.iter().any(|&x| x > 1e-9) && vmin.iter().any(|&x| x < -1e-9));
        }
    }

    #[test]
    fn directed_cycle_has_complex_minimum() {
        // directed 3-cycle: eigenvalues are the cube roots of unity
        let mut m = DMatrix::zeros(3, 3);
        m[(0, 1)] = 1.0;
        m[(1, 2)] = 1.0;
        m[(2, 0)] = 1.0;
        let g = AdjacencySpec::custom(m).unwrap();
        let s = g.spectral_extrema().unwrap();
        assert_abs_diff_eq!(s.lambda_max, 1.0, epsilon = 1e-10);
        assert!(s.lambda_max_real);
        assert!(!s.lambda_min_real, "conjugate pair at Re = -1/2");
        assert!(!s.lambda_min_real_part_isolated);
        assert!(s.v_min.is_none());
    }
}
