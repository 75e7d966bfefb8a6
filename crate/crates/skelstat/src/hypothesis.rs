//! Nonparametric permutation tests on per-GOP means for two ds-rep
//! populations, with Bonferroni and Benjamini-Hochberg control.
//!
//! Every geometric object property (GOP) yields one partial test: a pooled-SD
//! t statistic for scalars, Hotelling's T² for euclideanized directions and
//! aligned positions. The permutation null repeatedly re-partitions the
//! pooled sample into the two group sizes; per-permutation RNG streams are
//! derived from (seed, gop, permutation index) so results do not depend on
//! scheduling.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dsrep::{gp_size, GpDsRep, LpDsRep, SizeBasis};
use crate::error::{Error, Result};
use crate::seeding::mix_seed;
use crate::sphere::{euclideanize_pns, euclideanize_tangent, rotation_between, UnitVec3};
use crate::stats::{gpa_align_full, LpPopulation};

/// GOP classes entering the partial tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GopKind {
    SpokeDir,
    SpokeLen,
    FrameN,
    FrameB,
    FrameBPerp,
    ConnDir,
    ConnLen,
    Position,
    Size,
}

impl GopKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            GopKind::SpokeDir => "spoke_dir",
            GopKind::SpokeLen => "spoke_len",
            GopKind::FrameN => "frame_n",
            GopKind::FrameB => "frame_b",
            GopKind::FrameBPerp => "frame_bperp",
            GopKind::ConnDir => "conn_dir",
            GopKind::ConnLen => "conn_len",
            GopKind::Position => "position",
            GopKind::Size => "size",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GopId {
    pub kind: GopKind,
    pub index: usize,
}

/// Pooled per-GOP data: group A first (`n1` entries), then group B.
#[derive(Debug, Clone)]
pub enum GopValues {
    Scalar(Vec<f64>),
    Vec2(Vec<[f64; 2]>),
    Vec3(Vec<[f64; 3]>),
}

impl GopValues {
    pub fn len(&self) -> usize {
        match self {
            GopValues::Scalar(v) => v.len(),
            GopValues::Vec2(v) => v.len(),
            GopValues::Vec3(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone)]
pub struct GopSample {
    pub id: GopId,
    pub n1: usize,
    pub values: GopValues,
}

/// Pooled-SD two-sample t statistic. Zero pooled variance degenerates to 0
/// for equal means and to the ±∞ sentinel otherwise.
pub fn t_statistic(x: &[f64], y: &[f64]) -> f64 {
    assert!(x.len() >= 2 && y.len() >= 2, "t statistic needs n >= 2 per group");
    let (n1, n2) = (x.len() as f64, y.len() as f64);
    let m1 = x.iter().sum::<f64>() / n1;
    let m2 = y.iter().sum::<f64>() / n2;
    let ss: f64 = x.iter().map(|v| (v - m1).powi(2)).sum::<f64>()
        + y.iter().map(|v| (v - m2).powi(2)).sum::<f64>();
    let diff = m1 - m2;
    if ss <= 0.0 || ss / (n1 + n2) < 1e-30 * (m1 * m1 + m2 * m2) {
        return if diff == 0.0 {
            0.0
        } else {
            diff.signum() * f64::INFINITY
        };
    }
    let sp = (ss / (n1 + n2 - 2.0)).sqrt();
    diff / (sp * (1.0 / n1 + 1.0 / n2).sqrt())
}

/// Two-sample Hotelling T²: (x̄−ȳ)ᵀ Σ̂⁻¹ (x̄−ȳ) with Σ̂ the pooled covariance
/// scaled by (1/N₁ + 1/N₂). Returns the statistic and whether the ridge
/// fallback for a singular Σ̂ was used.
pub fn hotelling_t2_flagged(x: &[Vec<f64>], y: &[Vec<f64>]) -> (f64, bool) {
    assert!(!x.is_empty() && !y.is_empty());
    let d = x[0].len();
    let (n1, n2) = (x.len(), y.len());
    assert!(n1 + n2 > d + 2, "hotelling needs N1+N2-2 > d");
    match d {
        1 => {
            let xv: Vec<f64> = x.iter().map(|v| v[0]).collect();
            let yv: Vec<f64> = y.iter().map(|v| v[0]).collect();
            let t = t_statistic(&xv, &yv);
            (t * t, false)
        }
        2 => {
            let pooled = PooledGop::vec2(
                x.iter()
                    .chain(y.iter())
                    .map(|v| [v[0], v[1]])
                    .collect(),
            );
            let mut ridge = false;
            let t2 = pooled.statistic(&subset_identity(n1), n1, n2, &mut ridge);
            (t2, ridge)
        }
        3 => {
            let pooled = PooledGop::vec3(
                x.iter()
                    .chain(y.iter())
                    .map(|v| [v[0], v[1], v[2]])
                    .collect(),
            );
            let mut ridge = false;
            let t2 = pooled.statistic(&subset_identity(n1), n1, n2, &mut ridge);
            (t2, ridge)
        }
        _ => panic!("hotelling_t2 supports d <= 3"),
    }
}

pub fn hotelling_t2(x: &[Vec<f64>], y: &[Vec<f64>]) -> f64 {
    hotelling_t2_flagged(x, y).0
}

fn subset_identity(n1: usize) -> Vec<usize> {
    (0..n1).collect()
}

/// Pooled sufficient statistics so that a permuted statistic only needs the
/// group-A index subset.
enum PooledGop {
    Scalar {
        vals: Vec<f64>,
        sum: f64,
        sumsq: f64,
    },
    Vec2 {
        vals: Vec<[f64; 2]>,
        sum: [f64; 2],
        cross: [f64; 3], // xx, xy, yy
    },
    Vec3 {
        vals: Vec<[f64; 3]>,
        sum: [f64; 3],
        cross: [f64; 6], // xx, xy, xz, yy, yz, zz
    },
}

const RIDGE_EPS: f64 = 1e-8;

impl PooledGop {
    fn scalar(vals: Vec<f64>) -> Self {
        let sum = vals.iter().sum();
        let sumsq = vals.iter().map(|v| v * v).sum();
        PooledGop::Scalar { vals, sum, sumsq }
    }

    fn vec2(vals: Vec<[f64; 2]>) -> Self {
        let mut sum = [0.0; 2];
        let mut cross = [0.0; 3];
        for v in &vals {
            sum[0] += v[0];
            sum[1] += v[1];
            cross[0] += v[0] * v[0];
            cross[1] += v[0] * v[1];
            cross[2] += v[1] * v[1];
        }
        PooledGop::Vec2 { vals, sum, cross }
    }

    fn vec3(vals: Vec<[f64; 3]>) -> Self {
        let mut sum = [0.0; 3];
        let mut cross = [0.0; 6];
        for v in &vals {
            sum[0] += v[0];
            sum[1] += v[1];
            sum[2] += v[2];
            cross[0] += v[0] * v[0];
            cross[1] += v[0] * v[1];
            cross[2] += v[0] * v[2];
            cross[3] += v[1] * v[1];
            cross[4] += v[1] * v[2];
            cross[5] += v[2] * v[2];
        }
        PooledGop::Vec3 { vals, sum, cross }
    }

    fn from_values(values: &GopValues) -> Self {
        match values {
            GopValues::Scalar(v) => PooledGop::scalar(v.clone()),
            GopValues::Vec2(v) => PooledGop::vec2(v.clone()),
            GopValues::Vec3(v) => PooledGop::vec3(v.clone()),
        }
    }

    /// Comparison statistic for a given group-A subset: t² for scalars
    /// (∞ sentinel for zero variance with distinct means), T² otherwise.
    fn statistic(&self, subset_a: &[usize], n1: usize, n2: usize, ridge_used: &mut bool) -> f64 {
        let (f1, f2) = (n1 as f64, n2 as f64);
        let df = f1 + f2 - 2.0;
        let factor = 1.0 / f1 + 1.0 / f2;
        match self {
            PooledGop::Scalar { vals, sum, sumsq } => {
                let s1: f64 = subset_a.iter().map(|&i| vals[i]).sum();
                let m1 = s1 / f1;
                let m2 = (sum - s1) / f2;
                let ss = (sumsq - f1 * m1 * m1 - f2 * m2 * m2).max(0.0);
                let diff = m1 - m2;
                if ss <= 1e-14 * sumsq.max(1e-300) {
                    return if diff == 0.0 { 0.0 } else { f64::INFINITY };
                }
                diff * diff / (ss / df * factor)
            }
            PooledGop::Vec2 { vals, sum, cross } => {
                let mut s = [0.0; 2];
                for &i in subset_a {
                    s[0] += vals[i][0];
                    s[1] += vals[i][1];
                }
                let m1 = [s[0] / f1, s[1] / f1];
                let m2 = [(sum[0] - s[0]) / f2, (sum[1] - s[1]) / f2];
                let d = [m1[0] - m2[0], m1[1] - m2[1]];
                let k = factor / df;
                let mut sxx = (cross[0] - f1 * m1[0] * m1[0] - f2 * m2[0] * m2[0]) * k;
                let mut syy = (cross[2] - f1 * m1[1] * m1[1] - f2 * m2[1] * m2[1]) * k;
                let sxy = (cross[1] - f1 * m1[0] * m1[1] - f2 * m2[0] * m2[1]) * k;
                let trace = sxx + syy;
                if trace <= 0.0 {
                    return 0.0;
                }
                let mut det = sxx * syy - sxy * sxy;
                if det <= 1e-12 * (trace / 2.0) * (trace / 2.0) {
                    let lambda = RIDGE_EPS * trace / 2.0;
                    sxx += lambda;
                    syy += lambda;
                    det = sxx * syy - sxy * sxy;
                    *ridge_used = true;
                }
                ((d[0] * d[0] * syy - 2.0 * d[0] * d[1] * sxy + d[1] * d[1] * sxx) / det).max(0.0)
            }
            PooledGop::Vec3 { vals, sum, cross } => {
                let mut s = [0.0; 3];
                for &i in subset_a {
                    s[0] += vals[i][0];
                    s[1] += vals[i][1];
                    s[2] += vals[i][2];
                }
                let m1 = [s[0] / f1, s[1] / f1, s[2] / f1];
                let m2 = [
                    (sum[0] - s[0]) / f2,
                    (sum[1] - s[1]) / f2,
                    (sum[2] - s[2]) / f2,
                ];
                let d = [m1[0] - m2[0], m1[1] - m2[1], m1[2] - m2[2]];
                let k = factor / df;
                let mut c = [
                    (cross[0] - f1 * m1[0] * m1[0] - f2 * m2[0] * m2[0]) * k,
                    (cross[1] - f1 * m1[0] * m1[1] - f2 * m2[0] * m2[1]) * k,
                    (cross[2] - f1 * m1[0] * m1[2] - f2 * m2[0] * m2[2]) * k,
                    (cross[3] - f1 * m1[1] * m1[1] - f2 * m2[1] * m2[1]) * k,
                    (cross[4] - f1 * m1[1] * m1[2] - f2 * m2[1] * m2[2]) * k,
                    (cross[5] - f1 * m1[2] * m1[2] - f2 * m2[2] * m2[2]) * k,
                ];
                let trace = c[0] + c[3] + c[5];
                if trace <= 0.0 {
                    return 0.0;
                }
                let det3 = |c: &[f64; 6]| -> f64 {
                    c[0] * (c[3] * c[5] - c[4] * c[4]) - c[1] * (c[1] * c[5] - c[4] * c[2])
                        + c[2] * (c[1] * c[4] - c[3] * c[2])
                };
                let mut det = det3(&c);
                let scale = (trace / 3.0).powi(3);
                if det <= 1e-12 * scale {
                    let lambda = RIDGE_EPS * trace / 3.0;
                    c[0] += lambda;
                    c[3] += lambda;
                    c[5] += lambda;
                    det = det3(&c);
                    *ridge_used = true;
                }
                // adjugate solve: t² = dᵀ C⁻¹ d
                let adj = [
                    c[3] * c[5] - c[4] * c[4],
                    c[2] * c[4] - c[1] * c[5],
                    c[1] * c[4] - c[2] * c[3],
                    c[0] * c[5] - c[2] * c[2],
                    c[1] * c[2] - c[0] * c[4],
                    c[0] * c[3] - c[1] * c[1],
                ];
                let q = d[0] * (adj[0] * d[0] + adj[1] * d[1] + adj[2] * d[2])
                    + d[1] * (adj[1] * d[0] + adj[3] * d[1] + adj[4] * d[2])
                    + d[2] * (adj[2] * d[0] + adj[4] * d[1] + adj[5] * d[2]);
                (q / det).max(0.0)
            }
        }
    }

    /// Signed report statistic for the observed split: t for scalars, T²
    /// otherwise.
    fn report_statistic(&self, n1: usize, n2: usize) -> f64 {
        let mut ridge = false;
        let cmp = self.statistic(&subset_identity(n1), n1, n2, &mut ridge);
        match self {
            PooledGop::Scalar { vals, sum, .. } => {
                let s1: f64 = vals[..n1].iter().sum();
                let diff = s1 / n1 as f64 - (sum - s1) / n2 as f64;
                cmp.sqrt().copysign(diff)
            }
            _ => cmp,
        }
    }
}

/// Result of one permutation test.
#[derive(Debug, Clone, Copy)]
pub struct PermutationOutcome {
    /// Empirical p-value in [1/(B+1), 1].
    pub p: f64,
    /// Signed t (scalars) or T² (vectors) of the observed split.
    pub observed: f64,
    pub exhaustive: bool,
    /// Observed statistic hit the ±∞ sentinel.
    pub degenerate: bool,
    pub ridge_used: bool,
}

fn binomial_at_most(n: usize, k: usize, cap: u128) -> Option<u128> {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as u128)?;
        acc /= (i + 1) as u128;
        if acc > cap {
            return None;
        }
    }
    Some(acc)
}

/// Permutation test of a pooled GOP sample: partitions the pooled values
/// into the two group sizes `B` times (exhaustively when the partition count
/// does not exceed `B`), counting permuted statistics at least as large as
/// the observed one. Deterministic for a given seed regardless of thread
/// count.
pub fn permutation_test(sample: &GopSample, b: usize, seed: u64) -> Result<PermutationOutcome> {
    let n = sample.values.len();
    let n1 = sample.n1;
    if b < 1 || n1 < 2 || n < n1 + 2 {
        return Err(Error::validation(
            "permutation test needs B >= 1 and at least two values per group".to_string(),
        ));
    }
    let n2 = n - n1;
    let pooled = PooledGop::from_values(&sample.values);
    let mut ridge_used = false;
    let observed_cmp = pooled.statistic(&subset_identity(n1), n1, n2, &mut ridge_used);
    let observed = pooled.report_statistic(n1, n2);

    if observed_cmp.is_infinite() {
        return Ok(PermutationOutcome {
            p: 1.0 / (b as f64 + 1.0),
            observed,
            exhaustive: false,
            degenerate: true,
            ridge_used,
        });
    }

    if let Some(count) = binomial_at_most(n, n1, b as u128) {
        let mut hits = 0u64;
        let mut subset: Vec<usize> = (0..n1).collect();
        loop {
            let mut r = false;
            if pooled.statistic(&subset, n1, n2, &mut r) >= observed_cmp {
                hits += 1;
            }
            ridge_used |= r;
            if !next_combination(&mut subset, n) {
                break;
            }
        }
        let total = count as f64;
        return Ok(PermutationOutcome {
            p: (1.0 + hits as f64) / (total + 1.0),
            observed,
            exhaustive: true,
            degenerate: false,
            ridge_used,
        });
    }

    let indices: Vec<usize> = (0..n).collect();
    let hits: u64 = (0..b as u64)
        .into_par_iter()
        .map_init(
            || (indices.clone(), vec![0usize; n1]),
            |(buf, subset), j| {
                let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[seed, j]));
                buf.copy_from_slice(&indices);
                for i in 0..n1 {
                    let pick = rng.random_range(i..n);
                    buf.swap(i, pick);
                    subset[i] = buf[i];
                }
                let mut r = false;
                let stat = pooled.statistic(subset, n1, n2, &mut r);
                u64::from(stat >= observed_cmp)
            },
        )
        .sum();

    Ok(PermutationOutcome {
        p: (1.0 + hits as f64) / (b as f64 + 1.0),
        observed,
        exhaustive: false,
        degenerate: false,
        ridge_used,
    })
}

/// Advance `subset` (strictly increasing indices into 0..n) to the next
/// combination in lexicographic order; false when exhausted.
fn next_combination(subset: &mut [usize], n: usize) -> bool {
    let k = subset.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if subset[i] < n - k + i {
            subset[i] += 1;
            for j in i + 1..k {
                subset[j] = subset[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Bonferroni adjustment: min(K·p, 1).
pub fn adjust_bonferroni(p: &[f64]) -> Vec<f64> {
    let k = p.len() as f64;
    p.iter().map(|&v| (k * v).min(1.0)).collect()
}

/// Benjamini-Hochberg step-up adjustment: sorted ascending,
/// p_(i) ← min(1, min_{j ≥ i} K·p_(j)/j), mapped back to input order.
pub fn adjust_bh(p: &[f64]) -> Vec<f64> {
    let k = p.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| p[a].partial_cmp(&p[b]).unwrap().then(a.cmp(&b)));
    let mut adjusted = vec![0.0; k];
    let mut running = 1.0f64;
    for (rank, &idx) in order.iter().enumerate().rev() {
        let candidate = (k as f64) * p[idx] / (rank as f64 + 1.0);
        running = running.min(candidate).min(1.0);
        adjusted[idx] = running;
    }
    adjusted
}

/// Which parameterization a study tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StudyMode {
    Lp,
    Gp,
}

/// Euclideanization chart for directional GOPs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Euclideanization {
    Pns,
    Tangent,
}

#[derive(Debug, Clone, Copy)]
pub struct StudyOptions {
    /// Monte Carlo permutations per GOP.
    pub b: usize,
    pub seed: u64,
    /// Per-test significance level for raw and Bonferroni flags.
    pub alpha: f64,
    /// FDR level for the BH flag.
    pub fdr: f64,
    pub euclid: Euclideanization,
    /// GP mode only: scale configurations to unit centroid size during GPA.
    pub gpa_scaling: bool,
}

impl Default for StudyOptions {
    fn default() -> Self {
        StudyOptions {
            b: 10_000,
            seed: 0,
            alpha: 0.05,
            fdr: 0.05,
            euclid: Euclideanization::Pns,
            gpa_scaling: true,
        }
    }
}

/// Per-GOP row of a study report.
#[derive(Debug, Clone)]
pub struct GopResult {
    pub id: GopId,
    pub statistic: f64,
    pub raw_p: f64,
    pub bh_p: f64,
    pub bonf_p: f64,
    pub sig_raw: bool,
    pub sig_bh: bool,
    pub sig_bonf: bool,
    pub degenerate: bool,
    pub ridge_used: bool,
}

/// Full study report.
#[derive(Debug, Clone)]
pub struct TestReport {
    pub mode: StudyMode,
    pub options: StudyOptions,
    pub n1: usize,
    pub n2: usize,
    pub k: usize,
    pub gops: Vec<GopResult>,
}

impl TestReport {
    pub fn significant_raw(&self) -> usize {
        self.gops.iter().filter(|g| g.sig_raw).count()
    }
    pub fn significant_bh(&self) -> usize {
        self.gops.iter().filter(|g| g.sig_bh).count()
    }
    pub fn significant_bonf(&self) -> usize {
        self.gops.iter().filter(|g| g.sig_bonf).count()
    }
}

/// Number of LP GOPs for a geometry: directions and lengths of spokes, five
/// per-node frame/connection properties, plus the LP-size.
pub fn lp_gop_count(n_spokes: usize, n_points: usize) -> usize {
    2 * n_spokes + 5 * n_points + 1
}

/// Number of GP GOPs: positions, spoke directions and lengths, plus GP-size.
pub fn gp_gop_count(n_spokes: usize, n_points: usize) -> usize {
    n_spokes * 2 + n_points + 1
}

fn euclideanize_dirs(dirs: &[UnitVec3], method: Euclideanization) -> Result<Vec<[f64; 2]>> {
    let tangent = |dirs: &[UnitVec3]| -> Result<Vec<[f64; 2]>> {
        match euclideanize_tangent(dirs) {
            Ok((coords, _)) => Ok(coords.iter().map(|c| [c.a1, c.a2]).collect()),
            Err(_) => {
                // mean at the cut locus of the pole: route the chart through e₁
                let mean = crate::sphere::frechet_mean(dirs)?;
                let r1 = rotation_between(&mean, &UnitVec3::x_axis())?;
                let r2 = rotation_between(&UnitVec3::x_axis(), &UnitVec3::z_axis())?;
                let rot = r2 * r1;
                dirs.iter()
                    .map(|d| {
                        crate::sphere::log_map_north(&d.rotated(&rot)).map(|c| [c.a1, c.a2])
                    })
                    .collect()
            }
        }
    };
    match method {
        Euclideanization::Tangent => tangent(dirs),
        Euclideanization::Pns => match euclideanize_pns(dirs) {
            Ok(res) => Ok(res.coords.iter().map(|c| [c.a1, c.a2]).collect()),
            Err(_) => tangent(dirs),
        },
    }
}

/// Run the partial tests for a prepared set of GOP samples.
fn run_gop_tests(
    samples: Vec<GopSample>,
    mode: StudyMode,
    n1: usize,
    n2: usize,
    options: &StudyOptions,
) -> Result<TestReport> {
    let outcomes: Vec<PermutationOutcome> = samples
        .par_iter()
        .enumerate()
        .map(|(ordinal, sample)| {
            permutation_test(sample, options.b, mix_seed(&[options.seed, ordinal as u64]))
        })
        .collect::<Result<Vec<_>>>()?;

    let raw: Vec<f64> = outcomes.iter().map(|o| o.p).collect();
    let bh = adjust_bh(&raw);
    let bonf = adjust_bonferroni(&raw);
    let gops: Vec<GopResult> = samples
        .iter()
        .zip(&outcomes)
        .zip(bh.iter().zip(&bonf))
        .map(|((sample, o), (&bh_p, &bonf_p))| GopResult {
            id: sample.id,
            statistic: o.observed,
            raw_p: o.p,
            bh_p,
            bonf_p,
            sig_raw: o.p <= options.alpha,
            sig_bh: bh_p <= options.fdr,
            sig_bonf: bonf_p <= options.alpha,
            degenerate: o.degenerate,
            ridge_used: o.ridge_used,
        })
        .collect();

    Ok(TestReport {
        mode,
        options: *options,
        n1,
        n2,
        k: gops.len(),
        gops,
    })
}

/// LP-mode study: spoke/connection/frame-axis directions euclideanized over
/// the pooled sample and tested with Hotelling T², lengths and LP-size with
/// the t statistic. Members are scaled to unit LP-size first; the size GOP
/// tests the original LP-sizes. GPA options do not enter this path.
pub fn run_study_lp(
    group_a: &LpPopulation,
    group_b: &LpPopulation,
    options: &StudyOptions,
) -> Result<TestReport> {
    if !group_a.members()[0].same_structure(&group_b.members()[0]) {
        return Err(Error::validation(
            "groups are structurally incompatible".to_string(),
        ));
    }
    let (n1, n2) = (group_a.len(), group_b.len());
    let scaled_and_size = |m: &LpDsRep| -> (LpDsRep, f64) {
        if m.scaled {
            (m.clone(), m.lp_size)
        } else {
            let size = crate::dsrep::lp_size(m);
            (crate::dsrep::scale_lp(m), size)
        }
    };
    let mut members: Vec<LpDsRep> = Vec::with_capacity(n1 + n2);
    let mut sizes: Vec<f64> = Vec::with_capacity(n1 + n2);
    for m in group_a.members().iter().chain(group_b.members()) {
        let (s, size) = scaled_and_size(m);
        members.push(s);
        sizes.push(size);
    }
    let template = &members[0];
    let n_spokes = template.n_spokes();
    let n_points = template.n_points();

    let mut samples = Vec::with_capacity(lp_gop_count(n_spokes, n_points));
    let push_dirs = |id: GopId,
                         samples: &mut Vec<GopSample>,
                         dirs: Vec<UnitVec3>|
     -> Result<()> {
        let coords = euclideanize_dirs(&dirs, options.euclid)?;
        samples.push(GopSample {
            id,
            n1,
            values: GopValues::Vec2(coords),
        });
        Ok(())
    };

    for i in 0..n_spokes {
        push_dirs(
            GopId {
                kind: GopKind::SpokeDir,
                index: i,
            },
            &mut samples,
            members.iter().map(|m| m.spokes[i].dir).collect(),
        )?;
    }
    for i in 0..n_spokes {
        samples.push(GopSample {
            id: GopId {
                kind: GopKind::SpokeLen,
                index: i,
            },
            n1,
            values: GopValues::Scalar(members.iter().map(|m| m.spokes[i].len).collect()),
        });
    }
    for (kind, axis) in [
        (GopKind::FrameN, 0usize),
        (GopKind::FrameB, 1),
        (GopKind::FrameBPerp, 2),
    ] {
        for j in 0..n_points {
            push_dirs(
                GopId { kind, index: j },
                &mut samples,
                members.iter().map(|m| *m.frames[j].axis(axis)).collect(),
            )?;
        }
    }
    for j in 0..n_points {
        push_dirs(
            GopId {
                kind: GopKind::ConnDir,
                index: j,
            },
            &mut samples,
            members.iter().map(|m| m.connections[j].dir).collect(),
        )?;
    }
    for j in 0..n_points {
        samples.push(GopSample {
            id: GopId {
                kind: GopKind::ConnLen,
                index: j,
            },
            n1,
            values: GopValues::Scalar(members.iter().map(|m| m.connections[j].len).collect()),
        });
    }
    samples.push(GopSample {
        id: GopId {
            kind: GopKind::Size,
            index: 0,
        },
        n1,
        values: GopValues::Scalar(sizes),
    });

    debug_assert_eq!(samples.len(), lp_gop_count(n_spokes, n_points));
    run_gop_tests(samples, StudyMode::Lp, n1, n2, options)
}

/// GP-mode study: the pooled group is GPA-aligned (optionally with scaling),
/// positions are tested as 3D Hotelling GOPs on the aligned coordinates,
/// spoke directions are rotated along and euclideanized, lengths carry the
/// member scale when scaling is on, and GP-size tests the original
/// spoke-tip centroid sizes.
pub fn run_study_gp(
    group_a: &[GpDsRep],
    group_b: &[GpDsRep],
    options: &StudyOptions,
) -> Result<TestReport> {
    if group_a.is_empty() || group_b.is_empty() {
        return Err(Error::validation("empty group".to_string()));
    }
    let template = &group_a[0];
    let compatible = |g: &GpDsRep| {
        g.grid == template.grid
            && g.spokes.len() == template.spokes.len()
            && g.spokes
                .iter()
                .zip(&template.spokes)
                .all(|(a, b)| a.tail == b.tail && a.kind == b.kind)
    };
    if !group_a.iter().all(compatible) || !group_b.iter().all(compatible) {
        return Err(Error::validation(
            "groups are structurally incompatible".to_string(),
        ));
    }
    let (n1, n2) = (group_a.len(), group_b.len());
    let members: Vec<&GpDsRep> = group_a.iter().chain(group_b.iter()).collect();

    let sizes: Vec<f64> = members
        .iter()
        .map(|m| gp_size(m, SizeBasis::SpokeTips))
        .collect();

    let configs: Vec<Vec<nalgebra::Vector3<f64>>> =
        members.iter().map(|m| m.skeletal_points.clone()).collect();
    let gpa = gpa_align_full(&configs, options.gpa_scaling)?;

    let n_points = template.n_points();
    let n_spokes = template.spokes.len();
    let mut samples = Vec::with_capacity(gp_gop_count(n_spokes, n_points));

    for j in 0..n_points {
        let vals: Vec<[f64; 3]> = gpa
            .aligned
            .iter()
            .map(|cfg| [cfg[j].x, cfg[j].y, cfg[j].z])
            .collect();
        samples.push(GopSample {
            id: GopId {
                kind: GopKind::Position,
                index: j,
            },
            n1,
            values: GopValues::Vec3(vals),
        });
    }
    for i in 0..n_spokes {
        let dirs: Vec<UnitVec3> = members
            .iter()
            .enumerate()
            .map(|(m, rep)| rep.spokes[i].dir.rotated(&gpa.rotations[m]))
            .collect();
        let coords = euclideanize_dirs(&dirs, options.euclid)?;
        samples.push(GopSample {
            id: GopId {
                kind: GopKind::SpokeDir,
                index: i,
            },
            n1,
            values: GopValues::Vec2(coords),
        });
    }
    for i in 0..n_spokes {
        let lens: Vec<f64> = members
            .iter()
            .enumerate()
            .map(|(m, rep)| rep.spokes[i].len * if options.gpa_scaling { gpa.scales[m] } else { 1.0 })
            .collect();
        samples.push(GopSample {
            id: GopId {
                kind: GopKind::SpokeLen,
                index: i,
            },
            n1,
            values: GopValues::Scalar(lens),
        });
    }
    samples.push(GopSample {
        id: GopId {
            kind: GopKind::Size,
            index: 0,
        },
        n1,
        values: GopValues::Scalar(sizes),
    });

    debug_assert_eq!(samples.len(), gp_gop_count(n_spokes, n_points));
    run_gop_tests(samples, StudyMode::Gp, n1, n2, options)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn t_statistic_hand_computed() {
        // x = {1,2,3}, y = {2,3,4}: diff = -1, pooled sd = 1, factor sqrt(2/3)
        let t = t_statistic(&[1.0, 2.0, 3.0], &[2.0, 3.0, 4.0]);
        assert_abs_diff_eq!(t, -(1.5f64).sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn t_statistic_degenerate_branches() {
        assert_eq!(t_statistic(&[1.0, 1.0], &[1.0, 1.0]), 0.0);
        let t = t_statistic(&[0.0, 0.0], &[1.0, 1.0]);
        assert!(t.is_infinite() && t < 0.0);
    }

    #[test]
    fn t_statistic_same_multiset_is_zero() {
        let x = [0.3, 1.7, -2.0, 0.4];
        assert_abs_diff_eq!(t_statistic(&x, &x), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn hotelling_equals_t_squared_in_1d() {
        let x: Vec<Vec<f64>> = [1.0, 2.0, 3.0].iter().map(|&v| vec![v]).collect();
        let y: Vec<Vec<f64>> = [2.0, 3.0, 4.0].iter().map(|&v| vec![v]).collect();
        let t2 = hotelling_t2(&x, &y);
        assert_abs_diff_eq!(t2, 1.5, epsilon = 1e-12);
    }

    #[test]
    fn hotelling_zero_for_equal_means() {
        let x = vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0]];
        let t2 = hotelling_t2(&x, &x.clone());
        assert_abs_diff_eq!(t2, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn permutation_identical_groups_saturate() {
        let vals: Vec<f64> = (0..6).map(|i| i as f64).collect();
        let mut pooled = vals.clone();
        pooled.extend_from_slice(&vals);
        let sample = GopSample {
            id: GopId {
                kind: GopKind::SpokeLen,
                index: 0,
            },
            n1: 6,
            values: GopValues::Scalar(pooled),
        };
        let out = permutation_test(&sample, 200, 7).unwrap();
        assert_eq!(out.p, 1.0);
    }

    #[test]
    fn permutation_extreme_observed_hits_floor() {
        // group A hugely below group B; only the observed-like partitions tie
        let mut pooled = vec![-100.0, -101.0, -99.5, -100.5];
        pooled.extend([100.0, 101.0, 99.5, 100.5]);
        let sample = GopSample {
            id: GopId {
                kind: GopKind::SpokeLen,
                index: 0,
            },
            n1: 4,
            values: GopValues::Scalar(pooled),
        };
        // C(8,4) = 70 partitions, enumerated exhaustively; the observed and
        // its mirror dominate: p = (1 + 2) / (70 + 1)
        let out = permutation_test(&sample, 1000, 3).unwrap();
        assert!(out.exhaustive);
        assert_abs_diff_eq!(out.p, 3.0 / 71.0, epsilon = 1e-12);
    }

    #[test]
    fn permutation_is_seed_deterministic() {
        let pooled: Vec<f64> = (0..40).map(|i| ((i * 37) % 17) as f64).collect();
        let sample = GopSample {
            id: GopId {
                kind: GopKind::SpokeLen,
                index: 0,
            },
            n1: 20,
            values: GopValues::Scalar(pooled),
        };
        let a = permutation_test(&sample, 500, 99).unwrap();
        let b = permutation_test(&sample, 500, 99).unwrap();
        assert_eq!(a.p, b.p);
        let c = permutation_test(&sample, 500, 100).unwrap();
        assert!(a.p != c.p || a.observed == c.observed);
    }

    #[test]
    fn bonferroni_and_bh_hand_example() {
        let p = [0.01, 0.02, 0.03, 0.04, 0.05];
        let bonf = adjust_bonferroni(&p);
        for (b, expect) in bonf.iter().zip([0.05, 0.10, 0.15, 0.20, 0.25]) {
            assert_abs_diff_eq!(*b, expect, epsilon = 1e-12);
        }
        let bh = adjust_bh(&p);
        for b in &bh {
            assert_abs_diff_eq!(*b, 0.05, epsilon = 1e-12);
        }
    }

    #[test]
    fn adjustments_identity_cases() {
        assert_eq!(adjust_bonferroni(&[0.2]), vec![0.2]);
        assert_eq!(adjust_bh(&[0.2]), vec![0.2]);
        assert_eq!(adjust_bh(&[1.0, 1.0, 1.0]), vec![1.0, 1.0, 1.0]);
        assert_eq!(adjust_bonferroni(&[1.0, 1.0, 1.0]), vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn bh_below_bonferroni() {
        let p = [0.001, 0.2, 0.04, 0.9, 0.04, 0.33];
        let bh = adjust_bh(&p);
        let bonf = adjust_bonferroni(&p);
        for (a, b) in bh.iter().zip(&bonf) {
            assert!(a <= b);
        }
    }

    #[test]
    fn gop_count_formulas() {
        // the fitted hippocampus geometry: 122 spokes, 71 skeletal points
        assert_eq!(lp_gop_count(122, 71), 600);
        assert_eq!(gp_gop_count(122, 71), 316);
    }

    #[test]
    fn next_combination_enumerates_all() {
        let mut subset = vec![0, 1, 2];
        let mut count = 1;
        while next_combination(&mut subset, 6) {
            count += 1;
        }
        assert_eq!(count, 20); // C(6,3)
    }
}
