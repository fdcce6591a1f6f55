//! Independent verification machinery: seeded random instance generators,
//! purification-based Uhlmann fidelity, a brute-force maximizer of fidelity
//! over the feasible affine slice, the Stinespring–Frobenius distance, and a
//! uniqueness probe for rank-deficient inputs.
//!
//! Nothing here calls the closed-form formulas being verified except where a
//! known feasible point is needed to seed the affine search.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::chanrep::{ChannelRep, HpMap};
use crate::error::{Error, Result};
use crate::matcore::{
    c, cr, fidelity, fro_dist, geometric_mean, hermitize, hs_inner, identity, inv_on_support,
    spectral, CMat, PsdMatrix, Tolerances,
};
use crate::projector::{gamma_map, ConstraintPair};

/// Deterministic instance recipe: the same spec always produces the same
/// matrices, bit for bit, on every platform (ChaCha8 keystream).
#[derive(Debug, Clone, Copy)]
pub struct InstanceSpec {
    pub seed: u64,
    pub dim: usize,
    pub rank: usize,
}

impl InstanceSpec {
    pub fn new(seed: u64, dim: usize, rank: usize) -> Result<Self> {
        if dim == 0 || rank == 0 || rank > dim {
            return Err(Error::BadSpec(format!(
                "need 1 <= rank <= dim, got dim {dim}, rank {rank}"
            )));
        }
        Ok(InstanceSpec { seed, dim, rank })
    }
}

/// Outcome of the numerical feasible-set maximization.
#[derive(Debug, Clone)]
pub struct OracleResult {
    pub maximizer: PsdMatrix,
    pub value: f64,
    pub restarts: usize,
    pub converged: bool,
    pub feasibility_residual: f64,
}

pub fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Complex Ginibre matrix: independent standard complex Gaussian entries.
pub fn random_ginibre(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> CMat {
    CMat::from_fn(rows, cols, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        c(re, im)
    })
}

/// G·G† for a dim×rank Ginibre block.
pub fn random_psd(spec: &InstanceSpec) -> PsdMatrix {
    let mut rng = rng_for(spec.seed);
    let g = random_ginibre(spec.dim, spec.rank, &mut rng);
    PsdMatrix::repair(&g * g.adjoint(), 1e-8).expect("Wishart matrix is PSD")
}

/// Full-rank Wishart plus a ridge, guaranteed PD.
pub fn random_pd(d: usize, rng: &mut ChaCha8Rng) -> PsdMatrix {
    let g = random_ginibre(d, d, rng);
    PsdMatrix::repair(&g * g.adjoint() + identity(d) * cr(0.05), 1e-8)
        .expect("ridged Wishart matrix is PD")
}

/// Trace-one PD state.
pub fn random_density(d: usize, rng: &mut ChaCha8Rng) -> PsdMatrix {
    let p = random_pd(d, rng);
    PsdMatrix::repair(p.matrix() / cr(p.trace()), 1e-8).expect("normalized PD is PD")
}

/// Haar-adjacent unitary via QR of a Ginibre matrix.
pub fn random_unitary(d: usize, rng: &mut ChaCha8Rng) -> CMat {
    random_ginibre(d, d, rng).qr().q()
}

/// Random CPT channel with `r` Kraus operators from a random isometry.
pub fn random_cpt(din: usize, dout: usize, r: usize, rng: &mut ChaCha8Rng) -> Result<ChannelRep> {
    if dout * r < din {
        return Err(Error::BadSpec(format!(
            "Stinespring space {}x{} too small for input dim {din}",
            dout, r
        )));
    }
    let g = random_ginibre(dout * r, din, rng);
    let q = g.qr().q();
    ChannelRep::from_stinespring(q.columns(0, din).clone_owned(), r, &Tolerances::default())
}

/// Random CP (generally not TP) map: Gaussian Kraus operators.
pub fn random_cp(din: usize, dout: usize, r: usize, rng: &mut ChaCha8Rng) -> Result<ChannelRep> {
    let kraus: Vec<CMat> = (0..r)
        .map(|_| random_ginibre(dout, din, rng) * cr(1.0 / (r as f64).sqrt()))
        .collect();
    ChannelRep::from_kraus(kraus)
}

/// Random Hermitian-preserving map: signed Gaussian Kraus terms.
pub fn random_hp(din: usize, dout: usize, r: usize, rng: &mut ChaCha8Rng) -> Result<HpMap> {
    let terms: Vec<(f64, CMat)> = (0..r)
        .map(|i| {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            let w: f64 = StandardNormal.sample(rng);
            (sign * (1.0 + w * w), random_ginibre(dout, din, rng))
        })
        .collect();
    HpMap::new(terms)
}

/// A point of Λ⁻¹[C] obtained by running the closed form on a fresh random
/// PD matrix — feasible whenever the Gamma map saturates for the pair's
/// channel family, independent of any point under test.
pub fn random_feasible(pair: &ConstraintPair, seed: u64, tol: &Tolerances) -> Result<PsdMatrix> {
    let mut rng = rng_for(seed);
    let w = random_pd(pair.channel().dim_in(), &mut rng);
    let gamma = gamma_map(pair, &w, tol)?;
    let residual = fro_dist(&pair.channel().apply(gamma.matrix())?, pair.target().matrix());
    if residual > tol.feas_tol * pair.target().matrix().norm() {
        return Err(Error::InfeasibleGamma { residual });
    }
    Ok(gamma)
}

/// Fidelity through purifications: spectral-decompose both states, build the
/// purification overlap matrix O[z,w] = √(λ_z μ_w)⟨v_z|u_w⟩, and take its
/// nuclear norm (the optimal alignment unitary comes from the polar part).
pub fn uhlmann_fidelity(p: &PsdMatrix, q: &PsdMatrix) -> Result<f64> {
    if p.dim() != q.dim() {
        return Err(Error::DimMismatch(p.dim(), q.dim()));
    }
    let sp = p.spectral();
    let sq = q.spectral();
    let d = p.dim();
    let mut overlap = DMatrix::<num_complex::Complex64>::zeros(d, d);
    for z in 0..d {
        for w in 0..d {
            let amp = (sp.eigenvalues[z].max(0.0) * sq.eigenvalues[w].max(0.0)).sqrt();
            let ip = (sp.eigenvectors.column(z).adjoint() * sq.eigenvectors.column(w))[(0, 0)];
            overlap[(z, w)] = ip * cr(amp);
        }
    }
    let svd = overlap.svd(false, false);
    Ok(svd.singular_values.iter().sum())
}

// ---- real coordinatization of Hermitian matrix space ----

/// Orthonormal basis of the real vector space of d×d Hermitian matrices.
fn herm_basis(d: usize) -> Vec<CMat> {
    let mut basis = Vec::with_capacity(d * d);
    for i in 0..d {
        let mut e = CMat::zeros(d, d);
        e[(i, i)] = cr(1.0);
        basis.push(e);
    }
    let s = 1.0 / 2.0f64.sqrt();
    for i in 0..d {
        for j in (i + 1)..d {
            let mut x = CMat::zeros(d, d);
            x[(i, j)] = cr(s);
            x[(j, i)] = cr(s);
            basis.push(x);
            let mut y = CMat::zeros(d, d);
            y[(i, j)] = c(0.0, -s);
            y[(j, i)] = c(0.0, s);
            basis.push(y);
        }
    }
    basis
}

fn to_coords(h: &CMat, basis: &[CMat]) -> DVector<f64> {
    DVector::from_iterator(basis.len(), basis.iter().map(|e| hs_inner(e, h).re))
}

fn from_coords(x: &DVector<f64>, basis: &[CMat], d: usize) -> CMat {
    let mut out = CMat::zeros(d, d);
    for (e, &xi) in basis.iter().zip(x.iter()) {
        out += e * cr(xi);
    }
    out
}

/// Real matrix of the channel over the Hermitian bases of input and output.
fn channel_real_matrix(ch: &ChannelRep, bin: &[CMat], bout: &[CMat]) -> Result<DMatrix<f64>> {
    let mut a = DMatrix::zeros(bout.len(), bin.len());
    for (col, e) in bin.iter().enumerate() {
        let img = ch.apply(e)?;
        for (row, f) in bout.iter().enumerate() {
            a[(row, col)] = hs_inner(f, &img).re;
        }
    }
    Ok(a)
}

/// Orthonormal basis of the nullspace of `a` (columns), via full SVD.
fn nullspace(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.ncols();
    let svd = a.clone().svd(false, true);
    let vt = svd.v_t.expect("requested V^T");
    let smax = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    let cut = 1e-12 * smax.max(1.0);
    let mut cols = Vec::new();
    for i in 0..vt.nrows() {
        if i >= svd.singular_values.len() || svd.singular_values[i] <= cut {
            cols.push(vt.row(i).transpose());
        }
    }
    // full SVD of a wide-or-square matrix covers all of R^n; for tall ones
    // the missing rows of V^T span nothing extra only when n <= nrows(vt)
    let mut out = DMatrix::zeros(n, cols.len());
    for (j, col) in cols.iter().enumerate() {
        out.set_column(j, col);
    }
    out
}

fn min_eig(h: &CMat) -> f64 {
    spectral(h).min_eigenvalue()
}

/// Gradient of Q ↦ F(P,Q) at a PD point: ½ Q⁻¹ # P.
fn fidelity_gradient(p: &PsdMatrix, q: &PsdMatrix, rank_tol: f64) -> Result<CMat> {
    let g = geometric_mean(&inv_on_support(q, rank_tol), p)?;
    Ok(g.matrix() * cr(0.5))
}

/// Brute-force maximization of F(P, ·) over the affine slice
/// {Q ⪰ 0 : Λ(Q) = C} by projected gradient ascent in nullspace
/// coordinates with adaptive step and PD-preserving backtracking.
/// Fidelity is concave and the slice convex, so restarts certify the
/// optimum at desk scale.
pub fn numeric_projection(
    pair: &ConstraintPair,
    p: &PsdMatrix,
    restarts: usize,
    budget: usize,
    seed: u64,
) -> Result<OracleResult> {
    let tol = Tolerances::default();
    let din = pair.channel().dim_in();
    let bin = herm_basis(din);
    let bout = herm_basis(pair.channel().dim_out());
    let a = channel_real_matrix(pair.channel(), &bin, &bout)?;
    let cvec = to_coords(pair.target().matrix(), &bout);
    let null = nullspace(&a);

    // particular feasible point: least-squares solution, then a PD anchor
    let lsq = a
        .clone()
        .svd(true, true)
        .solve(&cvec, 1e-12)
        .map_err(|e| Error::BadSpec(format!("least squares failed: {e}")))?;
    let h0 = hermitize(&from_coords(&lsq, &bin, din));

    let mut anchor: Option<CMat> = None;
    if let Ok(g) = gamma_map(pair, p, &tol) {
        let resid = fro_dist(&pair.channel().apply(g.matrix())?, pair.target().matrix());
        if resid <= tol.feas_tol * pair.target().matrix().norm() {
            anchor = Some(g.matrix().clone());
        }
    }
    if anchor.is_none() && min_eig(&h0) > 1e-10 {
        anchor = Some(h0.clone());
    }
    let anchor = match anchor {
        Some(m) => m,
        None => {
            return Ok(OracleResult {
                maximizer: p.clone(),
                value: f64::NEG_INFINITY,
                restarts: 0,
                converged: false,
                feasibility_residual: f64::INFINITY,
            })
        }
    };
    let anchor_coords = to_coords(&anchor, &bin);

    let mut rng = rng_for(seed);
    let mut best: Option<(f64, CMat)> = None;
    let mut any_converged = false;

    for restart in 0..restarts.max(1) {
        // start: anchor shifted by a random nullspace direction, backtracked
        // until PD
        let mut start = anchor_coords.clone();
        if restart > 0 && null.ncols() > 0 {
            let dir = DVector::from_fn(null.ncols(), |_, _| {
                let g: f64 = StandardNormal.sample(&mut rng);
                g
            });
            let mut shift = &null * dir;
            let scale = anchor.norm() / shift.norm().max(1e-300);
            shift *= 0.3 * scale;
            let mut t = 1.0;
            loop {
                let cand = &start + &shift * t;
                let m = hermitize(&from_coords(&cand, &bin, din));
                let floor = 1e-9 * spectral(&m).max_eigenvalue().max(1e-12);
                if min_eig(&m) > floor {
                    start = cand;
                    break;
                }
                t *= 0.5;
                if t < 1e-10 {
                    break;
                }
            }
        }

        let mut x = start;
        let mut q = PsdMatrix::repair(from_coords(&x, &bin, din), 1e-6)?;
        let mut value = fidelity(p, &q)?;
        let mut step = 0.1;
        let mut converged = false;
        for _ in 0..budget {
            let grad = match fidelity_gradient(p, &q, tol.rank_tol) {
                Ok(g) => g,
                Err(_) => break,
            };
            let gcoords = to_coords(&grad, &bin);
            let gproj = if null.ncols() > 0 {
                &null * (null.transpose() * &gcoords)
            } else {
                DVector::zeros(gcoords.len())
            };
            let gnorm = gproj.norm();
            if gnorm < 1e-14 {
                converged = true;
                break;
            }
            let mut improved = false;
            for _ in 0..60 {
                let cand = &x + &gproj * step;
                let m = hermitize(&from_coords(&cand, &bin, din));
                let floor = 1e-11 * spectral(&m).max_eigenvalue().max(1e-12);
                if min_eig(&m) > floor {
                    if let Ok(qc) = PsdMatrix::repair(m, 1e-6) {
                        if let Ok(v) = fidelity(p, &qc) {
                            if v > value {
                                let gain = v - value;
                                x = cand;
                                q = qc;
                                value = v;
                                step *= 1.5;
                                improved = true;
                                if gain < 1e-12 {
                                    converged = true;
                                }
                                break;
                            }
                        }
                    }
                }
                step *= 0.5;
                if step < 1e-16 {
                    break;
                }
            }
            if !improved {
                converged = true;
                break;
            }
            if converged {
                break;
            }
        }
        any_converged |= converged;
        let keep = match &best {
            None => true,
            Some((bv, _)) => value > *bv,
        };
        if keep {
            best = Some((value, q.matrix().clone()));
        }
    }

    let (value, qbest) = best.expect("at least one restart ran");
    let maximizer = PsdMatrix::repair(qbest, 1e-6)?;
    let feasibility_residual = fro_dist(
        &pair.channel().apply(maximizer.matrix())?,
        pair.target().matrix(),
    );
    Ok(OracleResult {
        maximizer,
        value,
        restarts: restarts.max(1),
        converged: any_converged && feasibility_residual <= 1e-8 * pair.target().matrix().norm().max(1.0),
        feasibility_residual,
    })
}

/// Minimal Frobenius distance between Stinespring dilations,
/// min_U ‖K − (I⊗U)L‖_F, computed from the nuclear norm of the
/// auxiliary-space overlap matrix G[z,w] = Tr[A_z† B_w].
pub fn stinespring_frobenius_distance(theta: &ChannelRep, xi: &ChannelRep) -> Result<f64> {
    if theta.dim_in() != xi.dim_in() || theta.dim_out() != xi.dim_out() {
        return Err(Error::ShapeMismatch(format!(
            "channel dims {}→{} vs {}→{}",
            theta.dim_in(),
            theta.dim_out(),
            xi.dim_in(),
            xi.dim_out()
        )));
    }
    let r = theta.kraus().len().max(xi.kraus().len());
    let zero = CMat::zeros(theta.dim_out(), theta.dim_in());
    let pad = |kraus: &[CMat]| -> Vec<CMat> {
        let mut v: Vec<CMat> = kraus.to_vec();
        while v.len() < r {
            v.push(zero.clone());
        }
        v
    };
    let a = pad(theta.kraus());
    let b = pad(xi.kraus());
    let mut g = CMat::zeros(r, r);
    for (z, az) in a.iter().enumerate() {
        for (w, bw) in b.iter().enumerate() {
            g[(z, w)] = hs_inner(az, bw);
        }
    }
    let nuc: f64 = g.svd(false, false).singular_values.iter().sum();
    let ta = a.iter().map(|m| m.norm_squared()).sum::<f64>();
    let tb = b.iter().map(|m| m.norm_squared()).sum::<f64>();
    Ok((ta + tb - 2.0 * nuc).max(0.0).sqrt())
}

/// Spread of oracle maximizers across restart seeds, split into on-support
/// and off-support parts of the compression by supp(P).
#[derive(Debug, Clone, Copy)]
pub struct UniquenessReport {
    pub on_support_spread: f64,
    pub off_support_spread: f64,
    pub runs: usize,
}

/// Runs the numerical maximizer from distinct seeds and measures how much of
/// the optimum is pinned down: the on-support compression P⁰QP⁰ must agree
/// across runs (restricted uniqueness), the rest may not.
pub fn uniqueness_probe(
    pair: &ConstraintPair,
    p: &PsdMatrix,
    runs: usize,
    budget: usize,
    base_seed: u64,
) -> Result<UniquenessReport> {
    let tol = Tolerances::default();
    let p0 = crate::matcore::support_projector(p, tol.rank_tol);
    let d = p.dim();
    let comp = identity(d) - p0.matrix();
    let mut on_blocks = Vec::new();
    let mut off_blocks = Vec::new();
    for i in 0..runs.max(2) {
        let res = numeric_projection(pair, p, 8, budget, base_seed.wrapping_add(i as u64 * 7919))?;
        let q = res.maximizer.matrix();
        on_blocks.push(p0.matrix() * q * p0.matrix());
        off_blocks.push(&comp * q * &comp);
    }
    let spread = |blocks: &[CMat]| -> f64 {
        let mut worst = 0.0f64;
        for i in 0..blocks.len() {
            for j in (i + 1)..blocks.len() {
                worst = worst.max(fro_dist(&blocks[i], &blocks[j]));
            }
        }
        worst
    };
    Ok(UniquenessReport {
        on_support_spread: spread(&on_blocks),
        off_support_spread: spread(&off_blocks),
        runs: runs.max(2),
    })
}
