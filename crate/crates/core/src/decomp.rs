//! Prior–channel decompositions of CP maps, CP extensions, projections
//! between prior classes, and the constructions layered on top: the Petz
//! recovery map, the Leifer–Spekkens state over time, the minimal-change
//! reverse channel, and prior-weighted channel distances.

use crate::chanrep::{kr_channel, ChannelRep};
use crate::error::{Error, Result};
use crate::matcore::{
    bures_sq, fidelity, geometric_mean, hermitize, inv_on_support, inv_sqrt_on_support,
    partial_trace, partial_transpose_first, psd_sqrt, purified_dist, star_on_subsystem, CMat,
    DimensionSpec, PsdMatrix, Tolerances,
};

/// The unique factorization Θ = Φ ∘ K_R of a CP map into a CPT channel and a
/// prior.
#[derive(Debug, Clone)]
pub struct PriorChannelPair {
    pub prior: PsdMatrix,
    pub channel: ChannelRep,
    /// True when the prior was singular and the channel component is only
    /// trace-preserving on supp(prior); off-support behavior is not unique.
    pub support_restricted: bool,
}

/// A state over time: a Hermitian operator on input ⊗ output.
#[derive(Debug, Clone)]
pub struct QsotState {
    /// Hermitian matrix on 𝒳 ⊗ 𝒴, input factor first.
    pub joint: CMat,
    pub dim_in: usize,
    pub dim_out: usize,
    /// Representation the joint is stored in; [`QsotRepresentation::Jamiolkowski`]
    /// is canonical here.
    pub representation: QsotRepresentation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QsotRepresentation {
    Jamiolkowski,
    Choi,
}

impl QsotState {
    /// Lossless view in the Choi convention (partial transpose on the input
    /// factor).
    pub fn to_choi(&self) -> Result<QsotState> {
        match self.representation {
            QsotRepresentation::Choi => Ok(self.clone()),
            QsotRepresentation::Jamiolkowski => Ok(QsotState {
                joint: partial_transpose_first(&self.joint, self.dim_in, self.dim_out)?,
                dim_in: self.dim_in,
                dim_out: self.dim_out,
                representation: QsotRepresentation::Choi,
            }),
        }
    }

    pub fn input_marginal(&self) -> Result<CMat> {
        let dims = DimensionSpec::new(vec![self.dim_in, self.dim_out])?;
        let m = partial_trace(&self.joint, &dims, &[0])?;
        Ok(match self.representation {
            QsotRepresentation::Jamiolkowski => m,
            QsotRepresentation::Choi => m.transpose(),
        })
    }

    pub fn output_marginal(&self) -> Result<CMat> {
        let dims = DimensionSpec::new(vec![self.dim_in, self.dim_out])?;
        partial_trace(&self.joint, &dims, &[1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceBase {
    BuresSq,
    Fidelity,
    Purified,
}

fn check_density(rho: &PsdMatrix, tol: &Tolerances) -> Result<()> {
    let t = rho.trace();
    if (t - 1.0).abs() > tol.rtol.max(1e-8) {
        return Err(Error::NotDensity((t - 1.0).abs()));
    }
    Ok(())
}

fn check_cpt(ch: &ChannelRep, tol: &Tolerances) -> Result<()> {
    let class = ch.classify(tol.rtol.max(1e-8));
    if !class.is_cp {
        return Err(Error::NotCp(class.cp_residual));
    }
    if !class.is_tp {
        return Err(Error::NotCpt(class.tp_residual));
    }
    Ok(())
}

fn sandwich_kraus(ch: &ChannelRep, left: Option<&CMat>, right: Option<&CMat>) -> Result<ChannelRep> {
    let kraus: Vec<CMat> = ch
        .kraus()
        .iter()
        .map(|k| {
            let mut m = k.clone();
            if let Some(r) = right {
                m = m * r;
            }
            if let Some(l) = left {
                m = l * m;
            }
            m
        })
        .collect();
    ChannelRep::from_kraus(kraus)
}

/// Factors a CP map Θ as Φ ∘ K_R with R = Θ†(I) and Φ CPT. When R is
/// singular and `strict` is false the support-restricted pair is returned
/// with `support_restricted` set; with `strict` true this is an error.
pub fn prior_channel_decompose(
    theta: &ChannelRep,
    strict: bool,
    tol: &Tolerances,
) -> Result<PriorChannelPair> {
    let prior = theta.prior()?;
    let singular = !prior.is_pd(tol.rank_tol);
    if singular && strict {
        return Err(Error::SingularPrior(prior.min_eigenvalue()));
    }
    let isq = inv_sqrt_on_support(&prior, tol.rank_tol);
    let channel = sandwich_kraus(theta, None, Some(isq.matrix()))?;
    Ok(PriorChannelPair {
        prior,
        channel,
        support_restricted: singular,
    })
}

/// CP extension of a CPT channel by a prior: Φ ∘ K_R, Kraus {Kᵢ R^{1/2}};
/// its Choi equals 𝔠(Φ) ★_in Rᵀ.
pub fn cp_extension(phi: &ChannelRep, r: &PsdMatrix, tol: &Tolerances) -> Result<ChannelRep> {
    check_cpt(phi, tol)?;
    if r.dim() != phi.dim_in() {
        return Err(Error::DimMismatch(r.dim(), phi.dim_in()));
    }
    sandwich_kraus(phi, None, Some(psd_sqrt(r).matrix()))
}

/// Moves a CP map to the prior class of S: Ξ = Θ ∘ K_{(R⁻¹#S)²}, the
/// Choi–Bures projection onto CP maps with prior S.
pub fn project_to_prior_class(
    theta: &ChannelRep,
    s: &PsdMatrix,
    tol: &Tolerances,
) -> Result<ChannelRep> {
    let r = theta.prior()?;
    if !r.is_pd(tol.rank_tol) {
        return Err(Error::SingularPrior(r.min_eigenvalue()));
    }
    if !s.is_pd(tol.rank_tol) {
        return Err(Error::NotPd(s.min_eigenvalue()));
    }
    if s.dim() != r.dim() {
        return Err(Error::DimMismatch(s.dim(), r.dim()));
    }
    let m = geometric_mean(&inv_on_support(&r, tol.rank_tol), s)?;
    sandwich_kraus(theta, None, Some(m.matrix()))
}

/// Petz recovery map K_ρ ∘ Φ† ∘ K_{Φ(ρ)}⁻¹, Kraus {ρ^{1/2} Kᵢ† Φ(ρ)^{-1/2}}.
pub fn petz_map(phi: &ChannelRep, rho: &PsdMatrix, tol: &Tolerances) -> Result<ChannelRep> {
    check_cpt(phi, tol)?;
    check_density(rho, tol)?;
    if !rho.is_pd(tol.rank_tol) {
        return Err(Error::NotPd(rho.min_eigenvalue()));
    }
    let out = PsdMatrix::repair(phi.apply(rho.matrix())?, 1e-8)?;
    if !out.is_pd(tol.rank_tol) {
        return Err(Error::SingularOutput(out.min_eigenvalue()));
    }
    let sr = psd_sqrt(rho);
    let iso = inv_sqrt_on_support(&out, tol.rank_tol);
    let kraus: Vec<CMat> = phi
        .kraus()
        .iter()
        .map(|k| sr.matrix() * k.adjoint() * iso.matrix())
        .collect();
    ChannelRep::from_kraus(kraus)
}

/// Projects a (possibly rank-deficient) PSD Choi matrix onto the CPT Choi
/// set, Π = 𝔠 ★_in (𝔠_in)⁻¹ with the pseudo-inverse taken on the support of
/// the input marginal when it is PD.
fn choi_to_cpt(choi: &CMat, din: usize, dout: usize, tol: &Tolerances) -> Result<CMat> {
    let dims = DimensionSpec::new(vec![din, dout])?;
    let marg = PsdMatrix::repair(partial_trace(choi, &dims, &[0])?, 1e-8)?;
    if !marg.is_pd(tol.rank_tol) {
        return Err(Error::SingularMarginal(marg.min_eigenvalue()));
    }
    let minv = inv_on_support(&marg, tol.rank_tol);
    star_on_subsystem(choi, &dims, 0, &minv)
}

/// Petz map realized as the Choi–Bures projection of (Φ∘K_ρ)† onto channels.
pub fn petz_via_projection(
    phi: &ChannelRep,
    rho: &PsdMatrix,
    tol: &Tolerances,
) -> Result<ChannelRep> {
    check_cpt(phi, tol)?;
    check_density(rho, tol)?;
    let theta = phi.compose(&kr_channel(rho)?)?;
    let adj = theta.adjoint();
    let projected = choi_to_cpt(adj.choi(), adj.dim_in(), adj.dim_out(), tol)?;
    ChannelRep::from_choi(projected, adj.dim_in(), adj.dim_out(), tol)
}

/// Leifer–Spekkens state over time Φ ⊛ ρ = 𝔍(Φ) ★_𝒳 ρ, stored in the
/// Jamiołkowski convention.
pub fn ls_qsot(phi: &ChannelRep, rho: &PsdMatrix, tol: &Tolerances) -> Result<QsotState> {
    check_cpt(phi, tol)?;
    check_density(rho, tol)?;
    if rho.dim() != phi.dim_in() {
        return Err(Error::DimMismatch(rho.dim(), phi.dim_in()));
    }
    let dims = DimensionSpec::new(vec![phi.dim_in(), phi.dim_out()])?;
    let joint = hermitize(&star_on_subsystem(phi.jamiolkowski(), &dims, 0, rho)?);
    Ok(QsotState {
        joint,
        dim_in: phi.dim_in(),
        dim_out: phi.dim_out(),
        representation: QsotRepresentation::Jamiolkowski,
    })
}

/// Minimal-change reverse channel Ψ = K_ρ ∘ Φ† ∘ K_{(Φ(ρ)⁻¹#σ)²} ∘ K_σ⁻¹,
/// Kraus {ρ^{1/2} Kᵢ† M σ^{-1/2}} with M = Φ(ρ)⁻¹ # σ. Reduces to the Petz
/// map whenever Φ(ρ) and σ commute.
pub fn minimal_change_reverse(
    phi: &ChannelRep,
    rho: &PsdMatrix,
    sigma: &PsdMatrix,
    tol: &Tolerances,
) -> Result<ChannelRep> {
    check_cpt(phi, tol)?;
    check_density(rho, tol)?;
    check_density(sigma, tol)?;
    if !rho.is_pd(tol.rank_tol) {
        return Err(Error::NotPd(rho.min_eigenvalue()));
    }
    if !sigma.is_pd(tol.rank_tol) {
        return Err(Error::NotPd(sigma.min_eigenvalue()));
    }
    if sigma.dim() != phi.dim_out() {
        return Err(Error::DimMismatch(sigma.dim(), phi.dim_out()));
    }
    let out = PsdMatrix::repair(phi.apply(rho.matrix())?, 1e-8)?;
    if !out.is_pd(tol.rank_tol) {
        return Err(Error::NotPd(out.min_eigenvalue()));
    }
    let m = geometric_mean(&inv_on_support(&out, tol.rank_tol), sigma)?;
    let sr = psd_sqrt(rho);
    let isig = inv_sqrt_on_support(sigma, tol.rank_tol);
    let kraus: Vec<CMat> = phi
        .kraus()
        .iter()
        .map(|k| sr.matrix() * k.adjoint() * m.matrix() * isig.matrix())
        .collect();
    ChannelRep::from_kraus(kraus)
}

/// Distance between Φ and Ψ weighted by a prior state: the chosen base
/// distance between the Choi matrices of Φ∘K_ρ and Ψ∘K_ρ.
pub fn channel_distance(
    phi: &ChannelRep,
    psi: &ChannelRep,
    rho: &PsdMatrix,
    base: DistanceBase,
    tol: &Tolerances,
) -> Result<f64> {
    if phi.dim_in() != psi.dim_in() || phi.dim_out() != psi.dim_out() {
        return Err(Error::DimMismatch(phi.dim_in(), psi.dim_in()));
    }
    if rho.dim() != phi.dim_in() {
        return Err(Error::DimMismatch(rho.dim(), phi.dim_in()));
    }
    check_density(rho, tol)?;
    let a = PsdMatrix::repair(phi.compose(&kr_channel(rho)?)?.choi().clone(), 1e-8)?;
    let b = PsdMatrix::repair(psi.compose(&kr_channel(rho)?)?.choi().clone(), 1e-8)?;
    match base {
        DistanceBase::BuresSq => bures_sq(&a, &b),
        DistanceBase::Fidelity => fidelity(&a, &b),
        DistanceBase::Purified => purified_dist(&a, &b),
    }
}
