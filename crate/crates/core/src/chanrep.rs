//! Representations of completely positive maps: Kraus, Choi, Jamiołkowski,
//! and Stinespring forms, conversions between them, application to matrices,
//! adjoints, composition, classification, and the standard channel zoo.
//!
//! Conventions, fixed once and used everywhere: vec(|j⟩⟨i|) = |i⟩ ⊗ |j⟩, and
//! the Choi matrix carries the input factor first,
//! 𝔠(Φ) = Σᵢⱼ |i⟩⟨j| ⊗ Φ(|i⟩⟨j|).

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matcore::{
    cr, hermitize, identity, inv_on_support, kron, partial_trace, partial_transpose_first,
    psd_sqrt, spectral, trace_re, unvec, vec_of, CMat, DimensionSpec, PsdMatrix, Tolerances,
};

/// Σᵢⱼ |i⟩⟨j| ⊗ Φ(|i⟩⟨j|) for the map with the given Kraus operators; equals
/// Σₖ vec(Kₖ) vec(Kₖ)† in the crate's vec convention.
pub fn choi_from_kraus(kraus: &[CMat]) -> Result<CMat> {
    let first = kraus.first().ok_or_else(|| {
        Error::ShapeMismatch("empty Kraus list".into())
    })?;
    let (dout, din) = (first.nrows(), first.ncols());
    if din == 0 || dout == 0 {
        return Err(Error::ShapeMismatch("zero-dimensional Kraus operator".into()));
    }
    let mut choi = CMat::zeros(din * dout, din * dout);
    for k in kraus {
        if k.nrows() != dout || k.ncols() != din {
            return Err(Error::ShapeMismatch(format!(
                "Kraus operator is {}x{}, expected {}x{}",
                k.nrows(),
                k.ncols(),
                dout,
                din
            )));
        }
        let v = vec_of(k);
        choi += &v * v.adjoint();
    }
    Ok(hermitize(&choi))
}

/// Eigendecomposes a PSD Choi matrix into Kraus operators, one per eigenvalue
/// above `rank_tol * lambda_max`, ordered by descending eigenvalue with the
/// phase fixed so each operator's largest-magnitude entry is real positive.
pub fn kraus_from_choi(choi: &PsdMatrix, din: usize, dout: usize, rank_tol: f64) -> Result<Vec<CMat>> {
    if choi.dim() != din * dout {
        return Err(Error::DimMismatch(choi.dim(), din * dout));
    }
    let spec = choi.spectral();
    let cut = rank_tol * spec.max_eigenvalue().max(0.0);
    let mut kraus = Vec::new();
    for (idx, &l) in spec.eigenvalues.iter().enumerate().rev() {
        if l <= cut {
            break;
        }
        let v = spec.eigenvectors.column(idx).clone_owned() * cr(l.sqrt());
        let mut k = unvec(&v, dout, din)?;
        let top = k
            .iter()
            .cloned()
            .max_by(|a, b| a.norm().partial_cmp(&b.norm()).unwrap())
            .unwrap_or_else(|| cr(0.0));
        if top.norm() > 0.0 {
            let phase: Complex64 = top.conj() / top.norm();
            k *= phase;
        }
        kraus.push(k);
    }
    if kraus.is_empty() {
        // zero map: keep one zero operator so dimensions stay recoverable
        kraus.push(CMat::zeros(dout, din));
    }
    Ok(kraus)
}

/// A completely positive map held canonically as a Kraus list, with the Choi,
/// Jamiołkowski, and Stinespring forms cached at construction. Immutable.
#[derive(Debug, Clone)]
pub struct ChannelRep {
    dim_in: usize,
    dim_out: usize,
    kraus: Vec<CMat>,
    choi: CMat,
    jamiolkowski: CMat,
    /// (dim_out · aux_dim) × dim_in isometry candidate, row index (j, z) = j·aux + z.
    stinespring: CMat,
}

/// CP / TP / unital flags with the residual magnitudes that decided them.
#[derive(Debug, Clone, Copy)]
pub struct ChannelClass {
    pub is_cp: bool,
    pub cp_residual: f64,
    pub is_tp: bool,
    pub tp_residual: f64,
    pub is_unital: bool,
    pub unital_residual: f64,
}

impl ChannelRep {
    pub fn from_kraus(kraus: Vec<CMat>) -> Result<Self> {
        let choi = choi_from_kraus(&kraus)?;
        let first = &kraus[0];
        Self::assemble(kraus.clone(), first.ncols(), first.nrows(), choi)
    }

    pub fn from_choi(choi: CMat, din: usize, dout: usize, tol: &Tolerances) -> Result<Self> {
        let psd = PsdMatrix::repair(choi, tol.psd_tol)?;
        let kraus = kraus_from_choi(&psd, din, dout, tol.rank_tol)?;
        let choi = choi_from_kraus(&kraus)?;
        Self::assemble(kraus, din, dout, choi)
    }

    /// 𝔍(Φ) = partial transpose of 𝔠(Φ) on the input factor; the input must be
    /// the Jamiołkowski matrix of a CP map.
    pub fn from_jamiolkowski(jam: CMat, din: usize, dout: usize, tol: &Tolerances) -> Result<Self> {
        if jam.nrows() != din * dout || jam.ncols() != din * dout {
            return Err(Error::DimMismatch(jam.nrows(), din * dout));
        }
        let choi = partial_transpose_first(&jam, din, dout)?;
        Self::from_choi(choi, din, dout, tol)
    }

    pub fn from_stinespring(k: CMat, aux_dim: usize, tol: &Tolerances) -> Result<Self> {
        if aux_dim == 0 || k.nrows() % aux_dim != 0 {
            return Err(Error::ShapeMismatch(format!(
                "Stinespring operator has {} rows, not divisible by aux_dim {}",
                k.nrows(),
                aux_dim
            )));
        }
        let dout = k.nrows() / aux_dim;
        let din = k.ncols();
        let mut kraus = Vec::with_capacity(aux_dim);
        for z in 0..aux_dim {
            kraus.push(CMat::from_fn(dout, din, |j, i| k[(j * aux_dim + z, i)]));
        }
        let _ = tol;
        Self::from_kraus(kraus)
    }

    fn assemble(kraus: Vec<CMat>, din: usize, dout: usize, choi: CMat) -> Result<Self> {
        let jamiolkowski = partial_transpose_first(&choi, din, dout)?;
        let aux = kraus.len();
        let stinespring = CMat::from_fn(dout * aux, din, |row, i| {
            let (j, z) = (row / aux, row % aux);
            kraus[z][(j, i)]
        });
        Ok(ChannelRep {
            dim_in: din,
            dim_out: dout,
            kraus,
            choi,
            jamiolkowski,
            stinespring,
        })
    }

    pub fn identity(d: usize) -> Self {
        Self::from_kraus(vec![identity(d)]).expect("identity Kraus is well-formed")
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    pub fn kraus(&self) -> &[CMat] {
        &self.kraus
    }

    pub fn choi(&self) -> &CMat {
        &self.choi
    }

    pub fn jamiolkowski(&self) -> &CMat {
        &self.jamiolkowski
    }

    pub fn stinespring(&self) -> &CMat {
        &self.stinespring
    }

    pub fn aux_dim(&self) -> usize {
        self.kraus.len()
    }

    /// Σᵢ Kᵢ X Kᵢ† through the canonical Kraus form.
    pub fn apply(&self, x: &CMat) -> Result<CMat> {
        if x.nrows() != self.dim_in || x.ncols() != self.dim_in {
            return Err(Error::DimMismatch(x.nrows(), self.dim_in));
        }
        let mut out = CMat::zeros(self.dim_out, self.dim_out);
        for k in &self.kraus {
            out += k * x * k.adjoint();
        }
        Ok(out)
    }

    /// Φ(H) = Tr_in[𝔠(Φ) (Hᵀ ⊗ I)].
    pub fn apply_via_choi(&self, x: &CMat) -> Result<CMat> {
        if x.nrows() != self.dim_in || x.ncols() != self.dim_in {
            return Err(Error::DimMismatch(x.nrows(), self.dim_in));
        }
        let m = &self.choi * kron(&x.transpose(), &identity(self.dim_out));
        partial_trace(
            &m,
            &DimensionSpec::new(vec![self.dim_in, self.dim_out])?,
            &[1],
        )
    }

    /// Φ(H) = Tr_in[𝔍(Φ) (H ⊗ I)].
    pub fn apply_via_jamiolkowski(&self, x: &CMat) -> Result<CMat> {
        if x.nrows() != self.dim_in || x.ncols() != self.dim_in {
            return Err(Error::DimMismatch(x.nrows(), self.dim_in));
        }
        let m = &self.jamiolkowski * kron(x, &identity(self.dim_out));
        partial_trace(
            &m,
            &DimensionSpec::new(vec![self.dim_in, self.dim_out])?,
            &[1],
        )
    }

    /// Φ(H) = Tr_aux[K H K†] with the cached Stinespring operator.
    pub fn apply_via_stinespring(&self, x: &CMat) -> Result<CMat> {
        if x.nrows() != self.dim_in || x.ncols() != self.dim_in {
            return Err(Error::DimMismatch(x.nrows(), self.dim_in));
        }
        let m = &self.stinespring * x * self.stinespring.adjoint();
        partial_trace(
            &m,
            &DimensionSpec::new(vec![self.dim_out, self.aux_dim()])?,
            &[0],
        )
    }

    /// Adjoint map, Kraus {Kᵢ†}; the Choi of the result is the transpose of
    /// this channel's Choi up to the tensor-factor reordering.
    pub fn adjoint(&self) -> Self {
        let kraus: Vec<CMat> = self.kraus.iter().map(|k| k.adjoint()).collect();
        Self::from_kraus(kraus).expect("adjoint Kraus is well-formed")
    }

    /// self ∘ other (other acts first). The Kraus product list is re-extracted
    /// from the composite Choi when it exceeds dim_in·dim_out operators.
    pub fn compose(&self, other: &ChannelRep) -> Result<Self> {
        if other.dim_out != self.dim_in {
            return Err(Error::DimMismatch(other.dim_out, self.dim_in));
        }
        let mut kraus = Vec::with_capacity(self.kraus.len() * other.kraus.len());
        for a in &self.kraus {
            for b in &other.kraus {
                kraus.push(a * b);
            }
        }
        let composed = Self::from_kraus(kraus)?;
        if composed.kraus.len() > composed.dim_in * composed.dim_out {
            let tol = Tolerances::default();
            Self::from_choi(
                composed.choi.clone(),
                composed.dim_in,
                composed.dim_out,
                &tol,
            )
        } else {
            Ok(composed)
        }
    }

    pub fn classify(&self, tol: f64) -> ChannelClass {
        let spec = spectral(&self.choi);
        let scale = spec.max_eigenvalue().max(1.0);
        let cp_residual = (-spec.min_eigenvalue()).max(0.0);
        let mut ktk = CMat::zeros(self.dim_in, self.dim_in);
        let mut kkt = CMat::zeros(self.dim_out, self.dim_out);
        for k in &self.kraus {
            ktk += k.adjoint() * k;
            kkt += k * k.adjoint();
        }
        let tp_residual = (ktk - identity(self.dim_in)).norm();
        let unital_residual = (kkt - identity(self.dim_out)).norm();
        ChannelClass {
            is_cp: cp_residual <= tol * scale,
            cp_residual,
            is_tp: tp_residual <= tol * scale,
            tp_residual,
            is_unital: unital_residual <= tol * scale,
            unital_residual,
        }
    }

    /// The prior Θ†(I_out) = Σᵢ Kᵢ†Kᵢ of a CP map.
    pub fn prior(&self) -> Result<PsdMatrix> {
        let class = self.classify(1e-8);
        if !class.is_cp {
            return Err(Error::NotCp(class.cp_residual));
        }
        let mut r = CMat::zeros(self.dim_in, self.dim_in);
        for k in &self.kraus {
            r += k.adjoint() * k;
        }
        PsdMatrix::repair(r, 1e-8)
    }
}

fn validate_projectors(projs: &[CMat], d: usize, tol: f64) -> Result<()> {
    let mut sum = CMat::zeros(d, d);
    let mut worst: f64 = 0.0;
    for (i, e) in projs.iter().enumerate() {
        if e.nrows() != d || e.ncols() != d {
            return Err(Error::DimMismatch(e.nrows(), d));
        }
        sum += e;
        for (j, f) in projs.iter().enumerate() {
            let prod = e * f;
            let target = if i == j { e.clone() } else { CMat::zeros(d, d) };
            worst = worst.max((prod - target).norm());
        }
    }
    worst = worst.max((sum - identity(d)).norm());
    if worst > tol {
        return Err(Error::BadProjectors(worst));
    }
    Ok(())
}

/// Trace channel X ↦ Tr[X] as a CP map into a 1-dimensional space.
pub fn trace_channel(d: usize) -> Result<ChannelRep> {
    let kraus: Vec<CMat> = (0..d)
        .map(|i| CMat::from_fn(1, d, |_, col| if col == i { cr(1.0) } else { cr(0.0) }))
        .collect();
    ChannelRep::from_kraus(kraus)
}

/// Partial trace over the factors not listed in `keep`.
pub fn partial_trace_channel(dims: &DimensionSpec, keep: &[usize]) -> Result<ChannelRep> {
    let n = dims.count();
    for &k in keep {
        if k >= n {
            return Err(Error::BadIndex { index: k, count: n });
        }
    }
    let mut keep_sorted: Vec<usize> = keep.to_vec();
    keep_sorted.sort_unstable();
    keep_sorted.dedup();
    let traced: Vec<usize> = (0..n).filter(|k| !keep_sorted.contains(k)).collect();
    let kept_dims: Vec<usize> = keep_sorted.iter().map(|&k| dims.factors()[k]).collect();
    let traced_dims: Vec<usize> = traced.iter().map(|&k| dims.factors()[k]).collect();
    let dk: usize = kept_dims.iter().product::<usize>().max(1);
    let dt: usize = traced_dims.iter().product::<usize>().max(1);
    let kept_spec = DimensionSpec::new(if kept_dims.is_empty() { vec![1] } else { kept_dims })?;
    let traced_spec =
        DimensionSpec::new(if traced_dims.is_empty() { vec![1] } else { traced_dims })?;
    let mut kraus = Vec::with_capacity(dt);
    for t in 0..dt {
        let tm = traced_spec.multi(t);
        let mut k = CMat::zeros(dk, dims.total());
        for r in 0..dk {
            let rm = kept_spec.multi(r);
            let mut full = vec![0usize; n];
            for (pos, &f) in keep_sorted.iter().enumerate() {
                full[f] = rm[pos];
            }
            for (pos, &f) in traced.iter().enumerate() {
                full[f] = tm[pos];
            }
            k[(r, dims.flat(&full))] = cr(1.0);
        }
        kraus.push(k);
    }
    ChannelRep::from_kraus(kraus)
}

/// Pinching channel X ↦ Σᵢ Eᵢ X Eᵢ for a complete family of orthogonal
/// projectors.
pub fn pinching_channel(projs: &[CMat], tol: f64) -> Result<ChannelRep> {
    let d = projs
        .first()
        .ok_or_else(|| Error::BadProjectors(f64::INFINITY))?
        .nrows();
    validate_projectors(projs, d, tol)?;
    ChannelRep::from_kraus(projs.to_vec())
}

/// Completely dephasing channel in the computational basis.
pub fn dephasing_channel(d: usize) -> Result<ChannelRep> {
    let projs: Vec<CMat> = (0..d)
        .map(|i| {
            CMat::from_fn(d, d, |r, c_| if r == i && c_ == i { cr(1.0) } else { cr(0.0) })
        })
        .collect();
    pinching_channel(&projs, 1e-9)
}

/// Measurement channel M(H) = Σᵢ ⟨Eᵢ, H⟩ |i⟩⟨i| for a complete projector
/// family; the output space is diagonal of dimension = number of projectors.
pub fn measurement_channel(projs: &[CMat], tol: f64) -> Result<ChannelRep> {
    let d = projs
        .first()
        .ok_or_else(|| Error::BadProjectors(f64::INFINITY))?
        .nrows();
    validate_projectors(projs, d, tol)?;
    let m = projs.len();
    let mut kraus = Vec::new();
    for (i, e) in projs.iter().enumerate() {
        let spec = spectral(e);
        for (idx, &l) in spec.eigenvalues.iter().enumerate() {
            if l > 0.5 {
                let v = spec.eigenvectors.column(idx);
                let mut k = CMat::zeros(m, d);
                for col in 0..d {
                    k[(i, col)] = v[col].conj();
                }
                kraus.push(k);
            }
        }
    }
    ChannelRep::from_kraus(kraus)
}

/// Unitary conjugation X ↦ U X U†.
pub fn unitary_channel(u: &CMat) -> Result<ChannelRep> {
    if u.nrows() != u.ncols() {
        return Err(Error::NotSquare(u.nrows(), u.ncols()));
    }
    let resid = (u.adjoint() * u - identity(u.nrows())).norm();
    if resid > 1e-9 {
        return Err(Error::ShapeMismatch(format!(
            "operator is not unitary, ‖U†U − I‖_F = {resid:.3e}"
        )));
    }
    ChannelRep::from_kraus(vec![u.clone()])
}

/// K_R: X ↦ R^{1/2} X R^{1/2} (the star product with R).
pub fn kr_channel(r: &PsdMatrix) -> Result<ChannelRep> {
    ChannelRep::from_kraus(vec![psd_sqrt(r).into_matrix()])
}

/// Hermitian-preserving map stored as a signed Kraus list,
/// Θ(X) = Σᵢ sᵢ Kᵢ X Kᵢ† with real weights sᵢ.
#[derive(Debug, Clone)]
pub struct HpMap {
    pub dim_in: usize,
    pub dim_out: usize,
    pub terms: Vec<(f64, CMat)>,
}

impl HpMap {
    pub fn new(terms: Vec<(f64, CMat)>) -> Result<Self> {
        let first = &terms
            .first()
            .ok_or_else(|| Error::ShapeMismatch("empty HP term list".into()))?
            .1;
        let (dout, din) = (first.nrows(), first.ncols());
        for (_, k) in &terms {
            if k.nrows() != dout || k.ncols() != din {
                return Err(Error::ShapeMismatch("inconsistent HP term shapes".into()));
            }
        }
        Ok(HpMap {
            dim_in: din,
            dim_out: dout,
            terms,
        })
    }

    pub fn from_channel(ch: &ChannelRep) -> Self {
        HpMap {
            dim_in: ch.dim_in(),
            dim_out: ch.dim_out(),
            terms: ch.kraus().iter().map(|k| (1.0, k.clone())).collect(),
        }
    }

    pub fn apply(&self, x: &CMat) -> Result<CMat> {
        if x.nrows() != self.dim_in || x.ncols() != self.dim_in {
            return Err(Error::DimMismatch(x.nrows(), self.dim_in));
        }
        let mut out = CMat::zeros(self.dim_out, self.dim_out);
        for (s, k) in &self.terms {
            out += (k * x * k.adjoint()) * cr(*s);
        }
        Ok(out)
    }

    pub fn adjoint(&self) -> Self {
        HpMap {
            dim_in: self.dim_out,
            dim_out: self.dim_in,
            terms: self.terms.iter().map(|(s, k)| (*s, k.adjoint())).collect(),
        }
    }

    /// Hermitian (not necessarily PSD) Choi matrix, input factor first.
    pub fn choi(&self) -> CMat {
        let d = self.dim_in * self.dim_out;
        let mut choi = CMat::zeros(d, d);
        for (s, k) in &self.terms {
            let v = vec_of(k);
            choi += (&v * v.adjoint()) * cr(*s);
        }
        hermitize(&choi)
    }
}

/// Sanity wrapper: the channel X ↦ R^{−1/2} X R^{−1/2} on supp(R), used by the
/// decomposition routines. Pseudo-inverted on the support.
pub fn kr_inverse_channel(r: &PsdMatrix, rank_tol: f64) -> Result<ChannelRep> {
    let rinv = inv_on_support(r, rank_tol);
    kr_channel(&rinv)
}

/// Trace of a Choi matrix equals the trace of the prior for CP maps; exposed
/// for cross-checks.
pub fn choi_trace(ch: &ChannelRep) -> f64 {
    trace_re(ch.choi())
}
