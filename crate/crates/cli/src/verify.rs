//! Self-check suites behind `buresproj verify`: seeded, deterministic, and
//! summarized by a digest line so reruns can be compared byte-for-byte.

use buresproj::chanrep::{dephasing_channel, trace_channel};
use buresproj::decomp::{
    cp_extension, minimal_change_reverse, petz_map, petz_via_projection, prior_channel_decompose,
    ls_qsot,
};
use buresproj::matcore::{
    bures_sq, c, fidelity, fro_dist, geometric_mean, hermitize, inv_on_support, partial_trace,
    psd_sqrt, swap_factors, unvec, vec_of, CMat, DimensionSpec, PsdMatrix, Tolerances,
};
use buresproj::oracle::{
    numeric_projection, random_cp, random_cpt, random_density, random_ginibre, random_hp,
    random_pd, rng_for, stinespring_frobenius_distance, uhlmann_fidelity,
};
use buresproj::projector::{
    pgm, project, project_ensemble, project_marginal, project_measurement, project_pinching,
    ConstraintPair, Ensemble,
};
use buresproj::Error;
use sha2::{Digest, Sha256};

struct Reporter {
    hasher: Sha256,
    failed: bool,
}

impl Reporter {
    fn new() -> Self {
        Reporter { hasher: Sha256::new(), failed: false }
    }

    fn line(&mut self, s: &str) {
        println!("{s}");
        self.hasher.update(s.as_bytes());
        self.hasher.update(b"\n");
    }

    /// One invariant: passes when `residual <= bound`.
    fn check(&mut self, name: &str, residual: f64, bound: f64) {
        let ok = residual.is_finite() && residual <= bound;
        if !ok {
            self.failed = true;
        }
        let tag = if ok { "ok  " } else { "FAIL" };
        self.line(&format!("{tag} {name} residual={residual:.3e} bound={bound:.3e}"));
    }

    fn finish(self) -> bool {
        let digest: String = self
            .hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect();
        println!("digest: {digest}");
        !self.failed
    }
}

fn basis_projectors(d: usize, splits: &[usize]) -> Vec<CMat> {
    let mut out = Vec::new();
    let mut start = 0;
    for &s in splits {
        let mut e = CMat::zeros(d, d);
        for i in start..start + s {
            e[(i, i)] = c(1.0, 0.0);
        }
        out.push(e);
        start += s;
    }
    out
}

fn suite_matcore(r: &mut Reporter, seed: u64, max_dim: usize) {
    let mut rng = rng_for(seed.wrapping_mul(31).wrapping_add(1));
    let mut worst_fid = 0.0f64;
    let mut worst_ricc = 0.0f64;
    let mut worst_vec = 0.0f64;
    for i in 0..20 {
        let d = 2 + i % (max_dim.max(2) - 1);
        let p = random_pd(d, &mut rng);
        let q = random_pd(d, &mut rng);
        let f = fidelity(&p, &q).unwrap();
        let fu = uhlmann_fidelity(&p, &q).unwrap();
        worst_fid = worst_fid.max((f - fu).abs() / f.max(1.0));

        let g = geometric_mean(&p, &q).unwrap();
        let ricc = fro_dist(
            &(g.matrix() * inv_on_support(&p, 1e-10).matrix() * g.matrix()),
            q.matrix(),
        ) / q.matrix().norm();
        worst_ricc = worst_ricc.max(ricc);

        let a = random_ginibre(d, d, &mut rng);
        let v = vec_of(&a);
        worst_vec = worst_vec.max(fro_dist(&unvec(&v, d, d).unwrap(), &a));
    }
    r.check("matcore.fidelity_vs_purification", worst_fid, 1e-9);
    r.check("matcore.geometric_mean_riccati", worst_ricc, 1e-9);
    r.check("matcore.vec_round_trip", worst_vec, 1e-12);

    let dims = DimensionSpec::new(vec![2, 3]).unwrap();
    let p = random_pd(6, &mut rng);
    let t0 = partial_trace(p.matrix(), &dims, &[0]).unwrap().trace().re;
    r.check(
        "matcore.partial_trace_preserves_trace",
        (t0 - p.trace()).abs() / p.trace(),
        1e-12,
    );
}


/// Folds a projection outcome into running (feasibility, gap) maxima;
/// an error makes the residual infinite, which fails the bound check.
fn fold(
    worst: &mut (f64, f64),
    outcome: Result<buresproj::projector::ProjectionReport, Error>,
    scale: f64,
) {
    match outcome {
        Ok(rep) => {
            worst.0 = worst.0.max(rep.feasibility_residual / scale);
            worst.1 = worst.1.max(rep.saturation_gap.abs());
        }
        Err(_) => {
            worst.0 = f64::INFINITY;
            worst.1 = f64::INFINITY;
        }
    }
}

fn suite_projections(r: &mut Reporter, seed: u64, max_dim: usize, tol: &Tolerances) {
    let mut rng = rng_for(seed.wrapping_mul(31).wrapping_add(2));
    let dmax = max_dim.clamp(2, 4);

    // trace family through the general Gamma path
    let mut worst = (0.0f64, 0.0f64);
    for i in 0..8 {
        let d = 2 + i % (dmax - 1);
        let p = random_pd(d, &mut rng);
        let pair = ConstraintPair::new(
            trace_channel(d).unwrap(),
            PsdMatrix::new(CMat::from_element(1, 1, c(1.0, 0.0)), 1e-10).unwrap(),
            tol,
        )
        .unwrap();
        fold(&mut worst, project(&pair, &p, tol), 1.0);
    }
    r.check("projections.trace.feasibility", worst.0, 1e-9);
    r.check("projections.trace.dpi_saturation", worst.1, 1e-9);

    // marginal family on 2⊗2
    let mut worst = (0.0f64, 0.0f64);
    let dims = DimensionSpec::new(vec![2, 2]).unwrap();
    for _ in 0..8 {
        let p = random_pd(4, &mut rng);
        let ct = random_pd(2, &mut rng);
        let scale = ct.matrix().norm();
        fold(&mut worst, project_marginal(&p, &dims, 0, &ct, tol), scale);
    }
    r.check("projections.marginal.feasibility", worst.0, 1e-9);
    r.check("projections.marginal.dpi_saturation", worst.1, 1e-9);

    // dephasing family through the general Gamma path
    let mut worst = (0.0f64, 0.0f64);
    for i in 0..8 {
        let d = 2 + i % (dmax - 1);
        let p = random_pd(d, &mut rng);
        let target = PsdMatrix::from_real_diagonal(
            &(0..d).map(|k| 0.3 + 0.2 * k as f64).collect::<Vec<_>>(),
        )
        .unwrap();
        let pair =
            ConstraintPair::new(dephasing_channel(d).unwrap(), target, tol).unwrap();
        let scale = pair.target().matrix().norm();
        fold(&mut worst, project(&pair, &p, tol), scale);
    }
    r.check("projections.dephasing.feasibility", worst.0, 1e-9);
    r.check("projections.dephasing.dpi_saturation", worst.1, 1e-9);

    // pinching family, 2+2 block split
    let projs = basis_projectors(4, &[2, 2]);
    let mut worst = (0.0f64, 0.0f64);
    for _ in 0..8 {
        let p = random_pd(4, &mut rng);
        let b1 = random_pd(2, &mut rng);
        let b2 = random_pd(2, &mut rng);
        let mut cm = CMat::zeros(4, 4);
        cm.view_mut((0, 0), (2, 2)).copy_from(b1.matrix());
        cm.view_mut((2, 2), (2, 2)).copy_from(b2.matrix());
        let ct = PsdMatrix::new(cm, 1e-10).unwrap();
        let scale = ct.matrix().norm();
        fold(&mut worst, project_pinching(&p, &projs, &ct, tol), scale);
    }
    r.check("projections.pinching.feasibility", worst.0, 1e-9);
    r.check("projections.pinching.dpi_saturation", worst.1, 1e-9);

    // measurement family on the computational basis
    let mut worst = (0.0f64, 0.0f64);
    for i in 0..8 {
        let d = 2 + i % (dmax - 1);
        let projs = basis_projectors(d, &vec![1; d]);
        let targets: Vec<f64> = (0..d).map(|k| 0.5 + 0.25 * k as f64).collect();
        let p = random_pd(d, &mut rng);
        fold(&mut worst, project_measurement(&p, &projs, &targets, tol), 1.0);
    }
    r.check("projections.measurement.feasibility", worst.0, 1e-9);
    r.check("projections.measurement.dpi_saturation", worst.1, 1e-9);

    // ensemble family + the PGM identity
    let mut worst = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..8 {
        let members: Vec<PsdMatrix> = (0..3).map(|_| random_pd(3, &mut rng)).collect();
        let ens = Ensemble::new(members).unwrap();
        let q = random_pd(3, &mut rng);
        let rep = project_ensemble(&ens, &q, tol).unwrap();
        worst.0 = worst.0.max(rep.feasibility_residual / q.matrix().norm());
        worst.1 = worst.1.max(rep.saturation_gap.abs());

        let povm = pgm(&ens, tol).unwrap();
        let isq = inv_on_support(ens.total(), 1e-10);
        let isq = psd_sqrt(&isq);
        for (e, p) in povm.members().iter().zip(ens.members()) {
            let direct = isq.matrix() * p.matrix() * isq.matrix();
            worst.2 = worst.2.max(fro_dist(e.matrix(), &direct));
        }
    }
    r.check("projections.ensemble.feasibility", worst.0, 1e-9);
    r.check("projections.ensemble.dpi_saturation", worst.1, 1e-9);
    r.check("projections.pgm_identity", worst.2, 1e-12);

    // amplitude damping: Gamma infeasible, detected and reported
    let g: f64 = 0.5;
    let kraus = vec![
        CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c((1.0 - g).sqrt(), 0.0)]),
        CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(g.sqrt(), 0.0), c(0.0, 0.0), c(0.0, 0.0)]),
    ];
    let ch = buresproj::ChannelRep::from_kraus(kraus).unwrap();
    let mut rng7 = rng_for(7);
    let p = random_pd(2, &mut rng7);
    let target = random_pd(2, &mut rng7);
    let target = PsdMatrix::new(target.matrix() / c(target.trace(), 0.0), 1e-10).unwrap();
    let pair = ConstraintPair::new(ch, target, tol).unwrap();
    match project(&pair, &p, tol) {
        Err(Error::InfeasibleGamma { residual }) => {
            r.line(&format!(
                "info projections.infeasible_gamma residual={residual:.3e}"
            ));
            r.check("projections.infeasible_detected", 0.0, 0.5);
        }
        _ => r.check("projections.infeasible_detected", 1.0, 0.5),
    }
}

fn suite_decomp(r: &mut Reporter, seed: u64, tol: &Tolerances) {
    let mut rng = rng_for(seed.wrapping_mul(31).wrapping_add(3));
    let mut worst_rt = 0.0f64;
    let mut worst_petz = 0.0f64;
    let mut worst_mc = 0.0f64;
    let mut worst_qsot = 0.0f64;
    for i in 0..10 {
        let d = 2 + i % 2;

        // decompose then extend recovers the map
        let theta = random_cp(d, d, d * d, &mut rng).unwrap();
        let pair = prior_channel_decompose(&theta, false, tol).unwrap();
        let rebuilt = cp_extension(&pair.channel, &pair.prior, tol).unwrap();
        worst_rt = worst_rt
            .max(fro_dist(rebuilt.choi(), theta.choi()) / theta.choi().norm());

        // direct Petz formula vs the projection pipeline
        let phi = random_cpt(d, d, d * d, &mut rng).unwrap();
        let rho = random_density(d, &mut rng);
        let direct = petz_map(&phi, &rho, tol).unwrap();
        let via = petz_via_projection(&phi, &rho, tol).unwrap();
        worst_petz = worst_petz
            .max(fro_dist(direct.choi(), via.choi()) / direct.choi().norm());

        // minimal change with sigma = Phi(rho) is exactly the Petz map
        let out = PsdMatrix::new(hermitize(&phi.apply(rho.matrix()).unwrap()), 1e-8).unwrap();
        let mc = minimal_change_reverse(&phi, &rho, &out, tol).unwrap();
        worst_mc = worst_mc.max(fro_dist(mc.choi(), direct.choi()) / direct.choi().norm());

        // joint-state marginals match the prior and its image
        let state = ls_qsot(&phi, &rho, tol).unwrap();
        let inm = state.input_marginal().unwrap();
        let outm = state.output_marginal().unwrap();
        worst_qsot = worst_qsot
            .max(fro_dist(&inm, rho.matrix()))
            .max(fro_dist(&outm, &hermitize(&phi.apply(rho.matrix()).unwrap())));
    }
    r.check("decomp.decompose_extend_round_trip", worst_rt, 1e-9);
    r.check("decomp.petz_direct_vs_projection", worst_petz, 1e-7);
    r.check("decomp.minimal_change_reduces_to_petz", worst_mc, 1e-7);
    r.check("decomp.qsot_marginals", worst_qsot, 1e-9);
}

fn suite_crosschecks(r: &mut Reporter, seed: u64, tol: &Tolerances) {
    let mut rng = rng_for(seed.wrapping_mul(31).wrapping_add(4));

    // Choi–Bures vs Stinespring–Frobenius table
    let mut worst = 0.0f64;
    r.line("info crosschecks table: choi_bures stinespring_frobenius");
    for i in 0..6 {
        let d = 2 + i % 2;
        let a = random_cp(d, d, d * d, &mut rng).unwrap();
        let b = random_cp(d, d, d * d, &mut rng).unwrap();
        let ca = PsdMatrix::new(hermitize(a.choi()), 1e-8).unwrap();
        let cb = PsdMatrix::new(hermitize(b.choi()), 1e-8).unwrap();
        let choi_bures = bures_sq(&ca, &cb).unwrap().max(0.0).sqrt();
        let stine = stinespring_frobenius_distance(&a, &b).unwrap();
        let rel = (choi_bures - stine).abs() / stine.max(1e-12);
        worst = worst.max(rel);
        r.line(&format!(
            "info crosschecks.pair_{i} choi_bures={choi_bures:.12e} stinespring={stine:.12e}"
        ));
    }
    r.check("crosschecks.choi_bures_vs_stinespring", worst, 1e-8);

    // independent maximizer lands on the closed form
    let mut worst = 0.0f64;
    for i in 0..2 {
        let d = 2 + i;
        let p = random_pd(d, &mut rng);
        let pair = ConstraintPair::new(
            trace_channel(d).unwrap(),
            PsdMatrix::new(CMat::from_element(1, 1, c(1.0, 0.0)), 1e-10).unwrap(),
            tol,
        )
        .unwrap();
        let rep = project(&pair, &p, tol).unwrap();
        let oracle = numeric_projection(&pair, &p, 12, 400, seed.wrapping_add(i as u64)).unwrap();
        let dist = bures_sq(&rep.projection, &oracle.maximizer)
            .unwrap()
            .max(0.0)
            .sqrt();
        worst = worst.max(dist);
    }
    r.check("crosschecks.oracle_matches_closed_form", worst, 1e-5);

    // adjoint Choi is the transposed Choi after factor reordering
    let mut worst = 0.0f64;
    for i in 0..10 {
        let hp = random_hp(2 + i % 2, 2 + (i / 2) % 2, 2 + i % 3, &mut rng).unwrap();
        let choi = hp.choi();
        let adj = swap_factors(&hp.adjoint().choi(), hp.dim_out, hp.dim_in).unwrap();
        worst = worst.max(fro_dist(&adj, &choi.transpose()) / choi.norm().max(1e-12));
    }
    r.check("crosschecks.adjoint_choi_transpose", worst, 1e-10);
}

/// Runs the named suite; Ok(true) means every invariant passed.
pub fn run(suite: &str, seed: u64, max_dim: usize, tol: &Tolerances) -> Result<bool, String> {
    let mut r = Reporter::new();
    r.line(&format!("verify suite={suite} seed={seed} max_dim={max_dim}"));
    match suite {
        "matcore" => suite_matcore(&mut r, seed, max_dim),
        "projections" => suite_projections(&mut r, seed, max_dim, tol),
        "decomp" => suite_decomp(&mut r, seed, tol),
        "crosschecks" => suite_crosschecks(&mut r, seed, tol),
        "all" => {
            suite_matcore(&mut r, seed, max_dim);
            suite_projections(&mut r, seed, max_dim, tol);
            suite_decomp(&mut r, seed, tol);
            suite_crosschecks(&mut r, seed, tol);
        }
        other => return Err(format!("unknown suite {other:?}; expected matcore, projections, decomp, crosschecks, or all")),
    }
    Ok(r.finish())
}
