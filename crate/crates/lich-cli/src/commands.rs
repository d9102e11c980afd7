//! The five workbench subcommands.  Each builds a [`ReportBundle`], writes
//! its artifacts atomically into the output directory and returns the
//! overall pass flag.

use crate::config::FileConfig;
use crate::report::{pole_scatter_svg, write_atomic, Backend, ReportBundle, Verdict};
use anyhow::{bail, Context, Result};
use lich_core::block_operators::{
    adjoint_pattern, assemble_ambient_q, build_scale_change, indicial_substitute,
    restrict_tracefree, substitute_lambda_neg, ScaleChange,
};
use lich_core::exact::Exact;
use lich_core::fibre_algebra::{
    check_tracefree_relation, hook_contract, inner_product, lefschetz_l, lefschetz_trace,
    lorentz_compose, lorentz_decompose, sym_product, FibreSpec, MultiIndex, SymTensor,
};
use lich_core::model_geometry::suite::{default_chart, identity_suite, non_einstein_control};
use lich_core::model_geometry::ModelMetric;
use lich_core::resonator::green;
use lich_core::resonator::pipeline::{continue_resolvent_apply, tracefree_pipeline};
use lich_core::resonator::scan::{
    scan_resonances, ResonanceReport, ScanWindow, DETECTOR_AGREEMENT, GRID_STABILITY,
    SINGULAR_REL,
};
use lich_core::resonator::{mode_reduce, Base};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use std::path::PathBuf;
use std::time::Instant;

pub struct Ctx {
    pub backend: Backend,
    pub seed: u64,
    pub threads: usize,
    pub out: PathBuf,
    pub config: FileConfig,
    pub config_bytes: Vec<u8>,
}

impl Ctx {
    fn finish(
        &self,
        command: &str,
        file: &str,
        verdicts: Vec<Verdict>,
        results: Value,
        started: Instant,
    ) -> Result<bool> {
        let bundle = ReportBundle::new(
            command,
            self.backend,
            self.seed,
            self.threads,
            &self.config_bytes,
            verdicts,
            results,
            started.elapsed().as_millis(),
        );
        let text = serde_json::to_string_pretty(&bundle)?;
        write_atomic(&self.out, file, text.as_bytes())?;
        print!("{}", bundle.summary());
        Ok(bundle.pass)
    }
}

// --- fibre-suite -------------------------------------------------------

fn random_exact(rng: &mut ChaCha8Rng) -> Exact {
    let num = rng.gen_range(-4i64..=4);
    let den = rng.gen_range(1i64..=3);
    let rad = *[1u64, 1, 1, 2, 3].get(rng.gen_range(0..5)).unwrap();
    Exact::ratio_sqrt(num, den, rad)
}

fn random_tensor(rng: &mut ChaCha8Rng, fibre: FibreSpec, rank: usize) -> SymTensor {
    let mut t = SymTensor::zero(fibre, rank);
    for k in MultiIndex::all(fibre.dim(), rank) {
        t.set(k, random_exact(rng));
    }
    t
}

pub fn fibre_suite(ctx: &Ctx) -> Result<bool> {
    let t0 = Instant::now();
    let max_dim = ctx.config.max_dim.unwrap_or(3);
    let max_rank = ctx.config.max_rank.unwrap_or(3).max(2);
    let trials = ctx.config.trials.unwrap_or(64);

    // Exhaustive biconditional and round trip over the Lorentzian bases.
    let mut exhaustive_cases = 0usize;
    let mut biconditional_fail = 0usize;
    let mut round_trip_fail = 0usize;
    for dim_e in 1..=max_dim {
        for m in 2..=max_rank {
            let ff = FibreSpec::lorentzian(dim_e);
            for k in MultiIndex::all(ff.dim(), m) {
                let u = SymTensor::basis_element(ff, k);
                let d = lorentz_decompose(&u)?;
                let trace_zero = lefschetz_trace(&u)?.is_zero();
                if check_tracefree_relation(&d).holds() != trace_zero {
                    biconditional_fail += 1;
                }
                if lorentz_compose(&d) != u {
                    round_trip_fail += 1;
                }
                exhaustive_cases += 1;
            }
        }
    }

    // Seeded random checks of the adjointness and pairing laws, exact.
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let mut hook_fail = 0usize;
    let mut lefschetz_fail = 0usize;
    let mut pairing_fail = 0usize;
    let mut random_round_trip_fail = 0usize;
    for _ in 0..trials {
        let dim_e = rng.gen_range(1usize..=max_dim);
        let ff = if rng.gen_bool(0.5) {
            FibreSpec::lorentzian(dim_e)
        } else {
            FibreSpec::euclidean(dim_e)
        };
        let a = random_tensor(&mut rng, ff, 1);
        let w = random_tensor(&mut rng, ff, 2);
        let v = random_tensor(&mut rng, ff, 3);
        // ⟨a·w, v⟩ = ⟨w, ι_a v⟩.
        if inner_product(&sym_product(&a, &w)?, &v)? != inner_product(&w, &hook_contract(&a, &v)?)?
        {
            hook_fail += 1;
        }
        // ⟨L a, v⟩ = ⟨a, Λ v⟩.
        if inner_product(&lefschetz_l(&a), &v)? != inner_product(&a, &lefschetz_trace(&v)?)? {
            lefschetz_fail += 1;
        }

        let fl = FibreSpec::lorentzian(dim_e);
        let m = 2usize;
        let u = random_tensor(&mut rng, fl, m);
        let vv = random_tensor(&mut rng, fl, m);
        let du = lorentz_decompose(&u)?;
        let dv = lorentz_decompose(&vv)?;
        if lorentz_compose(&du) != u {
            random_round_trip_fail += 1;
        }
        // ⟨u,v⟩_F = Σ_k (−1)^{m−k}⟨u^{(k)},v^{(k)}⟩.
        let mut acc = Exact::zero();
        for k in 0..=m {
            let p = inner_product(du.component(k), dv.component(k))?;
            if (m - k) % 2 == 1 {
                acc -= p;
            } else {
                acc += p;
            }
        }
        if inner_product(&u, &vv)? != acc {
            pairing_fail += 1;
        }
    }

    let verdicts = vec![
        Verdict::new(
            "trace_biconditional",
            biconditional_fail == 0,
            format!("{exhaustive_cases} basis cases, {biconditional_fail} failures"),
        ),
        Verdict::new(
            "decompose_compose_round_trip",
            round_trip_fail + random_round_trip_fail == 0,
            format!(
                "{} failures over basis and random tensors",
                round_trip_fail + random_round_trip_fail
            ),
        ),
        Verdict::new(
            "hook_mult_adjoint",
            hook_fail == 0,
            format!("{trials} random trials, {hook_fail} failures"),
        ),
        Verdict::new(
            "lefschetz_adjoint",
            lefschetz_fail == 0,
            format!("{trials} random trials, {lefschetz_fail} failures"),
        ),
        Verdict::new(
            "signed_pairing",
            pairing_fail == 0,
            format!("{trials} random trials, {pairing_fail} failures"),
        ),
    ];
    let results = json!({
        "max_dim": max_dim,
        "max_rank": max_rank,
        "exhaustive_cases": exhaustive_cases,
        "random_trials": trials,
    });
    ctx.finish("fibre-suite", "fibre_suite.json", verdicts, results, t0)
}

// --- identity-suite ----------------------------------------------------

pub fn identity_suite_cmd(ctx: &Ctx) -> Result<bool> {
    let t0 = Instant::now();
    let name = ctx.config.metric.as_deref().unwrap_or("hyperbolic_ball");
    let dim = ctx.config.dim.unwrap_or(2);
    let points = ctx.config.points.unwrap_or(96);
    let levels = ctx.config.levels.unwrap_or(3);
    let order = ctx.config.order.unwrap_or(4);

    let metric = match name {
        "hyperbolic_ball" => ModelMetric::hyperbolic_ball(dim),
        "flat_torus" => ModelMetric::flat_torus(dim),
        "product_collar" => ModelMetric::product_collar(dim.max(3), 4.0),
        other => bail!("unknown metric {other:?}"),
    };
    let chart = default_chart(&metric, points, order);

    let (verdicts, results) = if metric.is_einstein() {
        let report = identity_suite(&metric, &chart, levels, ctx.seed)
            .context("identity suite failed to run")?;
        let verdicts = report
            .results
            .iter()
            .map(|r| {
                Verdict::new(
                    &r.identity,
                    r.pass,
                    format!(
                        "slope {:.2}, finest residual {:.3e}",
                        r.slope,
                        r.residuals.last().copied().unwrap_or(f64::NAN)
                    ),
                )
            })
            .collect();
        (verdicts, serde_json::to_value(&report)?)
    } else {
        // Negative control: convergence must *fail* off the Einstein case.
        let r = non_einstein_control(&metric, &chart, levels, ctx.seed)?;
        let v = Verdict::new(
            &r.identity,
            r.pass,
            format!("slope {:.2} (must not converge at order)", r.slope),
        );
        (vec![v], serde_json::to_value(&r)?)
    };
    ctx.finish("identity-suite", "identity_suite.json", verdicts, results, t0)
}

// --- assemble ----------------------------------------------------------

fn scale_change_json(j: &ScaleChange, m: usize) -> Value {
    let entries: Vec<Value> = (0..=m)
        .flat_map(|target| {
            (0..=m).filter_map(move |source| {
                let e = j.entry(source, target);
                if e.is_zero() {
                    return None;
                }
                let terms: Vec<Value> = e
                    .terms()
                    .map(|(rad, q)| {
                        json!([q.numer().to_string(), q.denom().to_string(), rad])
                    })
                    .collect();
                Some(json!({"source": source, "target": target, "terms": terms}))
            })
        })
        .collect();
    json!(entries)
}

pub fn assemble(ctx: &Ctx) -> Result<bool> {
    let t0 = Instant::now();
    let m = ctx.config.m.unwrap_or(2);
    let n = ctx.config.n.unwrap_or(1);

    let q = assemble_ambient_q(m, n);
    let ind = indicial_substitute(&q).context("indicial substitution")?;
    let tf = restrict_tracefree(&ind).context("trace-free restriction")?;
    let j = build_scale_change(m);

    let adj = adjoint_pattern(&ind).context("adjoint pattern")?;
    let reflected = substitute_lambda_neg(&ind);
    let adjoint_ok = serde_json::to_value(&adj)? == serde_json::to_value(&reflected)?;
    let inverse_ok = j.compose(&j.inverse()).is_identity();

    let verdicts = vec![
        Verdict::new(
            "adjoint_is_lambda_reflection",
            adjoint_ok,
            format!("m = {m}, n = {n}: 𝒜_λ pattern vs λ → −λ"),
        ),
        Verdict::new(
            "scale_change_invertible",
            inverse_ok,
            "J·J⁻¹ = identity exactly".to_string(),
        ),
    ];
    let results = json!({
        "m": m,
        "n": n,
        "ambient": serde_json::to_value(&q)?,
        "indicial": serde_json::to_value(&ind)?,
        "tracefree": serde_json::to_value(&tf)?,
        "scale_change": scale_change_json(&j, m),
        "rendered": {
            "ambient": q.render(),
            "indicial": ind.render(),
            "tracefree": tf.render(),
        },
    });
    ctx.finish("assemble", "assemble.json", verdicts, results, t0)
}

// --- resonance-scan ----------------------------------------------------

pub fn resonance_scan(ctx: &Ctx) -> Result<bool> {
    let t0 = Instant::now();
    let base = match ctx.config.base.as_deref().unwrap_or("h2") {
        "h2" => Base::H2,
        "h3" => Base::H3,
        other => bail!("unknown base {other:?} (expected \"h2\" or \"h3\")"),
    };
    let m = ctx.config.m.unwrap_or(0);
    let modes = ctx.config.modes.clone().unwrap_or_else(|| vec![0, 1, 2]);
    let w = ctx
        .config
        .lambda_window
        .unwrap_or([-3.8, -0.2, -0.2, 0.2]);
    let window = ScanWindow {
        re_min: w[0],
        re_max: w[1],
        im_min: w[2],
        im_max: w[3],
    };
    let nodes = ctx.config.nodes.unwrap_or(120);
    let thr = ctx.config.thresholds.clone().unwrap_or_default();
    let sigma_thr = thr.sigma_min.unwrap_or(SINGULAR_REL);
    let agree_thr = thr.detector_agreement.unwrap_or(DETECTOR_AGREEMENT);
    let grid_thr = thr.grid_stability.unwrap_or(GRID_STABILITY);

    // Scan the modes on a bounded pool of worker threads; reports are
    // re-joined in mode order so the artifacts are deterministic.
    let mut reports: Vec<ResonanceReport> = Vec::with_capacity(modes.len());
    for chunk in modes.chunks(ctx.threads.max(1)) {
        let chunk_reports: Vec<_> = std::thread::scope(|s| {
            let handles: Vec<_> = chunk
                .iter()
                .map(|&ell| {
                    let window = window.clone();
                    s.spawn(move || {
                        let sys = mode_reduce(base, m, ell)?;
                        scan_resonances(&sys, nodes, &window)
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        });
        for r in chunk_reports {
            reports.push(r.map_err(|e| anyhow::anyhow!("mode scan failed: {e}"))?);
        }
    }

    // Apply the configured thresholds as a post-filter.
    let mut unresolved = 0usize;
    for r in &mut reports {
        r.poles.retain(|p| {
            p.sigma_min_rel <= sigma_thr
                && p.pencil_distance <= agree_thr
                && p.grid_shift <= grid_thr
        });
        unresolved += r.poles.iter().filter(|p| !p.resolved).count();
    }
    let total_poles: usize = reports.iter().map(|r| r.poles.len()).sum();

    // CSV artifact, one row per retained pole.
    let mut csv = csv::Writer::from_writer(Vec::new());
    csv.write_record([
        "mode",
        "re_lambda",
        "im_lambda",
        "sigma_min",
        "pencil_match",
        "refinement_delta",
    ])?;
    for r in &reports {
        for p in &r.poles {
            csv.write_record([
                r.ell.to_string(),
                format!("{:.12e}", p.lambda_re),
                format!("{:.12e}", p.lambda_im),
                format!("{:.3e}", p.sigma_min_rel),
                format!("{:.3e}", p.pencil_distance),
                format!("{:.3e}", p.grid_shift),
            ])?;
        }
    }
    let csv_bytes = csv.into_inner().context("csv flush")?;
    write_atomic(&ctx.out, "resonances.csv", &csv_bytes)?;

    if ctx.config.svg.unwrap_or(false) {
        let pts: Vec<(f64, f64)> = reports
            .iter()
            .flat_map(|r| r.poles.iter().map(|p| (p.lambda_re, p.lambda_im)))
            .collect();
        let svg = pole_scatter_svg((w[0], w[1], w[2], w[3]), &pts);
        write_atomic(&ctx.out, "resonances.svg", svg.as_bytes())?;
    }

    let verdicts = vec![Verdict::new(
        "all_poles_resolved",
        unresolved == 0,
        format!(
            "{total_poles} poles across {} modes, {unresolved} under-resolved",
            reports.len()
        ),
    )];
    let results = json!({
        "base": format!("{base:?}").to_lowercase(),
        "m": m,
        "nodes": nodes,
        "thresholds": {
            "sigma_min": sigma_thr,
            "detector_agreement": agree_thr,
            "grid_stability": grid_thr,
        },
        "reports": serde_json::to_value(&reports)?,
        "scalar_reference_h2": green::h2_scalar_resonances(w[0], w[1])
            .iter().map(|z| z.re).collect::<Vec<_>>(),
    });
    ctx.finish("resonance-scan", "resonance_scan.json", verdicts, results, t0)
}

// --- pipeline-thm ------------------------------------------------------

pub fn pipeline_thm(ctx: &Ctx) -> Result<bool> {
    let t0 = Instant::now();
    let ell = ctx.config.ell.unwrap_or(2);
    let lambda = ctx.config.lambda.unwrap_or(8.0);
    let nodes = ctx.config.pipeline_nodes.unwrap_or(140);

    // Scalar continued-resolvent solve with certified boundary decay.
    let scalar_sys = mode_reduce(Base::H2, 0, 0)
        .map_err(|e| anyhow::anyhow!("mode reduction failed: {e}"))?;
    let bump = |_: usize, mu: f64| {
        if mu > 0.5 && mu < 3.0 {
            let x: f64 = (mu - 1.75) / 1.25;
            Complex64::new((-2.0 * x * x / (1.0 - x * x)).exp(), 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    };
    let scalar = continue_resolvent_apply(&scalar_sys, 120, Complex64::new(6.0, 0.0), &bump)
        .map_err(|e| anyhow::anyhow!("scalar solve failed: {e}"))?;

    // Rank-2 trace-free decoupled solve at the configured λ.
    let pipe = tracefree_pipeline(ell, lambda.round() as i64, nodes)
        .map_err(|e| anyhow::anyhow!("trace-free pipeline failed: {e}"))?;

    let verdicts = vec![
        Verdict::new(
            "scalar_boundary_decay",
            scalar.slope_pass,
            format!(
                "slope {:.3} vs expected {:.3}",
                scalar.decay_slope, scalar.expected_slope
            ),
        ),
        Verdict::new(
            "tensor_boundary_decay",
            pipe.slope_pass,
            format!(
                "slope {:.3} vs expected {:.3}",
                pipe.decay_slope, pipe.expected_slope
            ),
        ),
        Verdict::new(
            "tracefree_decoupling",
            pipe.decouple_pass,
            format!(
                "lower-rank ratio {:.3e} (div f obstruction {:.3e})",
                pipe.lower_ratio, pipe.data_div_ratio
            ),
        ),
    ];
    let results = json!({
        "scalar": serde_json::to_value(&scalar)?,
        "tracefree": serde_json::to_value(&pipe)?,
    });
    ctx.finish("pipeline-thm", "pipeline_thm.json", verdicts, results, t0)
}
