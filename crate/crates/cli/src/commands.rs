use std::io::Write;
use std::time::Instant;

use meshnoise::flow::{run_demo, DemoConfig};
use meshnoise::noise::{par_samples, Sampler, SamplerSpec};
use meshnoise::verify::{self, AgnosticismReport, ScaleConfig, VerifyConfig};
use meshnoise::{cotan_laplacian, generalized_eigs, lumped_mass, Screening};
use serde::Serialize;

use crate::error::CliError;
use crate::input::{
    add_subdivisions, field_name, load_meshes, load_single, noise_model, prepare_out_dir, screening, write_fields,
    write_file, write_json,
};
use crate::{FmdemoArgs, SampleArgs, SpectrumArgs, VerifyArgs};

fn millis(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "pass"
    } else {
        "FAIL"
    }
}

pub fn sample(args: SampleArgs) -> Result<bool, CliError> {
    let screening = screening(&args.screening, args.model)?;
    if args.n == 0 || args.channels == 0 {
        return Err(CliError::Usage("-n and --channels must be at least 1".into()));
    }
    let named = load_single(&args.mesh)?;
    prepare_out_dir(&args.output.out)?;
    let spec = SamplerSpec {
        model: noise_model(args.model),
        screening,
        no_screening: args.no_screening,
        explicit_modes: args.modes,
    };

    let start = Instant::now();
    let sampler = Sampler::build(&named.mesh, &spec)?;
    let setup = millis(start);
    let start = Instant::now();
    let draws = par_samples(args.n, |i| sampler.sample_channels(args.seed, i as u64, args.channels))?;
    let sampling = millis(start);
    eprintln!(
        "{}: {} vertices, setup (factorization) {setup:.2} ms, {:.3} ms per sample",
        named.name,
        named.mesh.vertex_count(),
        sampling / args.n as f64
    );

    let fields: Vec<(String, Vec<f64>)> = draws
        .into_iter()
        .enumerate()
        .flat_map(|(i, channels)| {
            let count = channels.len();
            channels
                .into_iter()
                .enumerate()
                .map(move |(c, f)| (field_name(i, c, count), f.into_inner()))
        })
        .collect();
    let path = write_fields(&args.output.out, "samples", &named.mesh, &fields, args.format)?;
    eprintln!("wrote {}", path.display());
    Ok(true)
}

#[derive(Serialize)]
struct MeshSource<'a> {
    name: &'a str,
    source: &'a str,
}

#[derive(Serialize)]
struct VerifyOutput<'a> {
    command: &'static str,
    meshes: Vec<MeshSource<'a>>,
    config: &'a VerifyConfig,
    report: &'a AgnosticismReport,
}

pub fn verify(args: VerifyArgs) -> Result<bool, CliError> {
    let screening = screening(&args.screening, args.model)?;
    let mut meshes = load_meshes(&args.mesh)?;
    add_subdivisions(&mut meshes, args.subdivide);
    prepare_out_dir(&args.output.out)?;

    let mut cfg = VerifyConfig::new(SamplerSpec::new(noise_model(args.model), screening));
    cfg.samples = args.samples;
    cfg.seed = args.seed;
    cfg.pairs = args.pairs;
    cfg.match_tol = args.match_tol;
    cfg.correlation_threshold = args.correlation_threshold;
    cfg.correlation_block = args.correlation_block;
    cfg.tail_k = args.tail_k;
    cfg.epsilon = args.epsilon;
    cfg.histogram_indices = args.histograms.clone();
    cfg.bins = args.bins;
    if !args.scales.is_empty() {
        let c = match screening {
            Screening::Normalized(c) => c,
            Screening::Tau(_) => 1.0,
        };
        cfg.scale = Some(ScaleConfig {
            c,
            scales: args.scales.clone(),
        });
    }

    let start = Instant::now();
    let pairs: Vec<(String, meshnoise::TriMesh)> = meshes.iter().map(|m| (m.name.clone(), m.mesh.clone())).collect();
    let result = verify::run(&pairs, &cfg)?;
    eprintln!(
        "verified {} meshes in {:.1} s",
        pairs.len(),
        start.elapsed().as_secs_f64()
    );

    let report = &result.report;
    let out = &args.output.out;
    write_json(
        &out.join("report.json"),
        &VerifyOutput {
            command: "verify",
            meshes: meshes
                .iter()
                .map(|m| MeshSource {
                    name: &m.name,
                    source: &m.source,
                })
                .collect(),
            config: &cfg,
            report,
        },
    )?;
    for (m, stats) in meshes.iter().zip(&result.stats) {
        write_file(&out.join(format!("histograms_{}.csv", m.name)), |w| {
            stats.write_histograms_csv(w)
        })?;
        write_file(&out.join(format!("variances_{}.csv", m.name)), |w| {
            stats.write_variances_csv(w)
        })?;
    }

    for p in &report.property1 {
        eprintln!(
            "property 1 [{}] {}: max |corr| {:.4} (threshold {})",
            p.mesh,
            verdict(p.pass),
            p.max_abs_correlation,
            p.threshold
        );
    }
    for p in &report.property2 {
        eprintln!(
            "property 2 [{} vs {}] {}: {} of {} matched pairs fail",
            p.mesh_a,
            p.mesh_b,
            verdict(p.pass),
            p.failed_pairs,
            p.pairs.len()
        );
    }
    for p in &report.property3 {
        eprintln!(
            "property 3 [{}] {}: tail from mode {} = {:.3e} (threshold {:.3e})",
            p.mesh,
            verdict(p.pass),
            p.k,
            p.tail_variance,
            p.threshold
        );
    }
    if let Some(s) = &report.scale {
        eprintln!(
            "scale invariance {}: max relative deviation {:.2e}",
            verdict(s.pass),
            s.max_relative_deviation
        );
    }
    eprintln!(
        "overall: {}; wrote {}",
        verdict(report.pass),
        out.join("report.json").display()
    );
    Ok(report.pass)
}

pub fn spectrum(args: SpectrumArgs) -> Result<bool, CliError> {
    let named = load_single(&args.mesh)?;
    prepare_out_dir(&args.output.out)?;
    let n = named.mesh.vertex_count();
    let k = args.k.unwrap_or(n);
    if let Some(&bad) = args.eigenvectors.iter().find(|&&j| j == 0 || j > k) {
        return Err(CliError::Usage(format!("--eigenvectors index {bad} outside 1..={k}")));
    }

    let start = Instant::now();
    let l = cotan_laplacian(&named.mesh)?;
    let m = lumped_mass(&named.mesh)?;
    let spectrum = generalized_eigs(&l, &m, k)?;
    eprintln!(
        "{}: {n} vertices, {k} eigenpairs in {:.1} ms, first eigenvalue {:.3e}",
        named.name,
        millis(start),
        spectrum.eigenvalues().first().copied().unwrap_or(f64::NAN)
    );

    let out = &args.output.out;
    let path = out.join("eigenvalues.csv");
    write_file(&path, |w| spectrum.write_csv(w))?;
    eprintln!("wrote {}", path.display());
    if !args.eigenvectors.is_empty() {
        let fields: Vec<(String, Vec<f64>)> = args
            .eigenvectors
            .iter()
            .map(|&j| (format!("phi_{j}"), spectrum.vector(j - 1).to_vec()))
            .collect();
        let path = write_fields(out, "eigenvectors", &named.mesh, &fields, crate::FieldFormat::Ply)?;
        eprintln!("wrote {}", path.display());
    }
    Ok(true)
}

#[derive(Serialize)]
struct FmdemoOutput<'a> {
    command: &'static str,
    mesh: MeshSource<'a>,
    report: &'a meshnoise::flow::DemoReport,
}

pub fn fmdemo(args: FmdemoArgs) -> Result<bool, CliError> {
    let named = load_single(&args.mesh)?;
    prepare_out_dir(&args.output.out)?;
    let cfg = DemoConfig {
        samples: args.samples,
        mmd_samples: args.mmd_samples,
        steps: args.steps,
        channels: args.channels,
        seed: args.seed,
        tau: args.tau,
        target_tau: args.target_tau,
        gain: args.gain,
        modes: args.modes,
        variance_modes: args.variance_modes,
        variance_threshold: args.variance_threshold,
        mmd_ratio_threshold: args.mmd_ratio_threshold,
    };
    let start = Instant::now();
    let output = run_demo(&named.mesh, &cfg)?;
    eprintln!(
        "{}: demo finished in {:.1} s",
        named.name,
        start.elapsed().as_secs_f64()
    );
    let r = &output.report;

    let out = &args.output.out;
    write_json(
        &out.join("fmdemo.json"),
        &FmdemoOutput {
            command: "fmdemo",
            mesh: MeshSource {
                name: &named.name,
                source: &named.source,
            },
            report: r,
        },
    )?;
    write_file(&out.join("convergence.csv"), |w| {
        writeln!(w, "steps,error,ratio")?;
        for row in &r.convergence {
            let ratio = row.ratio.map(|x| x.to_string()).unwrap_or_default();
            writeln!(w, "{},{},{ratio}", row.steps, row.error)?;
        }
        Ok(())
    })?;
    let fields: Vec<(String, Vec<f64>)> = output
        .generated
        .iter()
        .take(args.write)
        .enumerate()
        .flat_map(|(i, channels)| {
            channels
                .iter()
                .enumerate()
                .map(move |(c, f)| (field_name(i, c, channels.len()), f.to_vec()))
        })
        .collect();
    if !fields.is_empty() {
        write_fields(out, "generated", &named.mesh, &fields, args.format)?;
    }

    eprintln!(
        "max per-mode variance error {:.4} (threshold {}), MMD ratio {:.3} (threshold {}), COV {:.3}",
        r.max_variance_error, cfg.variance_threshold, r.mmd_ratio, cfg.mmd_ratio_threshold, r.cov
    );
    for row in &r.convergence {
        eprintln!(
            "  steps {:>4}  error {:.3e}  ratio {}",
            row.steps,
            row.error,
            row.ratio.map_or("-".to_string(), |x| format!("{x:.3}"))
        );
    }
    eprintln!(
        "overall: {}; wrote {}",
        verdict(r.pass),
        out.join("fmdemo.json").display()
    );
    Ok(r.pass)
}
