use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{anyhow, Context};
use clap::ValueEnum;
use concord::bern::{is_bern_half_compatible, kendall_necessary, BernVerdict, DEFAULT_D_MAX};
use concord::block::{
    block_average, block_cholesky, block_psd, expand, expand_factor, reduce_spearman, spearman_verdict, BlockError,
    BlockSpec, SpearmanVerdict,
};
use concord::hierarchy::{calibrate, hac_sample, matrix_to_tree, Family, HierTree, HierarchyError};
use concord::matrix::{is_psd, min_eigenvalue};
use concord::samplers::{gaussian_factor, AttainmentModel, ModelKind, RngStream, MODEL_VERSION};
use concord::transforms::{attainable_bounds, gauss_spearman_inverse, make_transform, Descriptor};
use concord::{CandidateMatrix, Matrix, Measure, SampleMatrix};

use crate::error::{CliError, CliResult};
use crate::input::{load, read_text, Input};
use crate::report::{Report, Status};
use crate::{BlockAction, CheckKind, Cli, Command, TreeAction};

pub fn dispatch(cli: &Cli) -> CliResult<Report> {
    let tol = cli.tol;
    match &cli.command {
        Command::Check { input, measure, certificate } => {
            check(&load(input, tol)?, *measure, certificate.as_deref(), tol)
        }
        Command::Attain { input, measure, out, margin, family } => {
            attain(&load(input, tol)?, *measure, out, margin, *family, tol)
        }
        Command::Sample { model, n, out } => sample(model, *n, require_seed(cli)?, out),
        Command::Estimate { data, measure } => estimate(data, *measure),
        Command::Bounds { g1, g2, quad_n, grid, out } => match grid {
            Some(grid) => bounds_grid(grid, *quad_n, out.as_deref()),
            None => {
                let missing = || CliError::usage(anyhow!("bounds needs two descriptors or --grid"));
                bounds(g1.as_deref().ok_or_else(missing)?, g2.as_deref().ok_or_else(missing)?, *quad_n)
            }
        },
        Command::Block { spec, action, dense } => match load(spec, tol)? {
            Input::Block(spec) => block(&spec, *action, *dense, tol),
            other => Err(CliError::usage(anyhow!("expected a block specification, found a {}", other.kind()))),
        },
        Command::Tree { input, action, family, measure, n, out } => {
            let input = load(input, tol)?;
            tree(&input, *action, *family, *measure, *n, out.as_deref(), cli.seed)
        }
    }
}

fn require_seed(cli: &Cli) -> CliResult<u64> {
    cli.seed.ok_or_else(|| CliError::usage(anyhow!("this command draws random numbers and needs --seed")))
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    fs::write(path, contents).with_context(|| format!("cannot write {}", path.display())).map_err(CliError::usage)
}

fn write_csv(path: &Path, s: &SampleMatrix) -> CliResult<()> {
    let f = File::create(path).with_context(|| format!("cannot create {}", path.display())).map_err(CliError::usage)?;
    let mut w = BufWriter::new(f);
    s.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

fn psd_report(command: &str, m: &CandidateMatrix, tol: f64) -> Report {
    let lam = min_eigenvalue(m.as_matrix());
    let ok = is_psd(m.as_matrix(), tol);
    Report::new(command, Status::from_bool(ok))
        .verdict(if ok { "compatible" } else { "incompatible" })
        .line(format!("minimum eigenvalue: {lam:.6e}"))
        .field("min_eigenvalue", lam)
}

fn check(input: &Input, kind: CheckKind, certificate: Option<&Path>, tol: f64) -> CliResult<Report> {
    let m = input.matrix();
    let report = match kind {
        CheckKind::Psd | CheckKind::Waerden => match input {
            Input::Block(spec) => {
                let ok = block_psd(spec, tol);
                Report::new("check", Status::from_bool(ok))
                    .verdict(if ok { "compatible" } else { "incompatible" })
                    .line("decided on the block average matrix")
            }
            _ => psd_report("check", &m, tol),
        },
        CheckKind::Bern => match is_bern_half_compatible(&m)? {
            BernVerdict::Compatible(cert) => {
                let mut r = Report::new("check", Status::Success)
                    .verdict("compatible")
                    .line(format!("certificate with {} cut matrices", cert.weights().len()))
                    .field("objective", 0.0)
                    .field("certificate", &cert);
                if let Some(path) = certificate {
                    write_file(path, &cert.to_text())?;
                    r = r.line(format!("certificate written to {}", path.display()));
                }
                r
            }
            BernVerdict::Incompatible { objective } => Report::new("check", Status::Negative)
                .verdict("incompatible")
                .line(format!("phase-I objective: {objective:.6e}"))
                .field("objective", objective),
        },
        CheckKind::Spearman => check_spearman(input, &m, tol)?,
        CheckKind::TauNecessary => {
            let ok = kendall_necessary(&m)?;
            Report::new("check", Status::from_bool(ok))
                .verdict(if ok { "necessary_condition_holds" } else { "incompatible" })
                .line("the condition is necessary only; passing it does not establish compatibility")
        }
    };
    Ok(report.field("measure", kind.to_possible_value().expect("named variant").get_name()).field("dim", m.dim()))
}

fn check_spearman(input: &Input, m: &CandidateMatrix, tol: f64) -> CliResult<Report> {
    if let Input::Tree(t) = input {
        if t.is_proper() {
            return Ok(Report::new("check", Status::Success)
                .verdict("compatible")
                .line("proper hierarchical tree: attained by a nested Archimedean copula"));
        }
    }
    if let Input::Block(spec) = input {
        return Ok(spearman_block_report(&spearman_verdict(spec, tol)?));
    }
    if !is_psd(m.as_matrix(), tol) {
        return Ok(Report::new("check", Status::Negative).verdict("incompatible").line("not positive semi-definite"));
    }
    if m.dim() <= 9 {
        return Ok(Report::new("check", Status::Success)
            .verdict("compatible")
            .line("positive semi-definite with d <= 9"));
    }
    if m.dim() <= DEFAULT_D_MAX {
        if let BernVerdict::Compatible(_) = is_bern_half_compatible(m)? {
            return Ok(Report::new("check", Status::Success)
                .verdict("compatible")
                .line("symmetric-Bernoulli correlation matrix"));
        }
    }
    Ok(Report::new("check", Status::Negative)
        .verdict("inconclusive")
        .line("positive semi-definite, d >= 10, and no symmetric-Bernoulli certificate"))
}

fn spearman_block_report(v: &SpearmanVerdict) -> Report {
    let status = Status::from_bool(v.is_compatible() == Some(true));
    match v {
        SpearmanVerdict::CompatibleSmall => Report::new("check", status).verdict("compatible").line("d <= 9 and PSD"),
        SpearmanVerdict::CompatibleViaBernoulli { m, .. } => Report::new("check", status)
            .verdict("compatible")
            .line("reduced matrix M is a symmetric-Bernoulli correlation matrix")
            .matrix("reduced", m.as_matrix()),
        SpearmanVerdict::CompatibleViaReduction { m } => Report::new("check", status)
            .verdict("compatible")
            .line("reduced matrix M is PSD with S <= 9")
            .matrix("reduced", m),
        SpearmanVerdict::NotPsd => {
            Report::new("check", status).verdict("incompatible").line("not positive semi-definite")
        }
        SpearmanVerdict::Inconclusive { reason, .. } => {
            Report::new("check", status).verdict("inconclusive").line(reason).field("reason", reason)
        }
    }
}

/// Gaussian model whose Spearman matrix is `m`, when `2 sin(π m_ij / 6)` is PSD.
fn gaussian_spearman_model(m: &CandidateMatrix, tol: f64) -> CliResult<Option<AttainmentModel>> {
    let rows = m.as_matrix().to_rows();
    let mut t = Matrix::identity(m.dim()).to_rows();
    for i in 0..m.dim() {
        for j in 0..m.dim() {
            if i != j {
                t[i][j] = gauss_spearman_inverse(rows[i][j]).map_err(CliError::usage)?;
            }
        }
    }
    let t = Matrix::from_rows(&t).map_err(CliError::usage)?;
    if !is_psd(&t, tol) {
        return Ok(None);
    }
    let c = CandidateMatrix::validate(&t, tol).map_err(CliError::usage)?;
    Ok(Some(AttainmentModel {
        version: MODEL_VERSION,
        measure: Measure::Spearman,
        target: m.clone(),
        kind: ModelKind::Gaussian { factor: gaussian_factor(&c)? },
    }))
}

fn attain(input: &Input, measure: Measure, out: &Path, margin: &str, family: Family, tol: f64) -> CliResult<Report> {
    let margin = make_transform(&margin.parse::<Descriptor>().map_err(CliError::usage)?).map_err(CliError::usage)?;
    let negative = |why: &str| Ok(Report::new("attain", Status::Negative).verdict("incompatible").line(why));
    let model = match (input, measure) {
        (Input::Tree(t), _) => {
            if !t.is_proper() {
                return negative("tree is not proper");
            }
            AttainmentModel::hac(calibrate(t, family, measure)?)
        }
        (Input::Block(spec), Measure::Spearman) => match spearman_verdict(spec, tol)? {
            SpearmanVerdict::CompatibleViaBernoulli { certificate, .. } => {
                AttainmentModel::block_spearman(spec.clone(), certificate)?
            }
            SpearmanVerdict::NotPsd => return negative("not positive semi-definite"),
            _ => match spearman_fallback(&expand(spec), &margin, tol)? {
                Some(m) => m,
                None => return negative("no attaining construction found"),
            },
        },
        (_, Measure::Waerden) => {
            let m = input.matrix();
            if !is_psd(m.as_matrix(), tol) {
                return negative("not positive semi-definite");
            }
            AttainmentModel::gaussian(m)?
        }
        (_, Measure::Tau) => {
            return Err(CliError::usage(anyhow!("Kendall's tau attainment is available for proper trees only")));
        }
        (_, Measure::Spearman) => match spearman_fallback(&input.matrix(), &margin, tol)? {
            Some(m) => m,
            None => return negative("no attaining construction found"),
        },
        (_, Measure::Beta) => match bern_model(&input.matrix(), Measure::Beta, &margin)? {
            Some(m) => m,
            None => return negative("not a symmetric-Bernoulli correlation matrix"),
        },
    };
    let json = serde_json::to_string_pretty(&model).map_err(CliError::usage)?;
    write_file(out, &json)?;
    let kind = model_kind(&model.kind);
    Ok(Report::new("attain", Status::Success)
        .verdict("compatible")
        .line(format!("model: {kind}"))
        .line(format!("written to {}", out.display()))
        .field("model_kind", kind)
        .field("measure", measure)
        .field("path", out.display().to_string()))
}

fn bern_model(
    m: &CandidateMatrix,
    measure: Measure,
    margin: &concord::transforms::QuantileTransform,
) -> CliResult<Option<AttainmentModel>> {
    if m.dim() > DEFAULT_D_MAX {
        return Ok(None);
    }
    Ok(match is_bern_half_compatible(m)? {
        BernVerdict::Compatible(cert) => Some(AttainmentModel::bern_mixture(measure, cert, margin.clone())),
        BernVerdict::Incompatible { .. } => None,
    })
}

fn spearman_fallback(
    m: &CandidateMatrix,
    margin: &concord::transforms::QuantileTransform,
    tol: f64,
) -> CliResult<Option<AttainmentModel>> {
    if let Some(model) = bern_model(m, Measure::Spearman, margin)? {
        return Ok(Some(model));
    }
    gaussian_spearman_model(m, tol)
}

fn model_kind(k: &ModelKind) -> &'static str {
    match k {
        ModelKind::BernMixture { .. } => "bern_mixture",
        ModelKind::Gaussian { .. } => "gaussian",
        ModelKind::BlockSpearman { .. } => "block_spearman",
        ModelKind::Hac { .. } => "hac",
    }
}

fn sample(path: &Path, n: usize, seed: u64, out: &Path) -> CliResult<Report> {
    let text = read_text(path)?;
    let model: AttainmentModel = serde_json::from_str(&text)
        .with_context(|| format!("{}: invalid model", path.display()))
        .map_err(CliError::usage)?;
    if model.version != MODEL_VERSION {
        return Err(CliError::usage(anyhow!("model version {} is not supported", model.version)));
    }
    let s = model.sample(n, &RngStream::new(seed, 0))?;
    write_csv(out, &s)?;
    Ok(Report::new("sample", Status::Success)
        .line(format!("{n} rows of dimension {} written to {}", s.d(), out.display()))
        .field("rows", n)
        .field("dim", s.d())
        .field("seed", seed)
        .field("model_kind", model_kind(&model.kind))
        .field("path", out.display().to_string()))
}

fn estimate(path: &Path, measure: Measure) -> CliResult<Report> {
    let s = SampleMatrix::parse_csv(&read_text(path)?)
        .with_context(|| format!("{}: invalid sample CSV", path.display()))
        .map_err(CliError::usage)?;
    let m = measure.estimate(&s).map_err(CliError::usage)?;
    Ok(Report::new("estimate", Status::Success)
        .line(format!("{measure} matrix from {} rows", s.n()))
        .field("measure", measure)
        .field("rows", s.n())
        .matrix("matrix", m.as_matrix()))
}

fn descriptor(s: &str) -> CliResult<concord::transforms::QuantileTransform> {
    let d: Descriptor = s.parse().map_err(CliError::usage)?;
    make_transform(&d).map_err(CliError::usage)
}

fn bounds(g1: &str, g2: &str, quad_n: usize) -> CliResult<Report> {
    let b = attainable_bounds(&descriptor(g1)?, &descriptor(g2)?, quad_n).map_err(CliError::usage)?;
    Ok(Report::new("bounds", Status::Success)
        .line(format!("min: {:.10}", b.min))
        .line(format!("max: {:.10}", b.max))
        .field("g1", g1)
        .field("g2", g2)
        .field("min", b.min)
        .field("max", b.max))
}

fn bounds_grid(spec: &str, quad_n: usize, out: Option<&Path>) -> CliResult<Report> {
    let bad = || CliError::usage(anyhow!("--grid expects FAMILY:LO:HI:STEPS, got {spec:?}"));
    let parts: Vec<&str> = spec.split(':').collect();
    let [family, lo, hi, steps] = parts[..] else { return Err(bad()) };
    let (lo, hi): (f64, f64) = (lo.parse().map_err(|_| bad())?, hi.parse().map_err(|_| bad())?);
    let steps: usize = steps.parse().map_err(|_| bad())?;
    if steps == 0 || !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(bad());
    }
    let make = |x: f64| -> CliResult<_> {
        let d = match family {
            "lognormal" => Descriptor::Lognormal(x),
            "bern" => Descriptor::Bernoulli(x),
            _ => return Err(CliError::usage(anyhow!("grid family must be lognormal or bern, got {family:?}"))),
        };
        make_transform(&d).map_err(CliError::usage)
    };
    let xs: Vec<f64> =
        (0..steps).map(|i| if steps == 1 { lo } else { lo + (hi - lo) * i as f64 / (steps - 1) as f64 }).collect();
    let gs = xs.iter().map(|&x| make(x)).collect::<CliResult<Vec<_>>>()?;
    let mut csv = String::from("x1,x2,min,max\n");
    let mut points = Vec::new();
    for (a, ga) in xs.iter().zip(&gs) {
        for (b, gb) in xs.iter().zip(&gs) {
            let r = attainable_bounds(ga, gb, quad_n).map_err(CliError::usage)?;
            csv.push_str(&format!("{a},{b},{:.12},{:.12}\n", r.min, r.max));
            points.push([*a, *b, r.min, r.max]);
        }
    }
    let mut report = Report::new("bounds", Status::Success).field("family", family).field("grid", &points);
    match out {
        Some(path) => {
            write_file(path, &csv)?;
            report = report.line(format!("{} grid points written to {}", points.len(), path.display()));
        }
        None => report = report.line(csv.trim_end()),
    }
    Ok(report)
}

fn block(spec: &BlockSpec, action: BlockAction, dense: bool, tol: f64) -> CliResult<Report> {
    let r = Report::new("block", Status::Success).field("spec", spec.to_string());
    Ok(match action {
        BlockAction::Expand => r.matrix("matrix", expand(spec).as_matrix()),
        BlockAction::Phi => r.matrix("phi", &block_average(spec)),
        BlockAction::Psd => {
            let ok = block_psd(spec, tol);
            let mut r = r.verdict(if ok { "psd" } else { "not_psd" });
            r.status = Status::from_bool(ok);
            r
        }
        BlockAction::Chol => match block_cholesky(spec) {
            Ok(f) => {
                let mut r = r.verdict("positive_definite");
                for s in 0..spec.groups() {
                    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>().join(", ");
                    r = r.line(format!("group {}: diagonal ({})", s + 1, fmt(&f.diag[s])));
                    r = r.line(format!("group {}: below diagonal ({})", s + 1, fmt(&f.sub[s])));
                    for (m, c) in f.cols[s].iter().enumerate() {
                        r = r.line(format!("group {} under group {}: ({})", s + m + 2, s + 1, fmt(c)));
                    }
                }
                r = r.field("diag", &f.diag).field("sub", &f.sub).field("cols", &f.cols);
                if dense {
                    r = r.matrix("factor", expand_factor(&f, spec).as_matrix());
                }
                r
            }
            Err(e @ BlockError::NotPositiveDefinite { .. }) => {
                let mut r = r.verdict("not_positive_definite").line(e.to_string());
                r.status = Status::Negative;
                r
            }
            Err(e) => return Err(e.into()),
        },
        BlockAction::Reduce => match reduce_spearman(spec) {
            Ok(m) => r.matrix("reduced", &m),
            Err(e @ BlockError::DenominatorNonpositive { .. }) => {
                let mut r = r.verdict("undefined").line(e.to_string());
                r.status = Status::Negative;
                r
            }
            Err(e) => return Err(e.into()),
        },
    })
}

fn tree(
    input: &Input,
    action: TreeAction,
    family: Family,
    measure: Measure,
    n: Option<usize>,
    out: Option<&Path>,
    seed: Option<u64>,
) -> CliResult<Report> {
    let as_tree = || -> CliResult<&HierTree> {
        match input {
            Input::Tree(t) => Ok(t),
            other => Err(CliError::usage(anyhow!("expected a tree, found a {}", other.kind()))),
        }
    };
    let r = Report::new("tree", Status::Success);
    Ok(match action {
        TreeAction::Matrix => {
            r.field("tree", as_tree()?.to_text()).matrix("matrix", as_tree()?.to_matrix().as_matrix())
        }
        TreeAction::Recover => match matrix_to_tree(&input.matrix()) {
            Ok(t) => {
                r.verdict("hierarchical").line(t.to_text()).line(t.to_indented().trim_end()).field("tree", t.to_text())
            }
            Err(e @ HierarchyError::NotHierarchical(_)) => {
                let mut r = r.verdict("not_hierarchical").line(e.to_string());
                r.status = Status::Negative;
                r
            }
            Err(e) => return Err(e.into()),
        },
        TreeAction::Proper => {
            let ok = as_tree()?.is_proper();
            let mut r = r.verdict(if ok { "proper" } else { "not_proper" });
            r.status = Status::from_bool(ok);
            r
        }
        TreeAction::Calibrate => {
            let t = as_tree()?;
            let model = calibrate(t, family, measure)?;
            let mut r = r.field("family", family).field("measure", measure).field("theta", model.theta());
            for (v, (node, theta)) in t.nodes().iter().zip(model.theta()).enumerate() {
                r = r.line(format!("node {v}: value {} theta {theta:.10}", node.value));
            }
            if let Some(path) = out {
                let json = serde_json::to_string_pretty(&AttainmentModel::hac(model)).map_err(CliError::usage)?;
                write_file(path, &json)?;
                r = r.line(format!("model written to {}", path.display()));
            }
            r
        }
        TreeAction::Sample => {
            let t = as_tree()?;
            let n = n.ok_or_else(|| CliError::usage(anyhow!("tree sample needs -n")))?;
            let out = out.ok_or_else(|| CliError::usage(anyhow!("tree sample needs --out")))?;
            let seed =
                seed.ok_or_else(|| CliError::usage(anyhow!("this command draws random numbers and needs --seed")))?;
            let model = calibrate(t, family, measure)?;
            let s = hac_sample(&model, n, &RngStream::new(seed, 0));
            write_csv(out, &s)?;
            r.line(format!("{n} rows of dimension {} written to {}", s.d(), out.display()))
                .field("rows", n)
                .field("dim", s.d())
                .field("seed", seed)
                .field("path", out.display().to_string())
        }
    })
}
