//! Front end of `freeconv`: configuration, pipelines and CSV output.
//!
//! Exit codes: 0 success, 1 failed check or I/O error, 2 invalid
//! configuration or input, 3 numerical failure.

pub mod config;
pub mod selfcheck;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use thiserror::Error;

use freeconv::linpen::{hermitized_linearize, linearize_sa};
use freeconv::ncexpr::parse;
use freeconv::recover::{pencil_density, BrownField, DensityCurve, Grid2d, DEFAULT_BROWN_EPS, DEFAULT_EPS_SCHEDULE};
use freeconv::rmt::{compare_field, ks_curve, pooled_spectrum, Spectrum};
use freeconv::{LinearPencil, NcPolynomial, PencilEvaluator};

use config::{EpsilonSpec, ProblemConfig, Task};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("{module}: {message}")]
    Numerical { module: &'static str, message: String },
    #[error("i/o: {0}")]
    Io(String),
    #[error("{0} check(s) failed")]
    Checks(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) | CliError::Checks(_) => 1,
            CliError::Config(_) => 2,
            CliError::Numerical { .. } => 3,
        }
    }
}

fn config_err(e: freeconv::Error) -> CliError {
    CliError::Config(e.to_string())
}

fn numerical(module: &'static str) -> impl Fn(freeconv::Error) -> CliError {
    move |e| CliError::Numerical { module, message: e.to_string() }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

/// What a run printed and wrote.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub summary: String,
    pub files: Vec<PathBuf>,
}

/// Runs the problem described by the JSON file at `path`.
pub fn run(path: &Path) -> Result<RunReport, CliError> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|_| CliError::Config("config is not UTF-8".into()))?;
    let cfg = ProblemConfig::from_json(&text)?;
    let hash = hex::encode(Sha256::digest(&bytes));
    let base = path.parent().unwrap_or(Path::new("."));
    if cfg.task == Task::Selfcheck {
        let report = selfcheck::run(1.0);
        let failed = report.iter().filter(|c| !c.passed).count();
        let summary = selfcheck::render(&report);
        if failed > 0 {
            print!("{summary}");
            return Err(CliError::Checks(failed));
        }
        return Ok(RunReport { summary, files: Vec::new() });
    }
    Pipeline::new(cfg, hash, base)?.execute()
}

struct Pipeline {
    cfg: ProblemConfig,
    hash: String,
    output: PathBuf,
    poly: Option<NcPolynomial>,
    pencil: LinearPencil,
    brown: bool,
}

impl Pipeline {
    fn new(cfg: ProblemConfig, hash: String, base: &Path) -> Result<Self, CliError> {
        let output = base.join(cfg.output.as_deref().expect("checked"));
        let (poly, pencil, brown) = match (&cfg.expression, &cfg.pencil) {
            (Some(expr), _) => {
                let vars: Vec<&str> = cfg.variables.keys().map(String::as_str).collect();
                let p = parse(expr, &vars).map_err(|e| CliError::Config(format!("expression: {e}")))?;
                let brown = match cfg.task {
                    Task::Density if !p.is_selfadjoint() => {
                        return Err(CliError::Config("density needs a selfadjoint expression".into()))
                    }
                    Task::Brown => true,
                    Task::Compare => !p.is_selfadjoint(),
                    _ => false,
                };
                let pencil = if brown { hermitized_linearize(&p) } else { linearize_sa(&p) }
                    .map_err(config_err)?;
                (Some(p), pencil, brown)
            }
            (None, Some(file)) => {
                if cfg.task == Task::Compare {
                    return Err(CliError::Config("compare needs `expression`".into()));
                }
                let path = base.join(file);
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
                let pencil = LinearPencil::from_text(&text).map_err(config_err)?;
                let brown = cfg.task == Task::Brown;
                if pencil.corner() != if brown { 2 } else { 1 } {
                    return Err(CliError::Config(format!(
                        "pencil corner {} does not fit task {:?}",
                        pencil.corner(),
                        cfg.task
                    )));
                }
                (None, pencil, brown)
            }
            (None, None) => unreachable!("checked"),
        };
        Ok(Pipeline { cfg, hash, output, poly, pencil, brown })
    }

    fn header(&self, lines: &[String]) -> String {
        let mut h = String::new();
        let _ = writeln!(h, "# freeconv {}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(h, "# config sha256 {}", self.hash);
        let _ = writeln!(h, "# task {:?}", self.cfg.task);
        match (&self.cfg.expression, &self.cfg.pencil) {
            (Some(e), _) => {
                let _ = writeln!(h, "# expression {e}");
            }
            (_, Some(p)) => {
                let _ = writeln!(h, "# pencil {p}");
            }
            _ => {}
        }
        for l in lines {
            let _ = writeln!(h, "# {l}");
        }
        h
    }

    fn execute(self) -> Result<RunReport, CliError> {
        let laws = self.cfg.laws();
        let ev = PencilEvaluator::new(&self.pencil, &laws, &self.cfg.solver()).map_err(config_err)?;
        let grid = self.cfg.grid.as_ref().expect("checked");
        let mut files = vec![self.output.clone()];
        let mut body;
        let mut summary;
        if self.brown {
            let eps = match &self.cfg.epsilon {
                None => DEFAULT_BROWN_EPS,
                Some(EpsilonSpec::Scalar(e)) => *e,
                Some(EpsilonSpec::Schedule(_)) => {
                    return Err(CliError::Config("`epsilon` must be a single number for Brown fields".into()))
                }
            };
            let im = grid.im.unwrap_or(grid.re);
            let g2 = Grid2d::new(
                (grid.re[0], grid.re[1]),
                (im[0], im[1]),
                grid.points,
                grid.im_points.unwrap_or(grid.points),
            )
            .map_err(|e| CliError::Config(format!("at `grid`: {e}")))?;
            let field = freeconv::recover::brown_field_with(
                |lambda| ev.scalar(freeconv::linpen::Payload::Brown { lambda, eps }),
                &g2,
                eps,
            )
            .map_err(numerical("recover"))?;
            body = self.header(&[
                format!("epsilon {eps}"),
                format!(
                    "grid re [{}, {}] im [{}, {}] points {}x{} spacing {}",
                    g2.re[0],
                    g2.re[g2.re.len() - 1],
                    g2.im[0],
                    g2.im[g2.im.len() - 1],
                    g2.re.len(),
                    g2.im.len(),
                    g2.spacing()
                ),
            ]);
            write_field(&mut body, &field);
            summary = format!(
                "mass {:.6} failed nodes {} one-sided nodes {}\n",
                field.mass,
                field.failed.len(),
                field.one_sided
            );
            if self.cfg.task == Task::Compare {
                let spectrum = self.spectrum()?;
                let Spectrum::Complex(z) = &spectrum else {
                    unreachable!("non-selfadjoint expression")
                };
                let cmp = compare_field(z, &field, 5);
                let _ = writeln!(
                    summary,
                    "radial sup-distance {:.6} chi-square {:.3} over {} cells ({} eigenvalues)",
                    cmp.sup_distance,
                    cmp.chi_square,
                    cmp.cells,
                    z.len()
                );
                files.push(self.write_spectrum(&spectrum)?);
            }
        } else {
            let eps = match &self.cfg.epsilon {
                None => DEFAULT_EPS_SCHEDULE.to_vec(),
                Some(EpsilonSpec::Scalar(e)) => vec![*e],
                Some(EpsilonSpec::Schedule(s)) => s.clone(),
            };
            if grid.im.is_some() || grid.im_points.is_some() {
                return Err(CliError::Config("`grid.im` is only used by Brown fields".into()));
            }
            let t = freeconv::recover::linspace(grid.re[0], grid.re[1], grid.points);
            let curve = pencil_density(&ev, &t, &eps).map_err(|e| match e {
                freeconv::Error::InvalidGrid(m) => CliError::Config(format!("at `grid` or `epsilon`: {m}")),
                e => numerical("recover/subord")(e),
            })?;
            let eps_text: Vec<String> = eps.iter().map(|e| e.to_string()).collect();
            body = self.header(&[
                format!("epsilon {}", eps_text.join(",")),
                format!("grid [{}, {}] points {}", grid.re[0], grid.re[1], grid.points),
            ]);
            write_curve(&mut body, &curve);
            summary = format!("mass {:.6} atoms {}\n", curve.mass, atom_text(&curve));
            if self.cfg.task == Task::Compare {
                let spectrum = self.spectrum()?;
                let Spectrum::Real(x) = &spectrum else { unreachable!("selfadjoint expression") };
                let _ = writeln!(summary, "ks {:.6} ({} eigenvalues)", ks_curve(x, &curve), x.len());
                files.push(self.write_spectrum(&spectrum)?);
            }
        }
        for line in summary.lines() {
            let _ = writeln!(body, "# {line}");
        }
        std::fs::write(&self.output, &body).map_err(io_err(&self.output))?;
        if self.cfg.plot {
            files.push(self.write_plot()?);
        }
        Ok(RunReport { summary, files })
    }

    fn spectrum(&self) -> Result<Spectrum, CliError> {
        let rmt = self.cfg.rmt.as_ref().expect("checked");
        let ens: BTreeMap<_, _> = rmt.ensembles.iter().map(|(k, v)| (k.clone(), v.build())).collect();
        let p = self.poly.as_ref().expect("compare has an expression");
        pooled_spectrum(p, &ens, rmt.n, rmt.seed, rmt.trials).map_err(numerical("rmt"))
    }

    fn sibling(&self, suffix: &str) -> PathBuf {
        let mut name = self.output.file_stem().unwrap_or_default().to_os_string();
        name.push(suffix);
        self.output.with_file_name(name)
    }

    fn write_spectrum(&self, s: &Spectrum) -> Result<PathBuf, CliError> {
        let rmt = self.cfg.rmt.as_ref().expect("checked");
        let path = self.sibling(".spectrum.csv");
        let mut text = self.header(&[format!("rmt n {} trials {} seed {}", rmt.n, rmt.trials, rmt.seed)]);
        text.push_str(&s.to_csv());
        std::fs::write(&path, text).map_err(io_err(&path))?;
        Ok(path)
    }

    fn write_plot(&self) -> Result<PathBuf, CliError> {
        let path = self.sibling(".gp");
        let data = self.output.file_name().unwrap_or_default().to_string_lossy();
        let mut s = String::from("set datafile separator ','\nset datafile commentschars '#'\n");
        if self.brown {
            let _ = writeln!(s, "set view map\nset size ratio -1\nset palette rgbformulae 33,13,10");
            let _ = writeln!(s, "splot '{data}' every ::1 using 1:2:3 with points pointtype 5 pointsize 0.4 palette notitle");
        } else {
            let _ = writeln!(s, "set xlabel 't'\nset ylabel 'density'");
            let _ = writeln!(s, "plot '{data}' every ::1 using 1:2 with lines notitle");
        }
        std::fs::write(&path, s).map_err(io_err(&path))?;
        Ok(path)
    }
}

fn atom_text(c: &DensityCurve) -> String {
    match c.atom_report() {
        None => "none".into(),
        Some([]) => "mass off, no candidate located".into(),
        Some(a) => a
            .iter()
            .map(|a| format!("t={:.6} w~{:.4}", a.location, a.weight))
            .collect::<Vec<_>>()
            .join(" "),
    }
}

fn write_curve(out: &mut String, c: &DensityCurve) {
    out.push_str("t,density\n");
    for (t, v) in c.grid.iter().zip(&c.values) {
        let _ = writeln!(out, "{t:.12e},{v:.12e}");
    }
}

fn write_field(out: &mut String, f: &BrownField) {
    out.push_str("re,im,density\n");
    for (k, v) in f.values.iter().enumerate() {
        let z = f.grid.point(k);
        let _ = writeln!(out, "{:.12e},{:.12e},{v:.12e}", z.re, z.im);
    }
}

/// `freeconv verify-pencil`: checks a pencil file against an expression.
pub fn verify_pencil_file(pencil_path: &Path, expr: &str) -> Result<(String, bool), CliError> {
    let text = std::fs::read_to_string(pencil_path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", pencil_path.display())))?;
    let pencil = LinearPencil::from_text(&text).map_err(config_err)?;
    let p = parse(expr, &pencil.vars()).map_err(|e| CliError::Config(format!("expression: {e}")))?;
    let report = freeconv::linpen::verify_pencil(&pencil, &p, &Default::default());
    let line = format!(
        "{} trials {} max residual {:.3e}\n",
        if report.passed { "PASS" } else { "FAIL" },
        report.trials,
        report.max_residual
    );
    Ok((line, report.passed))
}

/// Applies `FREECONV_THREADS` to the global thread pool.
pub fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("FREECONV_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Config(format!("FREECONV_THREADS must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("FREECONV_THREADS: {e}")))
}
