use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use nchardy::szego_opt::szego_infimum_with;
use nchardy::{
    arveson_factor, closed_form_p2, fk_det, fk_det_resolved, inner_outer, is_outer, outer_factor_scalar, phi, pnorm,
    pnorm_resolved, riesz_factor, riesz_factor_attained, run_suite, szego_factor, szego_factor_projection,
    wilson_factor, Element, SuiteConfig, SuiteReport,
};
use serde::Serialize;

/// Hardy-space factorizations on block-triangular matrix and torus models.
#[derive(Parser)]
#[command(name = "nchardy", version)]
struct Cli {
    /// Print machine-readable JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fuglede-Kadison determinant.
    Det {
        input: PathBuf,
        /// Integrate on a fine grid instead of the model's quadrature rule.
        #[arg(long)]
        resolved: bool,
    },
    /// Conditional expectation onto the diagonal.
    Phi {
        input: PathBuf,
        /// Write the result here instead of stdout.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Normalized Schatten p-(quasi)norm.
    Norm {
        input: PathBuf,
        /// Exponent in (0, inf]; accepts `inf`.
        #[arg(short)]
        p: f64,
        #[arg(long)]
        resolved: bool,
    },
    /// Factorize an element; factors are written as JSON into `--out-dir`.
    Factor {
        kind: FactorKind,
        input: PathBuf,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[arg(long, default_value_t = 2.0)]
        q: f64,
        #[arg(long, default_value_t = 2.0)]
        r: f64,
        /// Slack of the Riesz factorization.
        #[arg(long, default_value_t = 1e-2)]
        eps: f64,
        /// Riesz: the exact factorization through inner-outer (needs det(x) > 0).
        #[arg(long)]
        attained: bool,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        /// Largest accepted residual; exit status 1 above it.
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// Left, right and bilateral outerness of an element of A.
    OuterTest { input: PathBuf },
    /// Minimize tau(w |a|^p) over a in A with det(Phi(a)) >= 1 and compare with det(w).
    SzegoFormula {
        input: PathBuf,
        #[arg(short, default_value_t = 2.0)]
        p: f64,
        #[arg(long, default_value_t = 2000)]
        budget: usize,
        #[arg(long, default_value_t = 8)]
        starts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Largest accepted relative gap (default 1e-4 for p = 2, 1e-2 otherwise).
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Run the seeded verification suites and emit a report.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FactorKind {
    Qr,
    Szego,
    SzegoProj,
    Riesz,
    InnerOuter,
    Wilson,
    OuterScalar,
}

#[derive(clap::Args)]
struct VerifyArgs {
    /// Base configuration file (SuiteConfig JSON); flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    suite: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Flag of the matrix model, e.g. `1,1,2`.
    #[arg(long, value_delimiter = ',')]
    blocks: Option<Vec<usize>>,
    #[arg(long)]
    torus_n: Option<usize>,
    #[arg(long)]
    degree: Option<usize>,
    #[arg(long)]
    quad_nodes: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    szego_n: Option<Vec<usize>>,
    /// Fixed weight (element JSON) for the Szegő-formula suite.
    #[arg(long)]
    w: Option<PathBuf>,
    /// Tolerance override `CHECK=VALUE`; repeatable.
    #[arg(long = "tol", value_parser = parse_override)]
    tolerances: Vec<(String, f64)>,
    /// Record the wall-clock runtime in the report.
    #[arg(long)]
    timing: bool,
    /// Also write the JSON report to this file.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

fn parse_override(s: &str) -> Result<(String, f64), String> {
    let (name, value) = s.split_once('=').ok_or_else(|| format!("expected CHECK=VALUE, got {s:?}"))?;
    let value = value.parse().map_err(|e| format!("tolerance {value:?}: {e}"))?;
    Ok((name.to_string(), value))
}

enum Failure {
    /// Bad input files or arguments.
    Usage(String),
    /// A numerical routine rejected its input.
    Numerical(String),
    /// A check exceeded its tolerance (already reported).
    Check,
}

impl From<nchardy::Error> for Failure {
    fn from(e: nchardy::Error) -> Self {
        Failure::Numerical(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("malformed JSON in {}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Outcome {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    fs::write(path, text + "\n").map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))
}

fn print_json<T: Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable"));
}

fn verdict(ok: bool) -> Outcome {
    if ok {
        Ok(())
    } else {
        Err(Failure::Check)
    }
}

fn det(input: &Path, resolved: bool, json: bool) -> Outcome {
    let x: Element = read_json(input)?;
    let d = if resolved { fk_det_resolved(&x) } else { fk_det(&x) };
    if json {
        print_json(&d);
    } else {
        println!("{:?}", d.value);
    }
    Ok(())
}

fn norm(input: &Path, p: f64, resolved: bool, json: bool) -> Outcome {
    let x: Element = read_json(input)?;
    let v = if resolved { pnorm_resolved(&x, p)? } else { pnorm(&x, p)? };
    if json {
        print_json(&serde_json::json!({ "p": p, "norm": v }));
    } else {
        println!("{v:?}");
    }
    Ok(())
}

struct FactorArgs {
    p: f64,
    q: f64,
    r: f64,
    eps: f64,
    attained: bool,
    tol: f64,
}

fn factor(kind: FactorKind, input: &Path, a: &FactorArgs, out_dir: &Path, json: bool) -> Outcome {
    let x: Element = read_json(input)?;
    fs::create_dir_all(out_dir).map_err(|e| Failure::Usage(format!("cannot create {}: {e}", out_dir.display())))?;
    let save = |name: &str, e: &Element| write_json(&out_dir.join(name), e);
    // Every branch saves its factors and returns (report, worst residual, extra check).
    let (report, worst, extra_ok) = match kind {
        FactorKind::Qr | FactorKind::Szego => {
            let f = match kind {
                FactorKind::Qr => arveson_factor(&x)?,
                _ => szego_factor(&x, a.p, a.q)?,
            };
            save("u.json", &f.unitary)?;
            save("h.json", &f.analytic)?;
            if let Some(inv) = &f.analytic_inverse {
                save("h_inv.json", inv)?;
            }
            (serde_json::json!({ "residuals": f.residuals }), f.worst(), true)
        }
        FactorKind::SzegoProj => {
            let f = szego_factor_projection(&x)?;
            save("u.json", &f.result.unitary)?;
            save("h.json", &f.result.analytic)?;
            save("y.json", &f.remainder)?;
            let c = &f.certificate;
            let worst = f.result.worst().max(c.modulus_in_d).max(c.orthogonality).max(c.phi_product);
            let full = c.rank_h_a == c.dim_a;
            (serde_json::json!({ "residuals": f.result.residuals, "certificate": c }), worst, full)
        }
        FactorKind::Riesz => {
            let f = if a.attained {
                riesz_factor_attained(&x, a.p, a.q, a.r)?
            } else {
                riesz_factor(&x, a.p, a.q, a.r, a.eps)?
            };
            save("y.json", &f.y)?;
            save("z.json", &f.z)?;
            let slack = if a.attained { 0.0 } else { a.eps };
            let bound = f.product <= (f.norm_x + slack) * (1.0 + a.tol);
            if !json {
                println!(
                    "|y|_q |z|_r = {:.12e} <= |x|_p + eps = {:.12e}: {}",
                    f.product,
                    f.norm_x + slack,
                    if bound { "ok" } else { "VIOLATED" }
                );
            }
            let worst = f.reconstruction.max(f.y_membership).max(f.z_membership);
            let report = serde_json::json!({
                "norm_x": f.norm_x, "norm_y": f.norm_y, "norm_z": f.norm_z, "product": f.product,
                "regularization": f.regularization, "reconstruction": f.reconstruction,
                "y_membership": f.y_membership, "z_membership": f.z_membership, "bound_holds": bound,
            });
            (report, worst, bound)
        }
        FactorKind::InnerOuter => {
            let f = inner_outer(&x)?;
            save("inner.json", &f.inner)?;
            save("outer.json", &f.outer)?;
            let r = f.residuals;
            let worst = r.reconstruction.max(r.unitarity).max(r.membership).max(f.inner_membership);
            (serde_json::json!({ "residuals": r, "inner_membership": f.inner_membership }), worst, true)
        }
        FactorKind::Wilson | FactorKind::OuterScalar => {
            let f = match kind {
                FactorKind::Wilson => wilson_factor(&x)?,
                _ => outer_factor_scalar(&x)?,
            };
            save("h.json", &f.factor)?;
            let report = serde_json::json!({
                "residual": f.residual, "negative_defect": f.negative_defect, "det_h": f.det_h,
                "det_phi_h": f.det_phi_h, "outer_gap": f.outer_gap, "iterations": f.iterations, "grid": f.grid,
            });
            (report, f.residual, true)
        }
    };
    let ok = worst <= a.tol && extra_ok;
    if json {
        print_json(&serde_json::json!({ "report": report, "worst_residual": worst, "pass": ok }));
    } else {
        println!("worst residual {worst:.3e} (tol {:.0e}): {}", a.tol, if ok { "PASS" } else { "FAIL" });
        println!("factors written to {}", out_dir.display());
    }
    verdict(ok)
}

fn outer_test(input: &Path, json: bool) -> Outcome {
    let h: Element = read_json(input)?;
    let rep = is_outer(&h);
    if json {
        print_json(&rep);
    } else {
        println!("left outer:      {}", rep.left);
        println!("right outer:     {}", rep.right);
        println!("bilateral outer: {}", rep.bilateral);
        println!("det(h) = {:.12e}, det(Phi(h)) = {:.12e}", rep.det_h, rep.det_phi_h);
    }
    Ok(())
}

fn szego_formula(input: &Path, p: f64, budget: usize, starts: usize, seed: u64, tol: Option<f64>, json: bool) -> Outcome {
    let w: Element = read_json(input)?;
    let rep = szego_infimum_with(&w, p, budget, seed, starts)?;
    let closed = closed_form_p2(&w).ok().map(|c| c.value);
    let tol = tol.unwrap_or(if p == 2.0 { 1e-4 } else { 1e-2 });
    let ok = rep.relative_gap.abs() <= tol;
    if json {
        print_json(&serde_json::json!({ "report": rep, "closed_form": closed, "tolerance": tol, "pass": ok }));
    } else {
        println!("det(w)          = {:.12e}", rep.det_w);
        println!("infimum (p={p})  = {:.12e}", rep.inf_estimate);
        if let Some(c) = closed {
            println!("closed form p=2 = {c:.12e}");
        }
        println!("relative gap    = {:.3e} (tol {tol:.0e}): {}", rep.relative_gap, if ok { "PASS" } else { "FAIL" });
    }
    verdict(ok)
}

fn verify(args: VerifyArgs, json: bool) -> Outcome {
    let mut cfg: SuiteConfig = match &args.config {
        Some(path) => read_json(path)?,
        None => SuiteConfig::default(),
    };
    if let Some(v) = args.suite {
        cfg.suite = v;
    }
    if let Some(v) = args.trials {
        cfg.trials = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.blocks {
        cfg.blocks = v;
    }
    if let Some(v) = args.torus_n {
        cfg.torus_n = v;
    }
    if let Some(v) = args.degree {
        cfg.degree = v;
    }
    if let Some(v) = args.quad_nodes {
        cfg.quad_nodes = v;
    }
    if let Some(v) = args.szego_n {
        cfg.szego_n = v;
    }
    if let Some(path) = &args.w {
        cfg.szego_w = Some(read_json(path)?);
    }
    cfg.tolerances.extend(args.tolerances);
    cfg.timing |= args.timing;
    // An invalid configuration is a usage error, not a numerical one.
    cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let report = run_suite(&cfg)?;
    if let Some(path) = &args.output {
        write_json(path, &report)?;
    }
    if json {
        print_json(&report);
    } else {
        print_table(&report);
    }
    verdict(report.pass)
}

fn print_table(report: &SuiteReport) {
    let width = report.checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
    println!("suite {} seed {} trials {}", report.suite, report.seed, report.trials);
    for c in &report.checks {
        let status = if c.pass { "PASS" } else { "FAIL" };
        println!("{status} {:width$} {:>5} trials  max violation {:>10.3e}  tol {:.0e}", c.name, c.trials, c.max_violation, c.tolerance);
        if let Some(e) = &c.first_error {
            println!("     {e}");
        }
        let values: BTreeMap<_, _> = c.values.iter().collect();
        for (k, v) in values {
            println!("     {k} = {v:.12e}");
        }
    }
    if let Some(t) = report.runtime_seconds {
        println!("runtime {t:.2}s");
    }
    println!("{}", if report.pass { "all checks passed" } else { "some checks FAILED" });
}

fn run(cli: Cli) -> Outcome {
    let json = cli.json;
    match cli.command {
        Command::Det { input, resolved } => det(&input, resolved, json),
        Command::Phi { input, output } => {
            let x: Element = read_json(&input)?;
            let y = phi(&x);
            match output {
                Some(path) => write_json(&path, &y),
                None => {
                    print_json(&y);
                    Ok(())
                }
            }
        }
        Command::Norm { input, p, resolved } => norm(&input, p, resolved, json),
        Command::Factor { kind, input, p, q, r, eps, attained, out_dir, tol } => {
            let args = FactorArgs { p, q, r, eps, attained, tol };
            factor(kind, &input, &args, &out_dir, json)
        }
        Command::OuterTest { input } => outer_test(&input, json),
        Command::SzegoFormula { input, p, budget, starts, seed, tol } => {
            szego_formula(&input, p, budget, starts, seed, tol, json)
        }
        Command::Verify(args) => verify(args, json),
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check) => ExitCode::from(1),
        Err(Failure::Numerical(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
