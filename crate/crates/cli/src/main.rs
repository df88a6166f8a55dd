use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use paramodular::coeffstore::load_coeff_file;
use paramodular::lseries::{builtin_curve, Curve};
use paramodular::verify::{self, golden_blocks, golden_form, Harness, RowStatus, TableBlock, TableFormat};
use paramodular::{averages, quadforms, AverageStatus, CoeffTable, CoefficientSource, Error, QuadForm};

#[derive(Parser)]
#[command(name = "paramodular", version, about = "Twisted averages of paramodular Fourier coefficients and twisted central values")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Enumerate Γ₀(N)-classes of positive definite forms of discriminant D.
    Classes {
        #[arg(long)]
        level: i64,
        #[arg(long, allow_hyphen_values = true)]
        disc: i64,
        #[arg(long)]
        rho: Option<i64>,
    },
    /// Evaluate the genus character χ_ℓ on the form [A, b, c] (N | A).
    GenusChar {
        #[arg(long)]
        level: i64,
        #[arg(long, allow_hyphen_values = true)]
        ell: i64,
        #[arg(long, allow_hyphen_values = true)]
        form: String,
    },
    /// Twisted average B_ℓ(D) from a coefficient file.
    Average {
        #[arg(long)]
        coeffs: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        ell: i64,
        #[arg(long, allow_hyphen_values = true)]
        disc: i64,
    },
    /// Twisted central value L(C, 1/2, χ_D).
    Lvalue {
        /// Built-in label or a file holding a CURVE line.
        #[arg(long)]
        curve: String,
        #[arg(long, allow_hyphen_values = true)]
        twist: i64,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Emit one two-row table block.
    Table {
        #[arg(long)]
        curve: String,
        #[arg(long)]
        coeffs: Option<PathBuf>,
        #[arg(long, allow_hyphen_values = true)]
        ell: i64,
        #[arg(long, allow_hyphen_values = true, value_delimiter = ',')]
        discs: Vec<i64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "csv")]
        format: String,
        /// Overrides the stored k_F.
        #[arg(long)]
        kf: Option<f64>,
    },
    /// Fit k_F over the printed grid cells with ℓD ≥ DMIN.
    FitKf {
        #[arg(long)]
        curve: String,
        #[arg(long)]
        coeffs: Option<PathBuf>,
        #[arg(long, allow_hyphen_values = true)]
        dmin: i64,
    },
    /// Check divisibility of the averages by the torsion order.
    TorsionCheck {
        #[arg(long)]
        curve: String,
        #[arg(long)]
        coeffs: Option<PathBuf>,
        #[arg(long)]
        torsion: Option<u32>,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
}

enum Failure {
    Usage(String),
    Verification(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

type Outcome = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Verification(m)) => {
            eprintln!("verification failed: {m}");
            ExitCode::from(2)
        }
    }
}

fn resolve_curve(spec: &str) -> Result<Curve, Failure> {
    match builtin_curve(spec) {
        Ok(c) => Ok(c),
        Err(_) if Path::new(spec).exists() => {
            let text = fs::read_to_string(spec).map_err(|e| Failure::Usage(format!("{spec}: {e}")))?;
            let line = text
                .lines()
                .map(str::trim)
                .find(|l| !l.is_empty() && !l.starts_with('#'))
                .ok_or_else(|| Failure::Usage(format!("{spec}: no CURVE line")))?;
            Ok(Curve::parse(line)?)
        }
        Err(e) => Err(e.into()),
    }
}

fn parse_form(level: i64, s: &str) -> Result<QuadForm, Failure> {
    let v: Vec<i64> = s
        .split(',')
        .map(|x| x.trim().parse::<i64>())
        .collect::<Result<_, _>>()
        .map_err(|_| Failure::Usage(format!("bad form {s}; expected a,b,c")))?;
    let [a, b, c] = v[..] else {
        return Err(Failure::Usage(format!("bad form {s}; expected a,b,c")));
    };
    let t = QuadForm::from_full(level, a, b, c)?;
    if !t.is_positive_definite() {
        return Err(Failure::Usage(format!("{t} is not positive definite")));
    }
    Ok(t)
}

fn load_table(path: &Option<PathBuf>) -> Result<Option<CoeffTable>, Failure> {
    Ok(match path {
        Some(p) => Some(load_coeff_file(p)?),
        None => None,
    })
}

fn run(cmd: Command) -> Outcome {
    match cmd {
        Command::Classes { level, disc, rho } => {
            let cl = quadforms::enumerate_classes(level, disc, rho)?;
            println!("# level={level} disc={disc} classes={}", cl.len());
            for (t, e) in cl.reps.iter().zip(&cl.stabilizer_orders) {
                println!("{t} rho={} eps={e}", t.residue());
            }
        }
        Command::GenusChar { level, ell, form } => {
            let t = parse_form(level, &form)?;
            println!("{}", quadforms::genus_character(&t, ell)?);
        }
        Command::Average { coeffs, ell, disc } => {
            let table = load_coeff_file(&coeffs)?;
            let r = averages::twisted_average(&table, ell, disc)?;
            match (r.status, &r.value) {
                (AverageStatus::MissingData, _) | (_, None) => println!("--"),
                (AverageStatus::EmptySum, _) => println!("0 (empty)"),
                (_, Some(v)) => println!("{v}"),
            }
            if r.imprimitive_classes > 0 {
                eprintln!("note: {} classes with gcd(a, b, c, ℓ) > 1 counted as 0", r.imprimitive_classes);
            }
        }
        Command::Lvalue { curve, twist, tol } => {
            let c = resolve_curve(&curve)?;
            let tol = tol.unwrap_or_else(|| verify::default_tolerance(twist));
            let v = verify::twisted_central_value(&c, twist, tol)?;
            println!(
                "L(1/2, chi_{twist}) = {:.12} +/- {:.1e}  (|D| L = {:.10}, root number {}, conductor {}, {} terms)",
                v.value,
                v.error,
                v.normalized(),
                v.root_number,
                v.conductor,
                v.terms
            );
        }
        Command::Table { curve, coeffs, ell, discs, out, format, kf } => {
            let format: TableFormat = format.parse()?;
            let c = resolve_curve(&curve)?;
            let table = load_table(&coeffs)?;
            let (level, k_f) = form_constants(&c, table.as_ref(), kf)?;
            let mut h = Harness::new(c);
            let block = verify::emit_table(&mut h, level, ell, &discs, k_f, table.as_ref().map(|t| t as &dyn CoefficientSource))?;
            fs::write(&out, block.render(format)).map_err(|e| Failure::Usage(format!("{}: {e}", out.display())))?;
            print!("{}", block.to_csv());
        }
        Command::FitKf { curve, coeffs, dmin } => {
            let c = resolve_curve(&curve)?;
            let g = golden_form(&c.label)?;
            let table = load_table(&coeffs)?;
            let mut h = Harness::new(c);
            let mut rows = Vec::new();
            for b in golden_blocks(g.label) {
                for &d in &b.discs {
                    if b.ell * d < dmin {
                        continue;
                    }
                    let avg = match &table {
                        Some(t) => averages::twisted_average(t, b.ell, d)?,
                        None => verify::golden_average_result(g.label, b.ell, d).expect("printed cell"),
                    };
                    let (le, ld) = if avg.is_missing() { (None, None) } else { (Some(h.value(b.ell)?), Some(h.value(d)?)) };
                    rows.push(verify::verification_row(g.level, 2, b.ell, d, avg, le, ld, None)?);
                }
            }
            print!("{}", verify::describe_rows(&rows));
            let ok = rows.iter().filter(|r| r.status == RowStatus::Ok).count();
            let fit = verify::fit_kf(&rows).map_err(|e| Failure::Verification(format!("{e} ({ok} ok cells)")))?;
            println!("k_F = {:.6} spread = {:.2e} cells = {}", fit.k_f, fit.max_relative_spread, fit.cells);
        }
        Command::TorsionCheck { curve, coeffs, torsion, tol } => {
            let c = resolve_curve(&curve)?;
            let g = golden_form(&c.label).ok();
            let t = torsion
                .or(c.torsion)
                .or(g.map(|g| g.torsion))
                .ok_or_else(|| Failure::Usage("torsion order unknown; pass --torsion".into()))?;
            let table = load_table(&coeffs)?;
            let blocks: Vec<TableBlock> = match (&table, g) {
                (Some(tab), Some(g)) => {
                    let mut h = Harness::new(c.clone());
                    let mut out = Vec::new();
                    for b in golden_blocks(g.label) {
                        out.push(verify::emit_table(&mut h, g.level, b.ell, &b.discs, g.k_f, Some(tab as &dyn CoefficientSource))?);
                    }
                    out
                }
                (None, Some(g)) => golden_blocks(g.label).iter().map(|b| b.to_table(g.k_f)).collect(),
                (_, None) => return Err(Failure::Usage(format!("no grid known for {}", c.label))),
            };
            let rep = verify::torsion_check(t, &blocks, tol);
            for v in &rep.violations {
                println!("{v}");
            }
            println!("checked {} entries, {} violations", rep.checked, rep.violations.len());
            if !rep.passed() {
                return Err(Failure::Verification(format!("{} torsion violations", rep.violations.len())));
            }
        }
    }
    Ok(())
}

fn form_constants(c: &Curve, table: Option<&CoeffTable>, kf: Option<f64>) -> Result<(u64, f64), Failure> {
    let g = golden_form(&c.label).ok();
    let level = match (table, g) {
        (Some(t), _) => t.meta().level as u64,
        (None, Some(g)) => g.level,
        (None, None) => c.conductor,
    };
    let k_f = kf
        .or(g.map(|g| g.k_f))
        .ok_or_else(|| Failure::Usage(format!("k_F unknown for {}; pass --kf", c.label)))?;
    Ok((level, k_f))
}
