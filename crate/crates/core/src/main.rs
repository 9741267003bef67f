use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use gperm::band::{band_error_sweep_profiles, band_profile_empirical, logistic_limit_pdf, u_marginal_ks, BandFamily};
use gperm::defaults::{self as d, Record};
use gperm::exact::{check_inverse_symmetry, enumerate_distribution, rank_counts, tv_distance};
use gperm::experiments::{self, bench_rows, lln_rows, EXPERIMENTS};
use gperm::figure::{band_width_profile, bin_matrix, default_windows};
use gperm::model::{make_kcm, make_mallows, make_uniform, GModel};
use gperm::permuton::{build_evaluator, DEFAULT_DELTA_TAIL, DEFAULT_PANELS};
use gperm::sampler::{sample_kcm_oracle, sample_mallows_oracle, StepSampler};
use gperm::stats::{pattern_density_exact, pattern_density_mc, permuton_pattern_density_mc, Pattern};
use gperm::{Error, Permutation, RngStream};

#[derive(Debug, Parser, Serialize)]
#[command(name = "gperm", version, about = "Card-picking random permutations and their permuton limits")]
struct Cli {
    /// Base seed; replica r draws from stream r.
    #[arg(long, global = true, default_value_t = d::SEED)]
    seed: u64,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output file (or file prefix for `matrix`); stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Print the defaults table and exit.
    #[arg(long, global = true)]
    show_defaults: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Json,
    Csv,
    Text,
    Pgm,
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum ModelName {
    Uniform,
    Mallows,
    Kcm,
}

#[derive(Debug, Clone, Args, Serialize)]
struct ModelArgs {
    #[arg(long, value_enum)]
    model: ModelName,
    /// Mallows parameter.
    #[arg(long, allow_negative_numbers = true)]
    beta: Option<f64>,
    /// Number of cards in the k-card minimum.
    #[arg(long)]
    k: Option<u32>,
}

impl ModelArgs {
    fn build(&self) -> gperm::Result<GModel> {
        match self.model {
            ModelName::Uniform => Ok(make_uniform()),
            ModelName::Mallows => make_mallows(
                self.beta
                    .ok_or_else(|| Error::InvalidParameter("--model mallows needs --beta".into()))?,
            ),
            ModelName::Kcm => make_kcm(
                self.k
                    .ok_or_else(|| Error::InvalidParameter("--model kcm needs --k".into()))?,
            ),
        }
    }
}

#[derive(Debug, Subcommand, Serialize)]
enum Command {
    /// Sample permutations: text lines, or `--format binary`.
    Sample {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        replicas: usize,
        /// Use the family's own sampler (truncated geometric / min of k).
        #[arg(long)]
        oracle: bool,
    },
    /// Permutation-matrix heatmap (PGM + CSV) and band-width profile.
    Matrix {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = d::MATRIX_BINS)]
        bins: usize,
        /// Use the identity permutation instead of a sample.
        #[arg(long)]
        force_identity: bool,
    },
    /// Tabulate V, F and f of the limiting permuton.
    Permuton {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = d::ORACLE_GRID)]
        grid: usize,
        #[arg(long, default_value_t = DEFAULT_PANELS)]
        panels: usize,
        #[arg(long, default_value_t = DEFAULT_DELTA_TAIL)]
        delta_tail: f64,
    },
    /// Pattern density of a sampled permutation, or of the permuton.
    Pattern {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        /// Pattern as comma-separated values, e.g. 2,1 or 1,3,2.
        #[arg(long, default_value = "2,1")]
        tau: String,
        #[arg(long, conflicts_with = "mc")]
        exact: bool,
        /// Monte Carlo estimate from this many random k-subsets.
        #[arg(long)]
        mc: Option<usize>,
        /// Estimate the permuton density t(tau, mu_g) instead (needs --mc).
        #[arg(long, requires = "mc")]
        permuton: bool,
    },
    /// Replicated cdf distance between sampled permutations and the permuton.
    Lln {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_delimiter = ',', default_values_t = d::LLN_NS)]
        ns: Vec<usize>,
        #[arg(long, default_value_t = d::LLN_GRID)]
        grid: usize,
        #[arg(long, default_value_t = d::LLN_REPLICAS)]
        replicas: usize,
    },
    /// Logistic band: analytic sweep, or `--empirical` histogram.
    Band {
        #[arg(long, default_value = "mallows")]
        family: String,
        #[arg(long, value_delimiter = ',', default_values_t = d::BAND_ALPHAS)]
        alphas: Vec<f64>,
        #[arg(long)]
        empirical: bool,
        #[arg(long, default_value_t = d::BAND_EMPIRICAL_N)]
        n: usize,
        #[arg(long, default_value_t = d::BAND_EMPIRICAL_ALPHA)]
        alpha: f64,
        #[arg(long, default_value_t = d::BAND_BINS)]
        bins: usize,
    },
    /// Exact small-n checks: normalization, inverse symmetry, sampler TV.
    Verify {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = d::VERIFY_N)]
        n: usize,
        #[arg(long, default_value_t = d::VERIFY_SAMPLES)]
        samples: usize,
    },
    /// Wall time of the sampler across sizes.
    Bench {
        #[arg(long, value_delimiter = ',', default_values_t = d::BENCH_NS)]
        ns: Vec<usize>,
    },
    /// Run the verification experiments (all, or `--only 1,4`).
    Suite {
        #[arg(long, value_delimiter = ',')]
        only: Vec<usize>,
    },
}

/// Where output goes; file outputs get their path attached to I/O errors.
fn open_out(path: Option<&Path>) -> gperm::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| Error::io(p, e))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn io_err(path: Option<&Path>) -> impl Fn(io::Error) -> Error + '_ {
    move |e| Error::io(path.map(Path::to_path_buf).unwrap_or_else(|| "<stdout>".into()), e)
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

enum Status {
    Pass,
    Fail,
}

fn status(records: &[Record]) -> Status {
    if records.iter().all(|r| r.pass) {
        Status::Pass
    } else {
        Status::Fail
    }
}

fn write_json(path: Option<&Path>, value: &serde_json::Value) -> gperm::Result<()> {
    let mut w = open_out(path)?;
    let text = serde_json::to_string_pretty(value).expect("serializable");
    writeln!(w, "{text}").and_then(|_| w.flush()).map_err(io_err(path))
}

fn run(cli: &Cli) -> gperm::Result<Status> {
    let config = serde_json::to_value(cli).expect("serializable config");
    let config_line = serde_json::to_string(&config).expect("serializable config");
    let out = cli.out.as_deref();
    let Some(command) = &cli.command else {
        return Err(Error::InvalidParameter("no subcommand given (see --help)".into()));
    };
    match command {
        Command::Sample {
            model,
            n,
            replicas,
            oracle,
        } => {
            let m = model.build()?;
            if *n == 0 || *replicas == 0 {
                return Err(Error::InvalidParameter("--n and --replicas must be positive".into()));
            }
            let sampler = StepSampler::new(&m, *n);
            let perms: Vec<Permutation> = (0..*replicas)
                .into_par_iter()
                .map(|r| {
                    let mut rng = RngStream::new(cli.seed, r as u64);
                    if !*oracle {
                        return Ok(sampler.sample(&mut rng));
                    }
                    match model.model {
                        ModelName::Mallows => sample_mallows_oracle((-m.gamma().unwrap_or(0.0) / *n as f64).exp(), *n, &mut rng),
                        ModelName::Kcm => sample_kcm_oracle(model.k.unwrap_or(1), *n, &mut rng),
                        ModelName::Uniform => Err(Error::InvalidParameter("--oracle needs mallows or kcm".into())),
                    }
                })
                .collect::<gperm::Result<_>>()?;
            let mut w = open_out(out)?;
            let binary = cli.format == Some(Format::Binary);
            let res = (|| -> io::Result<()> {
                if binary {
                    w.write_all(b"PRM1")?;
                    w.write_all(&(*n as u32).to_le_bytes())?;
                    w.write_all(&(*replicas as u32).to_le_bytes())?;
                    for p in &perms {
                        for &v in p.values() {
                            w.write_all(&v.to_le_bytes())?;
                        }
                    }
                } else {
                    for p in &perms {
                        writeln!(w, "{p}")?;
                    }
                }
                w.flush()
            })();
            res.map_err(io_err(out))?;
            if let Some(p) = out {
                write_json(Some(&with_suffix(p, ".json")), &json!({ "config": config }))?;
            }
            Ok(Status::Pass)
        }
        Command::Matrix {
            model,
            n,
            bins,
            force_identity,
        } => {
            let m = model.build()?;
            if *n == 0 {
                return Err(Error::InvalidParameter("--n must be positive".into()));
            }
            let sigma = if *force_identity {
                Permutation::identity(*n)
            } else {
                StepSampler::new(&m, *n).sample(&mut RngStream::new(cli.seed, 0))
            };
            let matrix = bin_matrix(&sigma, *bins)?;
            let comments = vec![format!("config {config_line}")];
            let prefix = out.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("matrix"));
            for (suffix, pgm) in [(".pgm", true), (".csv", false)] {
                let path = with_suffix(&prefix, suffix);
                let mut w = open_out(Some(&path))?;
                let res = if pgm {
                    matrix.write_pgm(&mut w, &comments)
                } else {
                    matrix.write_csv(&mut w, &comments)
                };
                res.and_then(|_| w.flush()).map_err(|e| Error::io(&path, e))?;
            }
            let (a, b, step) = d::FIGURE_WINDOWS;
            let profile = band_width_profile(&sigma, &default_windows(a, b, step))?;
            write_json(
                Some(&with_suffix(&prefix, ".profile.json")),
                &json!({ "config": config, "band_width_profile": profile }),
            )?;
            Ok(Status::Pass)
        }
        Command::Permuton {
            model,
            grid,
            panels,
            delta_tail,
        } => {
            let m = model.build()?;
            let ev = build_evaluator(&m, *panels, *delta_tail)?;
            let table = ev.table(*grid);
            if cli.format == Some(Format::Json) {
                let rows: Vec<_> = table
                    .iter()
                    .map(|r| json!({"x": r[0], "y": r[1], "V": r[2], "F": r[3], "f": r[4]}))
                    .collect();
                write_json(
                    out,
                    &json!({ "config": config, "mesh_nodes": ev.mesh().len(), "closed_form_u_rel_err": ev.closed_form_rel_err(), "table": rows }),
                )?;
            } else {
                let mut w = open_out(out)?;
                let res = (|| -> io::Result<()> {
                    writeln!(w, "# config {config_line}")?;
                    writeln!(w, "x,y,V,F,f")?;
                    for r in &table {
                        writeln!(w, "{},{},{},{},{}", r[0], r[1], r[2], r[3], r[4])?;
                    }
                    w.flush()
                })();
                res.map_err(io_err(out))?;
            }
            Ok(Status::Pass)
        }
        Command::Pattern {
            model,
            n,
            tau,
            exact,
            mc,
            permuton,
        } => {
            let m = model.build()?;
            let tau: Pattern = tau.parse()?;
            let mut rng = RngStream::new(cli.seed, 0);
            let result = if *permuton {
                let ev = build_evaluator(&m, DEFAULT_PANELS, DEFAULT_DELTA_TAIL)?;
                let e = permuton_pattern_density_mc(&ev, &tau, mc.expect("required by clap"), &mut RngStream::new(cli.seed, 1))?;
                json!({ "target": "permuton", "estimate": e.estimate, "stderr": e.stderr, "samples": e.samples })
            } else {
                if *n == 0 {
                    return Err(Error::InvalidParameter("--n must be positive".into()));
                }
                let sigma = StepSampler::new(&m, *n).sample(&mut rng);
                match mc {
                    Some(samples) if !*exact => {
                        let e = pattern_density_mc(&sigma, &tau, *samples, &mut RngStream::new(cli.seed, 1))?;
                        json!({ "target": "permutation", "method": "mc", "estimate": e.estimate, "stderr": e.stderr, "samples": e.samples })
                    }
                    _ => {
                        let t = pattern_density_exact(&sigma, &tau)?;
                        json!({ "target": "permutation", "method": "exact", "density": t })
                    }
                }
            };
            write_json(out, &json!({ "config": config, "result": result }))?;
            Ok(Status::Pass)
        }
        Command::Lln {
            model,
            ns,
            grid,
            replicas,
        } => {
            let m = model.build()?;
            if ns.is_empty() || ns.contains(&0) || *replicas == 0 {
                return Err(Error::InvalidParameter("--ns entries and --replicas must be positive".into()));
            }
            let rows = lln_rows(&m, ns, *replicas, *grid, cli.seed)?;
            let mut medians = Vec::new();
            for &n in ns {
                let mut v: Vec<f64> = rows.iter().filter(|r| r.n == n).map(|r| r.distance).collect();
                v.sort_by(f64::total_cmp);
                let h = v.len() / 2;
                medians.push(if v.len() % 2 == 1 { v[h] } else { 0.5 * (v[h - 1] + v[h]) });
            }
            let decreasing = medians.windows(2).all(|w| w[1] < w[0]);
            let records = vec![Record::holds(m.label(), "medians decrease in n", decreasing).with_seed(cli.seed)];
            if cli.format == Some(Format::Csv) {
                let mut w = open_out(out)?;
                let res = (|| -> io::Result<()> {
                    writeln!(w, "# config {config_line}")?;
                    writeln!(w, "n,replica,distance")?;
                    for r in &rows {
                        writeln!(w, "{},{},{}", r.n, r.replica, r.distance)?;
                    }
                    w.flush()
                })();
                res.map_err(io_err(out))?;
            } else {
                let summary: Vec<_> = ns.iter().zip(&medians).map(|(n, m)| json!({"n": n, "median": m})).collect();
                write_json(out, &json!({ "config": config, "rows": rows, "medians": summary, "records": records }))?;
            }
            Ok(status(&records))
        }
        Command::Band {
            family,
            alphas,
            empirical,
            n,
            alpha,
            bins,
        } => {
            let fam: BandFamily = family.parse()?;
            if *empirical {
                let m = fam.model(*alpha)?;
                let gamma = m.gamma().expect("built-in families carry gamma");
                let sigma = StepSampler::new(&m, *n).sample(&mut RngStream::new(cli.seed, 0));
                let band = band_profile_empirical(&sigma, gamma, |s| fam.limit_psi(s), d::BAND_WINDOW, *bins)?;
                let ks_u = u_marginal_ks(&sigma);
                let tol = match fam {
                    BandFamily::Mallows => d::BAND_KS_MALLOWS,
                    BandFamily::Kcm => d::BAND_KS_KCM,
                };
                let records = vec![
                    Record::below(m.label(), "KS(psi V, logistic)", band.ks, tol).with_n(*n).with_seed(cli.seed),
                    Record::below(m.label(), "KS(U, uniform)", ks_u, d::BAND_KS_U_MARGINAL).with_n(*n).with_seed(cli.seed),
                ];
                if cli.format == Some(Format::Json) {
                    write_json(out, &json!({ "config": config, "band": band, "records": records, "tolerances": "calibrated empirically" }))?;
                } else {
                    let mut w = open_out(out)?;
                    let h = &band.histogram;
                    let total = band.samples as f64;
                    let res = (|| -> io::Result<()> {
                        writeln!(w, "# config {config_line}")?;
                        writeln!(w, "# samples {} ks {} ks_u {} (tolerances calibrated empirically)", band.samples, band.ks, ks_u)?;
                        writeln!(w, "bin_left,bin_right,count,density,logistic_pdf_at_midpoint")?;
                        for (b, &c) in h.counts.iter().enumerate() {
                            let (lo, hi) = h.bin_edges(b);
                            let dens = c as f64 / (total * (hi - lo));
                            writeln!(w, "{lo},{hi},{c},{dens},{}", logistic_limit_pdf(1.0, 0.5 * (lo + hi)))?;
                        }
                        w.flush()
                    })();
                    res.map_err(io_err(out))?;
                }
                Ok(status(&records))
            } else {
                let (s_grid, t_grid) = experiments::band_grids();
                let sweep = band_error_sweep_profiles(fam, alphas, &s_grid, &t_grid)?;
                let decreasing = sweep.windows(2).all(|w| w[1].0.sup_abs_err < w[0].0.sup_abs_err);
                let records = vec![Record::holds(family.clone(), "sup error strictly decreasing in alpha", decreasing)];
                if cli.format == Some(Format::Csv) {
                    let mut w = open_out(out)?;
                    let res = (|| -> io::Result<()> {
                        writeln!(w, "# config {config_line}")?;
                        writeln!(w, "alpha,s,t,h,limit")?;
                        for (_, p) in &sweep {
                            let nt = p.t_grid.len();
                            for (idx, (h, l)) in p.h_values.iter().zip(&p.limit_values).enumerate() {
                                writeln!(w, "{},{},{},{h},{l}", p.alpha, p.s_grid[idx / nt], p.t_grid[idx % nt])?;
                            }
                        }
                        w.flush()
                    })();
                    res.map_err(io_err(out))?;
                } else {
                    let errors: Vec<_> = sweep.iter().map(|(pt, _)| pt).collect();
                    write_json(out, &json!({ "config": config, "errors": errors, "records": records }))?;
                }
                Ok(status(&records))
            }
        }
        Command::Verify { model, n, samples } => {
            let m = model.build()?;
            let dist = enumerate_distribution(&m, *n)?;
            let sum_check = (dist.sum() - 1.0).abs();
            let symmetry_max = check_inverse_symmetry(&m, *n)?;
            let mut records = vec![
                Record::below(m.label(), "|sum P - 1|", sum_check, d::VERIFY_SUM_TOLERANCE).with_n(*n),
                Record::below(m.label(), "max |P(pi) - P(pi^-1)|", symmetry_max, d::VERIFY_SYMMETRY_TOLERANCE).with_n(*n),
            ];
            let tv = if *n <= gperm::exact::MAX_TV_N && *samples > 0 {
                let sampler = StepSampler::new(&m, *n);
                let mut rng = RngStream::new(cli.seed, 0);
                let tv = tv_distance(&dist, &rank_counts(*n, *samples, || sampler.sample(&mut rng)));
                records.push(
                    Record::below(m.label(), "tv(sampler, exact law)", tv, d::VERIFY_TV_TOLERANCE)
                        .with_n(*n)
                        .with_seed(cli.seed),
                );
                Some(tv)
            } else {
                None
            };
            write_json(
                out,
                &json!({ "config": config, "sum_check": sum_check, "symmetry_max": symmetry_max, "tv_distance": tv, "records": records }),
            )?;
            Ok(status(&records))
        }
        Command::Bench { ns } => {
            if ns.is_empty() || ns.contains(&0) {
                return Err(Error::InvalidParameter("--ns entries must be positive".into()));
            }
            let models = [make_mallows(200.0)?, make_kcm(200)?, make_uniform()];
            let rows = bench_rows(&models, ns, cli.seed);
            let largest = *ns.iter().max().expect("nonempty");
            let records: Vec<Record> = rows
                .iter()
                .filter(|r| r.n == largest && largest >= 1_000_000)
                .map(|r| Record::below(r.model.clone(), "sample seconds", r.seconds, d::BENCH_BUDGET_SECONDS).with_n(r.n))
                .collect();
            write_json(out, &json!({ "config": config, "rows": rows, "records": records }))?;
            Ok(status(&records))
        }
        Command::Suite { only } => {
            let ids: Vec<usize> = if only.is_empty() {
                EXPERIMENTS.iter().map(|e| e.0).collect()
            } else {
                only.clone()
            };
            let mut outcomes = Vec::new();
            for id in ids {
                let o = experiments::run(id, cli.seed)?;
                eprintln!(
                    "{:>2} {} {} ({:.2}s)",
                    o.id,
                    if o.pass() { "pass" } else { "FAIL" },
                    o.title,
                    o.elapsed_seconds
                );
                outcomes.push(o);
            }
            let all: Vec<Record> = outcomes.iter().flat_map(|o| o.records.clone()).collect();
            write_json(out, &json!({ "config": config, "experiments": outcomes }))?;
            Ok(status(&all))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.show_defaults {
        let table = d::table();
        let text = if cli.format == Some(Format::Json) {
            serde_json::to_string_pretty(&table).expect("serializable")
        } else {
            table
                .iter()
                .map(|e| format!("{:<30} {:<28} {}", e.key, e.value, e.meaning))
                .collect::<Vec<_>>()
                .join("\n")
        };
        // a closed pipe (e.g. `| head`) is not an error here
        let _ = writeln!(io::stdout(), "{text}");
        return ExitCode::SUCCESS;
    }
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(Status::Pass) => ExitCode::SUCCESS,
        Ok(Status::Fail) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Io { .. } => ExitCode::from(1),
                _ => ExitCode::from(2),
            }
        }
    }
}
