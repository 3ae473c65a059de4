//! Experiment runner: deterministic seeded front-end over the flatdrift
//! library. Every emitted record embeds the constants-registry snapshot and
//! the seed it ran with. Outputs are byte-identical for identical
//! (config, seed), independently of the worker count.

use clap::{Parser, Subcommand};
use flatdrift::closing::{
    contains_hyperbolic, count_group_ball, near_return_scan, plane_discriminant,
    prototype_exact_plane, spherical_function, veech_search, GroupBallSpec,
};
use flatdrift::config::ConstantsRegistry;
use flatdrift::error::Error as FdError;
use flatdrift::flow::{lyapunov_estimate, nondivergence_systoles, FlowState};
use flatdrift::geom::{linear_fit, Mat2};
use flatdrift::intlinalg::{big_matrix, IntegralSubspace};
use flatdrift::margulis::{
    contraction_probe, dimension_bootstrap, horocycle_transversal_scan, random_walk_expectation,
    worst_case_profile, Bone, BootstrapParams, DriftWalk, Skeleton,
};
use flatdrift::prototypes::{
    component_count, enumerate_prototypes, perturbed_prototype_surface, prototype_surface,
    Prototype,
};
use flatdrift::surface::{PeriodVector, SurfaceJson, TranslationSurface};
use std::io::Write;
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "flatdrift", about = "flat-surface dynamics laboratory", version)]
struct Cli {
    /// Registry TOML/JSON path (falls back to env FLATDRIFT_CONFIG, then defaults)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// 64-bit experiment seed
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (0 = library default); results do not depend on it
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    /// Output file (stdout when omitted)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Enumerate prototypes up to a discriminant bound (CSV)
    Prototypes {
        #[arg(long)]
        dmax: i64,
        #[arg(long, default_value = "csv")]
        format: String,
    },
    /// Build the prototypical surface of (a, b, c, e) as surface JSON
    BuildPrototype { a: i64, b: i64, c: i64, e: i64 },
    /// Validate a surface JSON file
    Validate {
        #[arg(long)]
        surface: PathBuf,
    },
    /// Geodesic flow with renormalization; reports the cocycle and systole
    Flow {
        #[arg(long)]
        time: f64,
        #[arg(long, default_value_t = 0.5)]
        step: f64,
        #[arg(long)]
        surface: Option<PathBuf>,
    },
    /// Lyapunov spectrum estimate (CSV)
    Lyapunov {
        #[arg(long)]
        time: f64,
        #[arg(long, default_value_t = 0.5)]
        renorm: f64,
        #[arg(long, default_value_t = 4)]
        vectors: usize,
        #[arg(long, default_value_t = 3)]
        samples: usize,
        #[arg(long)]
        surface: Option<PathBuf>,
    },
    /// Nondivergence fractions over an epsilon grid (CSV)
    Nondiv {
        #[arg(long)]
        t: f64,
        /// lo,hi,npoints (log-spaced)
        #[arg(long, default_value = "0.02,0.2,8")]
        eps_grid: String,
        #[arg(long, default_value_t = 20000)]
        samples: usize,
        #[arg(long)]
        surface: Option<PathBuf>,
    },
    /// Margulis-function experiments
    Margulis {
        #[command(subcommand)]
        experiment: MargulisCmd,
    },
    /// Veech element search
    Veech {
        #[arg(long, default_value_t = 8.0)]
        tmax: f64,
        #[arg(long)]
        surface: Option<PathBuf>,
        /// prototype a,b,c,e instead of a surface file
        #[arg(long)]
        proto: Option<String>,
    },
    /// Height of an integral subspace given as rows "a,b,c;d,e,f"
    Height { rows: String },
    /// Plane discriminant of a prototype surface
    Disc { a: i64, b: i64, c: i64, e: i64 },
    /// Harish-Chandra spherical function on a time grid (CSV)
    Spherical {
        #[arg(long)]
        t: f64,
        #[arg(long, default_value_t = 1)]
        points: usize,
    },
    /// Separated lattice-point count in a norm ball
    Count {
        /// JSON file: [[a,b,c,d], ...] generators
        #[arg(long)]
        gens: PathBuf,
        #[arg(long)]
        radius: f64,
        #[arg(long, default_value_t = 1.0)]
        separation: f64,
    },
    /// Near-return scan over a grid in B_G(T)
    NearReturns {
        #[arg(long)]
        radius: f64,
        #[arg(long)]
        exponent: f64,
        #[arg(long, default_value_t = 0.5)]
        grid: f64,
        #[arg(long)]
        surface: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum MargulisCmd {
    Contraction {
        #[arg(long, default_value_t = 0.9)]
        gamma: f64,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long, default_value_t = 25.0)]
        tmax: f64,
    },
    Walk {
        #[arg(long, default_value_t = 0.9)]
        gamma: f64,
        #[arg(long, default_value_t = 4)]
        k: usize,
        #[arg(long, default_value_t = 0.5)]
        m: f64,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 8)]
        spine: usize,
    },
    Scan {
        #[arg(long, default_value_t = 2.0)]
        t: f64,
        #[arg(long, default_value_t = 0.3)]
        kappa: f64,
        #[arg(long, default_value_t = 0.9)]
        gamma: f64,
        #[arg(long, default_value_t = 400)]
        samples: usize,
    },
    Bootstrap {
        #[arg(long, default_value_t = 0.9)]
        gamma: f64,
        #[arg(long, default_value_t = 0.05)]
        epsilon: f64,
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long, default_value_t = 4.0)]
        t: f64,
        #[arg(long, default_value_t = 0.25)]
        kappa: f64,
        #[arg(long, default_value_t = 16)]
        spine: usize,
    },
}

fn exit_code_for(err: &FdError) -> i32 {
    match err {
        FdError::FlipLimitExceeded { .. }
        | FdError::BudgetExceeded { .. }
        | FdError::WordBudgetExceeded { .. }
        | FdError::ResolutionTooCoarse { .. } => 3,
        _ => 2,
    }
}

struct Ctx {
    registry: ConstantsRegistry,
    seed: u64,
    out: Box<dyn Write>,
}

impl Ctx {
    fn banner(&mut self) {
        writeln!(self.out, "# registry: {} seed: {}", self.registry.snapshot(), self.seed)
            .expect("write");
    }
}

fn load_surface(path: &Option<PathBuf>, ctx: &Ctx) -> Result<TranslationSurface, FdError> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| FdError::Invalid(format!("cannot read {}: {e}", p.display())))?;
            let json: SurfaceJson = serde_json::from_str(&text)
                .map_err(|e| FdError::Invalid(format!("bad surface JSON: {e}")))?;
            TranslationSurface::from_json(&json)
        }
        None => {
            perturbed_prototype_surface(&Prototype { a: 0, b: 2, c: 1, e: 0 }, ctx.seed, 0.2)
        }
    }
}

fn parse_grid(spec: &str) -> Result<Vec<f64>, FdError> {
    let parts: Vec<&str> = spec.split(',').collect();
    if parts.len() != 3 {
        return Err(FdError::Invalid("grid spec must be lo,hi,n".into()));
    }
    let lo: f64 = parts[0].parse().map_err(|_| FdError::Invalid("bad grid lo".into()))?;
    let hi: f64 = parts[1].parse().map_err(|_| FdError::Invalid("bad grid hi".into()))?;
    let n: usize = parts[2].parse().map_err(|_| FdError::Invalid("bad grid count".into()))?;
    Ok((0..n)
        .map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (n - 1).max(1) as f64).exp())
        .collect())
}

fn run(cli: Cli) -> Result<(), FdError> {
    let registry = match cli
        .config
        .clone()
        .or_else(|| std::env::var("FLATDRIFT_CONFIG").ok().map(PathBuf::from))
    {
        Some(path) => ConstantsRegistry::from_file(&path)
            .map_err(|e| FdError::Invalid(format!("cannot load registry: {e}")))?,
        None => ConstantsRegistry::default(),
    };
    #[cfg(feature = "parallel")]
    if cli.workers > 0 {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.workers).build_global();
    }
    let out: Box<dyn Write> = match &cli.out {
        Some(p) => Box::new(std::io::BufWriter::new(
            std::fs::File::create(p)
                .map_err(|e| FdError::Invalid(format!("cannot create output: {e}")))?,
        )),
        None => Box::new(std::io::BufWriter::new(std::io::stdout())),
    };
    let mut ctx = Ctx { registry, seed: cli.seed, out };

    match cli.command {
        Command::Prototypes { dmax, format } => {
            ctx.banner();
            if format == "csv" {
                writeln!(ctx.out, "D,a,b,c,e,components").unwrap();
            }
            for d in 5..=dmax {
                if d % 4 == 0 || d % 4 == 1 {
                    let comps = component_count(d)?;
                    for p in enumerate_prototypes(d)? {
                        writeln!(ctx.out, "{},{},{},{},{},{}", d, p.a, p.b, p.c, p.e, comps)
                            .unwrap();
                    }
                }
            }
        }
        Command::BuildPrototype { a, b, c, e } => {
            let p = Prototype { a, b, c, e };
            let (_, sum) = prototype_surface(&p)?;
            let json = sum.surface.to_json();
            writeln!(ctx.out, "{}", serde_json::to_string_pretty(&json).unwrap()).unwrap();
        }
        Command::Validate { surface } => {
            let s = load_surface(&Some(surface), &ctx)?;
            s.validate()?;
            ctx.banner();
            writeln!(
                ctx.out,
                "valid: {} triangles, {} edge classes, area {}, systole {}",
                s.triangles.len(),
                s.topology.n_classes,
                s.area(),
                flatdrift::saddle::systole(&s)
            )
            .unwrap();
        }
        Command::Flow { time, step, surface } => {
            let s = load_surface(&surface, &ctx)?;
            let mut state = FlowState::new(s)?;
            state.flow(time, step, &ctx.registry)?;
            ctx.banner();
            writeln!(
                ctx.out,
                "clock {} systole {} cocycle_det {}",
                state.clock,
                flatdrift::saddle::systole(&state.surface),
                state.cocycle_det_abs()
            )
            .unwrap();
            writeln!(ctx.out, "{}", serde_json::to_string(&state.surface.to_json()).unwrap())
                .unwrap();
        }
        Command::Lyapunov { time, renorm, vectors, samples, surface } => {
            ctx.banner();
            writeln!(ctx.out, "seed_index,exponents").unwrap();
            for i in 0..samples {
                let s = match &surface {
                    Some(_) => load_surface(&surface, &ctx)?,
                    None => perturbed_prototype_surface(
                        &Prototype { a: 0, b: 2, c: 1, e: 0 },
                        ctx.seed.wrapping_add(i as u64),
                        0.2,
                    )?,
                };
                let est = lyapunov_estimate(
                    &s,
                    time,
                    renorm,
                    vectors,
                    ctx.seed.wrapping_add(1000 + i as u64),
                    &ctx.registry,
                )?;
                let exps: Vec<String> = est.exponents.iter().map(|x| x.to_string()).collect();
                writeln!(ctx.out, "{},{}", i, exps.join(";")).unwrap();
            }
        }
        Command::Nondiv { t, eps_grid, samples, surface } => {
            let s = load_surface(&surface, &ctx)?.normalize_area();
            let grid = parse_grid(&eps_grid)?;
            let sys = nondivergence_systoles(&s, t, samples, ctx.seed, &ctx.registry);
            ctx.banner();
            writeln!(ctx.out, "eps,fraction").unwrap();
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            for &eps in &grid {
                let n = sys.len();
                let count = sys.iter().filter(|x| x.is_finite() && **x < eps).count();
                let frac = (count as f64 + 0.5) / (n as f64 + 1.0);
                writeln!(ctx.out, "{},{}", eps, frac).unwrap();
                // empty bins sit below the reachable minimum feature and are
                // excluded from the power-law fit
                if count > 0 {
                    xs.push(eps.ln());
                    ys.push(frac.ln());
                }
            }
            let (slope, intercept, r2) = linear_fit(&xs, &ys);
            writeln!(ctx.out, "# fitted_exponent {} r2 {} intercept {}", slope, r2, intercept)
                .unwrap();
        }
        Command::Margulis { experiment } => run_margulis(experiment, &mut ctx)?,
        Command::Veech { tmax, surface, proto } => {
            let s = match proto {
                Some(spec) => {
                    let vals: Vec<i64> =
                        spec.split(',').map(|x| x.trim().parse().unwrap_or(0)).collect();
                    if vals.len() != 4 {
                        return Err(FdError::Invalid("proto must be a,b,c,e".into()));
                    }
                    prototype_surface(&Prototype {
                        a: vals[0],
                        b: vals[1],
                        c: vals[2],
                        e: vals[3],
                    })?
                    .1
                    .surface
                }
                None => load_surface(&surface, &ctx)?,
            };
            let found = veech_search(&s, tmax, 4_000_000)?;
            ctx.banner();
            writeln!(
                ctx.out,
                "# candidates_tested {} minus_identity {} hyperbolic {}",
                found.candidates_tested,
                found.minus_identity,
                contains_hyperbolic(&found.elements)
            )
            .unwrap();
            writeln!(ctx.out, "a,b,c,d,trace").unwrap();
            for g in &found.elements {
                writeln!(ctx.out, "{},{},{},{},{}", g.a, g.b, g.c, g.d, g.trace()).unwrap();
            }
        }
        Command::Height { rows } => {
            let parsed: Vec<Vec<i64>> = rows
                .split(';')
                .map(|r| r.split(',').map(|x| x.trim().parse().unwrap_or(0)).collect())
                .collect();
            let n = parsed.first().map(|r| r.len()).unwrap_or(0);
            let sub = IntegralSubspace::from_rows(big_matrix(&parsed), n)?;
            ctx.banner();
            writeln!(ctx.out, "dim {} height {}", sub.dim(), sub.height()).unwrap();
        }
        Command::Disc { a, b, c, e } => {
            let p = Prototype { a, b, c, e };
            let (_, sum) = prototype_surface(&p)?;
            let plane = prototype_exact_plane(&sum);
            let disc = plane_discriminant(&sum.surface, Some(&plane))?;
            ctx.banner();
            writeln!(ctx.out, "D {} disc {}", p.discriminant(), disc).unwrap();
        }
        Command::Spherical { t, points } => {
            ctx.banner();
            writeln!(ctx.out, "t,phi").unwrap();
            for i in 0..points.max(1) {
                let ti = if points <= 1 { t } else { t * (i + 1) as f64 / points as f64 };
                writeln!(ctx.out, "{},{}", ti, spherical_function(ti)).unwrap();
            }
        }
        Command::Count { gens, radius, separation } => {
            let text = std::fs::read_to_string(&gens)
                .map_err(|e| FdError::Invalid(format!("cannot read generators: {e}")))?;
            let raw: Vec<[f64; 4]> = serde_json::from_str(&text)
                .map_err(|e| FdError::Invalid(format!("bad generator JSON: {e}")))?;
            let generators: Vec<Mat2> =
                raw.iter().map(|g| Mat2::new(g[0], g[1], g[2], g[3])).collect();
            let spec =
                GroupBallSpec { generators, t: radius, separation, word_budget: 2_000_000 };
            let (count, _) = count_group_ball(&spec)?;
            ctx.banner();
            writeln!(ctx.out, "count {}", count).unwrap();
        }
        Command::NearReturns { radius, exponent, grid, surface } => {
            let s = load_surface(&surface, &ctx)?;
            let scan = near_return_scan(&s, radius, exponent, grid)?;
            ctx.banner();
            writeln!(
                ctx.out,
                "# grid_points {} resolution_warning {}",
                scan.grid_points, scan.resolution_warning
            )
            .unwrap();
            writeln!(ctx.out, "g1,g2,distance").unwrap();
            for p in &scan.pairs {
                writeln!(
                    ctx.out,
                    "{} {} {} {},{} {} {} {},{}",
                    p.g1.a, p.g1.b, p.g1.c, p.g1.d, p.g2.a, p.g2.b, p.g2.c, p.g2.d, p.distance
                )
                .unwrap();
            }
        }
    }
    ctx.out.flush().ok();
    Ok(())
}

fn toy_skeleton(
    seed: u64,
    spine_size: usize,
    registry: &ConstantsRegistry,
) -> Result<Skeleton, FdError> {
    let base = perturbed_prototype_surface(&Prototype { a: 0, b: 2, c: 1, e: 0 }, seed, 0.2)?;
    let scale = flatdrift::norms::injectivity_scale(&base, registry.kappa6);
    let gap = scale / (4.0 * spine_size.max(2) as f64);
    let raw = PeriodVector {
        coords: (0..base.homology_dim())
            .map(|k| flatdrift::geom::C::new(0.3 + 0.1 * k as f64, -0.2 + 0.15 * k as f64))
            .collect(),
    };
    let dir = flatdrift::norms::project_balance(&base, &raw)?;
    let dir = dir.scale(1.0 / dir.norm_sup());
    let mut spine = vec![PeriodVector::zero(base.homology_dim())];
    for i in 1..spine_size {
        spine.push(dir.scale(gap * i as f64));
    }
    let bones = vec![Bone { r_g: 1e-5, r_u: 1e-5 }; spine_size];
    Skeleton::new(base, spine, bones, registry)
}

fn run_margulis(cmd: MargulisCmd, ctx: &mut Ctx) -> Result<(), FdError> {
    match cmd {
        MargulisCmd::Contraction { gamma, samples, tmax } => {
            let base =
                perturbed_prototype_surface(&Prototype { a: 0, b: 2, c: 1, e: 0 }, ctx.seed, 0.2)?;
            let raw = PeriodVector {
                coords: (0..4)
                    .map(|k| {
                        flatdrift::geom::C::new(0.21 + 0.13 * k as f64, 0.4 - 0.09 * k as f64)
                    })
                    .collect(),
            };
            let w = flatdrift::norms::project_balance(&base, &raw)?;
            let w = w.scale(0.01 / w.norm_sup());
            let grid: Vec<f64> = (1..=10).map(|k| tmax * k as f64 / 10.0).collect();
            let table =
                contraction_probe(&base, gamma, &w, &grid, samples, ctx.seed, &ctx.registry)?;
            ctx.banner();
            writeln!(ctx.out, "t,ratio").unwrap();
            for (t, ratio) in &table.rows {
                writeln!(ctx.out, "{},{}", t, ratio).unwrap();
            }
            writeln!(
                ctx.out,
                "# t4 {:?} profile_gamma1 {} profile_gamma05 {}",
                table.t4,
                worst_case_profile(1.0, 10_000),
                worst_case_profile(0.5, 10_000)
            )
            .unwrap();
        }
        MargulisCmd::Walk { gamma, k, m, samples, spine } => {
            let skel = toy_skeleton(ctx.seed, spine, &ctx.registry)?;
            let walk = DriftWalk::new(gamma, m, k);
            let res = random_walk_expectation(&skel, &walk, samples, ctx.seed, &ctx.registry)?;
            ctx.banner();
            writeln!(ctx.out, "{}", serde_json::to_string(&res).unwrap()).unwrap();
        }
        MargulisCmd::Scan { t, kappa, gamma, samples } => {
            let base =
                perturbed_prototype_surface(&Prototype { a: 0, b: 2, c: 1, e: 0 }, ctx.seed, 0.2)?;
            let scan = horocycle_transversal_scan(
                &base,
                t,
                kappa,
                gamma,
                samples,
                ctx.seed,
                &ctx.registry,
            )?;
            ctx.banner();
            writeln!(ctx.out, "{}", serde_json::to_string(&scan).unwrap()).unwrap();
        }
        MargulisCmd::Bootstrap { gamma, epsilon, k, t, kappa, spine } => {
            let skel = toy_skeleton(ctx.seed, spine, &ctx.registry)?;
            let params = BootstrapParams { kappa, t, k, m_step: 0.5, max_iterations: 10 };
            let log = dimension_bootstrap(
                &skel.base,
                gamma,
                epsilon,
                skel.spine.clone(),
                &params,
                ctx.seed,
                &ctx.registry,
            )?;
            ctx.banner();
            for rec in &log {
                writeln!(ctx.out, "{}", serde_json::to_string(rec).unwrap()).unwrap();
            }
        }
    }
    ctx.out.flush().ok();
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(exit_code_for(&e));
        }
    }
}
