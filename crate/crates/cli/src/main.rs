//! Configuration-driven front end: validate chain descriptions, run the
//! semi-analytic solver, sample stochastic trajectories, classify feature
//! sets, sweep parameters, and dump oracle moment tables. All outputs are
//! machine-readable (CSV plus flat key-value summaries) and carry the config
//! hash; timestamps live in a metadata sidecar only, so repeated runs with
//! the same seed are byte-identical.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use kerrnet_core::chain::ChainSpec;
use kerrnet_core::metrics::{self, BoundaryKind};
use kerrnet_core::nvk::{self, FilterMode};
use kerrnet_core::oracle::{complexp_moment, FockChain, KerrParams};
use kerrnet_core::readout::{self, FeatureSet};
use kerrnet_core::steom::{self, EnsembleConfig, SdeConfig};
use kerrnet_core::tasks::{self, SweepParam, TaskDef, TaskId};
use kerrnet_core::CoreError;

#[derive(Parser)]
#[command(
    name = "kerrnet",
    about = "Monitored Kerr-network simulation and binary state discrimination",
    version
)]
struct Cli {
    /// Worker threads for ensembles and sweeps (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory (default: env KERRNET_OUT, else current directory).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ChainArgs {
    /// Chain description file (TOML).
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Built-in task (I, II, III, IV); ignored when --spec is given.
    #[arg(long)]
    task: Option<String>,
    /// Override the common monitored-mode amplitude of the task drives.
    #[arg(long)]
    amplitude: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Nvk,
    Steom,
    Oracle,
}

#[derive(Clone, Copy, ValueEnum)]
enum CovModeArg {
    Short,
    LongLeading,
    LongNext,
    General,
}

impl From<CovModeArg> for FilterMode {
    fn from(m: CovModeArg) -> FilterMode {
        match m {
            CovModeArg::Short => FilterMode::Short,
            CovModeArg::LongLeading => FilterMode::LongLeading,
            CovModeArg::LongNext => FilterMode::LongNext,
            CovModeArg::General => FilterMode::General,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Check a chain description against every invariant.
    Validate(ChainArgs),
    /// Semi-analytic discrimination report for a label pair.
    Nvk {
        #[command(flatten)]
        chain: ChainArgs,
        /// Boxcar window length (default: the chain's readout section).
        #[arg(long = "filter-T")]
        filter_t: Option<f64>,
        /// Classical readout noise power override.
        #[arg(long)]
        ncl: Option<f64>,
        #[arg(long, value_enum, default_value = "long-leading")]
        cov_mode: CovModeArg,
    },
    /// Sample stochastic trajectories and write filtered features.
    Simulate {
        #[command(flatten)]
        chain: ChainArgs,
        #[arg(long, value_enum, default_value = "steom")]
        method: MethodArg,
        /// Trajectories per label.
        #[arg(long, default_value_t = 100)]
        ntraj: usize,
        /// Master seed (mandatory: no wall-clock seeding).
        #[arg(long)]
        seed: u64,
        /// Integrator step.
        #[arg(long, default_value_t = 5e-3)]
        dt: f64,
        #[arg(long = "filter-T")]
        filter_t: Option<f64>,
        #[arg(long)]
        ncl: Option<f64>,
        /// Additionally dump this many full trajectories per label as CSV.
        #[arg(long, default_value_t = 0)]
        dump_traj: usize,
    },
    /// Train and evaluate a linear classifier on a feature CSV.
    Classify {
        /// Feature CSV (as written by `simulate`).
        #[arg(long)]
        features: PathBuf,
        /// Held-out feature CSV; defaults to an even/odd split of the input.
        #[arg(long)]
        test: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "fisher")]
        boundary: BoundaryArg,
    },
    /// Metric rows across a parameter range.
    Sweep {
        #[command(flatten)]
        chain: ChainArgs,
        /// Range specification <param>=<start:stop:steps>, e.g.
        /// kerr=0.002:0.012:20.
        #[arg(long)]
        sweep: String,
        /// Sweep kind: plain rows, or the isogain optimal-noise trajectory.
        #[arg(long, value_enum, default_value = "plain")]
        kind: SweepKindArg,
        /// Susceptibility target for the isogain trajectory.
        #[arg(long)]
        target_chi: Option<f64>,
        #[arg(long, value_enum, default_value = "long-leading")]
        cov_mode: CovModeArg,
    },
    /// Dump exact oracle moment tables.
    Oracle {
        #[command(flatten)]
        chain: ChainArgs,
        #[arg(long, value_enum, default_value = "complexp")]
        kind: OracleKindArg,
        /// Kerr strength (closed-form oracle without --spec/--task).
        #[arg(long)]
        kerr: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        detuning: Option<f64>,
        #[arg(long)]
        damping: Option<f64>,
        #[arg(long)]
        drive: Option<f64>,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        drive_phase: f64,
        /// Highest moment order to tabulate.
        #[arg(long, default_value_t = 2)]
        max_order: u32,
        /// Fock dimensions per mode, comma separated.
        #[arg(long)]
        cutoffs: Option<String>,
        /// Label for Fock chains (defaults to the first).
        #[arg(long)]
        label: Option<String>,
    },
    /// Side-by-side steady-state moments: semi-analytic vs cumulant
    /// integration vs the exact Fock solve.
    Compare {
        #[command(flatten)]
        chain: ChainArgs,
        #[arg(long)]
        cutoffs: Option<String>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum BoundaryArg {
    Fisher,
    Bisector,
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepKindArg {
    Plain,
    Isogain,
}

#[derive(Clone, Copy, ValueEnum)]
enum OracleKindArg {
    Complexp,
    Fock,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    let out_dir = cli
        .out
        .clone()
        .or_else(|| std::env::var_os("KERRNET_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    match run(cli, &out_dir) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                CoreError::Config(_) | CoreError::InvalidChain(_) | CoreError::Io(_) => {
                    ExitCode::from(2)
                }
                _ => ExitCode::from(3),
            }
        }
    }
}

/// FNV-1a over the canonical invocation string; stamped on every artifact.
fn config_hash(parts: &[String]) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for p in parts {
        for b in p.as_bytes() {
            h ^= *b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        h ^= 0x1f;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{h:016x}")
}

struct RunContext {
    out_dir: PathBuf,
    hash: String,
}

impl RunContext {
    fn new(out_dir: &Path, parts: Vec<String>) -> Result<Self, CoreError> {
        std::fs::create_dir_all(out_dir)?;
        Ok(RunContext { out_dir: out_dir.to_path_buf(), hash: config_hash(&parts) })
    }

    fn write(&self, name: &str, body: &str) -> Result<PathBuf, CoreError> {
        let path = self.out_dir.join(name);
        let stamped = format!("# config_hash = {}\n{body}", self.hash);
        std::fs::write(&path, stamped)?;
        Ok(path)
    }

    /// Timestamps and other irreproducible facts live only here.
    fn write_meta(&self, command: &str) -> Result<(), CoreError> {
        let now = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let body = format!("command = {command}\nconfig_hash = {}\nunix_time = {now}\n", self.hash);
        std::fs::write(self.out_dir.join("run_meta.txt"), body)?;
        Ok(())
    }
}

fn load_chain(args: &ChainArgs) -> Result<(ChainSpec, (String, String)), CoreError> {
    if let Some(path) = &args.spec {
        let text = std::fs::read_to_string(path)?;
        let spec = ChainSpec::from_toml(&text)?;
        spec.validate()?;
        if spec.labels.len() < 2 {
            return Err(CoreError::Config("chain needs at least two labels".into()));
        }
        let labels = (spec.labels[0].name.clone(), spec.labels[1].name.clone());
        Ok((spec, labels))
    } else if let Some(taskname) = &args.task {
        let id: TaskId = taskname.parse()?;
        let mut def = tasks::task(id);
        if let Some(a) = args.amplitude {
            def = def.with_amplitude(a)?;
        }
        Ok((def.spec.clone(), def.labels.clone()))
    } else {
        Err(CoreError::Config("either --spec or --task is required".into()))
    }
}

fn load_task(args: &ChainArgs) -> Result<TaskDef, CoreError> {
    let id: TaskId = args
        .task
        .as_deref()
        .ok_or_else(|| CoreError::Config("this mode requires --task".into()))?
        .parse()?;
    let mut def = tasks::task(id);
    if let Some(a) = args.amplitude {
        def = def.with_amplitude(a)?;
    }
    Ok(def)
}

fn parse_range(text: &str) -> Result<(SweepParam, Vec<f64>), CoreError> {
    let (name, range) = text
        .split_once('=')
        .ok_or_else(|| CoreError::Config(format!("sweep '{text}' is not <param>=<start:stop:steps>")))?;
    let param: SweepParam = name.trim().parse()?;
    let parts: Vec<&str> = range.split(':').collect();
    if parts.len() != 3 {
        return Err(CoreError::Config(format!("range '{range}' is not <start:stop:steps>")));
    }
    let start: f64 = parts[0].trim().parse().map_err(|e| CoreError::Config(format!("{e}")))?;
    let stop: f64 = parts[1].trim().parse().map_err(|e| CoreError::Config(format!("{e}")))?;
    let steps: usize = parts[2].trim().parse().map_err(|e| CoreError::Config(format!("{e}")))?;
    if steps < 1 {
        return Err(CoreError::Config("need at least one sweep step".into()));
    }
    let values = (0..steps)
        .map(|i| {
            if steps == 1 {
                start
            } else {
                start + (stop - start) * i as f64 / (steps - 1) as f64
            }
        })
        .collect();
    Ok((param, values))
}

fn run(cli: Cli, out_dir: &Path) -> Result<(), CoreError> {
    match cli.command {
        Command::Validate(chain) => {
            let (spec, _) = load_chain(&chain)?;
            spec.validate()?;
            println!("ok: {} source mode(s), {} Kerr mode(s), {} label(s)", spec.n_source(), spec.n_kerr(), spec.labels.len());
            Ok(())
        }
        Command::Nvk { chain, filter_t, ncl, cov_mode } => {
            let ctx = RunContext::new(
                out_dir,
                vec![
                    "nvk".into(),
                    format!("{:?}{:?}{:?}", chain.spec, chain.task, chain.amplitude),
                    format!("{filter_t:?}{ncl:?}"),
                ],
            )?;
            let (spec, labels) = load_chain(&chain)?;
            let window = filter_t.unwrap_or(spec.readout.window);
            let noise = ncl.unwrap_or(spec.readout.classical_noise);
            let ev = tasks::evaluate_pair(
                &spec,
                (&labels.0, &labels.1),
                window,
                noise,
                cov_mode.into(),
            )?;
            let mut body = ev.report.to_kv();
            body.push_str(&format!("chi = {:.12e}\n", ev.chi));
            body.push_str(&format!("stable = {}\n", ev.stable));
            if let Some(en) = ev.e_n {
                body.push_str(&format!("e_n = {en:.12e}\n"));
            }
            if let Some(z) = ev.zeta {
                body.push_str(&format!("zeta = {z:.12e}\n"));
            }
            if let Some(z) = ev.zeta_qs {
                body.push_str(&format!("zeta_qs = {z:.12e}\n"));
            }
            let path = ctx.write("report.kv", &body)?;
            ctx.write_meta("nvk")?;
            print!("{body}");
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::Simulate { chain, method, ntraj, seed, dt, filter_t, ncl, dump_traj } => {
            if !matches!(method, MethodArg::Steom) {
                return Err(CoreError::Config(
                    "trajectory sampling is the stochastic method; use --method steom".into(),
                ));
            }
            let ctx = RunContext::new(
                out_dir,
                vec![
                    "simulate".into(),
                    format!("{:?}{:?}{:?}", chain.spec, chain.task, chain.amplitude),
                    format!("{ntraj}:{seed}:{dt}:{filter_t:?}:{ncl:?}"),
                ],
            )?;
            let (spec, labels) = load_chain(&chain)?;
            let window = filter_t.unwrap_or(spec.readout.window);
            let noise = ncl.unwrap_or(spec.readout.classical_noise);
            let cfg = EnsembleConfig {
                n_traj: ntraj,
                dt,
                master_seed: seed,
                window,
                start: spec.readout.settle,
            };
            let mut set = steom::ensemble_run(&spec, &[&labels.0, &labels.1], &cfg)?;
            if noise > 0.0 {
                let mut rng = rand_chacha_rng(steom::derive_seed(seed, usize::MAX >> 1, 0));
                readout::add_classical_noise(&mut set, noise, &mut rng);
            }
            let path = ctx.write("features.csv", &set.to_csv())?;
            if dump_traj > 0 {
                for (li, label) in [&labels.0, &labels.1].into_iter().enumerate() {
                    let sys = spec.build(label)?;
                    for t in 0..dump_traj {
                        let tcfg = SdeConfig {
                            dt,
                            t_total: set.start + window,
                            seed: steom::derive_seed(seed, li, t),
                            store_stride: ((0.1 / dt) as usize).max(1),
                        };
                        let traj = steom::integrate_trajectory(&sys, &tcfg)?;
                        ctx.write(&format!("trajectory_{label}_{t}.csv"), &trajectory_csv(&traj))?;
                    }
                }
            }
            ctx.write_meta("simulate")?;
            println!(
                "wrote {} ({} shots x {} labels, window {window}, settle {})",
                path.display(),
                ntraj,
                2,
                set.start
            );
            Ok(())
        }
        Command::Classify { features, test, boundary } => {
            let ctx = RunContext::new(
                out_dir,
                vec!["classify".into(), format!("{features:?}{test:?}")],
            )?;
            let text = std::fs::read_to_string(&features)?;
            let set = FeatureSet::from_csv(&text, 0.0, 0.0)?;
            let (train, eval) = match &test {
                Some(path) => {
                    let t = std::fs::read_to_string(path)?;
                    (set.clone(), FeatureSet::from_csv(&t, 0.0, 0.0)?)
                }
                None => {
                    let mut train = set.clone();
                    let mut eval = set.clone();
                    train.vectors.retain(|v| v.shot % 2 == 0);
                    eval.vectors.retain(|v| v.shot % 2 == 1);
                    (train, eval)
                }
            };
            let kind = match boundary {
                BoundaryArg::Fisher => BoundaryKind::Fisher,
                BoundaryArg::Bisector => BoundaryKind::Bisector,
            };
            let (accuracy, bound) = metrics::lda_classify(&train, &eval, kind)?;
            let labels = train.labels();
            let sum_a = train.summary(&labels[0])?;
            let sum_b = train.summary(&labels[1])?;
            let report = metrics::discrimination_report(
                (labels[0].clone(), labels[1].clone()),
                &sum_a,
                &sum_b,
                Some(accuracy),
            )?;
            let mut body = report.to_kv();
            body.push_str(&format!("boundary_kind = {}\n", match kind {
                BoundaryKind::Fisher => "fisher",
                BoundaryKind::Bisector => "bisector",
            }));
            body.push_str(&format!("train_shots = {}\n", train.vectors.len()));
            body.push_str(&format!("test_shots = {}\n", eval.vectors.len()));
            let _ = bound;
            let path = ctx.write("classify.kv", &body)?;
            ctx.write_meta("classify")?;
            println!("accuracy = {accuracy:.6}");
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::Sweep { chain, sweep, kind, target_chi, cov_mode } => {
            let ctx = RunContext::new(
                out_dir,
                vec![
                    "sweep".into(),
                    format!("{:?}{:?}", chain.spec, chain.task),
                    sweep.clone(),
                    format!("{target_chi:?}"),
                ],
            )?;
            let def = load_task(&chain)?;
            let (param, values) = parse_range(&sweep)?;
            let body = match kind {
                SweepKindArg::Plain => {
                    let rows = tasks::sweep(&def, param, &values, cov_mode.into())?;
                    let mut body =
                        tasks::SweepRow::csv_header(&[param.name().to_string()]) + "\n";
                    for r in &rows {
                        body.push_str(&r.csv_row());
                        body.push('\n');
                    }
                    body
                }
                SweepKindArg::Isogain => {
                    let target = target_chi.ok_or_else(|| {
                        CoreError::Config("isogain sweep needs --target-chi".into())
                    })?;
                    if param != SweepParam::Coupling {
                        return Err(CoreError::Config(
                            "the isogain trajectory sweeps the coupling; use g12=...".into(),
                        ));
                    }
                    let kerr_grid: Vec<f64> =
                        (0..14).map(|i| 5.2e-3 + 3.2e-3 * i as f64 / 13.0).collect();
                    let pts = tasks::isogain_optimal_noise_sweep(
                        &def,
                        target,
                        &values,
                        &kerr_grid,
                        (0.05, 3.2),
                        cov_mode.into(),
                    )?;
                    let mut body = tasks::SweepRow::csv_header(&[
                        "g12".into(),
                        "kerr".into(),
                        "delta1".into(),
                    ]) + "\n";
                    for p in &pts {
                        body.push_str(&p.row.csv_row());
                        body.push('\n');
                    }
                    body
                }
            };
            let path = ctx.write("sweep.csv", &body)?;
            ctx.write_meta("sweep")?;
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::Oracle {
            chain,
            kind,
            kerr,
            detuning,
            damping,
            drive,
            drive_phase,
            max_order,
            cutoffs,
            label,
        } => {
            let ctx = RunContext::new(
                out_dir,
                vec![
                    "oracle".into(),
                    format!("{kerr:?}{detuning:?}{damping:?}{drive:?}{drive_phase}{max_order}"),
                    format!("{:?}{:?}{cutoffs:?}", chain.spec, chain.task),
                ],
            )?;
            let body = match kind {
                OracleKindArg::Complexp => {
                    let params = KerrParams {
                        detuning: detuning
                            .ok_or_else(|| CoreError::Config("--detuning required".into()))?,
                        kerr: kerr.ok_or_else(|| CoreError::Config("--kerr required".into()))?,
                        damping: damping.unwrap_or(1.0),
                        drive: drive.ok_or_else(|| CoreError::Config("--drive required".into()))?,
                        drive_phase,
                    };
                    let mut body = String::from("j,i,re,im\n");
                    for j in 0..=max_order {
                        for i in 0..=max_order {
                            if i + j == 0 || i + j > max_order {
                                continue;
                            }
                            let m = complexp_moment(&params, j, i)?;
                            body.push_str(&format!("{j},{i},{:.15e},{:.15e}\n", m.re, m.im));
                        }
                    }
                    body
                }
                OracleKindArg::Fock => {
                    let (fchain, names) = if chain.spec.is_some() || chain.task.is_some() {
                        let (spec, labels) = load_chain(&chain)?;
                        let label = label.unwrap_or(labels.0);
                        let dims = parse_cutoffs(cutoffs.as_deref(), 2)?;
                        (FockChain::from_chain(&spec, &label, &dims)?, vec!["a", "b"])
                    } else {
                        let params = KerrParams {
                            detuning: detuning
                                .ok_or_else(|| CoreError::Config("--detuning required".into()))?,
                            kerr: kerr.ok_or_else(|| CoreError::Config("--kerr required".into()))?,
                            damping: damping.unwrap_or(1.0),
                            drive: drive
                                .ok_or_else(|| CoreError::Config("--drive required".into()))?,
                            drive_phase,
                        };
                        let dims = parse_cutoffs(cutoffs.as_deref(), 1)?;
                        (FockChain::driven_kerr(&params, dims[0]), vec!["b"])
                    };
                    let st = fchain.steady_state()?;
                    st.check_tails(1e-6)?;
                    let mut body = String::from("mode,j,i,re,im\n");
                    for (mi, op) in fchain.mode_ops.iter().enumerate() {
                        for j in 0..=max_order {
                            for i in 0..=max_order {
                                if i + j == 0 || i + j > max_order {
                                    continue;
                                }
                                let m = st.moment(op, j, i);
                                body.push_str(&format!(
                                    "{},{j},{i},{:.15e},{:.15e}\n",
                                    names[mi], m.re, m.im
                                ));
                            }
                        }
                    }
                    body
                }
            };
            let path = ctx.write("moments.csv", &body)?;
            ctx.write_meta("oracle")?;
            print!("{body}");
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::Compare { chain, cutoffs } => {
            let ctx = RunContext::new(
                out_dir,
                vec!["compare".into(), format!("{:?}{:?}{cutoffs:?}", chain.spec, chain.task)],
            )?;
            let (spec, labels) = load_chain(&chain)?;
            let mut body = String::from(
                "label,quantity,nvk,steom,fock,steom_minus_nvk,fock_minus_steom\n",
            );
            for label in [&labels.0, &labels.1] {
                let sys = spec.build(label)?;
                let sol = nvk::solve(&sys)?;
                let sd = sys.layout.source_dim();
                let nvk_mean = sol.mean_b_total()[0];
                let nvk_n = sol.cov[(sd, sd + 1)];
                let nvk_cbb = sol.cov[(sd, sd)];
                let det = steom::deterministic_steady_state(&sys, 2e-3, 4000.0)?;
                let st_mean = det.mean[sd];
                let st_n = det.cov[(sd, sd + 1)];
                let st_cbb = det.cov[(sd, sd)];
                let fock = if spec.n_source() == 1 && spec.n_kerr() == 1 {
                    let dims = match &cutoffs {
                        Some(c) => parse_cutoffs(Some(c), 2)?,
                        None => {
                            // Heuristic cutoffs from the cumulant occupations.
                            let na = (3.0 * det.mean[0].norm_sqr() + 14.0) as usize;
                            let nb = (3.0 * det.mean[sd].norm_sqr()
                                + 6.0 * det.cov[(sd, sd + 1)].re.abs()
                                + 14.0) as usize;
                            vec![na.min(40), nb.min(40)]
                        }
                    };
                    if dims[0] * dims[1] > 420 {
                        eprintln!(
                            "note: skipping the exact solve for '{label}' (needs a {}x{} Fock                              space; lower --amplitude or pass --cutoffs)",
                            dims[0], dims[1]
                        );
                        None
                    } else {
                        let fc = FockChain::from_chain(&spec, label, &dims)?;
                        let stt = fc.steady_state()?;
                        stt.check_tails(1e-5)?;
                        let b = &fc.mode_ops[1];
                        let m = stt.moment(b, 0, 1);
                        let n = stt.moment(b, 1, 1) - m.conj() * m;
                        let cbb = stt.moment(b, 0, 2) - m * m;
                        Some((m, n, cbb))
                    }
                } else {
                    None
                };
                let mut push = |q: &str, nv: f64, st: f64, fk: Option<f64>| {
                    body.push_str(&format!(
                        "{label},{q},{nv:.9e},{st:.9e},{},{:.3e},{}\n",
                        fk.map(|v| format!("{v:.9e}")).unwrap_or_else(|| "nan".into()),
                        st - nv,
                        fk.map(|v| format!("{:.3e}", v - st)).unwrap_or_else(|| "nan".into()),
                    ));
                };
                push("abs_mean_b", nvk_mean.norm(), st_mean.norm(), fock.map(|f| f.0.norm()));
                push("occupation", nvk_n.re, st_n.re, fock.map(|f| f.1.re));
                push("abs_cbb", nvk_cbb.norm(), st_cbb.norm(), fock.map(|f| f.2.norm()));
            }
            let path = ctx.write("compare.csv", &body)?;
            ctx.write_meta("compare")?;
            print!("{body}");
            println!("wrote {}", path.display());
            Ok(())
        }
    }
}

fn parse_cutoffs(text: Option<&str>, n: usize) -> Result<Vec<usize>, CoreError> {
    match text {
        None => Ok(vec![18; n]),
        Some(t) => {
            let dims: Vec<usize> = t
                .split(',')
                .map(|s| s.trim().parse::<usize>().map_err(|e| CoreError::Config(e.to_string())))
                .collect::<Result<_, _>>()?;
            if dims.len() != n {
                return Err(CoreError::Config(format!("need {n} cutoffs, got {}", dims.len())));
            }
            Ok(dims)
        }
    }
}

fn trajectory_csv(traj: &kerrnet_core::Trajectory) -> String {
    let mut body = String::from("t");
    let n = traj.layout.dim();
    for i in 0..n {
        body.push_str(&format!(",re_mean_{i},im_mean_{i}"));
    }
    for k in 0..traj.layout.n_kerr {
        body.push_str(&format!(",re_cbb_{k},im_cbb_{k},occ_{k}"));
    }
    body.push('\n');
    for st in &traj.states {
        body.push_str(&format!("{:.9}", st.t));
        for i in 0..n {
            body.push_str(&format!(",{:.9e},{:.9e}", st.mean[i].re, st.mean[i].im));
        }
        for k in 0..traj.layout.n_kerr {
            let r = traj.layout.kerr_row(k);
            body.push_str(&format!(
                ",{:.9e},{:.9e},{:.9e}",
                st.cov[(r, r)].re,
                st.cov[(r, r)].im,
                st.cov[(r, r + 1)].re
            ));
        }
        body.push('\n');
    }
    body.push_str("# record increments follow: step,mode,dI,dQ\n");
    for k in 0..traj.record_i.len() {
        for (s, (ri, rq)) in traj.record_i[k].iter().zip(&traj.record_q[k]).enumerate() {
            body.push_str(&format!("# {s},{k},{ri:.9e},{rq:.9e}\n"));
        }
    }
    body
}

fn rand_chacha_rng(seed: u64) -> impl rand::Rng {
    use rand::SeedableRng;
    rand_chacha::ChaCha12Rng::seed_from_u64(seed)
}
