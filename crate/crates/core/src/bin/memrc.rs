use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use memrc::config::ExperimentConfig;
use memrc::experiment::{run_point, sweep, write_outputs, ExperimentData};
use memrc::{DeviceParams, DeviceState, Error, Result};

#[derive(Parser)]
#[command(name = "memrc", version, about = "Volatile-memristor reservoir computing simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a config that describes exactly one configuration.
    Run(RunArgs),
    /// Run every point of the config's sweep grid.
    Sweep(RunArgs),
    /// Print the state trajectory of one device for a pulse train.
    InspectDevice(InspectArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    subset_train: Option<usize>,
    #[arg(long)]
    subset_test: Option<usize>,
}

#[derive(Args)]
struct InspectArgs {
    /// Slots as 0/1 characters, e.g. `1001` or `1,0,0,1`.
    #[arg(long)]
    train: String,
    /// Starting state; defaults to w_min.
    #[arg(long)]
    w0: Option<f64>,
    /// Optional config whose [device] section overrides the defaults.
    #[arg(long)]
    config: Option<PathBuf>,
}

fn load_config(args: &RunArgs) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(w) = args.workers {
        cfg.workers = w;
    }
    if let Some(n) = args.subset_train {
        cfg.data.subset_train = Some(n);
    }
    if let Some(n) = args.subset_test {
        cfg.data.subset_test = Some(n);
    }
    if let Some(out) = &args.out {
        cfg.out_dir = std::env::current_dir().map_err(|e| Error::io(".", e))?.join(out);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(args: &RunArgs, whole_grid: bool) -> Result<()> {
    let cfg = load_config(args)?;
    let grid = cfg.grid();
    if !whole_grid && grid.len() != 1 {
        return Err(Error::Config(format!(
            "`run` needs a single configuration, config describes {} (use `sweep`)",
            grid.len()
        )));
    }
    let data = ExperimentData::load(&cfg)?;
    eprintln!(
        "loaded {} train / {} test images of {}x{}",
        data.train.len(),
        data.test.len(),
        data.rows,
        data.cols
    );
    let outputs = if whole_grid {
        sweep(&data, &cfg)?
    } else {
        vec![run_point(&data, &cfg, &grid[0])?]
    };
    for o in &outputs {
        let r = &o.report;
        println!(
            "{:<10} k={:<2} bits={} devices={:<4} acc={:.4} img/s={:.4e} img/J={:.4e} write={:.3}",
            r.method,
            r.sections,
            r.bits,
            r.device_count,
            r.accuracy,
            r.images_per_second,
            r.images_per_joule,
            r.write_energy_fraction
        );
    }
    let out = cfg.out_dir();
    write_outputs(&outputs, &out)?;
    eprintln!("wrote {}", out.display());
    Ok(())
}

fn inspect(args: &InspectArgs) -> Result<()> {
    let params = match &args.config {
        Some(p) => ExperimentConfig::load(p)?.device,
        None => DeviceParams::default(),
    };
    params.validate()?;
    let slots: Vec<bool> = args
        .train
        .chars()
        .filter(|c| !matches!(c, ',' | ' ' | '_'))
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            other => Err(Error::Config(format!("pulse train contains `{other}`"))),
        })
        .collect::<Result<_>>()?;
    let mut state = match args.w0 {
        Some(w) => DeviceState::new(w, &params)?,
        None => DeviceState::fresh(&params),
    };
    println!("slot,input,w,read_current_a,write_energy_j");
    println!(
        "0,-,{:.12},{:.6e},0",
        state.w(),
        state.read_current(params.v_read, &params)
    );
    let mut energy = 0.0;
    for (i, &s) in slots.iter().enumerate() {
        let e = if s {
            state.pulse_energy(params.v_write, &params)
        } else {
            0.0
        };
        energy += e;
        state = state.step(s, &params);
        println!(
            "{},{},{:.12},{:.6e},{:.6e}",
            i + 1,
            u8::from(s),
            state.w(),
            state.read_current(params.v_read, &params),
            e
        );
    }
    eprintln!("total write energy {energy:.6e} J");
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => run(a, false),
        Command::Sweep(a) => run(a, true),
        Command::InspectDevice(a) => inspect(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.category().exit_code() as u8)
        }
    }
}
