use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use ckm_beamforming::arrays::{import_paths_csv, UpaGeometry};
use ckm_beamforming::codebooks::Codebook;
use ckm_beamforming::experiments::{
    build_bim_map, build_cam_map, run_experiment, sample_locations, scene_paths, summarize, write_csv,
    write_summary_csv, CkmConfig, ExperimentConfig,
};
use ckm_beamforming::random::derive_seed;

#[derive(Parser)]
#[command(name = "ckmbf", version, about = "Channel-knowledge-map aided hybrid beamforming experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MapKind {
    Cam,
    Bim,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte-Carlo experiment and write per-trial records.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides `master_seed`.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
        /// Also write per-(method, M_t) means here.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Build a CAM or BIM from the synthetic scene.
    BuildMap {
        #[arg(long, value_enum)]
        kind: MapKind,
        #[arg(long)]
        samples: usize,
        #[arg(long)]
        out: PathBuf,
        /// Scene, array and map settings; defaults apply without it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// BS array for BIM codebooks as `NZxNY`; defaults to the first configured array.
        #[arg(long)]
        tx: Option<String>,
    },
    /// Check a path CSV and print a per-location summary; optionally build a CAM from it.
    ImportPaths {
        csv: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

const DEFAULT_CONFIG: &str = r#"
master_seed = 1
trials = 1
block_length = 1200
snr_db = 100.0
methods = ["cam", "bim"]

[arrays]
tx = [[16, 16]]
rx = [4, 4]
m_t_rf = 4
m_r_rf = 4
"#;

fn load_config(path: Option<&PathBuf>) -> Result<ExperimentConfig> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        None => DEFAULT_CONFIG.to_string(),
    };
    Ok(ExperimentConfig::from_toml(&text)?)
}

fn parse_array(s: &str) -> Result<UpaGeometry> {
    let (z, y) = s.split_once('x').context("array must look like 16x16")?;
    let (z, y): (usize, usize) = (z.trim().parse()?, y.trim().parse()?);
    if z == 0 || y == 0 {
        bail!("array sizes must be positive");
    }
    Ok(UpaGeometry::new(z, y))
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run {
            config,
            out,
            seed,
            threads,
            summary,
        } => {
            let mut cfg = load_config(Some(&config))?;
            if let Some(s) = seed {
                cfg.master_seed = s;
            }
            let records = run_experiment(&cfg, threads)?;
            write_csv(&records, BufWriter::new(File::create(&out)?))?;
            let rows = summarize(&records);
            println!("{:<10} {:>6} {:>7} {:>12} {:>12} {:>9}", "method", "M_t", "trials", "eff_rate", "std_err", "N_tr");
            for r in &rows {
                println!(
                    "{:<10} {:>6} {:>7} {:>12.4} {:>12.4} {:>9.1}",
                    r.method.name(),
                    r.m_t,
                    r.trials,
                    r.mean_effective_rate,
                    r.std_error,
                    r.mean_n_tr
                );
            }
            if let Some(p) = summary {
                write_summary_csv(&rows, BufWriter::new(File::create(p)?))?;
            }
            eprintln!("wrote {} records to {}", records.len(), out.display());
        }
        Command::BuildMap {
            kind,
            samples,
            out,
            config,
            seed,
            tx,
        } => {
            let cfg = load_config(config.as_ref())?;
            let scene = cfg.scene.build()?;
            let ckm = CkmConfig {
                samples,
                ..cfg.ckm.clone()
            };
            let locs = sample_locations(&scene, samples, derive_seed(seed, &[0]));
            let paths = scene_paths(&scene, &locs)?;
            let db = match kind {
                MapKind::Cam => build_cam_map(&paths, &ckm)?,
                MapKind::Bim => {
                    let tx = match tx {
                        Some(s) => parse_array(&s)?,
                        None => cfg.tx_geometries()[0],
                    };
                    let f = Codebook::kronecker_dft(tx, cfg.arrays.oversampling)?;
                    let w = Codebook::kronecker_dft(cfg.rx_geometry(), cfg.arrays.oversampling)?;
                    build_bim_map(&paths, &f, &w, &ckm)?
                }
            };
            db.save(BufWriter::new(File::create(&out)?))?;
            eprintln!("wrote {samples}-sample map to {}", out.display());
        }
        Command::ImportPaths { csv, out, config } => {
            let sets = import_paths_csv(BufReader::new(
                File::open(&csv).with_context(|| format!("opening {}", csv.display()))?,
            ))?;
            println!("{:<8} {:>10} {:>10} {:>10} {:>6} {:>14}", "index", "x", "y", "z", "paths", "power_db");
            for (i, s) in sets.iter().enumerate() {
                let p = s.total_power();
                let db = if p > 0.0 { 10.0 * p.log10() } else { f64::NEG_INFINITY };
                println!(
                    "{:<8} {:>10.3} {:>10.3} {:>10.3} {:>6} {:>14.2}",
                    i,
                    s.location[0],
                    s.location[1],
                    s.location[2],
                    s.len(),
                    db
                );
            }
            if let Some(out) = out {
                let cfg = load_config(config.as_ref())?;
                let db = build_cam_map(&sets, &cfg.ckm)?;
                db.save(BufWriter::new(File::create(&out)?))?;
                eprintln!("wrote CAM with {} samples to {}", sets.len(), out.display());
            }
        }
    }
    Ok(())
}
