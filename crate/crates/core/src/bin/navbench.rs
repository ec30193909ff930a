use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use navbench::exec::Exec;
use navbench::sim::{
    load_dir, plot_trace, run_episode, run_suite, write_csv, PlannerKind, Scenario,
};
use navbench::vision::{Camera, ImageRGB, LaneConfig, LaneDetector};

const EXIT_CONFIG: u8 = 2;
const EXIT_COLLISION: u8 = 3;

#[derive(Parser)]
#[command(
    name = "navbench",
    version,
    about = "Ackermann local-planner benchmark"
)]
struct Cli {
    /// Run sequentially instead of using the thread pool.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one episode.
    Run {
        scenario: PathBuf,
        #[arg(long, value_parser = parse_planner)]
        planner: Option<PlannerKind>,
        /// JSON-lines trace output.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// SVG plot output.
        #[arg(long)]
        plot: Option<PathBuf>,
        /// Exit with status 3 when the episode ends in a collision.
        #[arg(long)]
        strict: bool,
    },
    /// Run every scenario in a directory with every planner.
    Suite {
        dir: PathBuf,
        #[arg(long, default_value = "results.csv")]
        out: PathBuf,
    },
    /// Detect the lane in a P6 image with the default camera.
    LaneDetect {
        image: PathBuf,
        /// Vehicle speed used for the lookahead distance.
        #[arg(long, default_value_t = 0.5)]
        speed: f64,
    },
}

fn parse_planner(s: &str) -> Result<PlannerKind, String> {
    s.parse()
}

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let exec = if cli.sequential {
        Exec::Sequential
    } else {
        Exec::Parallel
    };
    match cli.command {
        Command::Run {
            scenario,
            planner,
            trace,
            plot,
            strict,
        } => {
            let scn = match Scenario::load(&scenario) {
                Ok(s) => s,
                Err(e) => return fail(EXIT_CONFIG, e),
            };
            let planner = planner.or(scn.file.planner).unwrap_or(PlannerKind::Teb);
            let (metrics, log) = match run_episode(&scn, planner, exec) {
                Ok(r) => r,
                Err(e) => return fail(EXIT_CONFIG, e),
            };
            if let Some(path) = trace {
                let res = File::create(&path).and_then(|f| {
                    let mut w = BufWriter::new(f);
                    log.write_jsonl(&mut w)?;
                    w.flush()
                });
                if let Err(e) = res {
                    return fail(1, format!("{}: {e}", path.display()));
                }
            }
            if let Some(path) = plot {
                if let Err(e) = std::fs::write(&path, plot_trace(&log, &scn)) {
                    return fail(1, format!("{}: {e}", path.display()));
                }
            }
            println!(
                "{}",
                serde_json::to_string(&metrics).expect("metrics serialize")
            );
            if strict && metrics.collided {
                return ExitCode::from(EXIT_COLLISION);
            }
            ExitCode::SUCCESS
        }
        Command::Suite { dir, out } => {
            let scenarios = match load_dir(&dir) {
                Ok(s) if !s.is_empty() => s,
                Ok(_) => {
                    return fail(
                        EXIT_CONFIG,
                        format!("no .toml scenarios in {}", dir.display()),
                    )
                }
                Err(e) => return fail(EXIT_CONFIG, format!("{}: {e}", dir.display())),
            };
            let rows = run_suite(&scenarios, &PlannerKind::ALL, exec);
            let res = File::create(&out)
                .map_err(csv::Error::from)
                .and_then(|f| write_csv(&rows, BufWriter::new(f)));
            if let Err(e) = res {
                return fail(1, format!("{}: {e}", out.display()));
            }
            for r in &rows {
                match (&r.metrics, &r.error) {
                    (Some(m), _) => println!(
                        "{} {}: avoided {}/{} collided={} completed={}",
                        r.scenario,
                        r.planner,
                        m.obstacles_avoided,
                        m.obstacles_total,
                        m.collided,
                        m.completed
                    ),
                    (None, Some(e)) => println!("{} {}: error: {e}", r.scenario, r.planner),
                    (None, None) => {}
                }
            }
            ExitCode::SUCCESS
        }
        Command::LaneDetect { image, speed } => {
            let img = match File::open(&image)
                .map_err(navbench::vision::ImageError::from)
                .and_then(|f| ImageRGB::read_ppm(BufReader::new(f)))
            {
                Ok(i) => i,
                Err(e) => return fail(EXIT_CONFIG, format!("{}: {e}", image.display())),
            };
            let camera = Camera::default();
            if img.width() != camera.width || img.height() != camera.height {
                return fail(
                    EXIT_CONFIG,
                    format!(
                        "expected a {}x{} image, got {}x{}",
                        camera.width,
                        camera.height,
                        img.width(),
                        img.height()
                    ),
                );
            }
            let target = LaneDetector::new(LaneConfig::default(), camera).detect(&img, speed);
            println!(
                "{}",
                serde_json::to_string(&target).expect("target serializes")
            );
            ExitCode::SUCCESS
        }
    }
}
