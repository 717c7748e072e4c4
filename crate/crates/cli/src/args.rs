use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fdd_sim::eval::HarqMode;
use fdd_sim::Method;

#[derive(Debug, Parser)]
#[command(name = "fdd-sim", version, about = "Feedback-free FDD downlink MIMO link-level simulator")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML file with [system], [solver], [nomp], [ecm], [latency] and [energy] tables.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Master seed; trial seeds are derived from it.
    #[arg(long, global = true, default_value_t = 7)]
    pub seed: u64,

    /// Monte-Carlo trials per sweep point.
    #[arg(long, global = true, default_value_t = 200, value_parser = clap::value_parser!(u64).range(1..))]
    pub trials: u64,

    /// Output directory (default: $FDD_SIM_OUT_DIR, else ./out).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,

    /// Comma-separated method names (default: all).
    #[arg(long, global = true, value_delimiter = ',', value_parser = parse_method)]
    pub methods: Option<Vec<Method>>,

    /// Worker threads; 1 runs serially.
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    pub threads: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Min spectral efficiency against downlink SNR.
    SweepSe {
        /// SNR points in dB, `start:step:stop` or a single value.
        #[arg(long, default_value = "0:10:40", allow_hyphen_values = true, value_parser = parse_points)]
        snr: Points,
    },
    /// Min spectral efficiency against the gain correlation factor.
    SweepEta {
        /// Comma-separated eta values.
        #[arg(long, default_value = "1.0,0.9,0.7,0.5", value_parser = parse_points)]
        eta: Points,
        #[arg(long, default_value_t = 30.0, allow_hyphen_values = true)]
        snr: f64,
    },
    /// HARQ latency distribution at one SNR.
    Latency {
        #[arg(long, default_value_t = 30.0, allow_hyphen_values = true)]
        snr: f64,
        /// Payload in bits.
        #[arg(long)]
        payload: Option<f64>,
        #[arg(long, value_enum)]
        harq_mode: Option<HarqArg>,
    },
    /// Energy efficiency against downlink SNR.
    Energy {
        #[arg(long, default_value = "-10:10:30", allow_hyphen_values = true, value_parser = parse_points)]
        snr: Points,
    },
    /// NOMP on one synthetic pilot; prints per-path parameter errors.
    Estimate {
        /// Uplink pilot SNR in dB (default from config).
        #[arg(long, allow_hyphen_values = true)]
        uplink_snr: Option<f64>,
    },
    /// Fast invariant checks.
    Selftest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum HarqArg {
    Fixed,
    Redraw,
}

impl From<HarqArg> for HarqMode {
    fn from(a: HarqArg) -> Self {
        match a {
            HarqArg::Fixed => HarqMode::FixedChannel,
            HarqArg::Redraw => HarqMode::Redraw,
        }
    }
}

/// Sweep points parsed from `start:step:stop`, a comma list, or one value.
#[derive(Debug, Clone, PartialEq)]
pub struct Points(pub Vec<f64>);

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: fdd_sim::Error| e.to_string())
}

fn number(s: &str) -> Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("`{s}` is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{s}` is not finite"))
    }
}

pub fn parse_points(s: &str) -> Result<Points, String> {
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [start, step, stop] => {
            let (start, step, stop) = (number(start)?, number(step)?, number(stop)?);
            if step <= 0.0 {
                return Err("range step must be positive".into());
            }
            if stop < start {
                return Err("range stop is below start".into());
            }
            let n = ((stop - start) / step + 1e-9).floor() as usize;
            Ok(Points((0..=n).map(|i| start + i as f64 * step).collect()))
        }
        [list] => list.split(',').map(number).collect::<Result<Vec<_>, _>>().map(Points),
        _ => Err(format!("`{s}` is neither start:step:stop nor a list")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn ranges_and_lists() {
        assert_eq!(parse_points("0:10:40").unwrap().0, vec![0.0, 10.0, 20.0, 30.0, 40.0]);
        assert_eq!(parse_points("-10:10:30").unwrap().0.len(), 5);
        assert_eq!(parse_points("0:0.3:1").unwrap().0.len(), 4);
        assert_eq!(parse_points("30").unwrap().0, vec![30.0]);
        assert_eq!(parse_points("1.0,0.9,0.5").unwrap().0, vec![1.0, 0.9, 0.5]);
        assert!(parse_points("0:0:10").is_err());
        assert!(parse_points("10:1:0").is_err());
        assert!(parse_points("1:2").is_err());
        assert!(parse_points("a,b").is_err());
        assert!(parse_points("nan").is_err());
    }

    #[test]
    fn command_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn global_flags_after_subcommand() {
        let cli = Cli::try_parse_from(["fdd-sim", "sweep-se", "--snr", "-10:5:0", "--trials", "3", "--methods", "rzf,mrt"]).unwrap();
        assert_eq!(cli.common.trials, 3);
        assert_eq!(cli.common.methods, Some(vec![Method::Rzf, Method::Mrt]));
        match cli.command {
            Command::SweepSe { snr } => assert_eq!(snr.0, vec![-10.0, -5.0, 0.0]),
            other => panic!("{other:?}"),
        }
        assert!(Cli::try_parse_from(["fdd-sim", "selftest", "--trials", "0"]).is_err());
        assert!(Cli::try_parse_from(["fdd-sim", "sweep-se", "--methods", "wmmse"]).is_err());
    }
}
