//! `hgs` — encode, decode, and inspect 3D Gaussian Splatting bitstreams.

use clap::{Args, Parser, Subcommand, ValueEnum};
use hgs_codec::bitstream::HgsBitstream;
use hgs_codec::geometry::adjust_cameras;
use hgs_codec::pipeline::{
    attribute_spectra, decode_stream, encode_cloud, reference_compact, EncodeConfig, RateMethod,
};
use hgs_codec::ply::{parse_cameras, parse_ply, write_cameras, write_ply};
use hgs_codec::quant::QuantizerKind;
use hgs_codec::Error;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "hgs",
    version,
    about = "Compression codec for 3D Gaussian Splatting point data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compress a 3DGS PLY file into an .hgs bitstream
    Encode(EncodeArgs),
    /// Decompress an .hgs bitstream back to a PLY file
    Decode(DecodeArgs),
    /// Report the rate allocation of an .hgs bitstream
    Inspect(InspectArgs),
    /// Per-attribute PCA energy spectra of a PLY file, as CSV
    PcaReport(PcaReportArgs),
    /// Encode, decode, and self-check a PLY file without writing outputs
    Verify(EncodeArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum QuantizerArg {
    Uq,
    Rq,
}

#[derive(Clone, Copy, ValueEnum)]
enum RateMethodArg {
    #[value(name = "1")]
    PrimitiveCount,
    #[value(name = "2")]
    FeatureBitDepth,
}

#[derive(Args)]
struct EncodeArgs {
    /// Input PLY file
    #[arg(short, long)]
    input: PathBuf,
    /// Output .hgs file (unused by `verify`)
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Position bit depth; also the default attribute bit depth
    #[arg(long, default_value_t = 16)]
    bd: u8,
    #[arg(long)]
    bd_color: Option<u8>,
    #[arg(long)]
    bd_opacity: Option<u8>,
    #[arg(long)]
    bd_scale: Option<u8>,
    #[arg(long)]
    bd_rotation: Option<u8>,
    /// Color latent width (DC and SH share it)
    #[arg(long, default_value_t = 3)]
    kc: u8,
    /// Rotation latent width
    #[arg(long, default_value_t = 2)]
    kr: u8,
    #[arg(long, value_enum, default_value = "rq")]
    quantizer: QuantizerArg,
    /// Ridge factor of the robust quantizer
    #[arg(long, default_value_t = 1e-2)]
    lambda: f64,
    /// Remove statistical outliers before normalization
    #[arg(long)]
    outliers: bool,
    #[arg(long, default_value_t = 50)]
    nb_neighbors: usize,
    #[arg(long, default_value_t = 2.0)]
    std_ratio: f64,
    /// Target coded size in bytes; enables rate control
    #[arg(long)]
    target_size: Option<u64>,
    /// Rate control method: 1 = prune primitives, 2 = reduce attribute BDs
    #[arg(long, value_enum, default_value = "1")]
    rate_method: RateMethodArg,
    /// Assumed lossless ratio of the entropy stage
    #[arg(long, default_value_t = 1.3)]
    lossless_ratio: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Code attribute channels directly instead of through RAHT
    #[arg(long)]
    bypass: bool,
    /// Latent-fit refinement epochs (PCA warm start; more epochs, better fit)
    #[arg(long, default_value_t = 3)]
    latent_epochs: usize,
    /// Camera list to adjust into the scaled frame
    #[arg(long)]
    cameras: Option<PathBuf>,
    /// Where to write the adjusted camera list
    #[arg(long)]
    cameras_out: Option<PathBuf>,
    /// Emit a machine-readable JSON summary on stdout
    #[arg(long)]
    report_json: bool,
}

#[derive(Args)]
struct DecodeArgs {
    /// Input .hgs file
    #[arg(short, long)]
    input: PathBuf,
    /// Output PLY file
    #[arg(short, long)]
    output: PathBuf,
    /// Map positions back to scene units instead of lattice coordinates
    #[arg(long)]
    denormalize: bool,
    /// Scene camera list to adjust with the recorded transform
    #[arg(long)]
    cameras_in: Option<PathBuf>,
    #[arg(long)]
    cameras_out: Option<PathBuf>,
    #[arg(long)]
    report_json: bool,
}

#[derive(Args)]
struct InspectArgs {
    /// Input .hgs file
    #[arg(short, long)]
    input: PathBuf,
    /// Emit key=value lines instead of the table
    #[arg(long)]
    kv: bool,
    #[arg(long)]
    report_json: bool,
}

#[derive(Args)]
struct PcaReportArgs {
    /// Input PLY file
    #[arg(short, long)]
    input: PathBuf,
    /// Output CSV path (stdout when omitted)
    #[arg(short, long)]
    output: Option<PathBuf>,
}

fn exit_code_for(err: &Error) -> u8 {
    match err.root() {
        Error::Config(_) => 2,
        Error::InfeasibleRate(_) => 4,
        Error::CorruptStream(_) => 5,
        _ => 3,
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>, Error> {
    std::fs::read(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Error> {
    std::fs::write(path, bytes).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}

fn config_from(args: &EncodeArgs) -> EncodeConfig {
    EncodeConfig {
        bd: args.bd,
        bd_color: args.bd_color,
        bd_opacity: args.bd_opacity,
        bd_scale: args.bd_scale,
        bd_rotation: args.bd_rotation,
        k_c: args.kc,
        k_r: args.kr,
        quantizer: match args.quantizer {
            QuantizerArg::Uq => QuantizerKind::Uniform,
            QuantizerArg::Rq => QuantizerKind::Robust,
        },
        lambda: args.lambda,
        outlier_removal: args.outliers,
        nb_neighbors: args.nb_neighbors,
        std_ratio: args.std_ratio,
        target_size: args.target_size,
        rate_method: match args.rate_method {
            RateMethodArg::PrimitiveCount => RateMethod::PrimitiveCount,
            RateMethodArg::FeatureBitDepth => RateMethod::FeatureBitDepth,
        },
        lossless_ratio: args.lossless_ratio,
        seed: args.seed,
        bypass: args.bypass,
        latent_epochs: args.latent_epochs,
        ..EncodeConfig::default()
    }
}

fn cmd_encode(args: &EncodeArgs) -> Result<(), Error> {
    let output = args
        .output
        .clone()
        .ok_or_else(|| Error::Config("encode requires --output".into()))?;
    let config = config_from(args);
    config.validate()?;
    let cloud = parse_ply(&read_file(&args.input)?)?;
    let (stream, summary) = encode_cloud(&cloud, &config)?;
    let bytes = stream.to_bytes()?;
    write_file(&output, &bytes)?;

    if let Some(cam_path) = &args.cameras {
        let out_path = args
            .cameras_out
            .clone()
            .ok_or_else(|| Error::Config("--cameras requires --cameras-out".into()))?;
        let cams = parse_cameras(&read_file(cam_path)?)?;
        let adjusted = adjust_cameras(&cams, &summary.transform);
        write_file(&out_path, &write_cameras(&adjusted))?;
    }

    if args.report_json {
        println!("{}", serde_json::to_string_pretty(&summary).unwrap());
    } else {
        print!("{}", summary_text(&summary));
    }
    Ok(())
}

fn summary_text(s: &hgs_codec::pipeline::EncodeSummary) -> String {
    let mut out = String::new();
    out.push_str(&format!("input primitives    {}\n", s.n_input));
    if s.outliers_removed > 0 {
        out.push_str(&format!("outliers removed    {}\n", s.outliers_removed));
    }
    out.push_str(&format!("duplicates removed  {}\n", s.duplicates_removed));
    if s.pruned > 0 {
        out.push_str(&format!("pruned              {}\n", s.pruned));
    }
    if s.bd_reduction > 0 {
        out.push_str(&format!("attribute BD cut    -{}\n", s.bd_reduction));
    }
    out.push_str(&format!("coded primitives    {}\n", s.n_coded));
    out.push_str(&format!("bits per primitive  {}\n", s.p_bit));
    out.push_str(&format!(
        "pre-codec size      {:.0} B ({:.2} MiB)\n",
        s.pre_codec_bytes,
        s.pre_codec_bytes / (1024.0 * 1024.0)
    ));
    out.push_str(&format!("estimated coded     {:.0} B\n", s.estimated_bytes));
    out.push_str(&format!("actual coded        {} B\n", s.actual_bytes));
    if let Some(t) = s.target_bytes {
        out.push_str(&format!("target              {t} B\n"));
    }
    if let Some(sched) = &s.schedule {
        if !sched.events.is_empty() {
            out.push_str(&format!(
                "prune schedule      {} events x {} primitives, epochs {}..{}\n",
                sched.events.len(),
                sched.per_event_count,
                sched.events.first().unwrap(),
                sched.events.last().unwrap()
            ));
        }
    }
    let c = &s.components.coded;
    out.push_str(&format!(
        "components (coded B)  position {:.0}, color {:.0}, opacity {:.0}, scale {:.0}, rotation {:.0}\n",
        c.position, c.color, c.opacity, c.scale, c.rotation
    ));
    out
}

fn cmd_decode(args: &DecodeArgs) -> Result<(), Error> {
    let stream = HgsBitstream::from_bytes(&read_file(&args.input)?)?;
    let result = decode_stream(&stream, args.denormalize)?;
    write_file(&args.output, &write_ply(&result.cloud)?)?;

    if let Some(cam_path) = &args.cameras_in {
        let out_path = args
            .cameras_out
            .clone()
            .ok_or_else(|| Error::Config("--cameras-in requires --cameras-out".into()))?;
        let cams = parse_cameras(&read_file(cam_path)?)?;
        let adjusted = if args.denormalize {
            cams
        } else {
            adjust_cameras(&cams, &result.transform)
        };
        write_file(&out_path, &write_cameras(&adjusted))?;
    }

    if args.report_json {
        let report = serde_json::json!({
            "primitives": result.cloud.len(),
            "denormalized": args.denormalize,
            "transform": result.transform,
        });
        println!("{}", serde_json::to_string_pretty(&report).unwrap());
    } else {
        println!(
            "decoded {} primitives ({})",
            result.cloud.len(),
            if args.denormalize {
                "scene units"
            } else {
                "lattice coordinates"
            }
        );
    }
    Ok(())
}

fn cmd_inspect(args: &InspectArgs) -> Result<(), Error> {
    let stream = HgsBitstream::from_bytes(&read_file(&args.input)?)?;
    let report = stream.inspect();
    if args.report_json {
        println!("{}", serde_json::to_string_pretty(&report).unwrap());
    } else if args.kv {
        print!("{}", report.to_kv());
    } else {
        print!("{}", report.to_text());
    }
    Ok(())
}

fn cmd_pca_report(args: &PcaReportArgs) -> Result<(), Error> {
    let cloud = parse_ply(&read_file(&args.input)?)?;
    let mut csv = String::from("group,component,energy_fraction\n");
    for (name, spectrum) in attribute_spectra(&cloud)? {
        for (i, e) in spectrum.iter().enumerate() {
            csv.push_str(&format!("{name},{i},{e}\n"));
        }
    }
    match &args.output {
        Some(path) => write_file(path, csv.as_bytes())?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn cmd_verify(args: &EncodeArgs) -> Result<(), Error> {
    let config = config_from(args);
    config.validate()?;
    let cloud = parse_ply(&read_file(&args.input)?)?;

    let (stream, _) = encode_cloud(&cloud, &config)?;
    let bytes = stream.to_bytes()?;
    let (stream2, _) = encode_cloud(&cloud, &config)?;
    let deterministic = stream2.to_bytes()? == bytes;
    println!(
        "deterministic bytes        {}",
        if deterministic { "PASS" } else { "FAIL" }
    );

    let reparsed = HgsBitstream::from_bytes(&bytes)?;
    let container_ok = reparsed == stream;
    println!(
        "container round trip       {}",
        if container_ok { "PASS" } else { "FAIL" }
    );

    let decoded = decode_stream(&reparsed, false)?;
    let reference = reference_compact(&cloud, &config)?;
    let positions_ok = decoded.cloud.len() == reference.len()
        && decoded
            .cloud
            .positions
            .iter()
            .zip(&reference.positions)
            .all(|(got, want)| [got[0] as i32, got[1] as i32, got[2] as i32] == *want);
    println!(
        "position round trip        {}",
        if positions_ok { "PASS" } else { "FAIL" }
    );

    if deterministic && container_ok && positions_ok {
        println!(
            "verify: PASS ({} primitives, {} B)",
            decoded.cloud.len(),
            bytes.len()
        );
        Ok(())
    } else {
        Err(Error::Data {
            context: "verification failed".into(),
            index: 0,
        })
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Encode(args) => cmd_encode(args),
        Command::Decode(args) => cmd_decode(args),
        Command::Inspect(args) => cmd_inspect(args),
        Command::PcaReport(args) => cmd_pca_report(args),
        Command::Verify(args) => cmd_verify(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
