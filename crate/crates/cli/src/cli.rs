use std::ffi::OsString;
use std::net::SocketAddr;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use infinicity_core::latentgrid::PixelRect;
use infinicity_core::voxelworld::Completion;

use crate::io::parse_size;
use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "infinicity", version, about = "Unbounded city maps, voxel worlds and rendered views")]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize and edit map tiles.
    #[command(subcommand)]
    Map(MapCommand),
    /// Voxelize a labeled triangle mesh into blocks and tiles.
    Ingest(IngestArgs),
    #[command(subcommand)]
    World(WorldCommand),
    #[command(subcommand)]
    Camera(CameraCommand),
    /// Render semantic, depth and shaded frames for a list of poses.
    Render(RenderArgs),
    /// Occupancy statistics of a world.
    Stats(StatsArgs),
    #[command(subcommand)]
    Pipeline(PipelineCommand),
    /// Run the HTTP service.
    Serve(ServeArgs),
}

#[derive(Debug, Subcommand)]
pub enum MapCommand {
    /// Generate the map over a pixel rectangle.
    Synth(SynthArgs),
    /// Redraw the latents anchored in a rectangle of a saved field.
    Resample(ResampleArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Ignored when --field is given.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// X,Y,W,H in map pixels.
    #[arg(long, allow_hyphen_values = true)]
    pub rect: PixelRect,
    #[arg(long)]
    pub out: PathBuf,
    /// Synthesize from a saved latent field instead of the seed.
    #[arg(long)]
    pub field: Option<PathBuf>,
    /// Write the latent field used.
    #[arg(long)]
    pub save_field: Option<PathBuf>,
    /// Apply the default bilateral cleaning to heights.
    #[arg(long)]
    pub clean: bool,
}

#[derive(Debug, Args)]
pub struct ResampleArgs {
    #[arg(long)]
    pub field: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    pub rect: PixelRect,
    #[arg(long)]
    pub seed: u64,
    /// Defaults to rewriting --field.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub mesh: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub voxel_size: f64,
}

#[derive(Debug, Subcommand)]
pub enum WorldCommand {
    /// Lift, complete and assemble every `.icdn` tile of a directory.
    ///
    /// A tile named `<name>_<bx>_<by>.icdn` starts at block (bx, by); any
    /// other name starts at block (0, 0).
    Build(BuildArgs),
    /// Voxel centers as `x y z` lines.
    ExportPoints(ExportArgs),
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    #[arg(long)]
    pub tiles: PathBuf,
    #[arg(long, default_value = "pillar")]
    pub completion: Completion,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub world: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum CameraCommand {
    /// Refined walkable mask of a world, aligned to its voxel bounds.
    Mask(MaskArgs),
    /// Draw poses from a walkable mask.
    Sample(SampleArgs),
}

#[derive(Debug, Args)]
pub struct MaskArgs {
    #[arg(long)]
    pub world: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = infinicity_core::camsample::DEFAULT_MIN_COMPONENT_PX)]
    pub min_component_px: usize,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub world: PathBuf,
    /// Gray PNG, nonzero pixels walkable.
    #[arg(long)]
    pub mask: PathBuf,
    /// Map position of the mask's top-left pixel; defaults to the world's corner.
    #[arg(long, value_parser = parse_origin, allow_hyphen_values = true)]
    pub mask_origin: Option<(i64, i64)>,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = infinicity_core::camsample::DEFAULT_EYE_HEIGHT_M)]
    pub eye_height_m: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long)]
    pub world: PathBuf,
    /// JSON lines of poses.
    #[arg(long)]
    pub poses: PathBuf,
    /// WxH in pixels.
    #[arg(long, value_parser = parse_size, default_value = "512x512")]
    pub size: (u32, u32),
    /// Horizontal field of view in degrees.
    #[arg(long, default_value_t = 60.0)]
    pub fov: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub world: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum PipelineCommand {
    /// Map through rendered frames, with a manifest of artifact hashes.
    Run(PipelineArgs),
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[arg(long)]
    pub seed: u64,
    /// WxH in map pixels, multiples of 64.
    #[arg(long, value_parser = parse_size, default_value = "128x128")]
    pub extent: (u32, u32),
    /// Map position of the top-left pixel, multiples of 64.
    #[arg(long, value_parser = parse_origin, default_value = "0,0", allow_hyphen_values = true)]
    pub origin: (i64, i64),
    #[arg(long, default_value = "pillar")]
    pub completion: Completion,
    #[arg(long, default_value_t = 4)]
    pub cameras: usize,
    /// Defaults to --seed.
    #[arg(long)]
    pub camera_seed: Option<u64>,
    #[arg(long, default_value_t = infinicity_core::camsample::DEFAULT_EYE_HEIGHT_M)]
    pub eye_height_m: f64,
    #[arg(long, default_value_t = infinicity_core::camsample::DEFAULT_MIN_COMPONENT_PX)]
    pub min_component_px: usize,
    /// Frame size, WxH.
    #[arg(long, value_parser = parse_size, default_value = "256x192")]
    pub size: (u32, u32),
    #[arg(long, default_value_t = 60.0)]
    pub fov: f64,
    #[arg(long, default_value = "pipeline-out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "INFINICITY_ADDR", default_value = "127.0.0.1:8080")]
    pub addr: SocketAddr,
    #[arg(long, default_value_t = 64)]
    pub max_sessions: usize,
    /// Cached native patches per session.
    #[arg(long, default_value_t = 1024)]
    pub patch_cache: usize,
    #[arg(long, default_value_t = 512 * 512)]
    pub max_world_px: u64,
    #[arg(long, default_value_t = 2048 * 2048)]
    pub max_tile_px: u64,
    #[arg(long, default_value_t = 1024 * 1024)]
    pub max_render_px: u64,
}

pub fn parse_origin(s: &str) -> Result<(i64, i64), String> {
    let (x, y) = s.split_once(',').ok_or_else(|| format!("expected X,Y, got {s:?}"))?;
    let p = |v: &str| v.trim().parse::<i64>().map_err(|e| format!("{v:?}: {e}"));
    Ok((p(x)?, p(y)?))
}

/// Expands `--config FILE` into flags.
///
/// The file is TOML with one key per long flag (`eye_height_m` or
/// `eye-height-m`). Its flags are placed ahead of those on the command line,
/// which therefore win. `true` adds a bare switch, `false` omits it.
pub fn expand_config(args: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let mut rest = Vec::with_capacity(args.len());
    let mut config = None;
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            let path = it.next().ok_or_else(|| CliError::Config("--config needs a file".into()))?;
            config = Some(PathBuf::from(path));
        } else if let Some(p) = s.strip_prefix("--config=") {
            config = Some(PathBuf::from(p));
        } else {
            rest.push(a);
        }
    }
    let Some(path) = config else { return Ok(rest) };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let flags = config_flags(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let at = rest
        .iter()
        .skip(1)
        .position(|a| a.to_string_lossy().starts_with('-'))
        .map_or(rest.len(), |i| i + 1);
    rest.splice(at..at, flags);
    Ok(rest)
}

fn config_flags(text: &str) -> Result<Vec<OsString>, String> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| e.to_string())?;
    let mut out = Vec::new();
    for (key, value) in table {
        let flag = OsString::from(format!("--{}", key.replace('_', "-")));
        let text = match value {
            toml::Value::Boolean(true) => {
                out.push(flag);
                continue;
            }
            toml::Value::Boolean(false) => continue,
            toml::Value::String(s) => s,
            toml::Value::Integer(i) => i.to_string(),
            toml::Value::Float(f) => f.to_string(),
            other => return Err(format!("{key}: unsupported value {other}")),
        };
        out.push(flag);
        out.push(text.into());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn argv(s: &str) -> Vec<OsString> {
        s.split_whitespace().map(OsString::from).collect()
    }

    #[test]
    fn config_goes_before_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "seed = 7\nextent = \"192x64\"\ncompletion = \"watertight\"\n").unwrap();
        let args = argv(&format!("infinicity pipeline run --config {} --seed 9", path.display()));
        let expanded = expand_config(args).unwrap();
        let cli = Cli::try_parse_from(&expanded).unwrap();
        let Command::Pipeline(PipelineCommand::Run(run)) = cli.command else { panic!() };
        assert_eq!(run.seed, 9);
        assert_eq!(run.extent, (192, 64));
        assert_eq!(run.completion, Completion::Watertight);
    }

    #[test]
    fn unknown_config_key_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "sed = 7\n").unwrap();
        let expanded = expand_config(argv(&format!("infinicity stats --config={}", path.display()))).unwrap();
        assert!(Cli::try_parse_from(&expanded).is_err());
    }

    #[test]
    fn rect_and_origin_flags() {
        let cli = Cli::try_parse_from(argv("infinicity map synth --rect -64,0,128,64 --out t.icdn")).unwrap();
        let Command::Map(MapCommand::Synth(s)) = cli.command else { panic!() };
        assert_eq!(s.rect, PixelRect::new(-64, 0, 128, 64));
        assert_eq!(parse_origin("-64, 128"), Ok((-64, 128)));
    }
}
