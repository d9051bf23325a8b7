//! Domain types: tile grid geometry, video metadata and configuration.

mod config;
mod grid;
mod meta;
mod synth;

pub use config::{shrink_factor, Config, Intervention, DEFAULT_SFOV_LADDER};
pub use grid::{tiles_overlapping_viewport, wrap_yaw, TileGrid};
pub use meta::{
    load_metadata, parse_metadata, save_metadata, ChunkMeta, MetadataFile, MetadataRecord,
    TileMeta, VideoMeta,
};
pub use synth::{synthesize_metadata, MetadataSpec};
