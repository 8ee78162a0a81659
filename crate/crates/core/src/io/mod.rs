//! File formats: binary PGM/PPM images, the binary bundle, and the JSON export
//! consumed by the browser explorer.

mod bundle;
mod pnm;
mod ui;

pub use bundle::{
    decode_bundle, encode_bundle, read_bundle, write_bundle, Bundle, BundleError, BUNDLE_MAGIC, BUNDLE_VERSION,
};
pub use pnm::{
    decode_pnm, encode_pgm, encode_ppm, read_gray, read_image, write_image, write_pgm, write_ppm, Decoded, ImageError,
};
pub use ui::{default_golden, export_ui_bundle, ui_document, write_ui_document, GoldenEntry, UiBundle};
