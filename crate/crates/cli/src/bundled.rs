//! The bundled experiment configs, compiled in so tests and the default
//! verification sweep do not depend on working-directory layout.

use crate::config::ConfigDoc;
use crate::{CliError, Result};

pub const NAMES: [&str; 7] = [
    "classical",
    "gnormal",
    "convex-clt",
    "fixed-penalty",
    "infsup",
    "lln-y",
    "mean-shift",
];

pub fn text(name: &str) -> Option<&'static str> {
    Some(match name {
        "classical" => include_str!("../../../configs/classical.toml"),
        "gnormal" => include_str!("../../../configs/gnormal.toml"),
        "convex-clt" => include_str!("../../../configs/convex-clt.toml"),
        "fixed-penalty" => include_str!("../../../configs/fixed-penalty.toml"),
        "infsup" => include_str!("../../../configs/infsup.toml"),
        "lln-y" => include_str!("../../../configs/lln-y.toml"),
        "mean-shift" => include_str!("../../../configs/mean-shift.toml"),
        _ => return None,
    })
}

pub fn config(name: &str) -> Result<ConfigDoc> {
    let text = text(name)
        .ok_or_else(|| CliError::Config(format!("no bundled config named {name:?}")))?;
    ConfigDoc::from_toml(text)
}
