//! Regenerate the shipped TOML configurations from the presets.
//!
//! ```sh
//! cargo run --example write_configs
//! ```

use crushed_ice::harness::{
    preset_crushed_ice_3d, preset_crushed_ice_affine, preset_dirichlet, preset_schrodinger,
};

fn main() {
    let dir = std::path::Path::new("crates/crushed-ice/configs");
    std::fs::create_dir_all(dir).unwrap();
    let seed = 20260809;
    for (name, text) in [
        ("crushed_ice_std3d.toml", preset_crushed_ice_3d(seed).to_toml()),
        ("crushed_ice_affine.toml", preset_crushed_ice_affine(seed).to_toml()),
        ("schrodinger_cn100.toml", preset_schrodinger(seed, 100.0).to_toml()),
        ("dirichlet_std3d.toml", preset_dirichlet(seed).to_toml()),
    ] {
        std::fs::write(dir.join(name), text).unwrap();
        println!("wrote configs/{name}");
    }
}
