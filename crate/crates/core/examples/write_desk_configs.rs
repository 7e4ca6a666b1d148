//! Writes the desk-scale operator files used by the sample run configurations.
//!
//! Usage: `cargo run -p floquet-core --example write_desk_configs [DIR]`
//! (default `configs`).

use std::path::PathBuf;

use floquet_core::desk::{cosine_example, cosine_identity_p2};
use floquet_core::OperatorSpec;

fn main() -> floquet_core::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "configs".into()));
    std::fs::create_dir_all(&dir).map_err(|source| floquet_core::Error::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let pi2 = std::f64::consts::PI.powi(2);
    let specs: [(&str, OperatorSpec); 4] = [
        ("free.toml", OperatorSpec::free(3, 2)?),
        ("cosine_pi2.toml", cosine_example(pi2)),
        ("cosine_small.toml", cosine_example(1.0)),
        ("identity_p2.toml", cosine_identity_p2()),
    ];
    for (name, spec) in specs {
        let path = dir.join(name);
        std::fs::write(&path, spec.to_toml()).map_err(|source| floquet_core::Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
