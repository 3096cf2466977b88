use std::io::{self, Write};
use std::path::{Component, Path, PathBuf};

/// Writes `bytes` to `path` through a temporary file in the same directory
/// followed by a rename, so readers never observe a partial file.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        tmp.as_file()
            .set_permissions(std::fs::Permissions::from_mode(0o644))?;
    }
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Removes `.` and resolves `..` components without touching the filesystem.
pub(crate) fn normalize_lexically(path: &Path) -> PathBuf {
    let mut out = PathBuf::new();
    for comp in path.components() {
        match comp {
            Component::CurDir => {}
            Component::ParentDir => {
                if !out.pop() {
                    out.push("..");
                }
            }
            other => out.push(other.as_os_str()),
        }
    }
    out
}

pub(crate) fn absolutize(path: &Path) -> io::Result<PathBuf> {
    let abs = if path.is_absolute() {
        path.to_path_buf()
    } else {
        std::env::current_dir()?.join(path)
    };
    Ok(normalize_lexically(&abs))
}

// Values such as 0.815 are not representable and land a hair below the
// midpoint; the nudge keeps them rounding up as printed tables expect.
const HALF_UP_NUDGE: f64 = 1e-9;

/// Rounds half away from zero at `decimals` places.
pub fn round_half_up(value: f64, decimals: u32) -> f64 {
    let scale = 10f64.powi(decimals as i32);
    let scaled = value.abs() * scale;
    let rounded = (scaled + 0.5 + HALF_UP_NUDGE).floor() / scale;
    rounded.copysign(value)
}

/// Formats `value` with `decimals` places after half-up rounding.
pub fn format_half_up(value: f64, decimals: u32) -> String {
    let r = round_half_up(value, decimals);
    // avoid printing "-0.00"
    let r = if r == 0.0 { 0.0 } else { r };
    format!("{:.*}", decimals as usize, r)
}

/// Formats a fraction as a whole percentage, e.g. `0.8088` as `81%`.
pub fn format_percent(fraction: f64) -> String {
    format!("{}%", format_half_up(fraction * 100.0, 0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_up_rounds_representation_midpoints_up() {
        assert_eq!(format_half_up(0.815, 2), "0.82");
        assert_eq!(format_half_up(0.875, 2), "0.88");
        assert_eq!(format_half_up(0.8283, 2), "0.83");
        assert_eq!(format_half_up(0.8149, 2), "0.81");
        assert_eq!(format_half_up(-0.1613, 2), "-0.16");
        assert_eq!(format_half_up(-0.001, 2), "0.00");
    }

    #[test]
    fn percent_formatting() {
        assert_eq!(format_percent(203.0 / 251.0), "81%");
        assert_eq!(format_percent(1.0), "100%");
        assert_eq!(format_percent(0.0), "0%");
    }

    #[test]
    fn lexical_normalization() {
        assert_eq!(
            normalize_lexically(Path::new("/a/b/../c/./d")),
            PathBuf::from("/a/c/d")
        );
    }
}
