use std::fs;
use std::io::Cursor;
use std::path::{Path, PathBuf};
use std::time::UNIX_EPOCH;

use image::{ImageFormat, ImageReader};
use sha2::{Digest, Sha256};

use crate::error::{Result, ServiceError};

pub const DEFAULT_THUMB_PX: u32 = 128;
pub const MAX_THUMB_PX: u32 = 2048;

/// PNG thumbnails on disk, keyed by source path, modification time and size.
#[derive(Debug, Clone)]
pub struct ThumbCache {
    dir: PathBuf,
}

impl ThumbCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        ThumbCache { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn key(path: &Path, px: u32) -> Result<String> {
        let mtime = fs::metadata(path)?
            .modified()?
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_nanos())
            .unwrap_or(0);
        let mut h = Sha256::new();
        h.update(path.to_string_lossy().as_bytes());
        h.update(mtime.to_le_bytes());
        h.update(px.to_le_bytes());
        Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
    }

    /// PNG bytes of the image scaled so its longer side is `px`. Images
    /// already smaller are not enlarged.
    pub fn thumbnail(&self, path: &Path, px: u32) -> Result<Vec<u8>> {
        if px == 0 || px > MAX_THUMB_PX {
            return Err(ServiceError::BadRequest(format!("px must be in 1..={MAX_THUMB_PX}")));
        }
        let cached = self.dir.join(format!("{}.png", Self::key(path, px)?));
        if let Ok(bytes) = fs::read(&cached) {
            return Ok(bytes);
        }
        let img = ImageReader::open(path)?
            .with_guessed_format()?
            .decode()
            .map_err(|e| ServiceError::Image(format!("{}: {e}", path.display())))?;
        let thumb = if img.width().max(img.height()) > px {
            img.thumbnail(px, px)
        } else {
            img
        };
        let mut out = Vec::new();
        thumb
            .write_to(&mut Cursor::new(&mut out), ImageFormat::Png)
            .map_err(|e| ServiceError::Image(e.to_string()))?;
        fs::create_dir_all(&self.dir)?;
        let tmp = cached.with_extension(format!("{}.tmp", std::process::id()));
        fs::write(&tmp, &out)?;
        fs::rename(&tmp, &cached)?;
        Ok(out)
    }
}

/// MIME type from the file extension, falling back to octet-stream.
pub fn content_type(path: &Path) -> &'static str {
    ImageFormat::from_path(path)
        .map(|f| f.to_mime_type())
        .unwrap_or("application/octet-stream")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scales_longest_side_and_caches() {
        let dir = tempfile::tempdir().unwrap();
        let src = dir.path().join("a.png");
        image::RgbImage::from_fn(300, 150, |x, y| image::Rgb([x as u8, y as u8, 7])).save(&src).unwrap();
        let cache = ThumbCache::new(dir.path().join("cache"));
        let bytes = cache.thumbnail(&src, 128).unwrap();
        let img = image::load_from_memory(&bytes).unwrap();
        assert_eq!((img.width(), img.height()), (128, 64));
        assert_eq!(fs::read_dir(cache.dir()).unwrap().count(), 1);
        assert_eq!(cache.thumbnail(&src, 128).unwrap(), bytes);
        assert!(cache.thumbnail(&src, 0).is_err());
        assert_eq!(content_type(&src), "image/png");
    }
}
