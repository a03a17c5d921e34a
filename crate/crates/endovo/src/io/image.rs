use std::io::Cursor;
use std::path::{Path, PathBuf};

use endovo_core::ImageBuffer;
use image::{DynamicImage, ImageFormat};

use super::{read_bytes, write_atomic, IoError};

const EXTENSIONS: [&str; 4] = ["png", "pgm", "ppm", "pnm"];

/// Decodes a PNG or PGM/PPM into `[0, 1]` intensities (8-bit data is divided
/// by 255, 16-bit by 65535). Alpha is dropped; gray+alpha stays gray.
pub fn read_image(path: &Path) -> Result<ImageBuffer, IoError> {
    let bytes = read_bytes(path)?;
    let img = image::load_from_memory(&bytes).map_err(|source| IoError::Image {
        path: path.to_path_buf(),
        source,
    })?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let (channels, data): (usize, Vec<f64>) = match &img {
        DynamicImage::ImageLuma8(_) | DynamicImage::ImageLumaA8(_) => {
            (1, img.to_luma8().into_raw().into_iter().map(|v| v as f64 / 255.0).collect())
        }
        DynamicImage::ImageLuma16(_) | DynamicImage::ImageLumaA16(_) => {
            (1, img.to_luma16().into_raw().into_iter().map(|v| v as f64 / 65535.0).collect())
        }
        DynamicImage::ImageRgb16(_) | DynamicImage::ImageRgba16(_) => {
            (3, img.to_rgb16().into_raw().into_iter().map(|v| v as f64 / 65535.0).collect())
        }
        _ => (3, img.to_rgb8().into_raw().into_iter().map(|v| v as f64 / 255.0).collect()),
    };
    ImageBuffer::new(w, h, channels, data).map_err(|e| IoError::parse(path, e.to_string()))
}

/// [`read_image`] followed by luma conversion (0.299 R + 0.587 G + 0.114 B).
pub fn read_gray(path: &Path) -> Result<ImageBuffer, IoError> {
    Ok(read_image(path)?.to_gray())
}

fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Writes an 8-bit image; the container follows the extension (`.png`,
/// `.pgm`, `.ppm`). Gray buffers become L8, three-channel buffers RGB8.
pub fn write_image(path: &Path, img: &ImageBuffer) -> Result<(), IoError> {
    let format = ImageFormat::from_path(path).map_err(|_| IoError::unsupported(path, "image extension"))?;
    let (w, h) = (img.width() as u32, img.height() as u32);
    let raw: Vec<u8> = img.data().iter().map(|&v| quantize(v)).collect();
    let dynamic = if img.channels() == 1 {
        DynamicImage::ImageLuma8(image::GrayImage::from_raw(w, h, raw).expect("buffer length checked by ImageBuffer"))
    } else {
        DynamicImage::ImageRgb8(image::RgbImage::from_raw(w, h, raw).expect("buffer length checked by ImageBuffer"))
    };
    let dynamic = match (format, img.channels()) {
        // PGM cannot carry colour, PPM cannot carry gray
        (ImageFormat::Pnm, 3) if has_ext(path, "pgm") => DynamicImage::ImageLuma8(dynamic.to_luma8()),
        (ImageFormat::Pnm, 1) if has_ext(path, "ppm") => DynamicImage::ImageRgb8(dynamic.to_rgb8()),
        _ => dynamic,
    };
    let mut out = Cursor::new(Vec::new());
    dynamic.write_to(&mut out, format).map_err(|source| IoError::Image {
        path: path.to_path_buf(),
        source,
    })?;
    write_atomic(path, &out.into_inner())
}

fn has_ext(path: &Path, ext: &str) -> bool {
    path.extension().and_then(|e| e.to_str()).is_some_and(|e| e.eq_ignore_ascii_case(ext))
}

/// Image files directly inside `dir`, sorted by file name.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>, IoError> {
    let entries = std::fs::read_dir(dir).map_err(|e| IoError::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| IoError::io(dir, e))?.path();
        if path.is_file() && EXTENSIONS.iter().any(|e| has_ext(&path, e)) {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_and_pgm_roundtrip_on_the_8_bit_grid() {
        let dir = tempfile::tempdir().unwrap();
        let img = ImageBuffer::from_fn_gray(7, 5, |x, y| ((x * 5 + y * 11) % 256) as f64 / 255.0);
        for name in ["a.png", "a.pgm"] {
            let p = dir.path().join(name);
            write_image(&p, &img).unwrap();
            assert_eq!(read_image(&p).unwrap(), img);
        }
    }

    #[test]
    fn colour_roundtrip_and_gray_conversion() {
        let dir = tempfile::tempdir().unwrap();
        let data: Vec<f64> = (0..4 * 3 * 3).map(|i| (i * 7 % 256) as f64 / 255.0).collect();
        let img = ImageBuffer::new(4, 3, 3, data).unwrap();
        let p = dir.path().join("c.ppm");
        write_image(&p, &img).unwrap();
        assert_eq!(read_image(&p).unwrap(), img);
        assert_eq!(read_gray(&p).unwrap(), img.to_gray());
    }

    #[test]
    fn listing_is_sorted_and_filtered() {
        let dir = tempfile::tempdir().unwrap();
        let img = ImageBuffer::filled(2, 2, 1, 0.5);
        for name in ["b.png", "a.png", "c.pgm"] {
            write_image(&dir.path().join(name), &img).unwrap();
        }
        std::fs::write(dir.path().join("notes.txt"), "x").unwrap();
        let names: Vec<_> = list_images(dir.path())
            .unwrap()
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect();
        assert_eq!(names, ["a.png", "b.png", "c.pgm"]);
    }

    #[test]
    fn unknown_extension_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let err = write_image(&dir.path().join("x.foo"), &ImageBuffer::filled(1, 1, 1, 0.0)).unwrap_err();
        assert!(matches!(err, IoError::Unsupported { .. }));
    }
}
