use std::path::Path;

use image::DynamicImage;

use crate::grid::Grid;

use super::SemanticsError;

/// Per-pixel integer labels; label 0 means "no caption".
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticMask {
    pub labels: Grid<u32>,
    pub label_count: u32,
}

impl SemanticMask {
    /// Validates that every label is below `label_count`.
    pub fn new(labels: Grid<u32>, label_count: u32) -> Result<Self, SemanticsError> {
        let w = labels.width();
        if let Some((i, &value)) = labels
            .as_slice()
            .iter()
            .enumerate()
            .find(|(_, &v)| v >= label_count)
        {
            return Err(SemanticsError::LabelOutOfRange {
                x: i % w,
                y: i / w,
                value,
                label_count,
            });
        }
        Ok(Self {
            labels,
            label_count,
        })
    }

    pub fn width(&self) -> usize {
        self.labels.width()
    }

    pub fn height(&self) -> usize {
        self.labels.height()
    }

    #[inline]
    pub fn label_at(&self, x: usize, y: usize) -> u32 {
        *self.labels.get(x, y)
    }

    /// Writes the labels as a 16-bit grayscale PNG (8-bit when every label fits).
    pub fn save_png(&self, path: &Path) -> Result<(), image::ImageError> {
        let (w, h) = (self.width() as u32, self.height() as u32);
        if self.labels.as_slice().iter().all(|&v| v < 256) {
            let buf: Vec<u8> = self.labels.as_slice().iter().map(|&v| v as u8).collect();
            image::save_buffer(path, &buf, w, h, image::ExtendedColorType::L8)
        } else {
            let img = image::ImageBuffer::<image::Luma<u16>, Vec<u16>>::from_raw(
                w,
                h,
                self.labels.as_slice().iter().map(|&v| v as u16).collect(),
            )
            .expect("buffer length matches dimensions");
            img.save(path)
        }
    }
}

fn from_dynamic(img: DynamicImage, label_count: u32) -> Result<SemanticMask, SemanticsError> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data: Vec<u32> = match img {
        DynamicImage::ImageLuma8(buf) => buf.into_raw().into_iter().map(u32::from).collect(),
        DynamicImage::ImageLuma16(buf) => buf.into_raw().into_iter().map(u32::from).collect(),
        other => {
            return Err(SemanticsError::UnreadableImage(format!(
                "mask must be single-channel 8/16-bit, got {:?}",
                other.color()
            )))
        }
    };
    SemanticMask::new(
        Grid::from_vec(w, h, data).expect("decoder returns w×h samples"),
        label_count,
    )
}

/// Decodes a single-channel PNG mask from memory.
pub fn decode_mask(bytes: &[u8], label_count: u32) -> Result<SemanticMask, SemanticsError> {
    let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
        .map_err(|e| SemanticsError::UnreadableImage(e.to_string()))?;
    from_dynamic(img, label_count)
}

/// Loads a single-channel 8- or 16-bit PNG mask.
pub fn load_mask(path: &Path, label_count: u32) -> Result<SemanticMask, SemanticsError> {
    let bytes = std::fs::read(path)
        .map_err(|e| SemanticsError::UnreadableImage(format!("{}: {e}", path.display())))?;
    decode_mask(&bytes, label_count)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn png_bytes_l16(w: u32, h: u32, data: Vec<u16>) -> Vec<u8> {
        let img = image::ImageBuffer::<image::Luma<u16>, Vec<u16>>::from_raw(w, h, data).unwrap();
        let mut out = std::io::Cursor::new(Vec::new());
        img.write_to(&mut out, image::ImageFormat::Png).unwrap();
        out.into_inner()
    }

    #[test]
    fn all_zero_mask() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.png");
        let mask = SemanticMask::new(Grid::filled(5, 4, 0), 256).unwrap();
        mask.save_png(&path).unwrap();
        let back = load_mask(&path, 256).unwrap();
        assert_eq!(back.labels.dims(), (5, 4));
        assert!(back.labels.as_slice().iter().all(|&v| v == 0));
    }

    #[test]
    fn two_regions() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.png");
        let labels = Grid::from_fn(6, 3, |x, _| if x < 3 { 1 } else { 2 });
        SemanticMask::new(labels.clone(), 3)
            .unwrap()
            .save_png(&path)
            .unwrap();
        let back = load_mask(&path, 3).unwrap();
        assert_eq!(back.labels, labels);
    }

    #[test]
    fn sixteen_bit_out_of_range() {
        let mut data = vec![0u16; 12];
        data[7] = 300;
        let bytes = png_bytes_l16(4, 3, data);
        match decode_mask(&bytes, 256) {
            Err(SemanticsError::LabelOutOfRange { x, y, value, .. }) => {
                assert_eq!((x, y, value), (3, 1, 300));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(decode_mask(&bytes, 301).unwrap().label_at(3, 1), 300);
    }

    #[test]
    fn rgb_is_rejected() {
        let img = image::RgbImage::new(2, 2);
        let mut out = std::io::Cursor::new(Vec::new());
        img.write_to(&mut out, image::ImageFormat::Png).unwrap();
        assert!(matches!(
            decode_mask(&out.into_inner(), 256),
            Err(SemanticsError::UnreadableImage(_))
        ));
    }

    #[test]
    fn garbage_is_unreadable() {
        assert!(matches!(
            decode_mask(b"not a png", 4),
            Err(SemanticsError::UnreadableImage(_))
        ));
    }
}
