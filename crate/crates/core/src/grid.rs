//! Dense row-major 2D buffers shared by the image-processing stages.

use std::path::Path;

use image::DynamicImage;

/// A `width × height` row-major buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Clone> Grid<T> {
    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }
}

impl<T> Grid<T> {
    /// Wraps `data`; returns `None` when the length does not match.
    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Option<Self> {
        (data.len() == width * height).then_some(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> &T {
        &self.data[y * self.width + x]
    }

    #[inline]
    pub fn get_mut(&mut self, x: usize, y: usize) -> &mut T {
        &mut self.data[y * self.width + x]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Grid<U> {
        Grid {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(f).collect(),
        }
    }
}

impl<T: Copy> Grid<T> {
    /// Reads with coordinates clamped into the buffer (replicate border).
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> T {
        let cx = x.clamp(0, self.width as isize - 1) as usize;
        let cy = y.clamp(0, self.height as isize - 1) as usize;
        self.data[cy * self.width + cx]
    }
}

/// Grayscale image with intensities nominally in `[0, 1]`.
pub type GrayImage = Grid<f64>;

impl GrayImage {
    /// Converts any decoded image to luma in `[0, 1]`, keeping 16-bit precision when present.
    pub fn from_dynamic(img: &DynamicImage) -> Self {
        let luma = img.to_luma16();
        let (w, h) = luma.dimensions();
        let data = luma
            .into_raw()
            .into_iter()
            .map(|v| v as f64 / 65535.0)
            .collect();
        Grid {
            width: w as usize,
            height: h as usize,
            data,
        }
    }

    pub fn open(path: &Path) -> Result<Self, image::ImageError> {
        Ok(Self::from_dynamic(&image::open(path)?))
    }

    /// Quantizes to 8 bits (clamping to `[0, 1]`) and writes a PNG.
    pub fn save_png(&self, path: &Path) -> Result<(), image::ImageError> {
        let bytes: Vec<u8> = self
            .data
            .iter()
            .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect();
        image::save_buffer(
            path,
            &bytes,
            self.width as u32,
            self.height as u32,
            image::ExtendedColorType::L8,
        )
    }
}

/// Three-channel image, channels interleaved per pixel, values nominally in `[0, 1]`.
pub type RgbImage = Grid<[f64; 3]>;

impl RgbImage {
    /// Splits into one grayscale plane per channel.
    pub fn channels(&self) -> [GrayImage; 3] {
        [0, 1, 2].map(|c| self.map(|px| px[c]))
    }
}
